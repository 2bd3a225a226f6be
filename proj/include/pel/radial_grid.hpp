#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pel/errors.hpp"

namespace pel {

enum class Grading { uniform, geometric };

struct GridSpec {
  double r_max = 50.0;
  std::size_t n = 4096;
  Grading grading = Grading::geometric;
  double ratio = 1.002;  // geometric spacing ratio, in (1, 1.1]
};

/// Nodes 0 < r_1 < ... < r_N = r_max on the half-line. r = 0 itself is not a
/// node: every evolved field has a known boundary value there, so singular
/// coefficients 1/r, 1/r^2 stay finite at all samples. quad_weights carry the
/// measure r dr, including the [0, r_1] stub, which integrates the linear
/// extension of f through the first two nodes (exact for linear f).
class RadialGrid {
 public:
  static RadialGrid build(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& quad_weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }
  double r_max() const { return spec_.r_max; }
  double r_first() const { return nodes_.front(); }
  double min_spacing() const { return min_spacing_; }

  /// ∫_0^{r_max} f r dr by trapezoid cells plus the origin stub.
  double integral_rdr(std::span<const double> f) const;

  /// ∫_0^{r_max} f r^{1+p} dr, p >= 0; second order in mesh width.
  double weighted_integral(std::span<const double> f, int p) const;

  /// ⟨f, g⟩ = ∫ f g r dr.
  double inner(std::span<const double> f, std::span<const double> g) const;

  /// prefix[i] = ∫_0^{r_i} f R dR with the same cell rule as integral_rdr,
  /// so prefix.back() == integral_rdr(f).
  std::vector<double> prefix_integral_rdr(std::span<const double> f) const;

  /// Halved mesh with nested nodes: n -> 2n; geometric ratio -> sqrt(ratio).
  RadialGrid refined() const;

 private:
  RadialGrid() = default;
  GridSpec spec_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  double min_spacing_ = 0.0;
};

inline void require_shape(std::span<const double> f, const RadialGrid& grid) {
  if (f.size() != grid.size())
    fail(ErrorCode::shape, "field has " + std::to_string(f.size()) +
                               " samples but grid has " +
                               std::to_string(grid.size()) + " nodes");
}

}  // namespace pel

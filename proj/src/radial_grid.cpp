#include "pel/radial_grid.hpp"

#include <cmath>
#include <limits>

namespace pel {

namespace {

// Node locations of a geometric grid: spacings d_j = d_1 q^{j-1}, so
// r_j/r_max = (q^j - 1)/(q^n - 1). Evaluated in log space so large n·ln q
// cannot overflow; r_j = exp((j-n)L) * expm1(-jL)/expm1(-nL) * r_max.
double geometric_node(double r_max, double log_q, std::size_t j,
                      std::size_t n) {
  const double jn = static_cast<double>(j);
  const double nn = static_cast<double>(n);
  return r_max * std::exp((jn - nn) * log_q) * (-std::expm1(-jn * log_q)) /
         (-std::expm1(-nn * log_q));
}

}  // namespace

RadialGrid RadialGrid::build(const GridSpec& spec) {
  if (!(spec.r_max > 0.0))
    fail(ErrorCode::config, "grid r_max must be positive");
  if (spec.n < 16) fail(ErrorCode::config, "grid needs n >= 16 nodes");
  if (spec.grading == Grading::geometric &&
      !(spec.ratio > 1.0 && spec.ratio <= 1.1))
    fail(ErrorCode::config, "geometric grading ratio must lie in (1, 1.1]");

  RadialGrid g;
  g.spec_ = spec;
  g.nodes_.resize(spec.n);
  if (spec.grading == Grading::uniform) {
    const double dr = spec.r_max / static_cast<double>(spec.n);
    for (std::size_t j = 0; j < spec.n; ++j)
      g.nodes_[j] = dr * static_cast<double>(j + 1);
  } else {
    const double log_q = std::log(spec.ratio);
    for (std::size_t j = 0; j < spec.n; ++j)
      g.nodes_[j] = geometric_node(spec.r_max, log_q, j + 1, spec.n);
  }
  g.nodes_.back() = spec.r_max;

  if (!(g.nodes_.front() > std::numeric_limits<double>::min()))
    fail(ErrorCode::config,
         "grading too aggressive: first node underflows to zero");
  for (std::size_t j = 1; j < spec.n; ++j)
    if (!(g.nodes_[j] > g.nodes_[j - 1]))
      fail(ErrorCode::config, "grid nodes are not strictly increasing");

  // Weights for the measure r dr: each cell integrates the linear
  // interpolant of f exactly, so cell [a, b] contributes (b-a)(2a+b)/6 to
  // w_a and (b-a)(a+2b)/6 to w_b. This stays exact for constants and for
  // f = r, which matters near the origin where cell widths are comparable
  // to r itself. The [0, r_1] stub takes the same rule with f extended
  // linearly through nodes 1 and 2 to r = 0:
  //   ∫_0^{r_1} f r dr = r_1^2 (f(0)/6 + f_1/3),  f(0) = f_1 - r_1 (f_2-f_1)/d_1.
  const auto& r = g.nodes_;
  auto& w = g.weights_;
  w.assign(spec.n, 0.0);
  double min_dr = r[0];
  for (std::size_t j = 0; j + 1 < spec.n; ++j) {
    const double dr = r[j + 1] - r[j];
    min_dr = std::min(min_dr, dr);
    w[j] += dr * (2.0 * r[j] + r[j + 1]) / 6.0;
    w[j + 1] += dr * (r[j] + 2.0 * r[j + 1]) / 6.0;
  }
  const double r1 = r[0];
  const double stub_slope = r1 * r1 * r1 / (6.0 * (r[1] - r[0]));
  w[0] += 0.5 * r1 * r1 + stub_slope;
  w[1] -= stub_slope;
  g.min_spacing_ = min_dr;
  return g;
}

double RadialGrid::integral_rdr(std::span<const double> f) const {
  require_shape(f, *this);
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) acc += weights_[j] * f[j];
  return acc;
}

double RadialGrid::weighted_integral(std::span<const double> f, int p) const {
  require_shape(f, *this);
  if (p < 0) fail(ErrorCode::invalid_argument, "weight power p must be >= 0");
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    double rp = 1.0;
    for (int m = 0; m < p; ++m) rp *= nodes_[j];
    acc += weights_[j] * rp * f[j];
  }
  return acc;
}

double RadialGrid::inner(std::span<const double> f,
                         std::span<const double> g) const {
  require_shape(f, *this);
  require_shape(g, *this);
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) acc += weights_[j] * f[j] * g[j];
  return acc;
}

std::vector<double> RadialGrid::prefix_integral_rdr(
    std::span<const double> f) const {
  require_shape(f, *this);
  const auto& r = nodes_;
  std::vector<double> prefix(f.size());
  const double r1 = r[0];
  const double f0 = f[0] - r1 * (f[1] - f[0]) / (r[1] - r[0]);
  prefix[0] = r1 * r1 * (f0 / 6.0 + f[0] / 3.0);
  for (std::size_t j = 0; j + 1 < f.size(); ++j) {
    const double dr = r[j + 1] - r[j];
    prefix[j + 1] = prefix[j] + dr * ((2.0 * r[j] + r[j + 1]) * f[j] +
                                      (r[j] + 2.0 * r[j + 1]) * f[j + 1]) / 6.0;
  }
  return prefix;
}

RadialGrid RadialGrid::refined() const {
  GridSpec s = spec_;
  s.n *= 2;
  if (s.grading == Grading::geometric) s.ratio = std::sqrt(s.ratio);
  return build(s);
}

}  // namespace pel

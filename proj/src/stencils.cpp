#include "pel/stencils.hpp"

namespace pel {

namespace {

// Weights of the Lagrange polynomial through (x0,f0), (x1,f1), (x2,f2)
// differentiated once resp. twice at xe.
double lag_d1(double x0, double x1, double x2, double xe, double f0, double f1,
              double f2) {
  return f0 * (2 * xe - x1 - x2) / ((x0 - x1) * (x0 - x2)) +
         f1 * (2 * xe - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
         f2 * (2 * xe - x0 - x1) / ((x2 - x0) * (x2 - x1));
}

double lag_d2(double x0, double x1, double x2, double f0, double f1,
              double f2) {
  return 2 * f0 / ((x0 - x1) * (x0 - x2)) + 2 * f1 / ((x1 - x0) * (x1 - x2)) +
         2 * f2 / ((x2 - x0) * (x2 - x1));
}

}  // namespace

std::vector<double> sampled_d1(std::span<const double> f, const RadialGrid& g) {
  require_shape(f, g);
  const auto& r = g.nodes();
  const std::size_t n = f.size();
  std::vector<double> out(n);
  out[0] = lag_d1(0.0, r[0], r[1], r[0], 0.0, f[0], f[1]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = lag_d1(r[i - 1], r[i], r[i + 1], r[i], f[i - 1], f[i], f[i + 1]);
  out[n - 1] =
      lag_d1(r[n - 3], r[n - 2], r[n - 1], r[n - 1], f[n - 3], f[n - 2],
             f[n - 1]);
  return out;
}

std::vector<double> sampled_d2(std::span<const double> f, const RadialGrid& g) {
  require_shape(f, g);
  const auto& r = g.nodes();
  const std::size_t n = f.size();
  std::vector<double> out(n);
  out[0] = lag_d2(0.0, r[0], r[1], 0.0, f[0], f[1]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = lag_d2(r[i - 1], r[i], r[i + 1], f[i - 1], f[i], f[i + 1]);
  out[n - 1] = lag_d2(r[n - 3], r[n - 2], r[n - 1], f[n - 3], f[n - 2],
                      f[n - 1]);
  return out;
}

}  // namespace pel

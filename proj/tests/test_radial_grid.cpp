#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pel/radial_grid.hpp"

using pel::ErrorCode;
using pel::Grading;
using pel::GridSpec;
using pel::RadialGrid;

namespace {

std::vector<double> sample(const RadialGrid& g, double (*f)(double)) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.nodes()[i]);
  return out;
}

}  // namespace

TEST_CASE("uniform nodes are evenly spaced and end at r_max") {
  auto g = RadialGrid::build({.r_max = 1.0, .n = 16, .grading = Grading::uniform});
  REQUIRE(g.size() == 16);
  for (std::size_t j = 0; j < 16; ++j)
    CHECK(g.nodes()[j] == doctest::Approx((j + 1) / 16.0).epsilon(1e-14));
  CHECK(g.nodes().back() == 1.0);
  CHECK(g.r_first() > 0.0);
}

TEST_CASE("geometric first node matches the closed form and clusters at zero") {
  GridSpec s{.r_max = 50.0, .n = 4096, .grading = Grading::geometric, .ratio = 1.002};
  auto g = RadialGrid::build(s);
  const double r1_expected =
      s.r_max * (s.ratio - 1.0) / (std::pow(s.ratio, double(s.n)) - 1.0);
  CHECK(g.r_first() == doctest::Approx(r1_expected).epsilon(1e-10));
  CHECK(g.r_first() < 1e-3);
  CHECK(g.nodes().back() == 50.0);
}

TEST_CASE("quadrature of f == 1 is exactly r_max^2 / 2") {
  for (GridSpec s : {GridSpec{.r_max = 50.0, .n = 4096, .grading = Grading::geometric, .ratio = 1.002},
                     GridSpec{.r_max = 7.5, .n = 333, .grading = Grading::uniform},
                     GridSpec{.r_max = 1.0, .n = 16, .grading = Grading::uniform}}) {
    auto g = RadialGrid::build(s);
    std::vector<double> ones(g.size(), 1.0);
    const double exact = 0.5 * s.r_max * s.r_max;
    CHECK(g.integral_rdr(ones) == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("weighted integral of f = r with p = 0 gives 1/3") {
  auto g = RadialGrid::build({.r_max = 1.0, .n = 4096, .grading = Grading::uniform});
  auto f = sample(g, +[](double r) { return r; });
  CHECK(g.weighted_integral(f, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
}

TEST_CASE("scaling-generator norm on the refined oracle grid hits the closed form") {
  // ∫ J^2 r dr with J = 2k r^k/(1+r^{2k}) equals 2π/sin(π/k); the u = r^{2k}
  // substitution reduces it to a Beta integral.
  auto g = RadialGrid::build({.r_max = 2e4, .n = 262144, .grading = Grading::geometric, .ratio = 1.00011});
  for (int k : {4, 5, 6}) {
    std::vector<double> j2(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double rho = std::pow(g.nodes()[i], k);
      const double J = 2.0 * k * rho / (1.0 + rho * rho);
      j2[i] = J * J;
    }
    const double exact = 2.0 * M_PI / std::sin(M_PI / k);
    CHECK(g.integral_rdr(j2) == doctest::Approx(exact).epsilon(1e-8));
  }
}

TEST_CASE("quadrature converges at second order toward a closed-form integral") {
  // ∫_0^R e^{-r} r dr = 1 - (1+R) e^{-R}. The decaying exponential has
  // non-vanishing boundary derivative terms, so the trapezoid error cannot
  // telescope away and the measured order is a real second-order signal.
  const double R = 10.0;
  const double exact = 1.0 - (1.0 + R) * std::exp(-R);

  for (Grading grading : {Grading::uniform, Grading::geometric}) {
    GridSpec s{.r_max = R, .n = 128, .grading = grading, .ratio = 1.02};
    auto g0 = RadialGrid::build(s);
    auto g1 = g0.refined();
    auto g2 = g1.refined();

    double err[3];
    const RadialGrid* gs[3] = {&g0, &g1, &g2};
    for (int l = 0; l < 3; ++l) {
      std::vector<double> fv(gs[l]->size());
      for (std::size_t i = 0; i < gs[l]->size(); ++i)
        fv[i] = std::exp(-gs[l]->nodes()[i]);
      err[l] = std::abs(gs[l]->integral_rdr(fv) - exact);
    }
    const double order1 = std::log2(err[0] / err[1]);
    const double order2 = std::log2(err[1] / err[2]);
    CHECK(order1 > 1.8);
    CHECK(order1 < 2.2);
    CHECK(order2 > 1.8);
    CHECK(order2 < 2.2);
  }
}

TEST_CASE("weighted_integral is linear in f") {
  auto g = RadialGrid::build({.r_max = 5.0, .n = 200, .grading = Grading::geometric, .ratio = 1.01});
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> f(g.size()), h(g.size());
  for (auto& x : f) x = dist(rng);
  for (auto& x : h) x = dist(rng);
  for (int p : {0, 1, 3}) {
    const double a = dist(rng), b = dist(rng);
    std::vector<double> combo(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) combo[i] = a * f[i] + b * h[i];
    const double lhs = g.weighted_integral(combo, p);
    const double rhs = a * g.weighted_integral(f, p) + b * g.weighted_integral(h, p);
    const double scale = std::abs(lhs) + std::abs(rhs) + 1.0;
    CHECK(std::abs(lhs - rhs) <= 1e-12 * scale);
  }
}

TEST_CASE("zero samples integrate to zero") {
  auto g = RadialGrid::build({.r_max = 3.0, .n = 64, .grading = Grading::uniform});
  std::vector<double> z(g.size(), 0.0);
  for (int p : {0, 1, 2}) CHECK(g.weighted_integral(z, p) == 0.0);
}

TEST_CASE("prefix integral matches r^2/2 for constants and totals the full integral") {
  auto g = RadialGrid::build({.r_max = 8.0, .n = 777, .grading = Grading::geometric, .ratio = 1.005});
  std::vector<double> ones(g.size(), 1.0);
  auto prefix = g.prefix_integral_rdr(ones);
  for (std::size_t i = 0; i < g.size(); i += 97) {
    const double r = g.nodes()[i];
    CHECK(prefix[i] == doctest::Approx(0.5 * r * r).epsilon(1e-13));
  }
  auto f = sample(g, +[](double r) { return std::sin(r) + 0.3 * r; });
  auto pf = g.prefix_integral_rdr(f);
  CHECK(pf.back() == doctest::Approx(g.integral_rdr(f)).epsilon(1e-13));
}

TEST_CASE("refined grids nest the parent nodes") {
  auto g = RadialGrid::build({.r_max = 10.0, .n = 64, .grading = Grading::geometric, .ratio = 1.01});
  auto f = g.refined();
  REQUIRE(f.size() == 2 * g.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    CHECK(f.nodes()[2 * j + 1] == doctest::Approx(g.nodes()[j]).epsilon(1e-12));
}

TEST_CASE("invalid specs and shapes are rejected") {
  CHECK_THROWS_AS(RadialGrid::build({.r_max = -1.0, .n = 64}), pel::Error);
  CHECK_THROWS_AS(RadialGrid::build({.r_max = 1.0, .n = 8}), pel::Error);
  CHECK_THROWS_AS(RadialGrid::build({.r_max = 1.0, .n = 64, .grading = Grading::geometric, .ratio = 1.2}),
                  pel::Error);
  CHECK_THROWS_AS(RadialGrid::build({.r_max = 1.0, .n = 64, .grading = Grading::geometric, .ratio = 0.9}),
                  pel::Error);

  auto g = RadialGrid::build({.r_max = 1.0, .n = 64, .grading = Grading::uniform});
  std::vector<double> wrong(63, 1.0);
  try {
    g.integral_rdr(wrong);
    FAIL("shape mismatch not detected");
  } catch (const pel::Error& e) {
    CHECK(e.code() == ErrorCode::shape);
  }
  std::vector<double> ok(64, 1.0);
  try {
    g.weighted_integral(ok, -1);
    FAIL("negative power not detected");
  } catch (const pel::Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
}

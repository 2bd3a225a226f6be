#include "pel/initial_data.hpp"

#include <cmath>
#include <random>

#include "pel/errors.hpp"
#include "pel/stencils.hpp"

namespace pel {

namespace {

constexpr double kPi = 3.14159265358979323846;

// A bump is a sum of terms c * rho^m * (1 + rho^2)^{-q} in rho =
// lambda0 * r; the family stays closed under d/d(rho), which gives exact
// derivatives for the smallness functional.
struct Term {
  double c;
  double m;
  double q;
};

std::vector<Term> d_rho(const std::vector<Term>& ts) {
  std::vector<Term> out;
  out.reserve(2 * ts.size());
  for (const Term& t : ts) {
    if (t.m != 0.0) out.push_back({t.c * t.m, t.m - 1.0, t.q});
    out.push_back({-2.0 * t.q * t.c, t.m + 1.0, t.q + 1.0});
  }
  return out;
}

double eval_terms(const std::vector<Term>& ts, double rho) {
  double s = 0.0;
  for (const Term& t : ts)
    s += t.c * std::pow(rho, t.m) * std::pow(1.0 + rho * rho, -t.q);
  return s;
}

// Piecewise description of one bump: either a term list (rational
// families) or the generator J(lambda0 r) scaled by an amplitude.
struct Bump {
  bool is_generator = false;
  double generator_amp = 0.0;
  std::vector<Term> f, df, d2f;  // in rho; d/dr = lambda0 d/d(rho)
};

Bump make_bump(BumpFamily family, double amplitude, int prefactor_power,
               double base_q, std::uint32_t seed) {
  Bump b;
  switch (family) {
    case BumpFamily::zero:
      break;
    case BumpFamily::rational:
      b.f = {{amplitude, double(prefactor_power), base_q}};
      break;
    case BumpFamily::scaled_generator:
      b.is_generator = true;
      b.generator_amp = amplitude;
      break;
    case BumpFamily::random_rational: {
      std::mt19937 rng(seed);
      std::uniform_real_distribution<double> coin(-1.0, 1.0);
      for (int j = 1; j <= 3; ++j)
        b.f.push_back(
            {amplitude * coin(rng), double(prefactor_power), base_q + 0.5 * j});
      break;
    }
  }
  if (!b.f.empty()) {
    b.df = d_rho(b.f);
    b.d2f = d_rho(b.df);
  }
  return b;
}

// Samples of the bump and its first two radial derivatives.
void sample_bump(const Bump& b, const ProfileParams& p, const RadialGrid& g,
                 std::vector<double>& f, std::vector<double>& df,
                 std::vector<double>& d2f) {
  const std::size_t n = g.size();
  f.assign(n, 0.0);
  df.assign(n, 0.0);
  d2f.assign(n, 0.0);
  if (b.is_generator) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = g.nodes()[i];
      const double rdJ = eval_rdJ(p, r);
      f[i] = b.generator_amp * eval_J(p, r);
      df[i] = b.generator_amp * rdJ / r;
      d2f[i] = b.generator_amp * (eval_rdrdJ(p, r) - rdJ) / (r * r);
    }
    return;
  }
  if (b.f.empty()) return;
  const double l0 = p.lambda;
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = l0 * g.nodes()[i];
    f[i] = eval_terms(b.f, rho);
    df[i] = l0 * eval_terms(b.df, rho);
    d2f[i] = l0 * l0 * eval_terms(b.d2f, rho);
  }
}

double closed_form_c0(int k) { return 2.0 * kPi / std::sin(kPi / k); }

double smallness_functional(std::span<const double> u0,
                            std::span<const double> du0,
                            std::span<const double> d2u0,
                            std::span<const double> g0,
                            std::span<const double> dg0, const RadialGrid& g) {
  const std::size_t n = g.size();
  std::vector<double> integrand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.nodes()[i];
    const double r2 = r * r;
    const double lvl0 = (1.0 + r2) * (du0[i] * du0[i] + u0[i] * u0[i] / r2 +
                                      g0[i] * g0[i] + g0[i] * g0[i] / r2);
    const double lvl1 = d2u0[i] * d2u0[i] + du0[i] * du0[i] / r2 +
                        dg0[i] * dg0[i] + g0[i] * g0[i] / r2;
    integrand[i] = lvl0 + lvl1;
  }
  return g.integral_rdr(integrand);
}

}  // namespace

void validate(const InitialDataSpec& spec) {
  if (!(spec.epsilon > 0.0))
    fail(ErrorCode::invalid_argument, "epsilon must be positive");
  if (!(spec.c_small * spec.c_small >= spec.epsilon))
    fail(ErrorCode::invalid_argument,
         "smallness constant must satisfy c_small^2 >= epsilon");
  if (spec.k < 4)
    fail(ErrorCode::invalid_argument,
         "focusing data requires equivariance index k >= 4");
}

InitialBuild build_initial(const InitialDataSpec& spec,
                           std::shared_ptr<const RadialGrid> grid) {
  validate(spec);
  if (!grid) fail(ErrorCode::invalid_argument, "null grid");
  const RadialGrid& g = *grid;
  const std::size_t n = g.size();

  const double eps = spec.epsilon;
  const double lambda0 = std::pow(eps, -4.0);
  const double c0 = closed_form_c0(spec.k);
  const double lambda_dot0 = (c0 / kPi) * std::pow(eps, -7.0);
  const double lambda1 = lambda_dot0 / lambda0;

  std::size_t core_nodes = 0;
  for (double r : g.nodes())
    if (r < 1.0 / lambda0) ++core_nodes;
  if (core_nodes < 16)
    fail(ErrorCode::resolution,
         "grid has " + std::to_string(core_nodes) + " nodes inside r < " +
             std::to_string(1.0 / lambda0) +
             "; the concentration scale needs at least 16");

  const ProfileParams p{spec.k, lambda0};
  InitialBuild out;
  out.seed = {lambda0, lambda_dot0};

  // Raw bumps with analytic derivatives.
  const Bump bu = make_bump(spec.u0_family, spec.u0_amplitude, 3,
                            0.5 * (spec.k + 2), spec.seed);
  const Bump bg = make_bump(spec.g0_family, spec.g0_amplitude, 2,
                            0.5 * (spec.k + 3), spec.seed + 1);
  std::vector<double> d2g0;  // unused beyond sampling symmetry
  sample_bump(bu, p, g, out.u0, out.du0, out.d2u0);
  sample_bump(bg, p, g, out.g0, out.dg0, d2g0);

  // Orthogonal projection <u0, J(lambda0 .)> = 0 in the discrete r dr
  // product; the generator direction is removed with its analytic
  // derivatives so the smallness functional stays differencing-free.
  const std::vector<double> J = sample_J(p, g);
  const double jj = g.inner(J, J);
  const double coeff = g.inner(out.u0, J) / jj;
  out.projection_coeff = coeff;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.nodes()[i];
    const double rdJ = eval_rdJ(p, r);
    out.u0[i] -= coeff * J[i];
    out.du0[i] -= coeff * rdJ / r;
    out.d2u0[i] -= coeff * (eval_rdrdJ(p, r) - rdJ) / (r * r);
  }

  out.smallness = smallness_functional(out.u0, out.du0, out.d2u0, out.g0,
                                       out.dg0, g);
  out.smallness_bound = spec.c_small * spec.c_small * eps * eps;
  out.smallness_ok = out.smallness <= out.smallness_bound;

  FieldState s;
  s.t = 0.0;
  s.k = spec.k;
  s.grid = grid;
  s.phi.resize(n);
  s.phi_t.resize(n);
  s.v.assign(n, 0.0);
  s.h.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.nodes()[i];
    s.phi[i] = out.u0[i] + eval_I(p, r);
    s.phi_t[i] = lambda1 * eval_J(p, r) + out.g0[i];
  }
  // The outer node is the Dirichlet pin phi(r_max) = I(lambda0 r_max);
  // the bump tails there are far below quadrature precision.
  s.phi.back() = eval_I(p, g.r_max());
  s.phi_t.back() = 0.0;
  out.u0.back() = 0.0;

  std::vector<double> e0_integrand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.nodes()[i];
    e0_integrand[i] = s.phi_t[i] * s.phi_t[i] + out.du0[i] * out.du0[i] +
                      double(spec.k) * spec.k * out.u0[i] * out.u0[i] / (r * r);
  }
  out.e0_over_eps2 = g.integral_rdr(e0_integrand) / (eps * eps);

  out.state = std::move(s);
  return out;
}

double smallness_report(const FieldState& state, const InitialDataSpec& spec,
                        const RadialGrid& g) {
  validate(spec);
  validate_state(state);
  const std::size_t n = g.size();
  const double lambda0 = std::pow(spec.epsilon, -4.0);
  const double c0 = closed_form_c0(spec.k);
  const double lambda1 = (c0 / kPi) * std::pow(spec.epsilon, -7.0) / lambda0;
  const ProfileParams p{spec.k, lambda0};

  std::vector<double> u0(n), g0(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.nodes()[i];
    u0[i] = state.phi[i] - eval_I(p, r);
    g0[i] = state.phi_t[i] - lambda1 * eval_J(p, r);
  }
  const std::vector<double> du0 = sampled_d1(u0, g);
  const std::vector<double> d2u0 = sampled_d2(u0, g);
  const std::vector<double> dg0 = sampled_d1(g0, g);
  return smallness_functional(u0, du0, d2u0, g0, dg0, g);
}

}  // namespace pel

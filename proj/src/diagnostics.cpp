#include "pel/diagnostics.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pel/errors.hpp"
#include "pel/modulation.hpp"
#include "pel/stencils.hpp"

namespace pel {

namespace {

constexpr double kPi = std::numbers::pi;

void require_h(const FieldState& s, const RadialGrid& g,
               const char* caller) {
  if (s.h.size() != g.size())
    fail(ErrorCode::not_ready,
         std::string(caller) +
             ": state carries no averaged-velocity field h");
}

void require_delta(double delta) {
  if (!(delta > 0.0) || !(delta < 1.0))
    fail(ErrorCode::config, "weight exponent delta = " +
                                std::to_string(delta) +
                                " must lie in (0, 1)");
}

// psi = A_lambda (u - w0) for one snapshot.
std::vector<double> null_field(const FieldState& s, double lambda,
                               double lambda_dot,
                               const ProfileConstants& consts,
                               const RadialGrid& g) {
  const ProfileParams p{s.k, lambda};
  const std::vector<double> big_i = sample_I(p, g);
  const std::vector<double> w0 = eval_w0(p, lambda_dot, consts, g);
  std::vector<double> w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    w[i] = s.phi[i] - big_i[i] - w0[i];
  return apply_A(p, w, g);
}

// Bare half-energy (1/2) int (v^2 + phi_t^2 + phi_r^2 + k^2 sin^2 phi / r^2) r dr.
double half_energy(const FieldState& s, const RadialGrid& g) {
  const auto& r = g.nodes();
  const auto& w = g.quad_weights();
  const std::vector<double> dphi = sampled_d1(s.phi, g);
  const double k2 = static_cast<double>(s.k) * s.k;
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double sp = std::sin(s.phi[i]);
    acc += w[i] * (s.v[i] * s.v[i] + s.phi_t[i] * s.phi_t[i] +
                   dphi[i] * dphi[i] + k2 * sp * sp / (r[i] * r[i]));
  }
  return 0.5 * acc;
}

}  // namespace

HEnergyReport h_energy_report(const FieldState& state, const RadialGrid& g,
                              double delta) {
  require_delta(delta);
  require_h(state, g, "h_energy_report");
  const auto& r = g.nodes();
  const auto& w = g.quad_weights();
  const std::vector<double> ht = h_time_derivative(state, g);
  const std::vector<double> hr = sampled_d1(state.h, g);
  const std::vector<double> htr = sampled_d1(ht, g);
  HEnergyReport rep;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r2 = r[i] * r[i];
    rep.quadratic += w[i] * (ht[i] * ht[i] + hr[i] * hr[i] +
                             state.h[i] * state.h[i] / r2);
    rep.dissipation +=
        w[i] * (htr[i] * htr[i] + ht[i] * ht[i] / r2 + ht[i] * ht[i]);
    // quad weights carry r dr; lift to r^{2+delta} dr.
    rep.weighted_rate += w[i] * std::pow(r[i], 1.0 + delta) * htr[i] * htr[i];
  }
  return rep;
}

EnergyReport energy_report(const FieldState& state, double lambda,
                           double lambda_dot, const ProfileConstants& consts,
                           double delta, const RadialGrid& g,
                           const EnergyWindow* window, double cone_slope) {
  require_delta(delta);
  require_h(state, g, "energy_report");
  validate_state(state);
  if (!(lambda > 0.0))
    fail(ErrorCode::invalid_argument, "energy_report: lambda must be > 0");

  const auto& r = g.nodes();
  const auto& w = g.quad_weights();
  const std::size_t n = g.size();
  const double k = static_cast<double>(state.k);
  const double k2 = k * k;

  EnergyReport rep;
  rep.t = state.t;

  const std::vector<double> dphi = sampled_d1(state.phi, g);
  const std::vector<double> big_i = sample_I({state.k, lambda}, g);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = state.phi[i] - big_i[i];
  const std::vector<double> du = sampled_d1(u, g);

  double bogom = 0.0, raw = 0.0, e0 = 0.0, weighted = 0.0, exterior = 0.0;
  const std::vector<double> ht = h_time_derivative(state, g);
  const double cutoff = cone_slope * state.t;
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = r[i];
    const double sp = std::sin(state.phi[i]);
    const double defect = dphi[i] - k * sp / ri;
    const double sq_t = state.phi_t[i] * state.phi_t[i];
    const double sq_v = state.v[i] * state.v[i];
    bogom += w[i] * (sq_t + defect * defect + sq_v);
    raw += w[i] * (sq_t + dphi[i] * dphi[i] + k2 * sp * sp / (ri * ri) + sq_v);
    const double e0_cell =
        sq_t + du[i] * du[i] + k2 * u[i] * u[i] / (ri * ri) + sq_v;
    e0 += w[i] * e0_cell;
    weighted += w[i] * std::pow(ri, 1.0 + delta) *
                (ht[i] * ht[i] + sq_t + dphi[i] * dphi[i]);
    if (ri >= cutoff) exterior += w[i] * ri * ri * e0_cell;
  }

  rep.bogomolnyi_integrand_norm = bogom;
  const double phi_edge = state.phi.back();
  rep.E = kPi * bogom + 2.0 * k * kPi * (1.0 - std::cos(phi_edge));
  rep.E_excess = rep.E - 4.0 * k * kPi;
  rep.completion_gap = std::abs(kPi * raw - rep.E);
  rep.out_of_sector = std::abs(phi_edge - kPi) > 1e-3;
  rep.E0 = e0;
  rep.weighted = weighted;
  rep.exterior = exterior;
  rep.h_energy = h_energy_report(state, g, delta);

  // Null-derivative snapshot energy of psi = A_lambda (u - w0).
  const std::vector<double> psi =
      null_field(state, lambda, lambda_dot, consts, g);
  std::vector<double> lpsi = sampled_d1(psi, g);
  if (window != nullptr && (window->prev != nullptr || window->next != nullptr)) {
    const FieldState* a = window->prev;
    const FieldState* b = window->next;
    const std::vector<double> psi_a =
        a ? null_field(*a, window->lambda_prev, window->lambda_dot_prev,
                       consts, g)
          : psi;
    const std::vector<double> psi_b =
        b ? null_field(*b, window->lambda_next, window->lambda_dot_next,
                       consts, g)
          : psi;
    const double ta = a ? a->t : state.t;
    const double tb = b ? b->t : state.t;
    if (!(tb > ta))
      fail(ErrorCode::invalid_argument,
           "energy_report: window times must straddle the state");
    const double inv_dt = 1.0 / (tb - ta);
    for (std::size_t i = 0; i < n; ++i)
      lpsi[i] += (psi_b[i] - psi_a[i]) * inv_dt;
  }
  double ed = 0.0;
  const double lam_pow = std::pow(lambda, delta - 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double rd = std::pow(r[i], delta);
    ed += w[i] * lam_pow * rd / (1.0 + rd) *
          (lpsi[i] * lpsi[i] + psi[i] * psi[i] / (r[i] * r[i]));
  }
  rep.e_delta = ed;
  return rep;
}

DissipationCheck dissipation_check(const FieldState& s0, const FieldState& s1,
                                   const FieldState& s2, double c0_param,
                                   const RadialGrid& g) {
  const double c0sq = c0_param * c0_param;
  if (!(c0sq > 1.0) || !(c0sq < 2.0))
    fail(ErrorCode::config, "dissipation check: c0^2 = " +
                                std::to_string(c0sq) +
                                " must lie in (1, 2)");
  const double d10 = s1.t - s0.t;
  const double d21 = s2.t - s1.t;
  if (!(d10 > 0.0) || !(d21 > 0.0) ||
      std::abs(d21 - d10) > 1e-9 * std::max(d10, d21))
    fail(ErrorCode::not_ready,
         "dissipation check: snapshots are not uniformly spaced in time");

  DissipationCheck chk;
  chk.lhs = (half_energy(s2, g) - half_energy(s0, g)) / (s2.t - s0.t);

  const auto& w = g.quad_weights();
  const std::vector<double> vr = sampled_d1(s1.v, g);
  double rhs = 0.0, rhs_plain = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double pt = s1.phi_t[i];
    const double cross = c0_param * pt + vr[i] / c0_param;
    rhs -= w[i] * ((2.0 - c0sq) * pt * pt +
                   (1.0 - 1.0 / c0sq) * vr[i] * vr[i] + cross * cross);
    rhs_plain -= w[i] * (2.0 * pt * pt + vr[i] * vr[i] + 2.0 * pt * vr[i]);
  }
  chk.rhs = rhs;
  chk.rhs_plain = rhs_plain;
  chk.residual = std::abs(chk.lhs - chk.rhs);
  chk.residual_plain = std::abs(chk.lhs - chk.rhs_plain);
  return chk;
}

double dissipation_residual(const FieldState& s0, const FieldState& s1,
                            const FieldState& s2, double c0_param,
                            const RadialGrid& g) {
  return dissipation_check(s0, s1, s2, c0_param, g).residual;
}

void RunningTimeIntegral::push(double t, double rate) {
  if (have_prev_) {
    if (!(t > t_prev_))
      fail(ErrorCode::invalid_argument,
           "running integral: time samples must increase");
    total_ += 0.5 * (t - t_prev_) * (rate + rate_prev_);
  }
  t_prev_ = t;
  rate_prev_ = rate;
  have_prev_ = true;
}

}  // namespace pel

#pragma once

#include <cmath>
#include <limits>

#include "pel/evolution.hpp"
#include "pel/profiles.hpp"
#include "pel/radial_grid.hpp"

namespace pel {

// Instantaneous energies of the averaged-velocity variable h:
//   quadratic     = int (h_t^2 + h_r^2 + h^2/r^2) r dr,
//   dissipation   = int (h_tr^2 + h_t^2/r^2 + h_t^2) r dr,
//   weighted_rate = int h_tr^2 r^{2+delta} dr,
// with h_t derived from the evolved equation h_t = Lh - h/r^2 + phi_t.
// The third quantity is the integrand of a running time integral; see
// RunningTimeIntegral below.
struct HEnergyReport {
  double quadratic = 0.0;
  double dissipation = 0.0;
  double weighted_rate = 0.0;
};

// Neighbouring snapshots used for centered time derivatives. Either
// pointer may be null (one-sided fallback); with both null the time
// derivative contribution is dropped (stationary snapshot).
struct EnergyWindow {
  const FieldState* prev = nullptr;
  const FieldState* next = nullptr;
  double lambda_prev = 0.0;
  double lambda_next = 0.0;
  double lambda_dot_prev = 0.0;
  double lambda_dot_next = 0.0;
};

struct EnergyReport {
  double t = 0.0;
  // Total energy, pi-weighted:
  //   E = pi int [phi_t^2 + phi_r^2 + (k^2/r^2) sin^2 phi + v^2] r dr,
  // evaluated in completed (Bogomolnyi) form
  //   E = pi * bogomolnyi_integrand_norm + 2 k pi (1 - cos phi(r_max))
  // so that the excess identity is algebraic rather than a quadrature
  // coincidence.
  double E = 0.0;
  double E_excess = 0.0;  // E - 4 k pi
  // int [phi_t^2 + (phi_r - (k/r) sin phi)^2 + v^2] r dr
  double bogomolnyi_integrand_norm = 0.0;
  // |raw quadrature E - completed-form E|: the discrete cost of the
  // integration by parts hidden in the completion.
  double completion_gap = 0.0;
  // Boundary trace left the target sector: |phi(r_max) - pi| > 1e-3.
  // The excess identity is only meaningful in-sector.
  bool out_of_sector = false;
  // int [phi_t^2 + u_r^2 + (k^2/r^2) u^2 + v^2] r dr with u = phi - I_lambda.
  double E0 = 0.0;
  HEnergyReport h_energy;
  // int [h_t^2 + phi_t^2 + phi_r^2] r^{2+delta} dr
  double weighted = 0.0;
  // int_{r >= slope t} r^2 [phi_t^2 + u_r^2 + (k^2/r^2) u^2 + v^2] r dr,
  // sharp cutoff on quadrature cells.
  double exterior = 0.0;
  // Snapshot null-derivative energy of psi = A_lambda w, w = u - w0:
  //   int lambda^{delta-1} r^delta / (1 + r^delta) [(L psi)^2 + psi^2/r^2] r dr
  // with L = d_r + d_t; the time derivative of psi comes from the window
  // (centered when both neighbours are present). Non-negative by
  // construction.
  double e_delta = 0.0;
  // Filled by the windowed dissipation check (NaN from energy_report).
  double dissipation_residual = std::numeric_limits<double>::quiet_NaN();
};

// All snapshot functionals of one state. delta must lie in (0, 1)
// (ErrorCode::config otherwise); cone_slope is the exterior cutoff
// r >= cone_slope * t. States without the averaged-velocity field h
// raise ErrorCode::not_ready.
EnergyReport energy_report(const FieldState& state, double lambda,
                           double lambda_dot, const ProfileConstants& consts,
                           double delta, const RadialGrid& g,
                           const EnergyWindow* window = nullptr,
                           double cone_slope = 2.0);

// Discrete check of the damped energy balance
//   d/dt (1/2) int (v^2 + phi_t^2 + phi_r^2 + k^2 sin^2 phi / r^2) r dr
//     = -int [(2 - c0^2) phi_t^2 + (1 - 1/c0^2) v_r^2
//             + (c0 phi_t + v_r / c0)^2] r dr,
// with the left side centered across three consecutive snapshots and the
// right side evaluated at the middle one. rhs_plain is the pre-completion
// form -int (2 phi_t^2 + v_r^2 + 2 phi_t v_r) r dr; the two agree
// algebraically, and both are non-positive whenever 1 < c0^2 < 2.
struct DissipationCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double rhs_plain = 0.0;
  double residual = 0.0;        // |lhs - rhs|
  double residual_plain = 0.0;  // |lhs - rhs_plain|
};

// Requires t1 - t0 == t2 - t1 up to 1e-9 relative (ErrorCode::not_ready
// otherwise) and 1 < c0^2 < 2 (ErrorCode::config otherwise).
DissipationCheck dissipation_check(const FieldState& s0, const FieldState& s1,
                                   const FieldState& s2, double c0_param,
                                   const RadialGrid& g);

// The c0-form residual |lhs - rhs| alone.
double dissipation_residual(const FieldState& s0, const FieldState& s1,
                            const FieldState& s2, double c0_param,
                            const RadialGrid& g);

// The three h-energies of one state; ErrorCode::not_ready when the state
// carries no h field.
HEnergyReport h_energy_report(const FieldState& state, const RadialGrid& g,
                              double delta = 0.5);

// Trapezoidal running integral of a sampled rate, used for the
// accumulated weighted dissipation int_0^t int h_tr^2 r^{2+delta} dr ds.
class RunningTimeIntegral {
 public:
  void push(double t, double rate);
  double value() const { return total_; }

  // Plain-data image for checkpoint/resume.
  struct Snapshot {
    double total = 0.0;
    double t_prev = 0.0;
    double rate_prev = 0.0;
    bool have_prev = false;
  };
  Snapshot snapshot() const { return {total_, t_prev_, rate_prev_, have_prev_}; }
  static RunningTimeIntegral restore(const Snapshot& s) {
    RunningTimeIntegral acc;
    acc.total_ = s.total;
    acc.t_prev_ = s.t_prev;
    acc.rate_prev_ = s.rate_prev;
    acc.have_prev_ = s.have_prev;
    return acc;
  }

 private:
  double total_ = 0.0;
  double t_prev_ = 0.0;
  double rate_prev_ = 0.0;
  bool have_prev_ = false;
};

}  // namespace pel

#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "pel/evolution.hpp"
#include "pel/profiles.hpp"
#include "pel/radial_grid.hpp"

namespace pel {

// How the primary lambda column of a track is produced: by enforcing the
// tangent orthogonality <phi - I_lambda, J_lambda> = 0 with a root-finder
// at every sample, or by integrating the first-order modulation ODE.
enum class LambdaSource { orthogonality_rootfind, ode63 };

// Scaling trajectory lambda(t) (units 1/length) with its derived
// monitors. All arrays share length with times. key1_residual and
// key2_residual need centered time differencing, so their first and
// latest entries are NaN until enough neighbours exist.
struct ModulationTrack {
  LambdaSource source = LambdaSource::orthogonality_rootfind;
  std::vector<double> times;
  std::vector<double> lambda;
  std::vector<double> lambda_dot;
  std::vector<double> gamma;          // -lambda_dot / lambda^2
  std::vector<double> focus_monitor;  // lambda_dot^4 / lambda^7
  std::vector<double> alpha_coeff;    // ODE denominator, ~ -C0
  std::vector<double> key1_residual;
  std::vector<double> key2_residual;
  // Relative gap |lambda_ode - lambda_root| / lambda_root between the two
  // sources, both of which are maintained regardless of `source`.
  std::vector<double> divergence_metric;

  std::size_t size() const { return times.size(); }
};

// Root of g(lambda) = <phi - I_lambda, J_lambda> (inner product in r dr)
// nearest lambda_prev, located by bracket expansion around lambda_prev
// inside [lambda_prev/4, 4 lambda_prev] and polished by safeguarded
// secant/bisection to relative tolerance 1e-10. Throws
// ErrorCode::tracking_lost when no sign change exists in the admissible
// bracket (the g values at the bracket ends are reported).
double extract_lambda(const FieldState& state, double lambda_prev,
                      const RadialGrid& g);

// First-order modulation rate at a given scale:
//   lambda_dot = beta / alpha,
//   alpha = 2<I, J> + lambda^2 <phi, (r dJ/dr)_lambda>,
//   beta  = -<phi_t, J_lambda> lambda^3,
// where <I, J> is the profile constant and the remaining inner products
// are grid quadratures. Throws ErrorCode::degenerate when
// |alpha| < 0.1 C0 (the tracking ansatz has broken down).
struct OdeRate {
  double lambda_dot = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};
OdeRate lambda_ode_rhs(const FieldState& state, double lambda,
                       const ProfileConstants& consts, const RadialGrid& g);

// Time derivative of the averaged velocity taken from its own evolution
// equation: h_t = (1/r)(r h_r)_r - h/r^2 + phi_t, with the first two
// terms combined in the cancellation-reduced form h'' + (h' - h/r)/r.
std::vector<double> h_time_derivative(const FieldState& state,
                                      const RadialGrid& g);

// Second-order modulation identity
//   C0 (lambda_ddot - 2 lambda_dot^2 / lambda) =
//     2<u_t, Jdot_l> l^3 + <u, Jddot_l> l^3 + <N(u), J_l> l^3
//     - C0 lambda_dot - <u_t, J_l> l^3 - <h_t, J_l> l^3
// with u = phi - I_lambda and u_t = phi_t - (lambda_dot/lambda) J_lambda.
// residual = |lhs - rhs| / (C0 lambda_dot^2 / lambda), with 0/0 -> 0.
struct Key1Breakdown {
  double lhs = 0.0;             // C0 (lambda_ddot - 2 lambda_dot^2/lambda)
  double term_ut_jdot = 0.0;    //  2 <u_t, Jdot_lambda> lambda^3
  double term_u_jddot = 0.0;    //  <u, Jddot_lambda> lambda^3
  double term_nonlinear = 0.0;  //  <N(u), J_lambda> lambda^3
  double term_damping = 0.0;    // -C0 lambda_dot
  double term_ut_j = 0.0;       // -<u_t, J_lambda> lambda^3
  double term_ht_j = 0.0;       // -<h_t, J_lambda> lambda^3
  double rhs = 0.0;             // sum of the six terms
  double residual = 0.0;
};
Key1Breakdown key1_residual(const FieldState& state,
                            std::span<const double> h_t, double lambda,
                            double lambda_dot, double lambda_ddot,
                            const ProfileConstants& consts,
                            const RadialGrid& g);
// Overload deriving h_t from the state via h_time_derivative.
Key1Breakdown key1_residual(const FieldState& state, double lambda,
                            double lambda_dot, double lambda_ddot,
                            const ProfileConstants& consts,
                            const RadialGrid& g);

// Integrated (first-order) form of the same identity:
//   K1 lambda_dot = K2 lambda^2 + C0 lambda
//                   + lambda^2 Int_0^t E1 ds + lambda^2 Int_0^t E2 ds,
//   K1 = C0 - 2 lambda^2 <u, (r dJ/dr)_lambda>,
//   K2 = C0 lambda_dot(0)/lambda0^2
//        - 2 lambda_dot(0) <u0, (r dJ/dr)_{lambda0}> - C0/lambda0,
//   E1 = -2<u, Jdot_l> lambda_dot - <u, Jddot_l> lambda + <N(u), J_l> lambda,
//   E2 = -<u_t, J_l> lambda - <h_t, J_l> lambda.
// residual = |lhs - rhs| / (sum of term magnitudes).
struct Key2Breakdown {
  double k1 = 0.0;
  double k2 = 0.0;  // initial coefficient; positivity is a regime check
  double lhs = 0.0;
  double rhs = 0.0;
  double int_e1 = 0.0;  // running time quadrature of E1
  double int_e2 = 0.0;
  double residual = 0.0;
};

// Incremental track builder. Feed states in increasing time order; both
// lambda sources are maintained (the ODE by explicit trapezoidal /
// Heun integration, the root-finder by continuation from the previous
// sample) and their relative gap is recorded per sample. The key1 and
// key2 columns are finalized one sample late with centered differencing
// of the primary lambda_dot column.
class ModulationTracker {
 public:
  ModulationTracker(double lambda0, LambdaSource source,
                    ProfileConstants consts,
                    std::shared_ptr<const RadialGrid> grid);

  void push(const FieldState& state);

  const ModulationTrack& track() const { return track_; }

  // Latest finalized breakdowns (at the last interior sample). Throw
  // ErrorCode::not_ready until three samples exist.
  const Key1Breakdown& key1_latest() const;
  const Key2Breakdown& key2_latest() const;

  // Initial coefficient of the integrated identity; not_ready before the
  // first push.
  double k2_coefficient() const;

  // Binary round-trip of the complete tracker state (columns, integrator
  // registers, delayed-column buffers) for checkpoint/resume. Constants
  // and grid are not serialized; the caller re-supplies them on load.
  void save(std::ostream& out) const;
  static ModulationTracker load(std::istream& in, ProfileConstants consts,
                                std::shared_ptr<const RadialGrid> grid);

 private:
  void finalize_interior();

  ModulationTrack track_;
  ProfileConstants consts_;
  std::shared_ptr<const RadialGrid> grid_;
  double lambda0_ = 0.0;
  double lambda_ode_ = 0.0;   // trapezoid-integrated scale
  double lambda_root_ = 0.0;  // continuation root
  double ode_rate_prev_ = 0.0;
  FieldState prev_state_;     // newest-but-one sample, for delayed columns
  double k2_ = 0.0;
  double int_e1_ = 0.0, int_e2_ = 0.0;    // time quadrature up to the
  double e1_prev_ = 0.0, e2_prev_ = 0.0;  // last finalized sample
  Key1Breakdown key1_last_;
  Key2Breakdown key2_last_;
  bool have_key_ = false;
};

// Batch wrapper: integrate the modulation ODE along a stored state
// sequence starting from lambda0. The returned track has source ode63;
// its divergence column is the per-sample cross-check against the
// root-finder demanded of the integration.
ModulationTrack evolve_lambda_ode(std::span<const FieldState> states,
                                  double lambda0,
                                  const ProfileConstants& consts,
                                  std::shared_ptr<const RadialGrid> grid);

// Pure-trajectory diagnostics: sign of lambda_dot, monotonicity of
// lambda and of the focusing monitor lambda_dot^4/lambda^7, the index
// where the last monotonicity violation happened (transient window), and
// least-squares fits of y = lambda(t) (t_star - t) against a constant and
// against c |ln(t_star - t)|^{1/2} over the samples with t < t_star. The
// fit qualities are uncentered R^2 values, 1 - sum(y - fit)^2 / sum y^2,
// so the constant fit is judged against zero rather than its own mean.
struct RiccatiReport {
  std::size_t n_samples = 0;
  std::size_t lambda_dot_nonpositive = 0;  // samples with lambda_dot <= 0
  std::size_t lambda_violations = 0;       // steps with lambda decreasing
  std::size_t lambda_flat_or_down = 0;     // steps with lambda not growing
  std::size_t focus_violations = 0;        // steps with monitor decreasing
  std::size_t transient_end_index = 0;     // monotone from here on
  double transient_end_time = 0.0;
  double t_star = 0.0;           // candidate used for the fits
  double fit_const_coeff = 0.0;  // M in lambda ~ M / (t_star - t)
  double fit_const_r2 = 0.0;
  double fit_log_coeff = 0.0;  // c in lambda ~ c sqrt|ln| / (t_star - t)
  double fit_log_r2 = 0.0;
};
RiccatiReport riccati_monitor(const ModulationTrack& track,
                              double t_star_candidate);

// Blowup-time estimate: linear fit of 1/lambda over the trailing samples
// where lambda >= max(lambda)/10 (the last decade of growth), reported
// with the fit's R^2. Throws ErrorCode::degenerate when the window has
// fewer than three samples or lambda is not increasing over it.
struct TStarFit {
  double t_star = 0.0;
  double r2 = 0.0;
  std::size_t window_begin = 0;  // first sample index in the fit window
};
TStarFit estimate_t_star(const ModulationTrack& track);

}  // namespace pel

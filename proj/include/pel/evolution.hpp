#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pel/radial_grid.hpp"

namespace pel {

// Joint state of the coupled velocity/director system at one time level.
// phi is the director polar angle, v the axial fluid velocity, and h the
// radially averaged velocity h(r) = (1/r) \int_0^r v R dR; both
// formulations keep all four arrays in sync. All fields carry a ghost
// value 0 at r = 0 and a pinned Dirichlet value at the outer node
// (phi.back() held fixed, v and h vanish there).
struct FieldState {
  double t = 0.0;
  int k = 4;
  std::vector<double> phi;
  std::vector<double> phi_t;
  std::vector<double> v;
  std::vector<double> h;
  std::shared_ptr<const RadialGrid> grid;
};

enum class DampingTreatment { implicit_average, explicit_forward };

struct SchemeConfig {
  double dt = 1e-4;
  // Implicitness of the parabolic solve; 1/2 is trapezoidal, 1 backward.
  double theta = 0.5;
  DampingTreatment damping = DampingTreatment::implicit_average;
  // Below this radius the sin(2 phi)/(2 r^2) term is evaluated through the
  // cancellation-free ratio form.
  double r_min_guard = 1e-3;
  double cfl_safety = 0.8;
};

// Shape, finiteness, and index checks; throws on violation.
void validate_state(const FieldState& s);
void validate_scheme(const SchemeConfig& cfg);

// Largest stable explicit-wave step on this grid: the minimum over nodes
// of 2 / sqrt(4/dr^2 + k^2/r^2), which bounds the spectrum of the wave
// operator including its zeroth-order term. Always <= min spacing.
double cfl_limit(const RadialGrid& g, int k);

// One IMEX step of the primal (v, phi) system:
//   v_t = (1/r)(r v_r + r phi_t)_r
//   phi_tt + 2 phi_t = (1/r)(r phi_r)_r - k^2 sin(2 phi)/(2 r^2) - v_r.
// Wave half-kick, drift, theta-scheme tridiagonal solve for v forced by
// the midpoint phi_t, second half-kick against the fresh v. h is
// re-derived from v by quadrature so the returned state keeps all four
// arrays consistent. Throws ErrorCode::cfl if dt exceeds the limit and
// ErrorCode::nan_detected if the update leaves finite range (the caller's
// input state is untouched and remains the last finite state).
FieldState step(const FieldState& s, const SchemeConfig& cfg);

// Same dynamics through the averaged-velocity form:
//   h_t = (1/r)(r h_r)_r - h/r^2 + phi_t
//   phi_tt + 2 phi_t = (1/r)(r phi_r)_r - k^2 sin(2 phi)/(2 r^2) - D h,
// where D h = (1/r)(r h_r)_r - h/r^2 replaces v_r (the two agree because
// h_t = v_r + phi_t). v is reconstructed as (r h)_r / r afterwards.
FieldState step_h_formulation(const FieldState& s, const SchemeConfig& cfg);

// h from v by the defining quadrature h = (1/r) \int_0^r v R dR.
std::vector<double> reconstruct_h(std::span<const double> v,
                                  const RadialGrid& g);

// v from h by v = (r h)_r / r = h_r + h/r.
std::vector<double> reconstruct_v_from_h(std::span<const double> h,
                                         const RadialGrid& g);

// Unit director field d = (sin phi cos k theta, sin phi sin k theta,
// cos phi), sampled at every (node, theta) pair, node-major.
std::vector<std::array<double, 3>> reconstruct_director(
    const FieldState& s, std::span<const double> theta_samples);

// Versioned binary snapshot; round-trips bit-exactly.
void save_state(const FieldState& s, std::ostream& out);
FieldState load_state(std::istream& in);
void save_state_file(const FieldState& s, const std::string& path);
FieldState load_state_file(const std::string& path);

namespace detail {

// Testing seam: the shared stepper with an adjustable damping coefficient
// and a switch for the velocity coupling, so the undamped uncoupled wave
// core can be exercised (e.g. for time-reversal checks).
enum class Formulation { primal_v, averaged_h };
FieldState step_impl(const FieldState& s, const SchemeConfig& cfg,
                     Formulation form, double damping_coeff, bool couple);

}  // namespace detail

}  // namespace pel

#include "pel/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

#include "pel/errors.hpp"
#include "pel/stencils.hpp"

namespace pel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// g(lambda) = <phi - I_lambda, J_lambda>, fused over the grid.
double ortho_gap(const FieldState& s, double lambda, const RadialGrid& g) {
  const ProfileParams p{s.k, lambda};
  const auto& r = g.nodes();
  const auto& w = g.quad_weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    acc += w[i] * (s.phi[i] - eval_I(p, r[i])) * eval_J(p, r[i]);
  return acc;
}

// <phi - I_lambda, (r dJ/dr)_lambda>, the tangent-scaling quadrature.
double rdj_gap(const FieldState& s, double lambda, const RadialGrid& g) {
  const ProfileParams p{s.k, lambda};
  const auto& r = g.nodes();
  const auto& w = g.quad_weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    acc += w[i] * (s.phi[i] - eval_I(p, r[i])) * eval_rdJ(p, r[i]);
  return acc;
}

struct Bracket {
  double a = 0.0, b = 0.0;
  double ga = 0.0, gb = 0.0;
};

// Safeguarded secant/bisection inside a sign-change bracket. Secant
// steps are taken only while they keep shrinking the bracket; otherwise
// the midpoint is used, so geometric convergence is guaranteed. The
// width target sits far below the required 1e-10 relative tolerance so
// the returned root leaves |g| at the quadrature-roundoff floor, which
// the orthogonality-maintenance bound needs. Returns the endpoint with
// the smaller |g|.
double refine_root(const FieldState& s, const RadialGrid& g, Bracket br) {
  double a = br.a, b = br.b, ga = br.ga, gb = br.gb;
  if (ga == 0.0) return a;
  if (gb == 0.0) return b;
  double prev_width = b - a;
  for (int it = 0; it < 200; ++it) {
    const double width = b - a;
    if (width <= 1e-13 * b) break;
    const bool stalled = (it >= 2) && width > 0.6 * prev_width;
    prev_width = width;
    double c = 0.5 * (a + b);
    if (!stalled && gb != ga) {
      const double secant = b - gb * (b - a) / (gb - ga);
      const double margin = 0.01 * width;
      if (secant > a + margin && secant < b - margin) c = secant;
    }
    const double gc = ortho_gap(s, c, g);
    if (gc == 0.0) return c;
    if ((gc > 0.0) == (ga > 0.0)) {
      a = c;
      ga = gc;
    } else {
      b = c;
      gb = gc;
    }
  }
  return std::abs(ga) <= std::abs(gb) ? a : b;
}

void check_state_arrays(const FieldState& s, const RadialGrid& g) {
  require_shape(s.phi, g);
  require_shape(s.phi_t, g);
  require_shape(s.v, g);
  require_shape(s.h, g);
}

}  // namespace

double extract_lambda(const FieldState& state, double lambda_prev,
                      const RadialGrid& g) {
  check_state_arrays(state, g);
  if (!(lambda_prev > 0.0))
    fail(ErrorCode::invalid_argument, "lambda_prev must be positive");

  const double lo_lim = 0.25 * lambda_prev;
  const double hi_lim = 4.0 * lambda_prev;
  const double g0 = ortho_gap(state, lambda_prev, g);
  if (g0 == 0.0) return lambda_prev;

  // Expand outward from lambda_prev in geometric rings so the first
  // sign-change cell found is the one nearest the previous scale
  // (modulation tracking is a continuation problem). When both sides of
  // a ring bracket a root, refine both and keep the closer one.
  constexpr double kStep = 1.07;
  double lo = lambda_prev, glo = g0;
  double hi = lambda_prev, ghi = g0;
  Bracket found[2];
  int nfound = 0;
  while (nfound == 0 && (lo > lo_lim || hi < hi_lim)) {
    if (lo > lo_lim) {
      const double nxt = std::max(lo / kStep, lo_lim);
      const double gn = ortho_gap(state, nxt, g);
      if (gn == 0.0) return nxt;
      if ((gn > 0.0) != (glo > 0.0)) found[nfound++] = {nxt, lo, gn, glo};
      lo = nxt;
      glo = gn;
    }
    if (hi < hi_lim) {
      const double nxt = std::min(hi * kStep, hi_lim);
      const double gn = ortho_gap(state, nxt, g);
      if (gn == 0.0) return nxt;
      if ((gn > 0.0) != (ghi > 0.0)) found[nfound++] = {hi, nxt, ghi, gn};
      hi = nxt;
      ghi = gn;
    }
  }
  if (nfound == 0) {
    std::ostringstream msg;
    msg << "orthogonality has no root in [" << lo_lim << ", " << hi_lim
        << "]: g(" << lo_lim << ") = " << glo << ", g(" << hi_lim
        << ") = " << ghi;
    fail(ErrorCode::tracking_lost, msg.str());
  }
  double root = refine_root(state, g, found[0]);
  if (nfound == 2) {
    const double other = refine_root(state, g, found[1]);
    if (std::abs(other - lambda_prev) < std::abs(root - lambda_prev))
      root = other;
  }
  return root;
}

OdeRate lambda_ode_rhs(const FieldState& state, double lambda,
                       const ProfileConstants& consts, const RadialGrid& g) {
  check_state_arrays(state, g);
  if (!(lambda > 0.0))
    fail(ErrorCode::invalid_argument, "lambda must be positive");
  if (!(consts.c0_const > 0.0))
    fail(ErrorCode::invalid_argument, "profile constants are uninitialized");

  const ProfileParams p{state.k, lambda};
  const auto& r = g.nodes();
  const auto& w = g.quad_weights();
  double phi_rdj = 0.0;
  double phit_j = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    phi_rdj += w[i] * state.phi[i] * eval_rdJ(p, r[i]);
    phit_j += w[i] * state.phi_t[i] * eval_J(p, r[i]);
  }
  OdeRate rate;
  rate.alpha = 2.0 * consts.ij_inner + lambda * lambda * phi_rdj;
  rate.beta = -phit_j * lambda * lambda * lambda;
  if (std::abs(rate.alpha) < 0.1 * consts.c0_const) {
    std::ostringstream msg;
    msg << "tangent-projection denominator degenerated: alpha = "
        << rate.alpha << " with <J, J> = " << consts.c0_const;
    fail(ErrorCode::degenerate, msg.str());
  }
  rate.lambda_dot = rate.beta / rate.alpha;
  return rate;
}

std::vector<double> h_time_derivative(const FieldState& state,
                                      const RadialGrid& g) {
  check_state_arrays(state, g);
  const std::vector<double> d1 = sampled_d1(state.h, g);
  const std::vector<double> d2 = sampled_d2(state.h, g);
  const auto& r = g.nodes();
  std::vector<double> ht(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    ht[i] = d2[i] + (d1[i] - state.h[i] / r[i]) / r[i] + state.phi_t[i];
  return ht;
}

Key1Breakdown key1_residual(const FieldState& state,
                            std::span<const double> h_t, double lambda,
                            double lambda_dot, double lambda_ddot,
                            const ProfileConstants& consts,
                            const RadialGrid& g) {
  check_state_arrays(state, g);
  require_shape(h_t, g);
  if (!(lambda > 0.0))
    fail(ErrorCode::invalid_argument, "lambda must be positive");
  const double c0 = consts.c0_const;
  if (!(c0 > 0.0))
    fail(ErrorCode::invalid_argument, "profile constants are uninitialized");

  const ProfileParams p{state.k, lambda};
  const std::vector<double> big_i = sample_I(p, g);
  const std::vector<double> big_j = sample_J(p, g);
  const std::vector<double> jdot = sample_Jdot(p, lambda_dot, g);
  const std::vector<double> jddot = sample_Jddot(p, lambda_dot, lambda_ddot, g);

  const std::size_t n = g.size();
  std::vector<double> u(n), ut(n);
  const double rate = lambda_dot / lambda;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = state.phi[i] - big_i[i];
    ut[i] = state.phi_t[i] - rate * big_j[i];
  }
  const std::vector<double> nl = nonlinearity_N(p, u, g);

  const double l3 = lambda * lambda * lambda;
  Key1Breakdown b;
  b.term_ut_jdot = 2.0 * g.inner(ut, jdot) * l3;
  b.term_u_jddot = g.inner(u, jddot) * l3;
  b.term_nonlinear = g.inner(nl, big_j) * l3;
  b.term_damping = -c0 * lambda_dot;
  b.term_ut_j = -g.inner(ut, big_j) * l3;
  b.term_ht_j = -g.inner(h_t, big_j) * l3;
  b.lhs = c0 * (lambda_ddot - 2.0 * lambda_dot * lambda_dot / lambda);
  b.rhs = b.term_ut_jdot + b.term_u_jddot + b.term_nonlinear +
          b.term_damping + b.term_ut_j + b.term_ht_j;
  const double num = std::abs(b.lhs - b.rhs);
  const double den = c0 * lambda_dot * lambda_dot / lambda;
  if (num == 0.0)
    b.residual = 0.0;
  else
    b.residual = den > 0.0 ? num / den
                           : std::numeric_limits<double>::infinity();
  return b;
}

Key1Breakdown key1_residual(const FieldState& state, double lambda,
                            double lambda_dot, double lambda_ddot,
                            const ProfileConstants& consts,
                            const RadialGrid& g) {
  const std::vector<double> ht = h_time_derivative(state, g);
  return key1_residual(state, ht, lambda, lambda_dot, lambda_ddot, consts, g);
}

ModulationTracker::ModulationTracker(double lambda0, LambdaSource source,
                                     ProfileConstants consts,
                                     std::shared_ptr<const RadialGrid> grid)
    : consts_(std::move(consts)), grid_(std::move(grid)), lambda0_(lambda0) {
  if (!grid_) fail(ErrorCode::invalid_argument, "tracker needs a grid");
  if (!(lambda0 > 0.0))
    fail(ErrorCode::invalid_argument, "lambda0 must be positive");
  if (!(consts_.c0_const > 0.0))
    fail(ErrorCode::invalid_argument, "profile constants are uninitialized");
  track_.source = source;
}

void ModulationTracker::push(const FieldState& state) {
  const RadialGrid& g = *grid_;
  check_state_arrays(state, g);
  const std::size_t n = track_.size();
  if (n > 0 && !(state.t > track_.times.back()))
    fail(ErrorCode::invalid_argument, "track samples must advance in time");
  if (n > 0 && state.k != prev_state_.k)
    fail(ErrorCode::invalid_argument, "equivariance index changed mid-track");

  const double root_prev = n == 0 ? lambda0_ : lambda_root_;
  lambda_root_ = extract_lambda(state, root_prev, g);

  // Explicit trapezoidal (Heun) update of the ODE scale: predict with
  // the cached rate at the previous sample, average with the rate at the
  // predictor, then cache the rate at the corrected point.
  OdeRate rate_ode;
  if (n == 0) {
    lambda_ode_ = lambda0_;
    rate_ode = lambda_ode_rhs(state, lambda_ode_, consts_, g);
  } else {
    const double dt = state.t - track_.times.back();
    const double pred = lambda_ode_ + dt * ode_rate_prev_;
    if (!(pred > 0.0))
      fail(ErrorCode::tracking_lost, "integrated scale left the positive axis");
    const OdeRate at_pred = lambda_ode_rhs(state, pred, consts_, g);
    lambda_ode_ += 0.5 * dt * (ode_rate_prev_ + at_pred.lambda_dot);
    if (!(lambda_ode_ > 0.0))
      fail(ErrorCode::tracking_lost, "integrated scale left the positive axis");
    rate_ode = lambda_ode_rhs(state, lambda_ode_, consts_, g);
  }
  ode_rate_prev_ = rate_ode.lambda_dot;

  const bool use_ode = track_.source == LambdaSource::ode63;
  const double lam = use_ode ? lambda_ode_ : lambda_root_;
  const OdeRate rate =
      use_ode ? rate_ode : lambda_ode_rhs(state, lambda_root_, consts_, g);

  track_.times.push_back(state.t);
  track_.lambda.push_back(lam);
  track_.lambda_dot.push_back(rate.lambda_dot);
  track_.gamma.push_back(-rate.lambda_dot / (lam * lam));
  const double ld2 = rate.lambda_dot * rate.lambda_dot;
  const double l3 = lam * lam * lam;
  track_.focus_monitor.push_back(ld2 * ld2 / (l3 * l3 * lam));
  track_.alpha_coeff.push_back(rate.alpha);
  track_.key1_residual.push_back(kNaN);
  track_.key2_residual.push_back(kNaN);
  track_.divergence_metric.push_back(std::abs(lambda_ode_ - lambda_root_) /
                                     lambda_root_);

  if (n == 0) {
    // Initial coefficient of the integrated identity. With it, the
    // identity holds exactly at the anchor sample, which pins the
    // residual there to zero.
    const double q0 = rdj_gap(state, lam, g);
    k2_ = consts_.c0_const * rate.lambda_dot / (lam * lam) -
          2.0 * rate.lambda_dot * q0 - consts_.c0_const / lam;
    track_.key2_residual[0] = 0.0;
  } else {
    finalize_interior();
  }
  prev_state_ = state;
}

void ModulationTracker::finalize_interior() {
  const std::size_t n = track_.size();  // >= 2 when called
  const std::size_t m = n - 2;          // sample being finalized
  const RadialGrid& g = *grid_;
  const double lam = track_.lambda[m];
  const double ld = track_.lambda_dot[m];
  // Second derivative by differencing the recorded rate column: centered
  // at interior samples, one-sided for the very first cell (which only
  // feeds the time quadrature; the key1 column needs both neighbours).
  double ldd;
  if (m == 0)
    ldd = (track_.lambda_dot[1] - track_.lambda_dot[0]) /
          (track_.times[1] - track_.times[0]);
  else
    ldd = (track_.lambda_dot[m + 1] - track_.lambda_dot[m - 1]) /
          (track_.times[m + 1] - track_.times[m - 1]);

  const Key1Breakdown b =
      key1_residual(prev_state_, lam, ld, ldd, consts_, g);
  const double l2 = lam * lam;
  const double q = rdj_gap(prev_state_, lam, g);
  // Integrands of the time-integrated identity, reusing the key1 terms
  // (they differ only by a lambda^2 scaling and the <u, Jdot> pairing,
  // where Jdot = (lambda_dot/lambda) (r dJ/dr)_lambda).
  const double e1 = -2.0 * (ld / lam) * q * ld +
                    (-b.term_u_jddot + b.term_nonlinear) / l2;
  const double e2 = (b.term_ut_j + b.term_ht_j) / l2;
  if (m >= 1) {
    const double cell = track_.times[m] - track_.times[m - 1];
    int_e1_ += 0.5 * cell * (e1_prev_ + e1);
    int_e2_ += 0.5 * cell * (e2_prev_ + e2);
  }
  e1_prev_ = e1;
  e2_prev_ = e2;

  if (m >= 1) {
    track_.key1_residual[m] = b.residual;
    key1_last_ = b;

    Key2Breakdown k;
    k.k1 = consts_.c0_const - 2.0 * l2 * q;
    k.k2 = k2_;
    k.int_e1 = int_e1_;
    k.int_e2 = int_e2_;
    k.lhs = k.k1 * ld;
    k.rhs = k2_ * l2 + consts_.c0_const * lam + l2 * (int_e1_ + int_e2_);
    const double num = std::abs(k.lhs - k.rhs);
    const double den = std::abs(k.lhs) + std::abs(k2_) * l2 +
                       consts_.c0_const * lam +
                       l2 * (std::abs(int_e1_) + std::abs(int_e2_));
    k.residual = num == 0.0 ? 0.0 : num / den;
    track_.key2_residual[m] = k.residual;
    key2_last_ = k;
    have_key_ = true;
  }
}

const Key1Breakdown& ModulationTracker::key1_latest() const {
  if (!have_key_)
    fail(ErrorCode::not_ready,
         "second-derivative differencing needs three samples");
  return key1_last_;
}

const Key2Breakdown& ModulationTracker::key2_latest() const {
  if (!have_key_)
    fail(ErrorCode::not_ready,
         "the integrated identity needs three samples");
  return key2_last_;
}

double ModulationTracker::k2_coefficient() const {
  if (track_.size() == 0)
    fail(ErrorCode::not_ready, "no samples pushed yet");
  return k2_;
}

namespace {

constexpr char kTrackerMagic[8] = {'P', 'E', 'L', 'M', 'T', 'R', 'K', '1'};

template <typename T>
void put_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorCode::io, "truncated tracker checkpoint");
  return v;
}

void put_column(std::ostream& out, const std::vector<double>& v) {
  put_raw(out, std::uint64_t(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            std::streamsize(v.size() * sizeof(double)));
}

std::vector<double> get_column(std::istream& in) {
  const auto len = std::size_t(get_raw<std::uint64_t>(in));
  std::vector<double> v(len);
  in.read(reinterpret_cast<char*>(v.data()),
          std::streamsize(len * sizeof(double)));
  if (!in) fail(ErrorCode::io, "truncated tracker checkpoint");
  return v;
}

}  // namespace

void ModulationTracker::save(std::ostream& out) const {
  out.write(kTrackerMagic, sizeof(kTrackerMagic));
  put_raw(out, std::int32_t(track_.source));
  put_raw(out, lambda0_);
  put_raw(out, lambda_ode_);
  put_raw(out, lambda_root_);
  put_raw(out, ode_rate_prev_);
  put_raw(out, k2_);
  put_raw(out, int_e1_);
  put_raw(out, int_e2_);
  put_raw(out, e1_prev_);
  put_raw(out, e2_prev_);
  put_raw(out, std::uint8_t(have_key_ ? 1 : 0));
  for (double x :
       {key1_last_.lhs, key1_last_.term_ut_jdot, key1_last_.term_u_jddot,
        key1_last_.term_nonlinear, key1_last_.term_damping,
        key1_last_.term_ut_j, key1_last_.term_ht_j, key1_last_.rhs,
        key1_last_.residual})
    put_raw(out, x);
  for (double x : {key2_last_.k1, key2_last_.k2, key2_last_.lhs,
                   key2_last_.rhs, key2_last_.int_e1, key2_last_.int_e2,
                   key2_last_.residual})
    put_raw(out, x);
  const bool has_prev = prev_state_.grid != nullptr;
  put_raw(out, std::uint8_t(has_prev ? 1 : 0));
  if (has_prev) save_state(prev_state_, out);
  for (const auto* col :
       {&track_.times, &track_.lambda, &track_.lambda_dot, &track_.gamma,
        &track_.focus_monitor, &track_.alpha_coeff, &track_.key1_residual,
        &track_.key2_residual, &track_.divergence_metric})
    put_column(out, *col);
  if (!out) fail(ErrorCode::io, "failed to write tracker checkpoint");
}

ModulationTracker ModulationTracker::load(
    std::istream& in, ProfileConstants consts,
    std::shared_ptr<const RadialGrid> grid) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTrackerMagic, sizeof(kTrackerMagic)) != 0)
    fail(ErrorCode::io, "not a tracker checkpoint");
  const auto source = static_cast<LambdaSource>(get_raw<std::int32_t>(in));
  const double lambda0 = get_raw<double>(in);
  ModulationTracker t(lambda0, source, std::move(consts), std::move(grid));
  t.lambda_ode_ = get_raw<double>(in);
  t.lambda_root_ = get_raw<double>(in);
  t.ode_rate_prev_ = get_raw<double>(in);
  t.k2_ = get_raw<double>(in);
  t.int_e1_ = get_raw<double>(in);
  t.int_e2_ = get_raw<double>(in);
  t.e1_prev_ = get_raw<double>(in);
  t.e2_prev_ = get_raw<double>(in);
  t.have_key_ = get_raw<std::uint8_t>(in) != 0;
  for (double* x :
       {&t.key1_last_.lhs, &t.key1_last_.term_ut_jdot,
        &t.key1_last_.term_u_jddot, &t.key1_last_.term_nonlinear,
        &t.key1_last_.term_damping, &t.key1_last_.term_ut_j,
        &t.key1_last_.term_ht_j, &t.key1_last_.rhs, &t.key1_last_.residual})
    *x = get_raw<double>(in);
  for (double* x : {&t.key2_last_.k1, &t.key2_last_.k2, &t.key2_last_.lhs,
                    &t.key2_last_.rhs, &t.key2_last_.int_e1,
                    &t.key2_last_.int_e2, &t.key2_last_.residual})
    *x = get_raw<double>(in);
  if (get_raw<std::uint8_t>(in) != 0) {
    t.prev_state_ = load_state(in);
    // the caller re-supplies the (identical) grid; share one instance
    if (t.prev_state_.grid->size() == t.grid_->size())
      t.prev_state_.grid = t.grid_;
  }
  for (auto* col :
       {&t.track_.times, &t.track_.lambda, &t.track_.lambda_dot,
        &t.track_.gamma, &t.track_.focus_monitor, &t.track_.alpha_coeff,
        &t.track_.key1_residual, &t.track_.key2_residual,
        &t.track_.divergence_metric})
    *col = get_column(in);
  return t;
}

ModulationTrack evolve_lambda_ode(std::span<const FieldState> states,
                                  double lambda0,
                                  const ProfileConstants& consts,
                                  std::shared_ptr<const RadialGrid> grid) {
  ModulationTracker tracker(lambda0, LambdaSource::ode63, consts,
                            std::move(grid));
  for (const FieldState& s : states) tracker.push(s);
  return tracker.track();
}

RiccatiReport riccati_monitor(const ModulationTrack& track,
                              double t_star_candidate) {
  const std::size_t n = track.size();
  if (n < 3)
    fail(ErrorCode::invalid_argument, "monitor needs at least 3 samples");
  RiccatiReport rep;
  rep.n_samples = n;
  rep.t_star = t_star_candidate;
  for (double ld : track.lambda_dot)
    if (!(ld > 0.0)) ++rep.lambda_dot_nonpositive;
  std::size_t last_bad = 0;
  bool any_bad = false;
  for (std::size_t i = 1; i < n; ++i) {
    if (track.lambda[i] < track.lambda[i - 1]) {
      ++rep.lambda_violations;
      last_bad = std::max(last_bad, i);
      any_bad = true;
    }
    if (!(track.lambda[i] > track.lambda[i - 1])) ++rep.lambda_flat_or_down;
    if (track.focus_monitor[i] < track.focus_monitor[i - 1]) {
      ++rep.focus_violations;
      last_bad = std::max(last_bad, i);
      any_bad = true;
    }
  }
  rep.transient_end_index = any_bad ? last_bad : 0;
  rep.transient_end_time = track.times[rep.transient_end_index];

  double sum_y = 0.0, sum_yy = 0.0, sum_xy = 0.0, sum_xx = 0.0;
  std::size_t m = 0;
  std::vector<double> ys, xs;
  for (std::size_t i = 0; i < n; ++i) {
    const double dtau = t_star_candidate - track.times[i];
    if (!(dtau > 0.0)) continue;
    const double y = track.lambda[i] * dtau;
    const double x = std::sqrt(std::abs(std::log(dtau)));
    ys.push_back(y);
    xs.push_back(x);
    sum_y += y;
    sum_yy += y * y;
    sum_xy += x * y;
    sum_xx += x * x;
    ++m;
  }
  if (m >= 2 && sum_yy > 0.0) {
    const double big_m = sum_y / static_cast<double>(m);
    rep.fit_const_coeff = big_m;
    double res_const = 0.0, res_log = 0.0;
    const double c = sum_xx > 0.0 ? sum_xy / sum_xx : 0.0;
    rep.fit_log_coeff = c;
    for (std::size_t i = 0; i < m; ++i) {
      res_const += (ys[i] - big_m) * (ys[i] - big_m);
      res_log += (ys[i] - c * xs[i]) * (ys[i] - c * xs[i]);
    }
    rep.fit_const_r2 = 1.0 - res_const / sum_yy;
    rep.fit_log_r2 = 1.0 - res_log / sum_yy;
  }
  return rep;
}

TStarFit estimate_t_star(const ModulationTrack& track) {
  const std::size_t n = track.size();
  if (n < 3) fail(ErrorCode::degenerate, "too few samples to extrapolate");
  const double lam_max =
      *std::max_element(track.lambda.begin(), track.lambda.end());
  const double threshold = lam_max / 10.0;
  std::size_t begin = n;
  while (begin > 0 && track.lambda[begin - 1] >= threshold) --begin;
  const std::size_t m = n - begin;
  if (m < 3)
    fail(ErrorCode::degenerate,
         "fewer than three samples in the last decade of growth");

  // Least squares of 1/lambda against time over the window.
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = begin; i < n; ++i) {
    const double t = track.times[i];
    const double y = 1.0 / track.lambda[i];
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double mm = static_cast<double>(m);
  const double det = mm * stt - st * st;
  if (!(det > 0.0)) fail(ErrorCode::degenerate, "degenerate time window");
  const double slope = (mm * sty - st * sy) / det;
  const double intercept = (sy * stt - st * sty) / det;
  if (!(slope < 0.0))
    fail(ErrorCode::degenerate,
         "scale is not growing over the extrapolation window");

  double ss_res = 0.0, ss_tot = 0.0;
  const double mean_y = sy / mm;
  for (std::size_t i = begin; i < n; ++i) {
    const double y = 1.0 / track.lambda[i];
    const double fit = intercept + slope * track.times[i];
    ss_res += (y - fit) * (y - fit);
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  TStarFit out;
  out.t_star = -intercept / slope;
  out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  out.window_begin = begin;
  return out;
}

}  // namespace pel

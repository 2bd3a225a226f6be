#include "pel/evolution.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "pel/errors.hpp"

namespace pel {

namespace {

// Coefficients of the conservative discretization of (1/r)(r f_r)_r at
// node i: L f_i = lo_i f_{i-1} - di_i f_i + up_i f_{i+1}, with a ghost
// node (r = 0, f = 0) below the first node. The outer node is pinned by
// the boundary condition and carries no row.
struct LaplaceCoeffs {
  std::vector<double> lo, di, up;
};

LaplaceCoeffs laplace_coeffs(const RadialGrid& g) {
  const auto& r = g.nodes();
  const std::size_t n = g.size();
  LaplaceCoeffs c;
  c.lo.assign(n, 0.0);
  c.di.assign(n, 0.0);
  c.up.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double rm = (i == 0) ? 0.0 : r[i - 1];
    const double hl = r[i] - rm;
    const double hr = r[i + 1] - r[i];
    const double ml = 0.5 * (r[i] + rm);
    const double mr = 0.5 * (r[i] + r[i + 1]);
    const double vol = r[i] * 0.5 * (r[i + 1] - rm);
    c.lo[i] = ml / (hl * vol);
    c.up[i] = mr / (hr * vol);
    c.di[i] = c.lo[i] + c.up[i];
  }
  return c;
}

void apply_laplace(const LaplaceCoeffs& c, std::span<const double> f,
                   std::span<double> out) {
  const std::size_t n = f.size();
  out[0] = -c.di[0] * f[0] + c.up[0] * f[1];
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = c.lo[i] * f[i - 1] - c.di[i] * f[i] + c.up[i] * f[i + 1];
  out[n - 1] = 0.0;
}

// First radial derivative, second order, ghost f(0) = 0 at the origin and
// one-sided at the outer node.
void radial_derivative(std::span<const double> f, const RadialGrid& g,
                       std::span<double> out) {
  const auto& r = g.nodes();
  const std::size_t n = f.size();
  auto d1 = [](double x0, double x1, double x2, double xe, double f0,
               double f1, double f2) {
    return f0 * (2 * xe - x1 - x2) / ((x0 - x1) * (x0 - x2)) +
           f1 * (2 * xe - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
           f2 * (2 * xe - x0 - x1) / ((x2 - x0) * (x2 - x1));
  };
  out[0] = d1(0.0, r[0], r[1], r[0], 0.0, f[0], f[1]);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = d1(r[i - 1], r[i], r[i + 1], r[i], f[i - 1], f[i], f[i + 1]);
  out[n - 1] = d1(r[n - 3], r[n - 2], r[n - 1], r[n - 1], f[n - 3], f[n - 2],
                  f[n - 1]);
}

// sin(2 phi)/(2 r^2), with the ratio form below r_min_guard so the factor
// multiplying 1/r^2 stays cancellation-free as phi -> 0.
double singular_term(int k, double phi, double r, double r_min_guard) {
  const double k2 = double(k) * k;
  if (r < r_min_guard) {
    const double ratio = (std::abs(phi) < 1e-4)
                             ? 2.0 - (4.0 / 3.0) * phi * phi
                             : std::sin(2.0 * phi) / phi;
    return k2 * phi * ratio / (2.0 * r * r);
  }
  return k2 * std::sin(2.0 * phi) / (2.0 * r * r);
}

// Wave acceleration a = (1/r)(r phi_r)_r - k^2 sin(2 phi)/(2 r^2) - G,
// where G is v_r in the primal form and D h = L h - h/r^2 in the averaged
// form. The outer pinned node gets a = 0.
void acceleration(const FieldState& s, const LaplaceCoeffs& lc,
                  const SchemeConfig& cfg, detail::Formulation form,
                  bool couple, std::span<double> a) {
  const RadialGrid& g = *s.grid;
  const std::size_t n = g.size();
  std::vector<double> lap(n), grad(n);
  apply_laplace(lc, s.phi, lap);
  if (couple) {
    if (form == detail::Formulation::primal_v) {
      radial_derivative(s.v, g, grad);
    } else {
      apply_laplace(lc, s.h, grad);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double r = g.nodes()[i];
        grad[i] -= s.h[i] / (r * r);
      }
      grad[n - 1] = 0.0;
    }
  } else {
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double r = g.nodes()[i];
    a[i] = lap[i] - singular_term(s.k, s.phi[i], r, cfg.r_min_guard) - grad[i];
  }
  a[n - 1] = 0.0;
}

// Half-kick of phi_t over tau = dt/2 against acceleration a, with the
// damping gamma * phi_t taken either as the old/new average (linear
// implicit update) or fully explicit.
void half_kick(std::span<const double> psi, std::span<const double> a,
               double tau, double gamma, DampingTreatment mode,
               std::span<double> out) {
  const std::size_t n = psi.size();
  if (mode == DampingTreatment::implicit_average) {
    const double gt = 0.5 * gamma * tau;
    for (std::size_t i = 0; i + 1 < n; ++i)
      out[i] = (psi[i] * (1.0 - gt) + tau * a[i]) / (1.0 + gt);
  } else {
    for (std::size_t i = 0; i + 1 < n; ++i)
      out[i] = psi[i] + tau * (a[i] - gamma * psi[i]);
  }
  out[n - 1] = 0.0;
}

// Theta-scheme solve of u_t = L u - c u/r^2 + forcing over dt, with
// homogeneous Dirichlet at the outer node and the origin ghost. Thomas
// algorithm on the n-1 interior unknowns.
void parabolic_solve(std::span<const double> u_old,
                     std::span<const double> forcing, const LaplaceCoeffs& lc,
                     const RadialGrid& g, double dt, double theta, double c,
                     std::span<double> u_new) {
  const std::size_t n = g.size();
  const std::size_t m = n - 1;
  std::vector<double> diag(m), lower(m), upper(m), rhs(m);
  std::vector<double> lap_old(n);
  apply_laplace(lc, u_old, lap_old);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = g.nodes()[i];
    const double zero_order = c / (r * r);
    diag[i] = 1.0 + theta * dt * (lc.di[i] + zero_order);
    lower[i] = -theta * dt * lc.lo[i];
    upper[i] = -theta * dt * lc.up[i];
    rhs[i] = u_old[i] +
             (1.0 - theta) * dt * (lap_old[i] - zero_order * u_old[i]) +
             dt * forcing[i];
  }
  // Forward elimination; the system is strictly diagonally dominant.
  for (std::size_t i = 1; i < m; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  u_new[m - 1] = rhs[m - 1] / diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;)
    u_new[i] = (rhs[i] - upper[i] * u_new[i + 1]) / diag[i];
  u_new[n - 1] = 0.0;
}

void require_finite(const std::vector<double>& x, const char* what) {
  for (double y : x)
    if (!std::isfinite(y))
      fail(ErrorCode::nan_detected,
           std::string(what) +
               " left finite range; the input state is the last finite one");
}

}  // namespace

void validate_scheme(const SchemeConfig& cfg) {
  if (!(cfg.dt > 0.0))
    fail(ErrorCode::invalid_argument, "dt must be positive");
  if (!(cfg.theta >= 0.5 && cfg.theta <= 1.0))
    fail(ErrorCode::invalid_argument, "theta must lie in [1/2, 1]");
  if (!(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 0.9))
    fail(ErrorCode::invalid_argument, "cfl_safety must lie in (0, 0.9]");
  if (!(cfg.r_min_guard >= 0.0))
    fail(ErrorCode::invalid_argument, "r_min_guard must be non-negative");
}

void validate_state(const FieldState& s) {
  if (!s.grid) fail(ErrorCode::invalid_argument, "state has no grid");
  if (s.k < 1) fail(ErrorCode::invalid_argument, "equivariance index k < 1");
  const std::size_t n = s.grid->size();
  for (const auto* f : {&s.phi, &s.phi_t, &s.v, &s.h})
    if (f->size() != n)
      fail(ErrorCode::shape, "field has " + std::to_string(f->size()) +
                                 " samples but grid has " + std::to_string(n) +
                                 " nodes");
  if (!std::isfinite(s.t)) fail(ErrorCode::nan_detected, "time is not finite");
  for (const auto* f : {&s.phi, &s.phi_t, &s.v, &s.h})
    require_finite(*f, "state field");
}

double cfl_limit(const RadialGrid& g, int k) {
  const auto& r = g.nodes();
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double dl = (i == 0) ? r[0] : r[i] - r[i - 1];
    const double dr = (i + 1 < g.size()) ? r[i + 1] - r[i] : dl;
    const double h = std::min(dl, dr);
    const double bound =
        2.0 / std::sqrt(4.0 / (h * h) + double(k) * k / (r[i] * r[i]));
    worst = std::min(worst, bound);
  }
  return worst;
}

namespace detail {

FieldState step_impl(const FieldState& s, const SchemeConfig& cfg,
                     Formulation form, double damping_coeff, bool couple) {
  validate_state(s);
  validate_scheme(cfg);
  const RadialGrid& g = *s.grid;
  const std::size_t n = g.size();
  const double limit = cfg.cfl_safety * cfl_limit(g, s.k);
  if (cfg.dt > limit)
    fail(ErrorCode::cfl, "dt = " + std::to_string(cfg.dt) +
                             " exceeds the stable wave step " +
                             std::to_string(limit));

  const LaplaceCoeffs lc = laplace_coeffs(g);
  const double tau = 0.5 * cfg.dt;

  FieldState out = s;
  out.t = s.t + cfg.dt;

  std::vector<double> a(n), psi_half(n);
  acceleration(s, lc, cfg, form, couple, a);
  half_kick(s.phi_t, a, tau, damping_coeff, cfg.damping, psi_half);

  for (std::size_t i = 0; i + 1 < n; ++i)
    out.phi[i] = s.phi[i] + cfg.dt * psi_half[i];

  if (couple) {
    if (form == Formulation::primal_v) {
      // v is forced by (1/r)(r phi_t)_r = phi_t_r + phi_t/r at the
      // midpoint level.
      std::vector<double> forcing = reconstruct_v_from_h(psi_half, g);
      forcing[n - 1] = 0.0;
      parabolic_solve(s.v, forcing, lc, g, cfg.dt, cfg.theta, 0.0, out.v);
      out.h = reconstruct_h(out.v, g);
    } else {
      // h is forced by phi_t itself and carries the extra -h/r^2 term.
      parabolic_solve(s.h, psi_half, lc, g, cfg.dt, cfg.theta, 1.0, out.h);
      out.v = reconstruct_v_from_h(out.h, g);
    }
  }

  acceleration(out, lc, cfg, form, couple, a);
  half_kick(psi_half, a, tau, damping_coeff, cfg.damping, out.phi_t);

  require_finite(out.phi, "phi");
  require_finite(out.phi_t, "phi_t");
  require_finite(out.v, "v");
  require_finite(out.h, "h");
  return out;
}

}  // namespace detail

FieldState step(const FieldState& s, const SchemeConfig& cfg) {
  return detail::step_impl(s, cfg, detail::Formulation::primal_v, 2.0, true);
}

FieldState step_h_formulation(const FieldState& s, const SchemeConfig& cfg) {
  return detail::step_impl(s, cfg, detail::Formulation::averaged_h, 2.0, true);
}

std::vector<double> reconstruct_h(std::span<const double> v,
                                  const RadialGrid& g) {
  require_shape(v, g);
  std::vector<double> h = g.prefix_integral_rdr(v);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] /= g.nodes()[i];
  return h;
}

std::vector<double> reconstruct_v_from_h(std::span<const double> h,
                                         const RadialGrid& g) {
  require_shape(h, g);
  std::vector<double> dv(g.size());
  radial_derivative(h, g, dv);
  for (std::size_t i = 0; i < g.size(); ++i)
    dv[i] += h[i] / g.nodes()[i];
  return dv;
}

std::vector<std::array<double, 3>> reconstruct_director(
    const FieldState& s, std::span<const double> theta_samples) {
  validate_state(s);
  std::vector<std::array<double, 3>> d;
  d.reserve(s.phi.size() * theta_samples.size());
  for (double phi : s.phi) {
    const double sp = std::sin(phi), cp = std::cos(phi);
    for (double th : theta_samples) {
      const double a = s.k * th;
      d.push_back({sp * std::cos(a), sp * std::sin(a), cp});
    }
  }
  return d;
}

namespace {

constexpr char kMagic[8] = {'P', 'E', 'L', 'S', 'T', 'A', 'T', '1'};

template <typename T>
void put(std::ostream& o, const T& x) {
  o.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T x{};
  in.read(reinterpret_cast<char*>(&x), sizeof(T));
  if (!in) fail(ErrorCode::io, "truncated state snapshot");
  return x;
}

}  // namespace

void save_state(const FieldState& s, std::ostream& out) {
  validate_state(s);
  out.write(kMagic, sizeof(kMagic));
  put(out, std::int32_t(s.k));
  put(out, s.t);
  const GridSpec& sp = s.grid->spec();
  put(out, sp.r_max);
  put(out, std::uint64_t(sp.n));
  put(out, std::int32_t(sp.grading == Grading::geometric ? 1 : 0));
  put(out, sp.ratio);
  put(out, std::uint64_t(s.phi.size()));
  for (const auto* f : {&s.phi, &s.phi_t, &s.v, &s.h})
    out.write(reinterpret_cast<const char*>(f->data()),
              std::streamsize(f->size() * sizeof(double)));
  if (!out) fail(ErrorCode::io, "failed to write state snapshot");
}

FieldState load_state(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorCode::io, "not a recognized state snapshot");
  FieldState s;
  s.k = get<std::int32_t>(in);
  s.t = get<double>(in);
  GridSpec sp;
  sp.r_max = get<double>(in);
  sp.n = std::size_t(get<std::uint64_t>(in));
  sp.grading = get<std::int32_t>(in) ? Grading::geometric : Grading::uniform;
  sp.ratio = get<double>(in);
  s.grid = std::make_shared<RadialGrid>(RadialGrid::build(sp));
  const auto len = std::size_t(get<std::uint64_t>(in));
  if (len != sp.n) fail(ErrorCode::io, "snapshot length disagrees with grid");
  for (auto* f : {&s.phi, &s.phi_t, &s.v, &s.h}) {
    f->resize(len);
    in.read(reinterpret_cast<char*>(f->data()),
            std::streamsize(len * sizeof(double)));
    if (!in) fail(ErrorCode::io, "truncated state snapshot");
  }
  validate_state(s);
  return s;
}

void save_state_file(const FieldState& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  save_state(s, out);
}

FieldState load_state_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  return load_state(in);
}

}  // namespace pel

#include "pel/profiles.hpp"

#include <cmath>
#include <string>

#include "pel/errors.hpp"

namespace pel {

namespace {

// sin I, cos I, and I at s = lambda * r, via the reciprocal branch for
// s > 1 so that s^(2k) never overflows and I stays accurate near pi.
struct Angle {
  double I, sinI, cosI;
};

Angle angle_at(int k, double s) {
  if (s <= 1.0) {
    const double rho = std::pow(s, double(k));
    const double d = 1.0 + rho * rho;
    return {2.0 * std::atan(rho), 2.0 * rho / d, (1.0 - rho * rho) / d};
  }
  const double q = std::pow(s, -double(k));
  const double d = 1.0 + q * q;
  return {M_PI - 2.0 * std::atan(q), 2.0 * q / d, (q * q - 1.0) / d};
}

double cos2_from(const Angle& a) {
  // cos(2I) as a difference of squares; both factors are accurate, so the
  // product carries full absolute precision through the sign change.
  return (a.cosI - a.sinI) * (a.cosI + a.sinI);
}

// Three-point Lagrange differentiation weights.
struct Weights3 {
  double w0, w1, w2;
};

Weights3 d1_weights(double x0, double x1, double x2, double xe) {
  return {(2.0 * xe - x1 - x2) / ((x0 - x1) * (x0 - x2)),
          (2.0 * xe - x0 - x2) / ((x1 - x0) * (x1 - x2)),
          (2.0 * xe - x0 - x1) / ((x2 - x0) * (x2 - x1))};
}

Weights3 d2_weights(double x0, double x1, double x2) {
  return {2.0 / ((x0 - x1) * (x0 - x2)), 2.0 / ((x1 - x0) * (x1 - x2)),
          2.0 / ((x2 - x0) * (x2 - x1))};
}

// First (and optionally second) derivative of f on the grid, with a ghost
// value f(0) = 0 at the origin and a one-sided stencil at the outer node.
void differentiate(std::span<const double> f, const RadialGrid& g,
                   std::vector<double>& df, std::vector<double>* d2f) {
  const auto& r = g.nodes();
  const std::size_t n = g.size();
  df.resize(n);
  if (d2f) d2f->resize(n);

  {
    const Weights3 w = d1_weights(0.0, r[0], r[1], r[0]);
    df[0] = w.w1 * f[0] + w.w2 * f[1];
    if (d2f) {
      const Weights3 v = d2_weights(0.0, r[0], r[1]);
      (*d2f)[0] = v.w1 * f[0] + v.w2 * f[1];
    }
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Weights3 w = d1_weights(r[i - 1], r[i], r[i + 1], r[i]);
    df[i] = w.w0 * f[i - 1] + w.w1 * f[i] + w.w2 * f[i + 1];
    if (d2f) {
      const Weights3 v = d2_weights(r[i - 1], r[i], r[i + 1]);
      (*d2f)[i] = v.w0 * f[i - 1] + v.w1 * f[i] + v.w2 * f[i + 1];
    }
  }
  {
    const std::size_t i = n - 1;
    const Weights3 w = d1_weights(r[i - 2], r[i - 1], r[i], r[i]);
    df[i] = w.w0 * f[i - 2] + w.w1 * f[i - 1] + w.w2 * f[i];
    if (d2f) {
      const Weights3 v = d2_weights(r[i - 2], r[i - 1], r[i]);
      (*d2f)[i] = v.w0 * f[i - 2] + v.w1 * f[i - 1] + v.w2 * f[i];
    }
  }
}

}  // namespace

void validate(const ProfileParams& p) {
  if (p.k < 1)
    fail(ErrorCode::invalid_argument,
         "equivariance index k must be >= 1, got " + std::to_string(p.k));
  if (!(p.lambda > 0.0))
    fail(ErrorCode::invalid_argument,
         "profile scale lambda must be positive, got " +
             std::to_string(p.lambda));
}

double eval_I(const ProfileParams& p, double r) {
  return angle_at(p.k, p.lambda * r).I;
}

double eval_sinI(const ProfileParams& p, double r) {
  return angle_at(p.k, p.lambda * r).sinI;
}

double eval_cosI(const ProfileParams& p, double r) {
  return angle_at(p.k, p.lambda * r).cosI;
}

double eval_cos2I(const ProfileParams& p, double r) {
  return cos2_from(angle_at(p.k, p.lambda * r));
}

double eval_J(const ProfileParams& p, double r) {
  return p.k * angle_at(p.k, p.lambda * r).sinI;
}

double eval_rdJ(const ProfileParams& p, double r) {
  const Angle a = angle_at(p.k, p.lambda * r);
  return double(p.k) * p.k * a.sinI * a.cosI;
}

double eval_rdrdJ(const ProfileParams& p, double r) {
  const Angle a = angle_at(p.k, p.lambda * r);
  return double(p.k) * p.k * p.k * a.sinI * cos2_from(a);
}

double eval_r2J(const ProfileParams& p, double r) {
  const double s = p.lambda * r;
  return s * s * p.k * angle_at(p.k, s).sinI;
}

double eval_rd_r2J(const ProfileParams& p, double r) {
  // s d/ds (s^2 J) = s^2 (2 J + s dJ/ds) at s = lambda r.
  const double s = p.lambda * r;
  const Angle a = angle_at(p.k, s);
  const double J = p.k * a.sinI;
  const double rdJ = double(p.k) * p.k * a.sinI * a.cosI;
  return s * s * (2.0 * J + rdJ);
}

double eval_V(const ProfileParams& p, double r) {
  const double c = angle_at(p.k, p.lambda * r).cosI;
  return (double(p.k) * p.k + 1.0 + 2.0 * p.k * c) / (r * r);
}

namespace {

template <typename F>
std::vector<double> sample(const RadialGrid& g, F&& f) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.nodes()[i]);
  return out;
}

}  // namespace

std::vector<double> sample_I(const ProfileParams& p, const RadialGrid& g) {
  validate(p);
  return sample(g, [&](double r) { return eval_I(p, r); });
}

std::vector<double> sample_J(const ProfileParams& p, const RadialGrid& g) {
  validate(p);
  return sample(g, [&](double r) { return eval_J(p, r); });
}

std::vector<double> sample_rdJ(const ProfileParams& p, const RadialGrid& g) {
  validate(p);
  return sample(g, [&](double r) { return eval_rdJ(p, r); });
}

std::vector<double> sample_r2J(const ProfileParams& p, const RadialGrid& g) {
  validate(p);
  return sample(g, [&](double r) { return eval_r2J(p, r); });
}

std::vector<double> sample_Jdot(const ProfileParams& p, double lambda_dot,
                                const RadialGrid& g) {
  validate(p);
  const double c = lambda_dot / p.lambda;
  return sample(g, [&](double r) { return c * eval_rdJ(p, r); });
}

std::vector<double> sample_Jddot(const ProfileParams& p, double lambda_dot,
                                 double lambda_ddot, const RadialGrid& g) {
  validate(p);
  const double mu = lambda_dot / p.lambda;
  const double c1 = lambda_ddot / p.lambda - mu * mu;
  const double c2 = mu * mu;
  return sample(g, [&](double r) {
    return c1 * eval_rdJ(p, r) + c2 * eval_rdrdJ(p, r);
  });
}

std::vector<double> apply_A(const ProfileParams& p, std::span<const double> f,
                            const RadialGrid& g) {
  validate(p);
  require_shape(f, g);
  std::vector<double> df;
  differentiate(f, g, df, nullptr);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.nodes()[i];
    out[i] = -df[i] + (p.k / r) * eval_cosI(p, r) * f[i];
  }
  return out;
}

std::vector<double> apply_A_star(const ProfileParams& p,
                                 std::span<const double> f,
                                 const RadialGrid& g) {
  validate(p);
  require_shape(f, g);
  std::vector<double> df;
  differentiate(f, g, df, nullptr);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.nodes()[i];
    out[i] = df[i] + (1.0 + p.k * eval_cosI(p, r)) * f[i] / r;
  }
  return out;
}

std::vector<double> apply_H(const ProfileParams& p, std::span<const double> f,
                            const RadialGrid& g) {
  validate(p);
  require_shape(f, g);
  std::vector<double> df, d2f;
  differentiate(f, g, df, &d2f);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.nodes()[i];
    const double pot = double(p.k) * p.k / (r * r) * eval_cos2I(p, r);
    out[i] = -d2f[i] - df[i] / r + pot * f[i];
  }
  return out;
}

std::vector<double> apply_H_tilde(const ProfileParams& p,
                                  std::span<const double> f,
                                  const RadialGrid& g) {
  validate(p);
  require_shape(f, g);
  std::vector<double> df, d2f;
  differentiate(f, g, df, &d2f);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.nodes()[i];
    out[i] = -d2f[i] - df[i] / r + eval_V(p, r) * f[i];
  }
  return out;
}

ProfileConstants profile_constants(int k, const RadialGrid& oracle_grid) {
  if (k < 3)
    fail(ErrorCode::unsupported,
         "<I, J> diverges for k < 3; got k = " + std::to_string(k));
  const ProfileParams p{k, 1.0};
  const std::size_t n = oracle_grid.size();
  std::vector<double> j2(n), ij(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = oracle_grid.nodes()[i];
    const double J = eval_J(p, r);
    j2[i] = J * J;
    ij[i] = eval_I(p, r) * J;
  }
  ProfileConstants c;
  c.c0_const = oracle_grid.integral_rdr(j2);
  c.jr2j_inner = oracle_grid.weighted_integral(j2, 2);
  c.ij_inner = oracle_grid.integral_rdr(ij);
  c.b_coeff = 0.25;
  c.a_coeff = -c.jr2j_inner / (4.0 * c.c0_const);
  return c;
}

std::vector<double> eval_w0(const ProfileParams& p, double lambda_dot,
                            const ProfileConstants& c, const RadialGrid& g) {
  validate(p);
  const double pref = lambda_dot * lambda_dot / std::pow(p.lambda, 4);
  return sample(g, [&](double r) {
    return pref * (c.a_coeff * eval_J(p, r) + c.b_coeff * eval_r2J(p, r));
  });
}

std::vector<double> eval_w0_dot(const ProfileParams& p, double lambda_dot,
                                double lambda_ddot, const ProfileConstants& c,
                                const RadialGrid& g) {
  validate(p);
  const double l = p.lambda;
  const double pref = lambda_dot * lambda_dot / std::pow(l, 4);
  const double dpref = 2.0 * lambda_dot * lambda_ddot / std::pow(l, 4) -
                       4.0 * std::pow(lambda_dot, 3) / std::pow(l, 5);
  const double scale_rate = lambda_dot / l;
  return sample(g, [&](double r) {
    const double shape = c.a_coeff * eval_J(p, r) + c.b_coeff * eval_r2J(p, r);
    const double shape_dot =
        c.a_coeff * eval_rdJ(p, r) + c.b_coeff * eval_rd_r2J(p, r);
    return dpref * shape + pref * scale_rate * shape_dot;
  });
}

std::vector<double> nonlinearity_N(const ProfileParams& p,
                                   std::span<const double> u,
                                   const RadialGrid& g) {
  validate(p);
  require_shape(u, g);
  const double k2 = double(p.k) * p.k;
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.nodes()[i];
    const Angle a = angle_at(p.k, p.lambda * r);
    const double sin2I = 2.0 * a.sinI * a.cosI;
    const double cos2I = cos2_from(a);
    const double su = std::sin(u[i]);
    // 1 - cos(2u) = 2 sin^2(u), exact to rounding for all u.
    const double one_minus_cos2u = 2.0 * su * su;
    // u - sin(2u)/2 cancels to O(u^3); switch to its series for small u.
    double cubic;
    if (std::abs(u[i]) < 1e-4) {
      const double u2 = u[i] * u[i];
      cubic = u[i] * u2 * (2.0 / 3.0 - (2.0 / 15.0) * u2);
    } else {
      cubic = u[i] - 0.5 * std::sin(2.0 * u[i]);
    }
    out[i] =
        (k2 / (r * r)) * (0.5 * sin2I * one_minus_cos2u + cos2I * cubic);
  }
  return out;
}

}  // namespace pel

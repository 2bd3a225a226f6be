#pragma once

#include <span>
#include <vector>

#include "pel/radial_grid.hpp"

namespace pel {

// Equivariance index and scale of the stationary profile
// I_lambda(r) = 2 atan((lambda r)^k).
struct ProfileParams {
  int k = 4;
  double lambda = 1.0;
};

// Throws ErrorCode::invalid_argument unless k >= 1 and lambda > 0.
void validate(const ProfileParams& p);

// Inner products of the profile tangent J = r dI/dr with itself and with
// the r^2 weight, plus the coefficients (a, b) of the generator-direction
// corrector w0. All evaluated at lambda = 1.
struct ProfileConstants {
  double c0_const = 0.0;    // <J, J>
  double a_coeff = 0.0;     // -<J, r^2 J> / (4 <J, J>)
  double b_coeff = 0.25;
  double ij_inner = 0.0;    // <I, J>
  double jr2j_inner = 0.0;  // <J, r^2 J>
};

// Pointwise closed-form evaluations at radius r >= 0. All are total on
// valid inputs; large lambda*r is handled by a reciprocal branch so no
// intermediate overflows.
double eval_I(const ProfileParams& p, double r);      // 2 atan((lambda r)^k)
double eval_sinI(const ProfileParams& p, double r);
double eval_cosI(const ProfileParams& p, double r);
double eval_cos2I(const ProfileParams& p, double r);
double eval_J(const ProfileParams& p, double r);      // k sin(I)
double eval_rdJ(const ProfileParams& p, double r);    // (r d/dr J)(lambda r)
double eval_rdrdJ(const ProfileParams& p, double r);  // (r d/dr)^2 J at lambda r
double eval_r2J(const ProfileParams& p, double r);    // (lambda r)^2 J(lambda r)
double eval_rd_r2J(const ProfileParams& p, double r); // r d/dr of eval_r2J
double eval_V(const ProfileParams& p, double r);      // (k^2+1)/r^2 + (2k/r^2) cos I

// Grid-sampled versions of the above.
std::vector<double> sample_I(const ProfileParams& p, const RadialGrid& g);
std::vector<double> sample_J(const ProfileParams& p, const RadialGrid& g);
std::vector<double> sample_rdJ(const ProfileParams& p, const RadialGrid& g);
std::vector<double> sample_r2J(const ProfileParams& p, const RadialGrid& g);

// Time derivatives of J(lambda(t) r) along a modulation trajectory:
//   dJ/dt   = (lambda_dot/lambda) (r d/dr J)(lambda r)
//   d2J/dt2 = (lambda_ddot/lambda - lambda_dot^2/lambda^2) (r d/dr J)
//           + (lambda_dot/lambda)^2 (r d/dr)^2 J.
std::vector<double> sample_Jdot(const ProfileParams& p, double lambda_dot,
                                const RadialGrid& g);
std::vector<double> sample_Jddot(const ProfileParams& p, double lambda_dot,
                                 double lambda_ddot, const RadialGrid& g);

// Linearized first-order factor A = -d/dr + (k/r) cos I and its formal
// adjoint A* = d/dr + 1/r + (k/r) cos I, applied with second-order finite
// differences. Fields are assumed to vanish at r = 0 (equivariant trace);
// the outer node uses a one-sided stencil.
std::vector<double> apply_A(const ProfileParams& p, std::span<const double> f,
                            const RadialGrid& g);
std::vector<double> apply_A_star(const ProfileParams& p,
                                 std::span<const double> f,
                                 const RadialGrid& g);

// Second-order operators: H f = -f'' - f'/r + (k^2/r^2) cos(2I) f and its
// conjugate H~ f = -f'' - f'/r + V f with V = eval_V.
std::vector<double> apply_H(const ProfileParams& p, std::span<const double> f,
                            const RadialGrid& g);
std::vector<double> apply_H_tilde(const ProfileParams& p,
                                  std::span<const double> f,
                                  const RadialGrid& g);

// Quadrature of the five profile constants at lambda = 1 on a refined
// oracle grid. Requires k >= 3 so that <I, J> converges; smaller k throws
// ErrorCode::unsupported.
ProfileConstants profile_constants(int k, const RadialGrid& oracle_grid);

// Generator-direction corrector
//   w0 = (lambda_dot^2 / lambda^4) (a J_lambda + b (r^2 J)_lambda)
// and its exact time derivative along (lambda, lambda_dot, lambda_ddot).
std::vector<double> eval_w0(const ProfileParams& p, double lambda_dot,
                            const ProfileConstants& c, const RadialGrid& g);
std::vector<double> eval_w0_dot(const ProfileParams& p, double lambda_dot,
                                double lambda_ddot, const ProfileConstants& c,
                                const RadialGrid& g);

// Nonlinear remainder of the wave-map tension around I_lambda:
//   N(u) = (k^2 sin(2I)/(2 r^2)) (1 - cos 2u)
//        + (k^2 cos(2I)/r^2) (u - sin(2u)/2),
// evaluated in cancellation-free form (series branch for small u).
std::vector<double> nonlinearity_N(const ProfileParams& p,
                                   std::span<const double> u,
                                   const RadialGrid& g);

}  // namespace pel

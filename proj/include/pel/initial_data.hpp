#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pel/evolution.hpp"
#include "pel/profiles.hpp"
#include "pel/radial_grid.hpp"

namespace pel {

// Perturbation shapes for the focusing data. `rational` is the default
// algebraically decaying bump, `scaled_generator` is J(lambda0 r) itself
// (useful because the orthogonal projection annihilates it), and
// `random_rational` is a seeded superposition of rational bumps.
enum class BumpFamily { zero, rational, scaled_generator, random_rational };

struct InitialDataSpec {
  double epsilon = 0.5;
  // Smallness constant of the weighted data bound; must satisfy
  // c_small^2 >= epsilon.
  double c_small = 0.75;
  int k = 4;
  BumpFamily u0_family = BumpFamily::rational;
  double u0_amplitude = 1e-3;
  BumpFamily g0_family = BumpFamily::rational;
  double g0_amplitude = 1e-3;
  std::uint32_t seed = 0;
};

// Throws ErrorCode::invalid_argument unless epsilon > 0,
// c_small^2 >= epsilon, and k >= 4.
void validate(const InitialDataSpec& spec);

// Scale seed handed to the modulation tracker: lambda(0) = epsilon^{-4}
// and lambda_dot(0) = (C0/pi) epsilon^{-7} with C0 = <J, J> = 2 pi /
// sin(pi/k).
struct ModulationSeed {
  double lambda0 = 0.0;
  double lambda_dot0 = 0.0;
};

struct InitialBuild {
  FieldState state;  // t = 0; v and h identically zero
  ModulationSeed seed;
  // Weighted data functional
  //   sum_{i=0,1} int (1+r^2)^{1-i} [ (d^{i+1} u0)^2 + (d^i u0)^2/r^2
  //                                   + (d^i g0)^2 + g0^2/r^2 ] r dr
  // against its bound c_small^2 epsilon^2. A violation flags the build
  // but does not abort it.
  double smallness = 0.0;
  double smallness_bound = 0.0;
  bool smallness_ok = true;
  // Multiple of J(lambda0 r) removed from the raw bump by the
  // orthogonal projection <u0, J(lambda0 .)> = 0.
  double projection_coeff = 0.0;
  // E0[u, v](0) = int [phi_t^2 + (u0')^2 + k^2 u0^2/r^2] r dr (v = 0),
  // divided by epsilon^2; recorded, never asserted against a constant.
  double e0_over_eps2 = 0.0;
  // Sampled pieces with their analytic radial derivatives.
  std::vector<double> u0, du0, d2u0, g0, dg0;
};

// Focusing data: phi(.,0) = u0 + I(lambda0 r), phi_t(.,0) =
// lambda1 J(lambda0 r) + g0, v = h = 0, where lambda0 = epsilon^{-4},
// lambda1 = lambda_dot(0)/lambda0, and u0 is the requested bump projected
// against J(lambda0 .) in the discrete r dr inner product. Derivatives of
// the default families are analytic. Throws ErrorCode::resolution unless
// the grid puts at least 16 nodes inside r < 1/lambda0.
InitialBuild build_initial(const InitialDataSpec& spec,
                           std::shared_ptr<const RadialGrid> grid);

// The weighted data functional recomputed from a t = 0 state by
// differencing: u0 = phi - I(lambda0 .), g0 = phi_t - lambda1 J(lambda0 .),
// derivatives by second-order stencils. Agrees with InitialBuild.smallness
// up to differencing error.
double smallness_report(const FieldState& state, const InitialDataSpec& spec,
                        const RadialGrid& g);

}  // namespace pel

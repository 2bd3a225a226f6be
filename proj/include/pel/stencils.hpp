#pragma once

#include <span>
#include <vector>

#include "pel/radial_grid.hpp"

namespace pel {

// Second-order Lagrange derivatives of a sampled field. Every evolved
// field in this code vanishes at r = 0, so the origin stencil uses a
// ghost value 0 there; the outer node is one-sided.
std::vector<double> sampled_d1(std::span<const double> f, const RadialGrid& g);
std::vector<double> sampled_d2(std::span<const double> f, const RadialGrid& g);

}  // namespace pel

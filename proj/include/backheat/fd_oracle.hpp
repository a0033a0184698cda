#pragma once

// Crank-Nicolson finite differences for u_t = p(t) u_xx with homogeneous
// Dirichlet ends. Serves as an independent check on the spectral propagator.

#include "backheat/spectral_core.hpp"

#include <span>
#include <vector>

namespace backheat {

/// M interior nodes x_k = k dx, k = 1..M, with dx = L / (M + 1).
struct FdGrid {
  double length;
  int interior;

  FdGrid(double length, int interior);
  double dx() const { return length / (interior + 1); }
  std::vector<double> nodes() const;
};

/// Advances interior values from time t0 to t1 in `steps` equal CN steps,
/// with p sampled at step midpoints. t0 == t1 returns the input unchanged.
std::vector<double> fd_evolve(const FdGrid& grid, std::span<const double> initial,
                              const DiffusionProfile& profile, double t0, double t1, int steps);

/// Discrete L2 norm sqrt(dx * sum v_k^2).
double fd_norm(const FdGrid& grid, std::span<const double> values);

/// Discrete L2 distance between two sets of grid values.
double oracle_gap(const FdGrid& grid, std::span<const double> a, std::span<const double> b);

/// Samples the spectral field on the grid and returns the discrete L2 gap.
double oracle_gap(const SpectralField& spectral, const FdGrid& grid,
                  std::span<const double> fd_values);

}  // namespace backheat

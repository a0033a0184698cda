#include "backheat/fd_oracle.hpp"

#include "backheat/errors.hpp"

#include <cmath>

namespace backheat {

using detail::require;

FdGrid::FdGrid(double len, int m) : length(len), interior(m) {
  require(len > 0.0, "fd grid: length must be positive");
  require(m >= 64, "fd grid: need at least 64 interior points");
}

std::vector<double> FdGrid::nodes() const {
  std::vector<double> xs(interior);
  for (int k = 0; k < interior; ++k) xs[k] = (k + 1) * dx();
  return xs;
}

namespace {

// Solves the constant-coefficient tridiagonal system
//   off * x[k-1] + diag * x[k] + off * x[k+1] = rhs[k]
// in place by forward elimination and back substitution.
void thomas_solve(double diag, double off, std::vector<double>& rhs, std::vector<double>& work) {
  const std::size_t n = rhs.size();
  work.resize(n);
  work[0] = off / diag;
  rhs[0] /= diag;
  for (std::size_t k = 1; k < n; ++k) {
    const double denom = diag - off * work[k - 1];
    work[k] = off / denom;
    rhs[k] = (rhs[k] - off * rhs[k - 1]) / denom;
  }
  for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= work[k] * rhs[k + 1];
}

}  // namespace

std::vector<double> fd_evolve(const FdGrid& grid, std::span<const double> initial,
                              const DiffusionProfile& profile, double t0, double t1, int steps) {
  require(initial.size() == static_cast<std::size_t>(grid.interior),
          "fd_evolve: initial data does not match the grid");
  require(t0 >= 0.0 && t0 <= t1, "fd_evolve: need 0 <= t0 <= t1");
  std::vector<double> u(initial.begin(), initial.end());
  if (t0 == t1) return u;
  require(steps >= 1, "fd_evolve: need at least one step");

  const double dt = (t1 - t0) / steps;
  const double inv_dx2 = 1.0 / (grid.dx() * grid.dx());
  const std::size_t n = u.size();
  std::vector<double> rhs(n), work;
  for (int s = 0; s < steps; ++s) {
    const double r = 0.5 * dt * profile.value(t0 + (s + 0.5) * dt) * inv_dx2;
    for (std::size_t k = 0; k < n; ++k) {
      const double left = k > 0 ? u[k - 1] : 0.0;
      const double right = k + 1 < n ? u[k + 1] : 0.0;
      rhs[k] = (1.0 - 2.0 * r) * u[k] + r * (left + right);
    }
    thomas_solve(1.0 + 2.0 * r, -r, rhs, work);
    u.swap(rhs);
  }
  return u;
}

double fd_norm(const FdGrid& grid, std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(grid.dx() * s);
}

double oracle_gap(const FdGrid& grid, std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "oracle_gap: value arrays differ in length");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(grid.dx() * s);
}

double oracle_gap(const SpectralField& spectral, const FdGrid& grid,
                  std::span<const double> fd_values) {
  require(std::abs(spectral.basis.length() - grid.length) <= 1e-12 * grid.length,
          "oracle_gap: spectral field and grid live on different domains");
  const std::vector<double> xs = grid.nodes();
  return oracle_gap(grid, sample(spectral, xs), fd_values);
}

}  // namespace backheat

#pragma once

// Global backward solver: capped spectral inversion of the forward propagator
// with the cap chosen a priori from norm bounds on the initial state.

#include "backheat/spectral_core.hpp"

#include <optional>
#include <span>

namespace backheat {

/// A(x) = e^x / (1 + 2x), minimal at x = 1/2 with value sqrt(e)/2.
double eval_A(double x);
/// B(x) = sqrt(x) e^x.
double eval_B(double x);
/// log B(x) = ln(x)/2 + x, finite far beyond the range of eval_B.
double log_B(double x);

/// Inverse of B, |B(x) - y| <= 1e-12 y.
double invert_B(double y);
/// Inverse of B from ln y; used when y itself overflows.
double invert_B_log(double log_y);

/// The x >= max(lower, 1/2) with A(x) = beta. Rejects beta below A at that floor.
double invert_A_increasing(double beta, double lower);

struct Priors {
  double l2;
  double h01;
};

struct FilterSelection {
  std::optional<double> alpha;
  double zeta = 0.0;
  bool gate_zero = false;
  /// sqrt((1+zeta) p2 tau) h01 / sqrt(ln(sqrt(2 zeta lambda1 p2 tau) l2 / delta)); +inf
  /// when the gate fires with a non-positive logarithm.
  double bound = 0.0;

  // Diagnostics.
  double x_bar = 0.0;  // lambda_bar p2 tau
  double theta = 0.0;  // 1 / (1 + 2 x_bar)
  double log_argument = 0.0;
  double gate_threshold = 0.0;
};

/// zeta = 1 / (2 lambda1 p2 tau).
double default_zeta(double lambda1, double p2, double tau);

/// Chooses the filter cap for data at time tau with noise effective_delta.
/// Throws InputError for non-positive inputs, for an invalid increasing
/// branch, or for a log argument <= 1 outside the gate.
FilterSelection select_alpha(double tau, const DiffusionProfile& profile, double lambda1,
                             const Priors& priors, double effective_delta,
                             std::optional<double> zeta = std::nullopt);

/// Gains min{exp(lambda_i int_0^tau p), alpha} applied mode by mode.
SpectralField apply_filter(const SpectralField& observed, double alpha, double tau,
                           const DiffusionProfile& profile);

struct GlobalResult {
  SpectralField g;
  FilterSelection selection;
};

/// Reconstruction from a spectral observation of u(tau) on the whole domain.
GlobalResult global_backward(const SpectralField& observed, double tau,
                             const DiffusionProfile& profile, const Priors& priors, double delta,
                             std::optional<double> zeta = std::nullopt);

/// Same, from samples on a uniform grid covering [0, L].
GlobalResult global_backward(std::span<const double> xs, std::span<const double> values,
                             const EigenBasis& basis, double tau, const DiffusionProfile& profile,
                             const Priors& priors, double delta,
                             std::optional<double> zeta = std::nullopt);

/// The two halves of the a priori error estimate, bounded separately.
struct ErrorSplit {
  double noise_bound;  // alpha * delta, dominates |g - g_exact|
  double sup_F;        // sup over x >= lambda1 p2 tau of max(0, 1 - alpha e^-x) / sqrt(x)
  double bias_bound;   // sup_F * sqrt(p2 tau) * h01, dominates |u0 - g_exact|
};

ErrorSplit error_split(double alpha, double delta, double tau, const DiffusionProfile& profile,
                       double lambda1, double h01);

/// Exact inversion on modes 1..cutoff, zero above.
SpectralField truncation_baseline(const SpectralField& observed, int cutoff, double tau,
                                  const DiffusionProfile& profile);

struct CutoffChoice {
  int cutoff;
  /// e^{lambda_c int_0^tau p} delta + h01 / sqrt(lambda_{c+1}).
  double bound;
};

/// Cutoff minimizing the baseline's a priori bound.
CutoffChoice choose_cutoff(const EigenBasis& basis, double tau, const DiffusionProfile& profile,
                           double delta, double h01);
double cutoff_bound(const EigenBasis& basis, int cutoff, double tau,
                    const DiffusionProfile& profile, double delta, double h01);

}  // namespace backheat

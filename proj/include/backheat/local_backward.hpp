#pragma once

// Reconstruction of u(0) from a noisy snapshot of u(T) on a subinterval:
// a bank of impulse controls transfers the local data into full-domain data
// for u(3T), which is then inverted by the filtered global solver.

#include "backheat/control.hpp"
#include "backheat/filtering.hpp"
#include "backheat/observability.hpp"
#include "backheat/spectral_core.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace backheat {

enum class ZetaMode { transfer, standard };

const char* to_string(ZetaMode mode);
/// Accepts "transfer" and "default".
ZetaMode parse_zeta_mode(const std::string& name);

struct PipelineConfig {
  double T = 0.0;
  int n_bank = 32;
  ObservabilityConstants constants;
  Priors priors{1.0, 1.0};
  ZetaMode zeta_mode = ZetaMode::transfer;
  /// Multiplies the control weight k. Values other than 1 void the guarantees.
  double k_scale = 1.0;
  /// Replace the a priori noise transfer by one measured on the solved bank,
  /// plus the contribution of modes beyond the bank.
  bool certify_bank = true;
  int threads = 1;
  SolverKind solver = SolverKind::cg;
};

/// ln eps with eps = (c4 c3 e^{c3/T} delta / l2)^{1/(1+c4)}.
double select_epsilon_log(double delta, double T, const CChain& chain, double l2);
double select_epsilon(double delta, double T, double c3, double c4, double l2);

/// sqrt(sum_{i<=n} exp(-2 lambda_i int_{2T}^{3T} p)).
double tail_prefactor(const EigenBasis& basis, const DiffusionProfile& profile, double T, int n);

/// S (eps l2 + c3 e^{c3/T} eps^{-c4} delta) with S = tail_prefactor(basis, ..., N).
double effective_delta_3T(double delta, double epsilon, double T, const DiffusionProfile& profile,
                          const EigenBasis& basis, double l2, const CChain& chain);

/// Coefficients of the surrogate for u(3T):
///   fbar_i = -exp(-lambda_i int_{2T}^{3T} p) int_omega h_i f,  i <= bank size,
/// with the integral by quadrature of the samples (xs, values) on omega.
SpectralField assemble_fbar(const std::vector<ControlSolution>& bank, std::span<const double> xs,
                            std::span<const double> values, const EigenBasis& basis,
                            const DiffusionProfile& profile, double T);

struct BankStats {
  bool solved = false;
  double max_psi = 0.0;
  double max_h = 0.0;
  double max_identity_residual = 0.0;
  int surrogate_failures = 0;
  int dense_fallbacks = 0;
};

struct ReconstructionReport {
  explicit ReconstructionReport(SpectralField g0) : g(std::move(g0)) {}

  SpectralField g;
  double delta = 0.0;
  double epsilon = 0.0;
  double log_k = 0.0;
  double tail_prefactor = 0.0;
  double formula_delta = 0.0;    // a priori noise level at 3T
  double effective_delta = 0.0;  // level handed to the global solver
  FilterSelection selection;
  double bound = 0.0;
  std::optional<double> error;
  BankStats bank;
};

/// Runs the pipeline on samples of u(T) over omega with noise level delta.
/// `truth`, when known, fills the error field.
ReconstructionReport local_reconstruct(std::span<const double> xs, std::span<const double> values,
                                       double delta, const EigenBasis& basis,
                                       const DiffusionProfile& profile, const Subdomain& omega,
                                       const PipelineConfig& config,
                                       const SpectralField* truth = nullptr);

}  // namespace backheat

#pragma once

// Explicit observability constants for the heat equation on an interval with
// a ball-shaped observation window, the constant chain fed to the control
// step, and empirical checks of the resulting inequalities.

#include "backheat/spectral_core.hpp"

#include <cstdint>
#include <string>

namespace backheat {

enum class ConstantsMode { closed_form, empirical };

const char* to_string(ConstantsMode mode);
ConstantsMode parse_constants_mode(const std::string& name);

/// Quantities that can overflow are carried as natural logarithms; the plain
/// fields hold exp(log) and become +inf past the double range.
struct CChain {
  double log_c1;
  double c1;
  double c2;
  double log_c3;
  double c3;
  double c4;
};

struct ObservabilityConstants {
  ConstantsMode mode = ConstantsMode::closed_form;
  double C0 = 0.0;
  double C1 = 0.0;
  double xi = 0.5;
  double ell = 0.0;
  double S_ell = 0.0;
  double log_K = 0.0;
  double K = 0.0;
  double mu = 0.0;
  CChain chain{};
};

/// c1 = max{mu K^{2/mu} (1-mu)^{(1-mu)/mu}, 2K/mu}, c2 = (1-mu)/mu,
/// c3 = max{sqrt(c1), c1/2}, c4 = c2, in log space.
CChain derive_c_chain(double log_K, double mu);

/// Constants for the window (x0 - r, x0 + r) of an interval centered at x0.
/// Rejects r outside (0, R), violated smallness R^2 < 2 p1^2 / |p'| and C0 >= 1.
ObservabilityConstants constants_convex(const DomainSpec& domain, double r,
                                        const DiffusionProfile& profile, double xi = 0.5);

struct InequalityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double log_lhs = 0.0;
  double log_rhs = 0.0;
  bool applicable = true;
  bool holds = false;
  std::string note;
};

/// |v(T)| <= K e^{K/T} |v(T)|_omega^mu |v(0)|^{1-mu}, compared in log space.
InequalityReport holder_check(const SpectralField& u0, double T, const DiffusionProfile& profile,
                              const ObservabilityConstants& constants,
                              const Eigen::MatrixXd& gram);

/// |u0| <= C sqrt(1 + T + 1/T) |u0|_{H1_0} / sqrt(ln(|u0| / |u(T)|_omega)) with
/// C = sqrt(max{p2/mu, K/(mu lambda1)}). Not applicable when |u(T)|_omega >= |u0|.
InequalityReport appendix_stability_check(const SpectralField& u0, double T,
                                          const DiffusionProfile& profile,
                                          const ObservabilityConstants& constants,
                                          const Eigen::MatrixXd& gram);

/// |u0| <= exp(p2 T |u0|_{H1_0}^2 / |u0|^2) |u(T)|.
InequalityReport direct_backward_check(const SpectralField& u0, double T,
                                       const DiffusionProfile& profile);

struct EmpiricalFit {
  double mu;
  double log_P;  // max over samples of log|v(T)| - mu log|v(T)|_omega - (1-mu) log|v(0)|
  double slope;  // unclamped least-squares slope
  int samples;
};

/// Fits the Holder exponent on seeded random fields with decay in [2, 4] and
/// takes the worst-case residual as the prefactor. A diagnostic, not a
/// certified bound.
EmpiricalFit fit_holder(const EigenBasis& basis, double T, const DiffusionProfile& profile,
                        const Eigen::MatrixXd& gram, int samples, std::uint64_t seed);

/// Solves K e^{K/T} = P for K and completes the constant chain.
ObservabilityConstants fit_empirical(const EigenBasis& basis, double T,
                                     const DiffusionProfile& profile,
                                     const Eigen::MatrixXd& gram, int samples,
                                     std::uint64_t seed);

}  // namespace backheat

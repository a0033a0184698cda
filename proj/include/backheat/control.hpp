#pragma once

// Approximate controllability by one impulse at time T: minimize
//   J(x) = (k^2/2) (D_T x)^T G (D_T x) + (eps^2/2) |x|^2 - phi0^T D_2T x
// over N-mode coefficient vectors, then h = -k^2 Phi(T) restricted to omega.
//
// The normal equations (k^2 D G D + eps^2 I) c = D_2T phi0 are solved in the
// rescaled unknown z = k^2 D_T c, which satisfies
//   (G + tau^2 D_T^-2) z = E phi0,   tau = eps / k,  E = D_{T->2T},
// so that the control coefficients b = -G z never involve k^2 explicitly.

#include "backheat/observability.hpp"
#include "backheat/spectral_core.hpp"

#include <Eigen/Cholesky>

#include <optional>
#include <vector>

namespace backheat {

struct ControlSetup {
  EigenBasis basis;
  DiffusionProfile profile;
  double T;
  Eigen::MatrixXd gram;
  double eps;
  double log_k;

  double k() const;
};

/// ln k for k^2 = c1 e^{c1/T} eps^{-2 c2}; +inf when c1/T overflows.
double control_log_k(const CChain& chain, double T, double eps);

ControlSetup make_control_setup(const EigenBasis& basis, const DiffusionProfile& profile, double T,
                                const Subdomain& omega, double eps, double log_k);

struct ControlSystemMatrices {
  Eigen::MatrixXd M;
  Eigen::VectorXd rhs_diag;  // rhs(phi0) = rhs_diag .* phi0
};

/// The literal M = k^2 D_T G D_T + eps^2 I; requires a finite k.
ControlSystemMatrices assemble_control_system(const ControlSetup& setup);

double control_objective(const ControlSetup& setup, const Eigen::VectorXd& phi0,
                         const Eigen::VectorXd& x);
Eigen::VectorXd control_gradient(const ControlSetup& setup, const Eigen::VectorXd& phi0,
                                 const Eigen::VectorXd& x);

enum class SolverKind { cg, dense };

struct ControlSolution {
  Eigen::VectorXd c;    // minimizer Phi_0
  Eigen::VectorXd z;    // k^2 D_T c
  Eigen::VectorXd b;    // b_j = int_omega h e_j = -(G z)_j
  Eigen::VectorXd psi;  // D_2T phi0 + D_T b
  double h_norm_omega = 0.0;
  double identity_residual = 0.0;  // |psi - eps^2 c| / |psi|
  int cg_iterations = 0;
  bool cg_converged = false;
  bool dense_fallback = false;
  int frozen_modes = 0;
};

/// Factorizes the rescaled system once; solves for any phi0.
class ControlSystem {
public:
  explicit ControlSystem(ControlSetup setup);

  const ControlSetup& setup() const { return setup_; }
  ControlSolution solve(const Eigen::VectorXd& phi0, SolverKind kind = SolverKind::cg) const;

private:
  Eigen::VectorXd apply(const Eigen::VectorXd& z) const;
  Eigen::VectorXd dense_solve(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd cg_solve(const Eigen::VectorXd& rhs, int& iterations, bool& converged) const;

  ControlSetup setup_;
  Eigen::VectorXd log_D_;   // ln D_T
  Eigen::VectorXd D_;       // D_T
  Eigen::VectorXd E_;       // D_{T->2T}
  Eigen::VectorXd penalty_; // tau^2 D^-2 on active modes
  std::vector<int> active_;
  Eigen::MatrixXd A_;       // active block of G + tau^2 D^-2
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool use_ldlt_ = false;
};

ControlSolution solve_control(const ControlSetup& setup, const Eigen::VectorXd& phi0,
                              SolverKind kind = SolverKind::cg);

/// h(x) = -sum_j z_j e_j(x) on omega.
double control_value(const ControlSolution& solution, const EigenBasis& basis, double x);

/// D_{T->2T} (D_T phi0 + b): the state at 2T after the impulse at T.
Eigen::VectorXd physical_terminal(const EigenBasis& basis, const DiffusionProfile& profile,
                                  double T, const Eigen::VectorXd& phi0, const Eigen::VectorXd& b);

/// <phi(t), Phi(2T - t)> for t in (0, 2T), phi the impulsed forward state.
double duality_pairing(const ControlSetup& setup, const Eigen::VectorXd& phi0,
                       const ControlSolution& solution, double t);

struct ControlBoundsReport {
  double s = 0.0;             // |h|^2 / k^2 + |psi|^2 / eps^2
  double s_pairing = 0.0;     // <phi0, D_2T c>
  double pairing_residual = 0.0;
  bool cauchy_schwarz = false;
  bool surrogate_holds = false;
  bool s_bounded = false;     // s <= |phi0|^2
  bool h_bound_ok = false;    // |h|_omega <= k |phi0|
  bool eps_bound_ok = false;  // |psi| <= eps |phi0|
  double h_norm = 0.0;
  double psi_norm = 0.0;
  double phi_norm = 0.0;
};

ControlBoundsReport verify_control_bounds(const ControlSolution& solution,
                                          const ControlSetup& setup,
                                          const Eigen::VectorXd& phi0);

/// Solutions for phi0 = e_1 .. e_{n_bank}.
std::vector<ControlSolution> control_mode_bank(const ControlSystem& system, int n_bank,
                                               int threads = 1,
                                               SolverKind kind = SolverKind::cg);

}  // namespace backheat

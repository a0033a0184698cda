#include "backheat/control.hpp"

#include "backheat/csv.hpp"
#include "backheat/errors.hpp"
#include "backheat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace backheat {

using detail::require;

namespace {
__extension__ typedef __float128 quad;

// Modes whose rescaled penalty tau^2 e^{2 lambda int p} exceeds this are
// decoupled: their z component is below 1e-300 of the data.
const double kFreezeLog = std::log(1e300);
const double kUnderflowLog = std::log(1e-300);
constexpr double kCgTolerance = 1e-12;
constexpr int kRefinementSteps = 8;
constexpr double kSlack = 1e-10;

long double dot_ld(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}
}  // namespace

double ControlSetup::k() const { return std::exp(log_k); }

double control_log_k(const CChain& chain, double T, double eps) {
  require(T > 0.0 && eps > 0.0, "control_log_k: T and eps must be positive");
  const double c1_over_T = chain.c1 / T;
  if (!std::isfinite(c1_over_T)) return std::numeric_limits<double>::infinity();
  return 0.5 * (chain.log_c1 + c1_over_T) - chain.c2 * std::log(eps);
}

ControlSetup make_control_setup(const EigenBasis& basis, const DiffusionProfile& profile, double T,
                                const Subdomain& omega, double eps, double log_k) {
  return ControlSetup{basis, profile, T, gram_subdomain(omega, basis), eps, log_k};
}

ControlSystemMatrices assemble_control_system(const ControlSetup& s) {
  require(std::isfinite(s.log_k), "assemble_control_system: k must be finite");
  const Eigen::VectorXd D = propagator(s.basis, s.profile, 0.0, s.T);
  const double k2 = std::exp(2.0 * s.log_k);
  ControlSystemMatrices out;
  out.M = k2 * (D.asDiagonal() * s.gram * D.asDiagonal());
  out.M.diagonal().array() += s.eps * s.eps;
  out.rhs_diag = propagator(s.basis, s.profile, 0.0, 2.0 * s.T);
  return out;
}

double control_objective(const ControlSetup& s, const Eigen::VectorXd& phi0,
                         const Eigen::VectorXd& x) {
  const Eigen::VectorXd D = propagator(s.basis, s.profile, 0.0, s.T);
  const Eigen::VectorXd D2 = propagator(s.basis, s.profile, 0.0, 2.0 * s.T);
  const Eigen::VectorXd Dx = D.cwiseProduct(x);
  const double k2 = std::exp(2.0 * s.log_k);
  return 0.5 * k2 * Dx.dot(s.gram * Dx) + 0.5 * s.eps * s.eps * x.squaredNorm() -
         phi0.dot(D2.cwiseProduct(x));
}

Eigen::VectorXd control_gradient(const ControlSetup& s, const Eigen::VectorXd& phi0,
                                 const Eigen::VectorXd& x) {
  const ControlSystemMatrices m = assemble_control_system(s);
  return m.M * x - m.rhs_diag.cwiseProduct(phi0);
}

// ---------------------------------------------------------------------------

ControlSystem::ControlSystem(ControlSetup setup) : setup_(std::move(setup)) {
  const ControlSetup& s = setup_;
  const int n = s.basis.modes();
  require(s.T > 0.0 && s.eps > 0.0, "control: T and eps must be positive");
  require(std::isfinite(s.log_k),
          "control: the weight k overflows (ln k = inf); the closed-form constants are too "
          "large for this window, use empirical constants or a larger eps");
  require(s.gram.rows() == n && s.gram.cols() == n, "control: Gram matrix does not match basis");

  const double I_T = s.profile.integral(0.0, s.T);
  log_D_ = -s.basis.eigenvalues() * I_T;
  D_ = log_D_.array().exp();
  E_ = propagator(s.basis, s.profile, s.T, 2.0 * s.T);

  const double log_tau = std::log(s.eps) - s.log_k;
  const Eigen::VectorXd log_pen = 2.0 * log_tau - 2.0 * log_D_.array();
  // With full observation G = I and a vanishing penalty is harmless: z = E phi0.
  const bool full_observation =
      (s.gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() == 0.0;
  penalty_ = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (log_pen[j] <= kFreezeLog) {
      require(full_observation || log_pen[j] >= kUnderflowLog,
              "control: ln k = " + format_double(s.log_k) +
                  " is too large to resolve in double precision (the eps^2 term vanishes "
                  "against G); use empirical constants or a larger eps");
      active_.push_back(j);
      penalty_[j] = std::exp(log_pen[j]);
    }
  }
  const int m = static_cast<int>(active_.size());
  A_.resize(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) A_(a, b) = s.gram(active_[a], active_[b]);
    A_(a, a) += penalty_[active_[a]];
  }
  if (m == 0) return;
  llt_.compute(A_);
  if (llt_.info() != Eigen::Success) {
    ldlt_.compute(A_);
    use_ldlt_ = true;
    if (ldlt_.info() != Eigen::Success) {
      throw InvariantViolation("control: rescaled normal matrix could not be factorized");
    }
  }
}

Eigen::VectorXd ControlSystem::apply(const Eigen::VectorXd& z) const { return A_ * z; }

Eigen::VectorXd ControlSystem::dense_solve(const Eigen::VectorXd& rhs) const {
  return use_ldlt_ ? Eigen::VectorXd(ldlt_.solve(rhs)) : Eigen::VectorXd(llt_.solve(rhs));
}

Eigen::VectorXd ControlSystem::cg_solve(const Eigen::VectorXd& rhs, int& iterations,
                                        bool& converged) const {
  const Eigen::Index m = rhs.size();
  const Eigen::VectorXd inv_diag = A_.diagonal().cwiseInverse();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd y = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = y;
  double ry = r.dot(y);
  const double target = kCgTolerance * rhs.norm();
  const int max_iter = 10 * static_cast<int>(setup_.basis.modes());
  converged = r.norm() <= target;
  iterations = 0;
  while (!converged && iterations < max_iter) {
    const Eigen::VectorXd Ap = apply(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double step = ry / pAp;
    x += step * p;
    r -= step * Ap;
    ++iterations;
    if (r.norm() <= target) {
      converged = true;
      break;
    }
    y = inv_diag.cwiseProduct(r);
    const double ry_next = r.dot(y);
    p = y + (ry_next / ry) * p;
    ry = ry_next;
  }
  return x;
}

ControlSolution ControlSystem::solve(const Eigen::VectorXd& phi0, SolverKind kind) const {
  const ControlSetup& s = setup_;
  const int n = s.basis.modes();
  require(phi0.size() == n, "solve_control: phi0 does not match the basis");

  ControlSolution sol;
  sol.frozen_modes = n - static_cast<int>(active_.size());
  const int m = static_cast<int>(active_.size());
  Eigen::VectorXd rhs(m);
  for (int a = 0; a < m; ++a) rhs[a] = E_[active_[a]] * phi0[active_[a]];

  auto solve_once = [&](const Eigen::VectorXd& v, bool first) -> Eigen::VectorXd {
    if (kind == SolverKind::dense || sol.dense_fallback) return dense_solve(v);
    int iters = 0;
    bool ok = false;
    Eigen::VectorXd x = cg_solve(v, iters, ok);
    sol.cg_iterations += iters;
    if (first) sol.cg_converged = ok;
    if (!ok) {
      sol.dense_fallback = true;
      return dense_solve(v);
    }
    return x;
  };

  // psi = D (E phi0 - G z) cancels heavily once k is large, so z, the
  // residual and psi are carried in quad precision; corrections are solved
  // in double.
  std::vector<quad> z(n, 0);
  if (m > 0) {
    const Eigen::VectorXd z0 = solve_once(rhs, true);
    for (int a = 0; a < m; ++a) z[active_[a]] = z0[a];
    Eigen::VectorXd resid(m);
    for (int it = 0; it < kRefinementSteps; ++it) {
      for (int a = 0; a < m; ++a) {
        quad r = static_cast<quad>(E_[active_[a]]) * phi0[active_[a]];
        // G and the penalty enter separately: their sum rounded into A_ would
        // lose the penalty's low bits.
        for (int b = 0; b < m; ++b) {
          r -= static_cast<quad>(s.gram(active_[a], active_[b])) * z[active_[b]];
        }
        r -= static_cast<quad>(penalty_[active_[a]]) * z[active_[a]];
        resid[a] = static_cast<double>(r);
      }
      const Eigen::VectorXd corr = solve_once(resid, false);
      double z_norm = 0.0;
      for (int a = 0; a < m; ++a) {
        z[active_[a]] += corr[a];
        z_norm = std::max(z_norm, std::abs(static_cast<double>(z[active_[a]])));
      }
      if (corr.lpNorm<Eigen::Infinity>() <= 1e-30 * z_norm) break;
    }
  }

  sol.z.resize(n);
  sol.b.resize(n);
  sol.psi.resize(n);
  sol.c.resize(n);
  std::vector<quad> Gz(n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (z[j] != 0) Gz[i] += static_cast<quad>(s.gram(i, j)) * z[j];
    }
  }
  std::vector<bool> is_active(n, false);
  for (int j : active_) is_active[j] = true;
  const double eps2 = s.eps * s.eps;
  long double hGh = 0.0L;
  for (int j = 0; j < n; ++j) {
    // D_2T is taken as the product D_T E so that psi - eps^2 c = D_T r.
    const quad psi = static_cast<quad>(D_[j]) * (static_cast<quad>(E_[j]) * phi0[j] - Gz[j]);
    sol.z[j] = static_cast<double>(z[j]);
    sol.b[j] = static_cast<double>(-Gz[j]);
    sol.psi[j] = static_cast<double>(psi);
    // eps^2 c = tau^2 D^-1 z, written with the penalty entry used in A.
    sol.c[j] = is_active[j]
                   ? static_cast<double>(static_cast<quad>(penalty_[j]) * D_[j] * z[j] / eps2)
                   : static_cast<double>(psi / eps2);
    hGh += static_cast<long double>(z[j] * Gz[j]);
  }
  const double psi_norm = sol.psi.norm();
  const double gap = (sol.psi - eps2 * sol.c).norm();
  sol.identity_residual = psi_norm > 0.0 ? gap / psi_norm : gap;
  sol.h_norm_omega = std::sqrt(static_cast<double>(std::max(0.0L, hGh)));
  if (kind == SolverKind::dense) sol.cg_converged = false;
  return sol;
}

ControlSolution solve_control(const ControlSetup& setup, const Eigen::VectorXd& phi0,
                              SolverKind kind) {
  require(phi0.norm() > 0.0, "solve_control: phi0 must be nonzero");
  return ControlSystem(setup).solve(phi0, kind);
}

double control_value(const ControlSolution& solution, const EigenBasis& basis, double x) {
  double s = 0.0;
  for (int j = 1; j <= basis.modes(); ++j) s -= solution.z[j - 1] * basis.eval(j, x);
  return s;
}

Eigen::VectorXd physical_terminal(const EigenBasis& basis, const DiffusionProfile& profile,
                                  double T, const Eigen::VectorXd& phi0,
                                  const Eigen::VectorXd& b) {
  const Eigen::VectorXd D = propagator(basis, profile, 0.0, T);
  const Eigen::VectorXd E = propagator(basis, profile, T, 2.0 * T);
  return E.cwiseProduct(D.cwiseProduct(phi0) + b);
}

double duality_pairing(const ControlSetup& s, const Eigen::VectorXd& phi0,
                       const ControlSolution& solution, double t) {
  require(t > 0.0 && t < 2.0 * s.T && t != s.T, "duality_pairing: t must lie in (0,T) or (T,2T)");
  const Eigen::VectorXd adjoint = propagator(s.basis, s.profile, 0.0, 2.0 * s.T - t);
  Eigen::VectorXd state;
  if (t < s.T) {
    state = propagator(s.basis, s.profile, 0.0, t).cwiseProduct(phi0);
  } else {
    const Eigen::VectorXd D = propagator(s.basis, s.profile, 0.0, s.T);
    state = propagator(s.basis, s.profile, s.T, t)
                .cwiseProduct(D.cwiseProduct(phi0) + solution.b);
  }
  return static_cast<double>(dot_ld(state, adjoint.cwiseProduct(solution.c)));
}

ControlBoundsReport verify_control_bounds(const ControlSolution& sol, const ControlSetup& s,
                                          const Eigen::VectorXd& phi0) {
  ControlBoundsReport rep;
  const Eigen::VectorXd D2 = propagator(s.basis, s.profile, 0.0, 2.0 * s.T);
  const double eps2 = s.eps * s.eps;
  rep.phi_norm = phi0.norm();
  rep.psi_norm = sol.psi.norm();
  rep.h_norm = sol.h_norm_omega;

  const double control_term =
      rep.h_norm > 0.0 ? std::exp(2.0 * (std::log(rep.h_norm) - s.log_k)) : 0.0;
  const double c_term = eps2 * sol.c.squaredNorm();
  rep.s = control_term + rep.psi_norm * rep.psi_norm / eps2;
  const Eigen::VectorXd D2c = D2.cwiseProduct(sol.c);
  rep.s_pairing = static_cast<double>(dot_ld(phi0, D2c));
  rep.pairing_residual = std::abs(rep.s - rep.s_pairing) / std::max(rep.s, 1e-300);
  rep.cauchy_schwarz = rep.s_pairing <= rep.phi_norm * D2c.norm() * (1.0 + kSlack);
  rep.surrogate_holds = D2c.squaredNorm() <= (control_term + c_term) * (1.0 + kSlack);
  rep.s_bounded = rep.s <= rep.phi_norm * rep.phi_norm * (1.0 + kSlack);
  rep.h_bound_ok = rep.h_norm == 0.0 ||
                   std::log(rep.h_norm) <= s.log_k + std::log(rep.phi_norm) + kSlack;
  rep.eps_bound_ok = rep.psi_norm <= s.eps * rep.phi_norm * (1.0 + kSlack);
  return rep;
}

std::vector<ControlSolution> control_mode_bank(const ControlSystem& system, int n_bank,
                                               int threads, SolverKind kind) {
  const int n = system.setup().basis.modes();
  require(n_bank >= 1 && n_bank <= n, "control_mode_bank: bank size must lie in [1, N]");
  std::vector<ControlSolution> bank(n_bank);
  parallel_for(static_cast<std::size_t>(n_bank), threads, [&](std::size_t i) {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
    phi[static_cast<Eigen::Index>(i)] = 1.0;
    bank[i] = system.solve(phi, kind);
  });
  return bank;
}

}  // namespace backheat

#include "backheat/local_backward.hpp"

#include "backheat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace backheat {

using detail::require;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  if (a == kInf || b == kInf) return kInf;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double safe_exp(double x) { return x > 709.0 ? kInf : std::exp(x); }

// ln of the bound c3 e^{c3/T} eps^{-c4} on |h_i|.
double log_control_bound(const CChain& chain, double T, double log_eps) {
  const double c3_over_T = chain.c3 / T;
  if (!std::isfinite(c3_over_T)) return kInf;
  return chain.log_c3 + c3_over_T - chain.c4 * log_eps;
}
}  // namespace

const char* to_string(ZetaMode mode) { return mode == ZetaMode::transfer ? "transfer" : "default"; }

ZetaMode parse_zeta_mode(const std::string& name) {
  if (name == "transfer") return ZetaMode::transfer;
  if (name == "default") return ZetaMode::standard;
  detail::reject("unknown zeta mode '" + name + "' (transfer | default)");
}

double select_epsilon_log(double delta, double T, const CChain& chain, double l2) {
  require(delta > 0.0 && T > 0.0 && l2 > 0.0, "select_epsilon: inputs must be positive");
  const double c3_over_T = chain.c3 / T;
  if (!std::isfinite(c3_over_T)) return kInf;
  return (std::log(chain.c4) + chain.log_c3 + c3_over_T + std::log(delta) - std::log(l2)) /
         (1.0 + chain.c4);
}

double select_epsilon(double delta, double T, double c3, double c4, double l2) {
  require(c3 > 0.0 && c4 > 0.0, "select_epsilon: c3 and c4 must be positive");
  CChain chain{};
  chain.log_c3 = std::log(c3);
  chain.c3 = c3;
  chain.c4 = c4;
  return safe_exp(select_epsilon_log(delta, T, chain, l2));
}

double tail_prefactor(const EigenBasis& basis, const DiffusionProfile& profile, double T, int n) {
  require(n >= 1 && n <= basis.modes(), "tail_prefactor: mode count must lie in [1, N]");
  const double integral = profile.integral(2.0 * T, 3.0 * T);
  double s = 0.0;
  for (int i = 1; i <= n; ++i) s += std::exp(-2.0 * basis.eigenvalue(i) * integral);
  return std::sqrt(s);
}

double effective_delta_3T(double delta, double epsilon, double T, const DiffusionProfile& profile,
                          const EigenBasis& basis, double l2, const CChain& chain) {
  require(delta > 0.0 && epsilon > 0.0 && l2 > 0.0,
          "effective_delta_3T: inputs must be positive");
  const double S = tail_prefactor(basis, profile, T, basis.modes());
  const double log_eps = std::log(epsilon);
  const double log_bracket = log_add(log_eps + std::log(l2),
                                     log_control_bound(chain, T, log_eps) + std::log(delta));
  return safe_exp(std::log(S) + log_bracket);
}

SpectralField assemble_fbar(const std::vector<ControlSolution>& bank, std::span<const double> xs,
                            std::span<const double> values, const EigenBasis& basis,
                            const DiffusionProfile& profile, double T) {
  require(!bank.empty(), "assemble_fbar: empty control bank");
  require(static_cast<int>(bank.size()) <= basis.modes(),
          "assemble_fbar: bank larger than the basis");
  const Eigen::VectorXd q = quadrature_moments(xs, values, basis);
  const Eigen::VectorXd tail = propagator(basis, profile, 2.0 * T, 3.0 * T);
  Eigen::VectorXd fbar = Eigen::VectorXd::Zero(basis.modes());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    require(bank[i].z.size() == basis.modes(), "assemble_fbar: bank/basis mismatch");
    fbar[static_cast<Eigen::Index>(i)] = tail[static_cast<Eigen::Index>(i)] * bank[i].z.dot(q);
  }
  return SpectralField(basis, std::move(fbar));
}

ReconstructionReport local_reconstruct(std::span<const double> xs, std::span<const double> values,
                                       double delta, const EigenBasis& basis,
                                       const DiffusionProfile& profile, const Subdomain& omega,
                                       const PipelineConfig& cfg, const SpectralField* truth) {
  const double T = cfg.T;
  const double l2 = cfg.priors.l2;
  require(T > 0.0, "local_reconstruct: T must be positive");
  require(delta > 0.0 && delta < l2, "local_reconstruct: need 0 < delta < prior_l2");
  require(cfg.n_bank >= 1 && cfg.n_bank <= basis.modes(),
          "local_reconstruct: bank size must lie in [1, N]");
  require(profile.horizon() >= 3.0 * T * (1.0 - 1e-12),
          "local_reconstruct: the profile must be valid on [0, 3T]");
  require(cfg.k_scale > 0.0, "local_reconstruct: k_scale must be positive");
  omega.validate(basis.domain());
  require(!xs.empty() && xs.front() >= omega.a() - 1e-12 && xs.back() <= omega.b() + 1e-12,
          "local_reconstruct: observation samples must lie in omega");

  const CChain& chain = cfg.constants.chain;
  const double lambda1 = basis.eigenvalue(1);
  const double tau = 3.0 * T;
  const double p2 = profile.upper();

  ReconstructionReport rep(SpectralField::zero(basis));
  rep.delta = delta;
  const double log_eps = select_epsilon_log(delta, T, chain, l2);
  rep.epsilon = safe_exp(log_eps);
  rep.tail_prefactor = tail_prefactor(basis, profile, T, basis.modes());
  const double log_H = log_control_bound(chain, T, log_eps);
  rep.formula_delta = safe_exp(std::log(rep.tail_prefactor) +
                               log_add(log_eps + std::log(l2), log_H + std::log(delta)));
  rep.effective_delta = rep.formula_delta;
  rep.log_k = std::isfinite(log_eps) ? control_log_k(chain, T, rep.epsilon) + std::log(cfg.k_scale)
                                     : kInf;

  const double gate = l2 * std::exp(-lambda1 * p2 * tau);
  const bool skip_bank = !(rep.formula_delta < gate);
  if (!skip_bank) {
    ControlSetup setup = make_control_setup(basis, profile, T, omega, rep.epsilon, rep.log_k);
    const ControlSystem system(std::move(setup));
    const std::vector<ControlSolution> bank =
        control_mode_bank(system, cfg.n_bank, cfg.threads, cfg.solver);
    rep.bank.solved = true;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const ControlSolution& sol = bank[i];
      rep.bank.max_psi = std::max(rep.bank.max_psi, sol.psi.norm());
      rep.bank.max_h = std::max(rep.bank.max_h, sol.h_norm_omega);
      rep.bank.max_identity_residual =
          std::max(rep.bank.max_identity_residual, sol.identity_residual);
      rep.bank.dense_fallbacks += sol.dense_fallback ? 1 : 0;
      Eigen::VectorXd phi = Eigen::VectorXd::Zero(basis.modes());
      phi[static_cast<Eigen::Index>(i)] = 1.0;
      if (!verify_control_bounds(sol, system.setup(), phi).surrogate_holds) {
        ++rep.bank.surrogate_failures;
      }
    }
    if (cfg.certify_bank) {
      const double log_psi = std::log(std::max(rep.epsilon, rep.bank.max_psi));
      const double log_h = std::max(log_H, std::log(rep.bank.max_h));
      const double beyond =
          eigen_pair(cfg.n_bank + 1, basis.domain()).eigenvalue * profile.integral(0.0, tau);
      rep.effective_delta =
          safe_exp(log_add(std::log(rep.tail_prefactor) +
                               log_add(log_psi + std::log(l2), log_h + std::log(delta)),
                           -beyond + std::log(l2)));
    }
    rep.g = assemble_fbar(bank, xs, values, basis, profile, T);
  }

  std::optional<double> zeta;
  if (cfg.zeta_mode == ZetaMode::transfer && std::isfinite(rep.effective_delta)) {
    const double k1 = 1.0 / (1.0 + chain.c4);
    const double log_P1 =
        std::log(rep.effective_delta) - (1.0 - k1) * std::log(l2) - k1 * std::log(delta);
    zeta = std::exp(2.0 * log_P1) / (2.0 * lambda1 * p2 * tau);
  }
  rep.selection = select_alpha(tau, profile, lambda1, cfg.priors, rep.effective_delta, zeta);
  rep.bound = rep.selection.bound;
  rep.g = rep.selection.gate_zero ? SpectralField::zero(basis)
                                  : apply_filter(rep.g, *rep.selection.alpha, tau, profile);
  if (truth) rep.error = (truth->coeffs - rep.g.coeffs).norm();
  return rep;
}

}  // namespace backheat

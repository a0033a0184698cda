#include "backheat/observability.hpp"

#include "backheat/errors.hpp"
#include "backheat/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace backheat {

using detail::require;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLn15 = std::log(1.5);

double safe_exp(double x) { return x > 709.0 ? kInf : std::exp(x); }
}  // namespace

const char* to_string(ConstantsMode mode) {
  return mode == ConstantsMode::closed_form ? "closed_form" : "empirical";
}

ConstantsMode parse_constants_mode(const std::string& name) {
  if (name == "closed_form") return ConstantsMode::closed_form;
  if (name == "empirical") return ConstantsMode::empirical;
  detail::reject("unknown constants mode '" + name + "' (closed_form | empirical)");
}

CChain derive_c_chain(double log_K, double mu) {
  require(mu > 0.0 && mu < 1.0, "derive_c_chain: mu must lie in (0, 1)");
  require(!std::isnan(log_K), "derive_c_chain: K must be positive");
  const double c2 = (1.0 - mu) / mu;
  const double first = std::log(mu) + 2.0 * log_K / mu + c2 * std::log1p(-mu);
  const double second = std::log(2.0) + log_K - std::log(mu);
  CChain chain{};
  chain.log_c1 = std::max(first, second);
  chain.c1 = safe_exp(chain.log_c1);
  chain.c2 = c2;
  chain.log_c3 = std::max(0.5 * chain.log_c1, chain.log_c1 - std::log(2.0));
  chain.c3 = safe_exp(chain.log_c3);
  chain.c4 = c2;
  return chain;
}

ObservabilityConstants constants_convex(const DomainSpec& domain, double r,
                                        const DiffusionProfile& profile, double xi) {
  const double R = domain.radius();
  require(r > 0.0 && r < R, "constants_convex: need 0 < r < R = " + std::to_string(R));
  const double p1 = profile.lower();
  const double dp = profile.derivative_bound();
  if (dp > 0.0 && !(R * R < 2.0 * p1 * p1 / dp)) {
    detail::reject("constants_convex: smallness condition R^2 < 2 p1^2 / |p'| fails (" +
                   std::to_string(R * R) + " >= " + std::to_string(2.0 * p1 * p1 / dp) + ")");
  }

  ObservabilityConstants c;
  c.mode = ConstantsMode::closed_form;
  c.xi = xi;
  c.C0 = R * R * dp / (2.0 * p1 * p1);
  c.C1 = 3.0 * dp / p1;
  require(c.C0 < 1.0, "constants_convex: C0 = " + std::to_string(c.C0) + " must be below 1");

  const double log_ratio = 2.0 * std::log(R / r) + c.C1;
  if (c.C0 == 0.0) {
    require(xi > 0.0 && xi < 1.0, "constants_convex: xi must lie in (0, 1)");
    const double log_base = (2.0 + xi) * std::log(2.0) + log_ratio - std::log(xi) - std::log(kLn15);
    c.ell = std::expm1(log_base / (1.0 - xi));
    c.S_ell = std::exp(c.C1) * std::log1p(c.ell) / kLn15;
  } else {
    const double denom = -std::expm1(c.C0 * std::log(2.0 / 3.0));  // 1 - (2/3)^C0
    const double log_base = std::log(4.0) + log_ratio - std::log(denom);
    c.ell = std::expm1(log_base / (1.0 - c.C0));
    c.S_ell = std::exp(c.C1 + c.C0 * std::log1p(c.ell)) / denom;
  }
  require(std::isfinite(c.ell) && std::isfinite(c.S_ell),
          "constants_convex: ell overflows for r = " + std::to_string(r));
  require(c.ell > 1.0, "constants_convex: ell = " + std::to_string(c.ell) + " must exceed 1");

  const double one_s = 1.0 + c.S_ell;
  const double gaussian = r * r * c.ell / (4.0 * p1);
  const double log_first = ((1.0 + c.C0 * one_s) * std::log(4.0) +
                            (1.0 + 2.0 * c.C0 * one_s) * std::log1p(c.ell) +
                            2.0 * c.C1 * one_s + gaussian) /
                           (2.0 * one_s);
  c.log_K = std::max(log_first, std::log(gaussian / one_s));
  c.K = safe_exp(c.log_K);
  c.mu = 1.0 / (2.0 * one_s);
  c.chain = derive_c_chain(c.log_K, c.mu);
  return c;
}

namespace {

struct Snapshot {
  double l2_0;
  double h01_0;
  double l2_T;
  double omega_T;
};

Snapshot snapshot(const SpectralField& u0, double T, const DiffusionProfile& profile,
                  const Eigen::MatrixXd* gram) {
  const FieldNorms n0 = norms(u0);
  const SpectralField uT = evolve(u0, 0.0, T, profile);
  Snapshot s{n0.l2, n0.h01, norms(uT).l2, 0.0};
  if (gram) s.omega_T = subdomain_norm(uT.coeffs, *gram);
  return s;
}

InequalityReport finish(double log_lhs, double log_rhs) {
  InequalityReport rep;
  rep.log_lhs = log_lhs;
  rep.log_rhs = log_rhs;
  rep.lhs = std::exp(log_lhs);
  rep.rhs = safe_exp(log_rhs);
  rep.holds = log_lhs <= log_rhs;
  return rep;
}

}  // namespace

InequalityReport holder_check(const SpectralField& u0, double T, const DiffusionProfile& profile,
                              const ObservabilityConstants& constants,
                              const Eigen::MatrixXd& gram) {
  require(T > 0.0, "holder_check: T must be positive");
  const Snapshot s = snapshot(u0, T, profile, &gram);
  require(s.l2_0 > 0.0, "holder_check: initial state must be nonzero");
  const double K_over_T = constants.K / T;
  double log_rhs = kInf;
  if (std::isfinite(K_over_T)) {
    log_rhs = constants.log_K + K_over_T + constants.mu * std::log(s.omega_T) +
              (1.0 - constants.mu) * std::log(s.l2_0);
  }
  return finish(std::log(s.l2_T), log_rhs);
}

InequalityReport appendix_stability_check(const SpectralField& u0, double T,
                                          const DiffusionProfile& profile,
                                          const ObservabilityConstants& constants,
                                          const Eigen::MatrixXd& gram) {
  require(T > 0.0, "appendix_stability_check: T must be positive");
  const Snapshot s = snapshot(u0, T, profile, &gram);
  require(s.l2_0 > 0.0, "appendix_stability_check: initial state must be nonzero");
  if (!(s.omega_T < s.l2_0)) {
    InequalityReport rep;
    rep.applicable = false;
    rep.holds = true;
    rep.note = "skipped: |u(T)|_omega >= |u(0)|, logarithm not positive";
    return rep;
  }
  const double mu = constants.mu;
  const double lambda1 = u0.basis.eigenvalue(1);
  const double log_C = 0.5 * std::max(std::log(profile.upper()) - std::log(mu),
                                      constants.log_K - std::log(mu) - std::log(lambda1));
  const double log_rhs = log_C + 0.5 * std::log(1.0 + T + 1.0 / T) + std::log(s.h01_0) -
                         0.5 * std::log(std::log(s.l2_0 / s.omega_T));
  return finish(std::log(s.l2_0), log_rhs);
}

InequalityReport direct_backward_check(const SpectralField& u0, double T,
                                       const DiffusionProfile& profile) {
  require(T > 0.0, "direct_backward_check: T must be positive");
  const Snapshot s = snapshot(u0, T, profile, nullptr);
  require(s.l2_0 > 0.0, "direct_backward_check: initial state must be nonzero");
  const double ratio = s.h01_0 / s.l2_0;
  return finish(std::log(s.l2_0), profile.upper() * T * ratio * ratio + std::log(s.l2_T));
}

EmpiricalFit fit_holder(const EigenBasis& basis, double T, const DiffusionProfile& profile,
                        const Eigen::MatrixXd& gram, int samples, std::uint64_t seed) {
  require(samples >= 2, "fit_holder: need at least two samples");
  require(T > 0.0, "fit_holder: T must be positive");
  std::vector<double> ys(samples), xs(samples);
  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    const double decay = rng.uniform(2.0, 4.0);
    const SpectralField u0 = synthesize_initial(basis, decay, derive_seed(seed, s));
    const Snapshot snap = snapshot(u0, T, profile, &gram);
    const double log0 = std::log(snap.l2_0);
    ys[s] = std::log(snap.l2_T) - log0;
    xs[s] = std::log(snap.omega_T) - log0;
  }
  double mx = 0.0, my = 0.0;
  for (int s = 0; s < samples; ++s) {
    mx += xs[s];
    my += ys[s];
  }
  mx /= samples;
  my /= samples;
  double sxy = 0.0, sxx = 0.0;
  for (int s = 0; s < samples; ++s) {
    sxy += (xs[s] - mx) * (ys[s] - my);
    sxx += (xs[s] - mx) * (xs[s] - mx);
  }
  EmpiricalFit fit{};
  fit.samples = samples;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.5;
  fit.mu = std::clamp(fit.slope, 0.05, 0.5);
  fit.log_P = -kInf;
  for (int s = 0; s < samples; ++s) fit.log_P = std::max(fit.log_P, ys[s] - fit.mu * xs[s]);
  return fit;
}

ObservabilityConstants fit_empirical(const EigenBasis& basis, double T,
                                     const DiffusionProfile& profile,
                                     const Eigen::MatrixXd& gram, int samples,
                                     std::uint64_t seed) {
  const EmpiricalFit fit = fit_holder(basis, T, profile, gram, samples, seed);
  // ln K + K / T = ln P is increasing in ln K; bisect on ln K.
  auto g = [&](double lk) { return lk + std::exp(lk) / T - fit.log_P; };
  double lo = -745.0, hi = 700.0;
  while (g(lo) > 0.0) lo *= 2.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) > 0.0 ? hi : lo) = mid;
  }

  ObservabilityConstants c;
  c.mode = ConstantsMode::empirical;
  const double p1 = profile.lower();
  const double dp = profile.derivative_bound();
  const double R = basis.domain().radius();
  c.C0 = R * R * dp / (2.0 * p1 * p1);
  c.C1 = 3.0 * dp / p1;
  c.ell = std::numeric_limits<double>::quiet_NaN();
  c.mu = fit.mu;
  c.S_ell = 1.0 / (2.0 * c.mu) - 1.0;
  c.log_K = hi;
  c.K = std::exp(hi);
  c.chain = derive_c_chain(c.log_K, c.mu);
  return c;
}

}  // namespace backheat

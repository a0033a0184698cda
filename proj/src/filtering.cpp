#include "backheat/filtering.hpp"

#include "backheat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace backheat {

using detail::require;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// x - ln(1 + 2x), the logarithm of A.
double log_A(double x) { return x - std::log1p(2.0 * x); }

// Bisection on a monotone predicate down to adjacent doubles.
template <typename Above>
double bisect(double lo, double hi, Above above) {
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (above(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}
}  // namespace

double eval_A(double x) {
  require(x >= 0.0, "eval_A: x must be nonnegative");
  return std::exp(x) / (1.0 + 2.0 * x);
}

double eval_B(double x) {
  require(x > 0.0, "eval_B: x must be positive");
  return std::sqrt(x) * std::exp(x);
}

double log_B(double x) {
  require(x > 0.0, "log_B: x must be positive");
  return 0.5 * std::log(x) + x;
}

double invert_B_log(double log_y) {
  require(std::isfinite(log_y), "invert_B: target must be finite and positive");
  // Newton in s = ln x on phi(s) = s/2 + e^s - ln y, which is increasing and
  // convex with phi' > 1/2; the bracket guards the early iterates.
  auto phi = [&](double s) { return 0.5 * s + std::exp(s) - log_y; };
  double s = log_y > 1.0 ? std::log(log_y) : 2.0 * log_y - 1.0;
  double lo = s, hi = s;
  double step = 1.0;
  while (phi(lo) > 0.0) lo -= (step *= 2.0);
  step = 1.0;
  while (phi(hi) < 0.0) hi += (step *= 2.0);
  s = std::clamp(s, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double f = phi(s);
    if (f == 0.0) break;
    (f > 0.0 ? hi : lo) = s;
    double next = s - f / (0.5 + std::exp(s));
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s) break;
    s = next;
  }
  return std::exp(s);
}

double invert_B(double y) {
  require(y > 0.0 && std::isfinite(y), "invert_B: target must be finite and positive");
  return invert_B_log(std::log(y));
}

double invert_A_increasing(double beta, double lower) {
  require(lower >= 0.0, "invert_A_increasing: lower bound must be nonnegative");
  require(beta > 0.0 && std::isfinite(beta), "invert_A_increasing: beta must be finite");
  const double floor = std::max(lower, 0.5);
  const double log_beta = std::log(beta);
  const double at_floor = log_A(floor);
  if (log_beta < at_floor) {
    detail::reject("invert_A_increasing: beta = " + std::to_string(beta) +
                   " is below A(" + std::to_string(floor) + ") = " +
                   std::to_string(std::exp(at_floor)) + " on the increasing branch");
  }
  if (log_beta == at_floor) return floor;
  double hi = std::max(2.0 * floor, 1.0);
  while (log_A(hi) < log_beta) hi *= 2.0;
  return bisect(floor, hi, [&](double x) { return log_A(x) >= log_beta; });
}

double default_zeta(double lambda1, double p2, double tau) {
  return 1.0 / (2.0 * lambda1 * p2 * tau);
}

FilterSelection select_alpha(double tau, const DiffusionProfile& profile, double lambda1,
                             const Priors& priors, double effective_delta,
                             std::optional<double> zeta) {
  require(tau > 0.0, "select_alpha: horizon must be positive");
  require(tau <= profile.horizon() * (1.0 + 1e-12),
          "select_alpha: horizon exceeds the profile's validity window");
  require(lambda1 > 0.0, "select_alpha: lambda1 must be positive");
  require(priors.l2 > 0.0 && priors.h01 > 0.0, "select_alpha: priors must be positive");
  require(effective_delta > 0.0 && !std::isnan(effective_delta),
          "select_alpha: noise level must be positive");

  FilterSelection sel;
  const double p2 = profile.upper();
  const double x1 = lambda1 * p2 * tau;
  sel.zeta = zeta.value_or(default_zeta(lambda1, p2, tau));
  require(sel.zeta > 0.0, "select_alpha: zeta must be positive");
  sel.gate_threshold = priors.l2 * std::exp(-x1);
  sel.gate_zero = effective_delta >= sel.gate_threshold;
  sel.log_argument =
      0.5 * std::log(2.0 * sel.zeta * x1) + std::log(priors.l2) - std::log(effective_delta);

  if (sel.log_argument > 0.0) {
    sel.bound = std::sqrt((1.0 + sel.zeta) * p2 * tau) * priors.h01 / std::sqrt(sel.log_argument);
  } else if (sel.gate_zero) {
    sel.bound = kInf;
  } else {
    detail::reject("select_alpha: log argument sqrt(2 zeta lambda1 p2 tau) l2 / delta = " +
                   std::to_string(std::exp(sel.log_argument)) +
                   " is <= 1; zeta is too small for this noise level");
  }
  if (sel.gate_zero) return sel;

  const double log_y = 0.5 * std::log(p2 * tau) + std::log(priors.h01) - std::log(effective_delta);
  sel.x_bar = invert_B_log(log_y);
  if (sel.x_bar < 0.5 || sel.x_bar <= x1) {
    detail::reject("select_alpha: the cap falls off the increasing branch (x_bar = " +
                   std::to_string(sel.x_bar) + ", lambda1 p2 tau = " + std::to_string(x1) +
                   "); check that h01 >= sqrt(lambda1) l2");
  }
  sel.alpha = sel.x_bar < 700.0 ? eval_A(sel.x_bar) : std::exp(log_A(sel.x_bar));
  sel.theta = 1.0 / (1.0 + 2.0 * sel.x_bar);
  if (!(sel.theta > 0.0 && sel.theta < 1.0)) {
    throw InvariantViolation("select_alpha: convexity weight theta = " +
                             std::to_string(sel.theta) + " outside (0, 1)");
  }
  return sel;
}

SpectralField apply_filter(const SpectralField& observed, double alpha, double tau,
                           const DiffusionProfile& profile) {
  require(alpha > 0.0, "apply_filter: alpha must be positive");
  require(tau > 0.0, "apply_filter: tau must be positive");
  const double integral = profile.integral(0.0, tau);
  const double log_alpha = std::log(alpha);
  Eigen::VectorXd out(observed.modes());
  for (int i = 1; i <= observed.modes(); ++i) {
    const double log_gain = std::min(observed.basis.eigenvalue(i) * integral, log_alpha);
    out[i - 1] = observed.coeffs[i - 1] == 0.0 ? 0.0 : std::exp(log_gain) * observed.coeffs[i - 1];
  }
  return SpectralField(observed.basis, std::move(out));
}

GlobalResult global_backward(const SpectralField& observed, double tau,
                             const DiffusionProfile& profile, const Priors& priors, double delta,
                             std::optional<double> zeta) {
  FilterSelection sel =
      select_alpha(tau, profile, observed.basis.eigenvalue(1), priors, delta, zeta);
  if (sel.gate_zero) return {SpectralField::zero(observed.basis), sel};
  return {apply_filter(observed, *sel.alpha, tau, profile), sel};
}

GlobalResult global_backward(std::span<const double> xs, std::span<const double> values,
                             const EigenBasis& basis, double tau, const DiffusionProfile& profile,
                             const Priors& priors, double delta, std::optional<double> zeta) {
  return global_backward(project(xs, values, basis), tau, profile, priors, delta, zeta);
}

ErrorSplit error_split(double alpha, double delta, double tau, const DiffusionProfile& profile,
                       double lambda1, double h01) {
  require(alpha > 0.0 && delta >= 0.0 && tau > 0.0, "error_split: invalid arguments");
  const double p2 = profile.upper();
  const double x_lo = lambda1 * p2 * tau;
  auto F = [&](double x) { return std::max(0.0, 1.0 - alpha * std::exp(-x)) / std::sqrt(x); };

  // F' vanishes exactly where A(x) = alpha, so the supremum sits at x_lo or
  // at one of the (at most two) roots of A(x) = alpha.
  double sup = F(x_lo);
  const double log_alpha = std::log(alpha);
  if (log_alpha >= log_A(0.5)) {
    const double right = invert_A_increasing(alpha, 0.5);
    if (right >= x_lo) sup = std::max(sup, F(right));
    if (log_alpha <= 0.0) {
      const double left = bisect(0.0, 0.5, [&](double x) { return log_A(x) <= log_alpha; });
      if (left >= x_lo) sup = std::max(sup, F(left));
    }
  }
  return ErrorSplit{alpha * delta, sup, sup * std::sqrt(p2 * tau) * h01};
}

SpectralField truncation_baseline(const SpectralField& observed, int cutoff, double tau,
                                  const DiffusionProfile& profile) {
  require(cutoff >= 1 && cutoff <= observed.modes(),
          "truncation_baseline: cutoff must lie in [1, N]");
  require(tau > 0.0, "truncation_baseline: tau must be positive");
  const double integral = profile.integral(0.0, tau);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(observed.modes());
  for (int i = 1; i <= cutoff; ++i) {
    out[i - 1] = observed.coeffs[i - 1] * std::exp(observed.basis.eigenvalue(i) * integral);
  }
  return SpectralField(observed.basis, std::move(out));
}

double cutoff_bound(const EigenBasis& basis, int cutoff, double tau,
                    const DiffusionProfile& profile, double delta, double h01) {
  require(cutoff >= 1 && cutoff <= basis.modes(), "cutoff must lie in [1, N]");
  const double integral = profile.integral(0.0, tau);
  const double next = eigen_pair(cutoff + 1, basis.domain()).eigenvalue;
  return std::exp(basis.eigenvalue(cutoff) * integral + std::log(delta)) + h01 / std::sqrt(next);
}

CutoffChoice choose_cutoff(const EigenBasis& basis, double tau, const DiffusionProfile& profile,
                           double delta, double h01) {
  require(delta > 0.0 && h01 > 0.0, "choose_cutoff: delta and h01 must be positive");
  CutoffChoice best{1, cutoff_bound(basis, 1, tau, profile, delta, h01)};
  for (int c = 2; c <= basis.modes(); ++c) {
    const double b = cutoff_bound(basis, c, tau, profile, delta, h01);
    if (b < best.bound) best = {c, b};
  }
  return best;
}

}  // namespace backheat

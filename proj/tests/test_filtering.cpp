#include "backheat/errors.hpp"
#include "backheat/filtering.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace backheat;

namespace {
const double kE = std::numbers::e;
}

TEST(ScalarA, Values) {
  EXPECT_EQ(eval_A(0.0), 1.0);
  EXPECT_NEAR(eval_A(0.5), std::sqrt(kE) / 2.0, 1e-15);
  EXPECT_NEAR(eval_A(0.5), 0.824361, 1e-6);
  EXPECT_NEAR(eval_A(1.0), kE / 3.0, 1e-15);
  EXPECT_THROW(eval_A(-0.1), InputError);
}

TEST(ScalarA, MinimumAtOneHalf) {
  for (int k = 0; k < 500; ++k) EXPECT_GE(eval_A(k / 100.0), eval_A(0.5)) << k;
}

TEST(ScalarB, ValuesAndMonotone) {
  EXPECT_NEAR(eval_B(1.0), kE, 1e-15);
  EXPECT_NEAR(eval_B(2.0), std::sqrt(2.0) * kE * kE, 1e-13);
  EXPECT_NEAR(eval_B(2.0), 10.4497, 1e-4);
  double prev = 0.0;
  for (double x = 1e-6; x < 50.0; x *= 1.3) {
    EXPECT_GT(eval_B(x), prev);
    prev = eval_B(x);
  }
  EXPECT_NEAR(log_B(3.0), std::log(eval_B(3.0)), 1e-14);
}

TEST(ScalarB, Inverse) {
  EXPECT_NEAR(invert_B(kE), 1.0, 1e-14);
  EXPECT_NEAR(invert_B(std::sqrt(2.0) * kE * kE), 2.0, 1e-14);
  for (double e10 = -6.0; e10 <= 12.0; e10 += 0.1) {
    const double y = std::pow(10.0, e10);
    EXPECT_LE(std::abs(eval_B(invert_B(y)) - y), 1e-12 * y) << "y = " << y;
  }
  EXPECT_NEAR(invert_B_log(1000.0) + 0.5 * std::log(invert_B_log(1000.0)), 1000.0, 1e-10);
  EXPECT_THROW(invert_B(0.0), InputError);
}

TEST(ScalarA, IncreasingInverse) {
  EXPECT_NEAR(invert_A_increasing(kE / 3.0, 0.0), 1.0, 1e-14);
  EXPECT_NEAR(invert_A_increasing(eval_A(5.0), 2.0), 5.0, 1e-13);
  for (double x = 0.5; x <= 50.0; x += 0.25) {
    EXPECT_NEAR(invert_A_increasing(eval_A(x), 0.0), x, 1e-12 * x) << "x = " << x;
  }
  EXPECT_THROW(invert_A_increasing(0.5, 0.0), InputError);
  EXPECT_THROW(invert_A_increasing(eval_A(2.0), 3.0), InputError);
}

TEST(SelectAlpha, CompositionExample) {
  // sqrt(p2 tau) h01 / delta = e, so B^-1 gives 1 and alpha = A(1) = e/3.
  const double tau = 0.05, delta = 1e-3;
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const Priors priors{0.003, kE * delta / std::sqrt(tau)};
  const double lambda1 = std::numbers::pi * std::numbers::pi;
  const FilterSelection sel = select_alpha(tau, p, lambda1, priors, delta);
  ASSERT_TRUE(sel.alpha.has_value());
  EXPECT_FALSE(sel.gate_zero);
  EXPECT_NEAR(sel.x_bar, 1.0, 1e-13);
  EXPECT_NEAR(*sel.alpha, kE / 3.0, 1e-13);
  EXPECT_NEAR(sel.theta, 1.0 / 3.0, 1e-13);
  EXPECT_DOUBLE_EQ(sel.zeta, default_zeta(lambda1, 1.0, tau));
}

TEST(SelectAlpha, GateAtPriorNorm) {
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const Priors priors{1.0, 5.0};
  const FilterSelection sel = select_alpha(0.1, p, 9.8696, priors, 1.0);
  EXPECT_TRUE(sel.gate_zero);
  EXPECT_FALSE(sel.alpha.has_value());
  EXPECT_GE(sel.bound, 1.0);
}

TEST(SelectAlpha, AlphaGrowsAsNoiseShrinks) {
  const auto p = DiffusionProfile::sinusoidal(1.0, 0.2, 4.0, 1.0);
  const Priors priors{1.0, 4.0};
  double prev_alpha = 0.0, prev_bound = 1e300;
  for (double delta = 1e-2; delta > 1e-12; delta /= 3.0) {
    const FilterSelection sel = select_alpha(0.1, p, 9.8696, priors, delta);
    ASSERT_TRUE(sel.alpha.has_value());
    EXPECT_GT(*sel.alpha, prev_alpha);
    EXPECT_LT(sel.bound, prev_bound);
    prev_alpha = *sel.alpha;
    prev_bound = sel.bound;
  }
}

TEST(SelectAlpha, Rejections) {
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  EXPECT_THROW(select_alpha(0.1, p, 9.87, Priors{1.0, 4.0}, 0.0), InputError);
  EXPECT_THROW(select_alpha(2.0, p, 9.87, Priors{1.0, 4.0}, 1e-3), InputError);
  // A tiny zeta pushes the log argument below one outside the gate.
  EXPECT_THROW(select_alpha(0.1, p, 9.87, Priors{1.0, 4.0}, 1e-3, 1e-9), InputError);
}

TEST(ApplyFilter, GainCap) {
  const EigenBasis b(DomainSpec(1.0), 4);
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const SpectralField g = apply_filter(SpectralField::unit(b, 1), 2.0, 0.1, p);
  EXPECT_GT(std::exp(b.eigenvalue(1) * 0.1), 2.68);
  EXPECT_DOUBLE_EQ(g.coeffs[0], 2.0);
  EXPECT_EQ(apply_filter(SpectralField::zero(b), 2.0, 0.1, p).coeffs.norm(), 0.0);
}

TEST(ApplyFilter, HugeCapInvertsExactly) {
  const EigenBasis b(DomainSpec(1.0), 16);
  const auto p = DiffusionProfile::affine(1.0, 0.3, 1.0);
  const SpectralField u = synthesize_initial(b, 3.0, 4);
  const SpectralField g = apply_filter(evolve(u, 0.0, 0.01, p), 1e300, 0.01, p);
  EXPECT_LE((g.coeffs - u.coeffs).norm(), 1e-12 * u.coeffs.norm());
}

TEST(GlobalBackward, NearNoiselessSingleMode) {
  const EigenBasis b(DomainSpec(1.0), 32);
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const SpectralField u = SpectralField::unit(b, 1);
  const FieldNorms n = norms(u);
  const GlobalResult r = global_backward(evolve(u, 0.0, 0.1, p), 0.1, p, Priors{n.l2, n.h01},
                                         1e-15);
  EXPECT_LT((r.g.coeffs - u.coeffs).norm(), 1e-8);
}

TEST(GlobalBackward, BoundHoldsOnSyntheticData) {
  const EigenBasis b(DomainSpec(1.0), 64);
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const double T = 0.5;
  const std::vector<double> xs = uniform_points(0.0, 1.0, 4096);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const SpectralField u = synthesize_initial(b, 3.0, seed);
    const FieldNorms n = norms(u);
    const double delta = 1e-4 * n.l2;
    std::vector<double> v = sample(evolve(u, 0.0, T, p), xs);
    // Deterministic perturbation of quadrature norm delta.
    std::vector<double> pert(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) pert[k] = std::sin(37.0 * xs[k]) + xs[k];
    const double scale = delta / quadrature_norm(xs, pert);
    for (std::size_t k = 0; k < xs.size(); ++k) v[k] += scale * pert[k];
    const GlobalResult r = global_backward(xs, v, b, T, p, Priors{n.l2, n.h01}, delta);
    EXPECT_LE((u.coeffs - r.g.coeffs).norm(), r.selection.bound);
  }
}

TEST(GlobalBackward, GateReturnsZero) {
  const EigenBasis b(DomainSpec(1.0), 16);
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const SpectralField u = synthesize_initial(b, 3.0, 2);
  const FieldNorms n = norms(u);
  const double delta = n.l2 * std::exp(-b.eigenvalue(1) * 0.2);
  const GlobalResult r = global_backward(evolve(u, 0.0, 0.2, p), 0.2, p, {n.l2, n.h01}, delta);
  EXPECT_TRUE(r.selection.gate_zero);
  EXPECT_EQ(r.g.coeffs.norm(), 0.0);
  EXPECT_LE(n.l2, r.selection.bound);
}

TEST(ErrorSplit, SupremumMatchesGridSearch) {
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const double lambda1 = 9.8696, tau = 0.05;
  const double x_lo = lambda1 * tau;
  for (double alpha : {0.9, 1.5, 7.0, 1e3}) {
    double grid_sup = 0.0;
    for (double x = x_lo; x < 60.0; x += 1e-4) {
      grid_sup = std::max(grid_sup, std::max(0.0, 1.0 - alpha * std::exp(-x)) / std::sqrt(x));
    }
    const ErrorSplit s = error_split(alpha, 1e-3, tau, p, lambda1, 2.0);
    EXPECT_GE(s.sup_F, grid_sup * (1.0 - 1e-12)) << "alpha = " << alpha;
    EXPECT_NEAR(s.sup_F, grid_sup, 1e-7) << "alpha = " << alpha;
    EXPECT_DOUBLE_EQ(s.noise_bound, alpha * 1e-3);
  }
}

TEST(ErrorSplit, ClosedFormAtCap) {
  // At alpha = A(x_bar) the supremum is 2 sqrt(x_bar) / (1 + 2 x_bar).
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  for (double xb : {1.0, 3.0, 10.0}) {
    const ErrorSplit s = error_split(eval_A(xb), 0.0, 0.01, p, 9.8696, 1.0);
    EXPECT_NEAR(s.sup_F, 2.0 * std::sqrt(xb) / (1.0 + 2.0 * xb), 1e-12);
  }
}

TEST(ErrorSplit, HalvesDominateTheirErrors) {
  const EigenBasis b(DomainSpec(1.0), 64);
  const auto p = DiffusionProfile::sinusoidal(1.0, 0.2, 3.0, 1.0);
  const double tau = 0.1;
  const SpectralField u = synthesize_initial(b, 2.5, 9);
  const FieldNorms n = norms(u);
  const SpectralField clean = evolve(u, 0.0, tau, p);
  Eigen::VectorXd noise(64);
  for (int i = 0; i < 64; ++i) noise[i] = std::cos(1.7 * i);
  const double delta = 1e-5;
  noise *= delta / noise.norm();
  const SpectralField noisy(b, clean.coeffs + noise);
  const GlobalResult r = global_backward(noisy, tau, p, {n.l2, n.h01}, delta);
  const SpectralField g_exact = apply_filter(clean, *r.selection.alpha, tau, p);
  const ErrorSplit s = error_split(*r.selection.alpha, delta, tau, p, b.eigenvalue(1), n.h01);
  EXPECT_LE((r.g.coeffs - g_exact.coeffs).norm(), s.noise_bound);
  EXPECT_LE((u.coeffs - g_exact.coeffs).norm(), s.bias_bound);
  EXPECT_LE(s.noise_bound + s.bias_bound, r.selection.bound * (1.0 + 1e-12));
}

TEST(Baseline, FullCutoffIsExact) {
  const EigenBasis b(DomainSpec(1.0), 12);
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const SpectralField u = synthesize_initial(b, 3.0, 1);
  const SpectralField g = truncation_baseline(evolve(u, 0.0, 0.01, p), 12, 0.01, p);
  EXPECT_LE((g.coeffs - u.coeffs).norm(), 1e-12);
  EXPECT_THROW(truncation_baseline(u, 0, 0.01, p), InputError);
}

TEST(Baseline, CutoffTradeoff) {
  const EigenBasis b(DomainSpec(1.0), 64);
  const auto p = DiffusionProfile::constant(1.0, 1.0);
  const CutoffChoice c = choose_cutoff(b, 0.1, p, 1e-6, 3.0);
  EXPECT_GT(c.cutoff, 1);
  EXPECT_LT(c.cutoff, 64);
  EXPECT_LT(c.bound, cutoff_bound(b, 1, 0.1, p, 1e-6, 3.0));
  EXPECT_LT(c.bound, cutoff_bound(b, 64, 0.1, p, 1e-6, 3.0));
}

#include "backheat/errors.hpp"
#include "backheat/harness.hpp"
#include "backheat/local_backward.hpp"
#include "backheat/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace backheat;

namespace {

struct Instance {
  EigenBasis basis;
  DiffusionProfile profile;
  Subdomain omega;
  double T;
  ObservabilityConstants constants;
};

Instance empirical_instance(const Subdomain& omega, double T = 0.1) {
  EigenBasis basis(DomainSpec(1.0), 64);
  const auto profile = DiffusionProfile::constant(1.0, 3.0 * T);
  const auto c = fit_empirical(basis, T, profile, gram_subdomain(omega, basis), 200, 1);
  return {basis, profile, omega, T, c};
}

PipelineConfig pipeline(const Instance& in, const Priors& priors) {
  PipelineConfig cfg;
  cfg.T = in.T;
  cfg.n_bank = 32;
  cfg.constants = in.constants;
  cfg.priors = priors;
  return cfg;
}

}  // namespace

TEST(SelectEpsilon, ClosedFormExample) {
  EXPECT_NEAR(select_epsilon(std::exp(-1.0), 1.0, 1.0, 1.0, 1.0), 1.0, 1e-15);
}

TEST(SelectEpsilon, MonotoneInDelta) {
  double prev = 1e300;
  for (double delta = 1e-2; delta > 1e-14; delta /= 10.0) {
    const double eps = select_epsilon(delta, 0.1, 0.8, 1.5, 1.0);
    EXPECT_LT(eps, prev);
    prev = eps;
  }
}

TEST(SelectEpsilon, MinimizesTheBracket) {
  Rng rng(17);
  for (int k = 0; k < 50; ++k) {
    const double c3 = rng.uniform(0.1, 3.0), c4 = rng.uniform(0.2, 4.0);
    const double T = rng.uniform(0.5, 2.0), l2 = rng.uniform(0.5, 2.0);
    const double delta = std::exp(rng.uniform(-20.0, -2.0));
    auto f = [&](double e) { return e * l2 + c3 * std::exp(c3 / T) * std::pow(e, -c4) * delta; };
    const double eps = select_epsilon(delta, T, c3, c4, l2);
    EXPECT_LE(f(eps), f(0.5 * eps));
    EXPECT_LE(f(eps), f(2.0 * eps));
    // First-order condition: eps l2 = c4 * (second term).
    const double second = c3 * std::exp(c3 / T) * std::pow(eps, -c4) * delta;
    EXPECT_NEAR(eps * l2, c4 * second, 1e-10 * eps * l2);
  }
}

TEST(TailPrefactor, SingleModeAndConvergence) {
  const EigenBasis b(DomainSpec(1.0), 64);
  const auto p = DiffusionProfile::constant(1.0, 0.3);
  EXPECT_NEAR(tail_prefactor(b, p, 0.1, 1), std::exp(-std::numbers::pi * std::numbers::pi * 0.1),
              1e-15);
  double prev = 0.0;
  for (int n = 1; n <= 64; ++n) {
    const double s = tail_prefactor(b, p, 0.1, n);
    EXPECT_GE(s, prev);
    if (n == 64) {
      EXPECT_NEAR(s / prev, 1.0, 1e-12);
    }
    prev = s;
  }
}

TEST(EffectiveDelta, MatchesFormula) {
  const EigenBasis b(DomainSpec(1.0), 32);
  const auto p = DiffusionProfile::constant(1.0, 0.3);
  const CChain chain = derive_c_chain(0.0, 0.5);
  const double delta = 1e-6, T = 0.1, l2 = 0.7;
  const double eps = select_epsilon(delta, T, chain.c3, chain.c4, l2);
  const double S = tail_prefactor(b, p, T, 32);
  const double expected =
      S * (eps * l2 + chain.c3 * std::exp(chain.c3 / T) * std::pow(eps, -chain.c4) * delta);
  EXPECT_NEAR(effective_delta_3T(delta, eps, T, p, b, l2, chain), expected, 1e-13 * expected);
}

TEST(AssembleFbar, NoiselessFullWindow) {
  const EigenBasis b(DomainSpec(1.0), 16);
  const auto p = DiffusionProfile::constant(1.0, 0.3);
  const double T = 0.1, eps = 1e-3;
  const ControlSystem sys(make_control_setup(b, p, T, Subdomain(0.0, 1.0), eps, 4.0));
  const auto bank = control_mode_bank(sys, 16);
  const SpectralField u0 = synthesize_initial(b, 3.0, 2);
  const std::vector<double> xs = uniform_points(0.0, 1.0, 2048);
  const SpectralField fbar = assemble_fbar(bank, xs, sample(evolve(u0, 0.0, T, p), xs), b, p, T);
  const SpectralField u3 = evolve(u0, 0.0, 3.0 * T, p);
  EXPECT_LE((u3.coeffs - fbar.coeffs).norm(),
            eps * norms(u0).l2 * tail_prefactor(b, p, T, 16) * (1.0 + 1e-9));

  const std::vector<double> zeros(xs.size(), 0.0);
  EXPECT_EQ(assemble_fbar(bank, xs, zeros, b, p, T).coeffs.norm(), 0.0);
}

TEST(AssembleFbar, NoiseTransferBound) {
  const Instance in = empirical_instance(Subdomain(0.3, 0.7));
  const CChain& chain = in.constants.chain;
  const double delta = 1e-7, l2 = 1.0;
  const double eps = select_epsilon(delta, in.T, chain.c3, chain.c4, l2);
  const ControlSystem sys(make_control_setup(in.basis, in.profile, in.T, in.omega, eps,
                                             control_log_k(chain, in.T, eps)));
  const auto bank = control_mode_bank(sys, 32, 4);
  const std::vector<double> xs = uniform_points(0.3, 0.7, 4096);
  const SpectralField u0 = synthesize_initial(in.basis, 3.0, 4);
  const std::vector<double> clean = sample(evolve(u0, 0.0, in.T, in.profile), xs);
  const std::vector<double> noisy = inject_noise(xs, clean, delta, 99);
  const SpectralField a = assemble_fbar(bank, xs, clean, in.basis, in.profile, in.T);
  const SpectralField c = assemble_fbar(bank, xs, noisy, in.basis, in.profile, in.T);
  const double bound = tail_prefactor(in.basis, in.profile, in.T, 64) * chain.c3 *
                       std::exp(chain.c3 / in.T) * std::pow(eps, -chain.c4) * delta;
  EXPECT_LE((a.coeffs - c.coeffs).norm(), bound);
}

TEST(LocalReconstruct, BoundHoldsAcrossNoiseLevels) {
  const Instance in = empirical_instance(Subdomain(0.3, 0.7));
  const std::vector<double> xs = uniform_points(0.3, 0.7, 4096);
  const SpectralField u0 = synthesize_initial(in.basis, 3.0, 6);
  const FieldNorms n = norms(u0);
  const std::vector<double> clean = sample(evolve(u0, 0.0, in.T, in.profile), xs);
  double prev_bound = INFINITY;
  for (int d = 2; d <= 12; ++d) {
    const double delta = std::pow(10.0, -d) * n.l2;
    const std::vector<double> f = inject_noise(xs, clean, delta, derive_seed(1, d));
    const ReconstructionReport r = local_reconstruct(
        xs, f, delta, in.basis, in.profile, in.omega, pipeline(in, {n.l2, n.h01}), &u0);
    ASSERT_TRUE(r.error.has_value());
    EXPECT_LE(*r.error, r.bound) << "delta " << delta;
    EXPECT_LE(r.bank.max_identity_residual, 1e-12);
    if (std::isfinite(prev_bound)) {
      EXPECT_LT(r.bound, prev_bound) << "delta " << delta;
    }
    prev_bound = r.bound;
  }
}

TEST(LocalReconstruct, HalvingDeltaLowersBound) {
  const Instance in = empirical_instance(Subdomain(0.3, 0.7));
  const std::vector<double> xs = uniform_points(0.3, 0.7, 4096);
  const SpectralField u0 = synthesize_initial(in.basis, 3.0, 7);
  const FieldNorms n = norms(u0);
  const std::vector<double> clean = sample(evolve(u0, 0.0, in.T, in.profile), xs);
  for (double delta : {1e-6, 1e-9}) {
    auto run = [&](double d) {
      return local_reconstruct(xs, inject_noise(xs, clean, d, 3), d, in.basis, in.profile,
                               in.omega, pipeline(in, {n.l2, n.h01}))
          .bound;
    };
    EXPECT_LT(run(0.5 * delta), run(delta));
  }
}

TEST(LocalReconstruct, FullWindowDetourIsNearlyLossless) {
  // Against the filter applied directly to noisy u(3T) at the same noise level.
  const Instance in = empirical_instance(Subdomain(0.0, 1.0));
  const std::vector<double> xs = uniform_points(0.0, 1.0, 4096);
  const SpectralField u0 = synthesize_initial(in.basis, 3.0, 8);
  const FieldNorms n = norms(u0);
  const double delta = 1e-10 * n.l2;
  const std::vector<double> f =
      inject_noise(xs, sample(evolve(u0, 0.0, in.T, in.profile), xs), delta, 5);
  const ReconstructionReport r = local_reconstruct(xs, f, delta, in.basis, in.profile, in.omega,
                                                   pipeline(in, {n.l2, n.h01}), &u0);
  const std::vector<double> f3 = inject_noise(
      xs, sample(evolve(u0, 0.0, 3.0 * in.T, in.profile), xs), r.effective_delta, 5);
  const GlobalResult direct = global_backward(xs, f3, in.basis, 3.0 * in.T, in.profile,
                                              {n.l2, n.h01}, r.effective_delta);
  const double direct_error = (u0.coeffs - direct.g.coeffs).norm();
  EXPECT_LE(*r.error, 10.0 * direct_error);
  EXPECT_LE(*r.error, r.bound);
}

TEST(LocalReconstruct, GateSkipsBank) {
  const Instance in = empirical_instance(Subdomain(0.3, 0.7));
  const std::vector<double> xs = uniform_points(0.3, 0.7, 1024);
  const SpectralField u0 = synthesize_initial(in.basis, 3.0, 1);
  const FieldNorms n = norms(u0);
  const double delta = 0.5 * n.l2;
  const std::vector<double> f =
      inject_noise(xs, sample(evolve(u0, 0.0, in.T, in.profile), xs), delta, 1);
  const ReconstructionReport r = local_reconstruct(xs, f, delta, in.basis, in.profile, in.omega,
                                                   pipeline(in, {n.l2, n.h01}), &u0);
  EXPECT_TRUE(r.selection.gate_zero);
  EXPECT_FALSE(r.bank.solved);
  EXPECT_EQ(r.g.coeffs.norm(), 0.0);
  EXPECT_LE(*r.error, r.bound);
}

TEST(LocalReconstruct, Rejections) {
  const Instance in = empirical_instance(Subdomain(0.3, 0.7));
  const std::vector<double> xs = uniform_points(0.3, 0.7, 1024);
  const std::vector<double> f(xs.size(), 0.1);
  const PipelineConfig cfg = pipeline(in, {1.0, 4.0});
  EXPECT_THROW(local_reconstruct(xs, f, 2.0, in.basis, in.profile, in.omega, cfg), InputError);
  const std::vector<double> outside = uniform_points(0.1, 0.7, 1024);
  EXPECT_THROW(local_reconstruct(outside, f, 1e-3, in.basis, in.profile, in.omega, cfg),
               InputError);
  const auto short_profile = DiffusionProfile::constant(1.0, 0.2);
  EXPECT_THROW(local_reconstruct(xs, f, 1e-3, in.basis, short_profile, in.omega, cfg), InputError);
}

TEST(LocalReconstruct, LinearInObservation) {
  const Instance in = empirical_instance(Subdomain(0.3, 0.7));
  const std::vector<double> xs = uniform_points(0.3, 0.7, 2048);
  const SpectralField u0 = synthesize_initial(in.basis, 3.0, 2);
  const FieldNorms n = norms(u0);
  const double delta = 1e-6 * n.l2;
  const PipelineConfig cfg = pipeline(in, {n.l2, n.h01});
  const std::vector<double> f1 = sample(evolve(u0, 0.0, in.T, in.profile), xs);
  const std::vector<double> f2 = inject_noise(xs, std::vector<double>(xs.size(), 0.0), delta, 4);
  std::vector<double> sum(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) sum[k] = f1[k] + f2[k];
  auto g = [&](const std::vector<double>& f) {
    return local_reconstruct(xs, f, delta, in.basis, in.profile, in.omega, cfg).g.coeffs;
  };
  const Eigen::VectorXd lhs = g(sum) + g(std::vector<double>(xs.size(), 0.0));
  const Eigen::VectorXd rhs = g(f1) + g(f2);
  EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
}

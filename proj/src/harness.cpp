#include "backheat/harness.hpp"

#include "backheat/csv.hpp"
#include "backheat/errors.hpp"
#include "backheat/filtering.hpp"
#include "backheat/parallel.hpp"
#include "backheat/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <tuple>

namespace backheat {

using detail::require;

std::vector<double> inject_noise(std::span<const double> xs, std::span<const double> clean,
                                 double delta, std::uint64_t seed) {
  require(!clean.empty(), "inject_noise: empty sample set");
  require(xs.size() == clean.size(), "inject_noise: positions and values differ in length");
  require(delta > 0.0, "inject_noise: delta must be positive");
  Rng rng(seed);
  std::vector<double> noise(clean.size());
  for (double& v : noise) v = rng.normal();
  const double scale = delta / quadrature_norm(xs, noise);
  std::vector<double> out(clean.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = clean[k] + scale * noise[k];
  return out;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::global: return "global";
    case Method::local: return "local";
    case Method::baseline: return "baseline";
  }
  return "?";
}

SpectralField sweep_initial(const ExperimentConfig& cfg, const EigenBasis& basis, int s) {
  return synthesize_initial(basis, cfg.decay, derive_seed(cfg.seed, static_cast<std::uint64_t>(s)));
}

Priors priors_for(const ExperimentConfig& cfg, const SpectralField& u0) {
  const FieldNorms n = norms(u0);
  return Priors{cfg.prior_l2.value_or(n.l2), cfg.prior_h01.value_or(n.h01)};
}

PipelineConfig pipeline_config(const ExperimentConfig& cfg, const ObservabilityConstants& c,
                               const Priors& priors, int threads) {
  PipelineConfig p;
  p.T = cfg.T;
  p.n_bank = cfg.bank;
  p.constants = c;
  p.priors = priors;
  p.zeta_mode = cfg.zeta_mode;
  p.k_scale = cfg.k_scale;
  p.certify_bank = cfg.certify_bank;
  p.threads = threads;
  return p;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

// Stage failures carry the cell and stage in their message.
template <typename Fn>
auto staged(const std::string& stage, double delta, int seed_index, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw InputError("sweep stage '" + stage + "' (delta " + format_double(delta) + ", seed " +
                     std::to_string(seed_index) + "): " + e.what());
  } catch (const InvariantViolation& e) {
    throw InvariantViolation("sweep stage '" + stage + "' (delta " + format_double(delta) +
                             ", seed " + std::to_string(seed_index) + "): " + e.what());
  }
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, int threads) {
  validate(cfg);
  const int n_delta = static_cast<int>(cfg.delta_list.size());
  if (n_delta == 0) return {};

  const EigenBasis basis = cfg.basis();
  const DiffusionProfile profile = cfg.diffusion();
  const Subdomain omega = cfg.omega();
  const ObservabilityConstants constants = make_constants(cfg);
  const std::vector<double> xs_full = uniform_points(0.0, cfg.length, cfg.grid);
  const std::vector<double> xs_omega = uniform_points(omega.a(), omega.b(), cfg.grid);

  const int cells = n_delta * cfg.seeds;
  std::vector<SweepRow> rows(static_cast<std::size_t>(cells) * 3);
  // Cells run in parallel; each bank solve inside a cell stays sequential.
  parallel_for(static_cast<std::size_t>(cells), threads, [&](std::size_t cell) {
    const int d = static_cast<int>(cell) / cfg.seeds;
    const int s = static_cast<int>(cell) % cfg.seeds;
    const SpectralField u0 = sweep_initial(cfg, basis, s);
    const Priors priors = priors_for(cfg, u0);
    const double delta = cfg.delta_list[d] * norms(u0).l2;
    const SpectralField uT = evolve(u0, 0.0, cfg.T, profile);

    auto make_row = [&](Method m) {
      SweepRow r;
      r.delta_index = d;
      r.seed_index = s;
      r.method = m;
      r.delta = delta;
      r.epsilon = kNaN;
      r.alpha = kNaN;
      return r;
    };
    auto finish = [&](SweepRow& r, const Stopwatch& sw) {
      r.bound_ok = r.error <= r.bound;
      r.runtime_ms = cfg.timing ? sw.ms() : 0.0;
    };

    const std::vector<double> clean_full = sample(uT, xs_full);
    const std::vector<double> noisy_full =
        inject_noise(xs_full, clean_full, delta, derive_seed(cfg.seed, s, 2 * d + 1));

    SweepRow global = make_row(Method::global);
    {
      Stopwatch sw;
      const GlobalResult res = staged("global", delta, s, [&] {
        return global_backward(xs_full, noisy_full, basis, cfg.T, profile, priors, delta);
      });
      global.alpha = res.selection.alpha.value_or(kNaN);
      global.bound = res.selection.bound;
      global.error = (u0.coeffs - res.g.coeffs).norm();
      finish(global, sw);
    }

    SweepRow baseline = make_row(Method::baseline);
    {
      Stopwatch sw;
      staged("baseline", delta, s, [&] {
        const SpectralField observed = project(xs_full, noisy_full, basis);
        const int cutoff =
            cfg.cutoff.value_or(choose_cutoff(basis, cfg.T, profile, delta, priors.h01).cutoff);
        const SpectralField g = truncation_baseline(observed, cutoff, cfg.T, profile);
        baseline.bound = cutoff_bound(basis, cutoff, cfg.T, profile, delta, priors.h01);
        baseline.error = (u0.coeffs - g.coeffs).norm();
        return 0;
      });
      finish(baseline, sw);
    }

    SweepRow local = make_row(Method::local);
    {
      Stopwatch sw;
      const std::vector<double> clean_omega = sample(uT, xs_omega);
      const std::vector<double> noisy_omega =
          inject_noise(xs_omega, clean_omega, delta, derive_seed(cfg.seed, s, 2 * d + 2));
      const ReconstructionReport rep = staged("local", delta, s, [&] {
        return local_reconstruct(xs_omega, noisy_omega, delta, basis, profile, omega,
                                 pipeline_config(cfg, constants, priors, 1), &u0);
      });
      local.epsilon = rep.epsilon;
      local.alpha = rep.selection.alpha.value_or(kNaN);
      local.bound = rep.bound;
      local.error = *rep.error;
      finish(local, sw);
    }

    rows[3 * cell + 0] = global;
    rows[3 * cell + 1] = local;
    rows[3 * cell + 2] = baseline;
  });

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tuple(a.delta_index, a.seed_index, static_cast<int>(a.method)) <
           std::tuple(b.delta_index, b.seed_index, static_cast<int>(b.method));
  });
  return rows;
}

void write_observation_csv(std::ostream& out, const Observation& obs) {
  out << "x,value\n";
  for (std::size_t k = 0; k < obs.xs.size(); ++k)
    out << format_double(obs.xs[k]) << ',' << format_double(obs.values[k]) << '\n';
}

Observation read_observation_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "observation CSV is empty");
  const auto header = split_csv_line(line);
  require(header.size() == 2 && header[0] == "x" && header[1] == "value",
          "observation CSV header must be `x,value`");
  Observation obs;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == 2,
            "observation CSV row " + std::to_string(row) + ": expected 2 columns");
    obs.xs.push_back(parse_double(cells[0], "x"));
    obs.values.push_back(parse_double(cells[1], "value"));
  }
  require(!obs.xs.empty(), "observation CSV has no samples");
  return obs;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "delta,method,epsilon,alpha,bound,error,bound_ok,runtime_ms\n";
  for (const SweepRow& r : rows) {
    out << format_double(r.delta) << ',' << to_string(r.method) << ','
        << format_double(r.epsilon) << ',' << format_double(r.alpha) << ','
        << format_double(r.bound) << ',' << format_double(r.error) << ','
        << (r.bound_ok ? "true" : "false") << ',' << format_double(r.runtime_ms) << '\n';
  }
}

}  // namespace backheat

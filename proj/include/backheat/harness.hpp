#pragma once

#include "backheat/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace backheat {

/// Adds seeded Gaussian noise rescaled so its quadrature L2 norm over the
/// sample grid equals delta.
std::vector<double> inject_noise(std::span<const double> xs, std::span<const double> clean,
                                 double delta, std::uint64_t seed);

enum class Method { global, local, baseline };
const char* to_string(Method m);

struct SweepRow {
  int delta_index = 0;
  int seed_index = 0;
  Method method = Method::global;
  double delta = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double bound = 0.0;
  double error = 0.0;
  bool bound_ok = false;
  double runtime_ms = 0.0;
};

/// One row per (delta, seed, method), sorted in that order.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, int threads = 1);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Synthetic ground truth for seed index s of a configuration.
SpectralField sweep_initial(const ExperimentConfig& cfg, const EigenBasis& basis, int s);

/// Priors from the config when given, else from the field itself.
Priors priors_for(const ExperimentConfig& cfg, const SpectralField& u0);

/// Observation CSV: header `x,value`, one sample per row.
struct Observation {
  std::vector<double> xs;
  std::vector<double> values;
};

void write_observation_csv(std::ostream& out, const Observation& obs);
Observation read_observation_csv(std::istream& in);

PipelineConfig pipeline_config(const ExperimentConfig& cfg, const ObservabilityConstants& c,
                               const Priors& priors, int threads);

}  // namespace backheat

#pragma once

// Experiment configuration: a line-oriented `key = value` text format with
// `#` comments. Unknown keys are rejected.
//
// Required: length, T, delta_list (relative to |u0|, whitespace or comma
// separated, may be empty).
// Optional (default):
//   omega            a b          (0.3 L, 0.7 L); also fixes x0 = (a + b) / 2
//   profile          constant | affine | sinusoidal       (constant)
//   profile_params   numbers for the profile kind         (1)
//   modes            truncation N                          (64)
//   bank             control bank size                     (32)
//   decay            initial coefficient decay              (3)
//   seed, seeds      base seed, seeds per delta            (1, 3)
//   constants_mode   closed_form | empirical               (closed_form)
//   zeta_mode        transfer | default                    (transfer)
//   xi               in (0, 1)                             (0.5)
//   grid             sample intervals per observation grid (4096)
//   epsilon          control tolerance for `control`       (1e-2)
//   empirical_samples fields in the Holder fit             (200)
//   k_scale          multiplier on k                       (1)
//   certify_bank     true | false                          (true)
//   timing           record runtimes in sweeps             (false)
//   fd_points, fd_steps  Crank-Nicolson resolution          (2000, 2000)
//   delta            absolute noise level for single runs  (unset)
//   prior_l2, prior_h01  a priori norms                    (from the synthetic u0)
//   cutoff           truncation baseline cutoff             (chosen per run)
//   out, report      output paths                          (unset)

#include "backheat/local_backward.hpp"
#include "backheat/observability.hpp"
#include "backheat/spectral_core.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace backheat {

struct ExperimentConfig {
  double length = 1.0;
  double T = 0.1;
  std::vector<double> delta_list;
  double omega_a = 0.3;
  double omega_b = 0.7;
  ProfileKind profile = ProfileKind::constant;
  std::vector<double> profile_params{1.0};
  int modes = 64;
  int bank = 32;
  double decay = 3.0;
  std::uint64_t seed = 1;
  int seeds = 3;
  ConstantsMode constants_mode = ConstantsMode::closed_form;
  ZetaMode zeta_mode = ZetaMode::transfer;
  double xi = 0.5;
  int grid = 4096;
  double epsilon = 1e-2;
  int empirical_samples = 200;
  double k_scale = 1.0;
  bool certify_bank = true;
  bool timing = false;
  int fd_points = 2000;
  int fd_steps = 2000;
  std::optional<double> delta;
  std::optional<double> prior_l2;
  std::optional<double> prior_h01;
  std::optional<int> cutoff;
  std::optional<std::string> out;
  std::optional<std::string> report;

  bool operator==(const ExperimentConfig&) const = default;

  DomainSpec domain() const;
  Subdomain omega() const;
  /// Valid on [0, 3T].
  DiffusionProfile diffusion() const;
  EigenBasis basis() const;
};

/// Parses the text format; `source` names the input in diagnostics.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
void emit_config(std::ostream& out, const ExperimentConfig& cfg);

/// Cross-field checks; throws InputError.
void validate(const ExperimentConfig& cfg);

/// Constants for the configured mode: the closed forms for a window centered
/// in the domain spec, or the empirical fit over [0, T].
ObservabilityConstants make_constants(const ExperimentConfig& cfg);

}  // namespace backheat

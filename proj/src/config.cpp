#include "backheat/config.hpp"

#include "backheat/csv.hpp"
#include "backheat/errors.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace backheat {

using detail::require;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> tokens(const std::string& value) {
  std::string v = value;
  for (char& ch : v) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream in(v);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

double one_number(const std::string& value, const std::string& key) {
  const auto t = tokens(value);
  require(t.size() == 1, "expected one number for '" + key + "'");
  return parse_double(t[0], key);
}

std::vector<double> numbers(const std::string& value, const std::string& key) {
  std::vector<double> out;
  for (const auto& t : tokens(value)) out.push_back(parse_double(t, key));
  return out;
}

int integer(const std::string& value, const std::string& key) {
  const double v = one_number(value, key);
  require(v == std::floor(v) && std::abs(v) < 2e9, "'" + key + "' must be an integer");
  return static_cast<int>(v);
}

bool boolean(const std::string& value, const std::string& key) {
  if (value == "true") return true;
  if (value == "false") return false;
  detail::reject("'" + key + "' must be true or false");
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + format_double(xs[i]);
  return s;
}

}  // namespace

DomainSpec ExperimentConfig::domain() const {
  return DomainSpec(length, 0.5 * (omega_a + omega_b));
}

Subdomain ExperimentConfig::omega() const { return Subdomain(omega_a, omega_b); }

DiffusionProfile ExperimentConfig::diffusion() const {
  return DiffusionProfile::make(profile, profile_params, 3.0 * T);
}

EigenBasis ExperimentConfig::basis() const { return EigenBasis(domain(), modes); }

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig cfg;
  bool omega_set = false;
  std::set<std::string> seen;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"length", [&](auto& v, auto& k) { cfg.length = one_number(v, k); }},
      {"T", [&](auto& v, auto& k) { cfg.T = one_number(v, k); }},
      {"delta_list", [&](auto& v, auto& k) { cfg.delta_list = numbers(v, k); }},
      {"omega",
       [&](auto& v, auto& k) {
         const auto ab = numbers(v, k);
         require(ab.size() == 2, "'omega' takes two numbers a b");
         cfg.omega_a = ab[0];
         cfg.omega_b = ab[1];
         omega_set = true;
       }},
      {"profile", [&](auto& v, auto&) { cfg.profile = parse_profile_kind(v); }},
      {"profile_params", [&](auto& v, auto& k) { cfg.profile_params = numbers(v, k); }},
      {"modes", [&](auto& v, auto& k) { cfg.modes = integer(v, k); }},
      {"bank", [&](auto& v, auto& k) { cfg.bank = integer(v, k); }},
      {"decay", [&](auto& v, auto& k) { cfg.decay = one_number(v, k); }},
      {"seed",
       [&](auto& v, auto& k) {
         const double s = one_number(v, k);
         require(s >= 0.0 && s == std::floor(s) && s < 9.007e15,
                 "'seed' must be a nonnegative integer");
         cfg.seed = static_cast<std::uint64_t>(s);
       }},
      {"seeds", [&](auto& v, auto& k) { cfg.seeds = integer(v, k); }},
      {"constants_mode", [&](auto& v, auto&) { cfg.constants_mode = parse_constants_mode(v); }},
      {"zeta_mode", [&](auto& v, auto&) { cfg.zeta_mode = parse_zeta_mode(v); }},
      {"xi", [&](auto& v, auto& k) { cfg.xi = one_number(v, k); }},
      {"grid", [&](auto& v, auto& k) { cfg.grid = integer(v, k); }},
      {"epsilon", [&](auto& v, auto& k) { cfg.epsilon = one_number(v, k); }},
      {"empirical_samples", [&](auto& v, auto& k) { cfg.empirical_samples = integer(v, k); }},
      {"k_scale", [&](auto& v, auto& k) { cfg.k_scale = one_number(v, k); }},
      {"certify_bank", [&](auto& v, auto& k) { cfg.certify_bank = boolean(v, k); }},
      {"timing", [&](auto& v, auto& k) { cfg.timing = boolean(v, k); }},
      {"fd_points", [&](auto& v, auto& k) { cfg.fd_points = integer(v, k); }},
      {"fd_steps", [&](auto& v, auto& k) { cfg.fd_steps = integer(v, k); }},
      {"delta", [&](auto& v, auto& k) { cfg.delta = one_number(v, k); }},
      {"prior_l2", [&](auto& v, auto& k) { cfg.prior_l2 = one_number(v, k); }},
      {"prior_h01", [&](auto& v, auto& k) { cfg.prior_h01 = one_number(v, k); }},
      {"cutoff", [&](auto& v, auto& k) { cfg.cutoff = integer(v, k); }},
      {"out", [&](auto& v, auto&) { cfg.out = v; }},
      {"report", [&](auto& v, auto&) { cfg.report = v; }},
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) detail::reject(where + "expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) detail::reject(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) detail::reject(where + "duplicate key '" + key + "'");
    try {
      it->second(value, key);
    } catch (const InputError& e) {
      detail::reject(where + e.what());
    }
  }
  for (const char* key : {"length", "T", "delta_list"}) {
    if (!seen.count(key)) detail::reject(source + ": missing required key '" + key + "'");
  }
  if (!omega_set) {
    cfg.omega_a = 0.3 * cfg.length;
    cfg.omega_b = 0.7 * cfg.length;
  }
  try {
    validate(cfg);
  } catch (const InputError& e) {
    detail::reject(source + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

void validate(const ExperimentConfig& c) {
  require(std::isfinite(c.length) && c.length > 0.0, "length must be positive");
  require(std::isfinite(c.T) && c.T > 0.0, "T must be positive");
  for (double d : c.delta_list) {
    require(d > 0.0 && d < 1.0, "delta_list entries are relative to |u0| and must lie in (0, 1)");
  }
  require(c.omega_a >= 0.0 && c.omega_a < c.omega_b && c.omega_b <= c.length,
          "omega must satisfy 0 <= a < b <= length");
  require(c.modes >= 1 && c.modes <= 256, "modes must lie in [1, 256]");
  require(c.bank >= 1 && c.bank <= c.modes, "bank must lie in [1, modes]");
  require(c.decay > 1.0, "decay must exceed 1");
  require(c.seeds >= 1, "seeds must be at least 1");
  require(c.xi > 0.0 && c.xi < 1.0, "xi must lie in (0, 1)");
  require(c.grid >= 8 * c.modes && c.grid % 2 == 0,
          "grid must be even and at least 8 * modes intervals");
  require(c.epsilon > 0.0, "epsilon must be positive");
  require(c.empirical_samples >= 2, "empirical_samples must be at least 2");
  require(c.k_scale > 0.0 && std::isfinite(c.k_scale), "k_scale must be positive");
  require(c.fd_points >= 64, "fd_points must be at least 64");
  require(c.fd_steps >= 1, "fd_steps must be at least 1");
  if (c.delta) require(*c.delta > 0.0, "delta must be positive");
  if (c.prior_l2) require(*c.prior_l2 > 0.0, "prior_l2 must be positive");
  if (c.prior_h01) require(*c.prior_h01 > 0.0, "prior_h01 must be positive");
  if (c.cutoff) require(*c.cutoff >= 1 && *c.cutoff <= c.modes, "cutoff must lie in [1, modes]");
  (void)c.diffusion();
}

void emit_config(std::ostream& out, const ExperimentConfig& c) {
  out << "length = " << format_double(c.length) << '\n';
  out << "T = " << format_double(c.T) << '\n';
  out << "delta_list = " << join(c.delta_list) << '\n';
  out << "omega = " << format_double(c.omega_a) << ' ' << format_double(c.omega_b) << '\n';
  out << "profile = " << to_string(c.profile) << '\n';
  out << "profile_params = " << join(c.profile_params) << '\n';
  out << "modes = " << c.modes << '\n';
  out << "bank = " << c.bank << '\n';
  out << "decay = " << format_double(c.decay) << '\n';
  out << "seed = " << c.seed << '\n';
  out << "seeds = " << c.seeds << '\n';
  out << "constants_mode = " << to_string(c.constants_mode) << '\n';
  out << "zeta_mode = " << to_string(c.zeta_mode) << '\n';
  out << "xi = " << format_double(c.xi) << '\n';
  out << "grid = " << c.grid << '\n';
  out << "epsilon = " << format_double(c.epsilon) << '\n';
  out << "empirical_samples = " << c.empirical_samples << '\n';
  out << "k_scale = " << format_double(c.k_scale) << '\n';
  out << "certify_bank = " << (c.certify_bank ? "true" : "false") << '\n';
  out << "timing = " << (c.timing ? "true" : "false") << '\n';
  out << "fd_points = " << c.fd_points << '\n';
  out << "fd_steps = " << c.fd_steps << '\n';
  if (c.delta) out << "delta = " << format_double(*c.delta) << '\n';
  if (c.prior_l2) out << "prior_l2 = " << format_double(*c.prior_l2) << '\n';
  if (c.prior_h01) out << "prior_h01 = " << format_double(*c.prior_h01) << '\n';
  if (c.cutoff) out << "cutoff = " << *c.cutoff << '\n';
  if (c.out) out << "out = " << *c.out << '\n';
  if (c.report) out << "report = " << *c.report << '\n';
}

ObservabilityConstants make_constants(const ExperimentConfig& cfg) {
  const DiffusionProfile profile = cfg.diffusion();
  if (cfg.constants_mode == ConstantsMode::closed_form) {
    return constants_convex(cfg.domain(), cfg.omega().half_width(), profile, cfg.xi);
  }
  const EigenBasis basis = cfg.basis();
  return fit_empirical(basis, cfg.T, profile, gram_subdomain(cfg.omega(), basis),
                       cfg.empirical_samples, cfg.seed);
}

}  // namespace backheat

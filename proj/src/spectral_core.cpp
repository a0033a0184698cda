#include "backheat/spectral_core.hpp"

#include "backheat/csv.hpp"
#include "backheat/errors.hpp"
#include "backheat/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace backheat {

using detail::require;

namespace {
constexpr double kPi = std::numbers::pi;

// Relative slack when comparing time arguments against the profile window.
constexpr double kTimeSlack = 1e-12;
}  // namespace

// --------------------------------------------------------------------------
// Domain types

DomainSpec::DomainSpec(double length, double x0) : length_(length), x0_(x0) {
  require(std::isfinite(length) && length > 0.0, "domain length must be positive");
  require(x0 > 0.0 && x0 < length, "domain center x0 must lie in (0, L)");
}

double DomainSpec::radius() const { return std::max(x0_, length_ - x0_); }

Subdomain::Subdomain(double a, double b) : a_(a), b_(b) {
  require(std::isfinite(a) && std::isfinite(b) && a < b, "subdomain needs a < b");
}

void Subdomain::validate(const DomainSpec& domain) const {
  require(a_ >= 0.0 && b_ <= domain.length(),
          "subdomain (" + std::to_string(a_) + ", " + std::to_string(b_) +
              ") is not contained in (0, L)");
}

bool Subdomain::covers(const DomainSpec& domain) const {
  return a_ <= 0.0 && b_ >= domain.length();
}

const char* to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::constant: return "constant";
    case ProfileKind::affine: return "affine";
    case ProfileKind::sinusoidal: return "sinusoidal";
  }
  return "?";
}

ProfileKind parse_profile_kind(const std::string& name) {
  if (name == "constant") return ProfileKind::constant;
  if (name == "affine") return ProfileKind::affine;
  if (name == "sinusoidal") return ProfileKind::sinusoidal;
  detail::reject("unknown profile kind '" + name + "' (constant | affine | sinusoidal)");
}

// --------------------------------------------------------------------------
// DiffusionProfile

namespace {

// Range of sin over [lo, hi].
std::pair<double, double> sin_range(double lo, double hi) {
  double smin = std::min(std::sin(lo), std::sin(hi));
  double smax = std::max(std::sin(lo), std::sin(hi));
  // Peaks at pi/2 + 2k pi, troughs at 3pi/2 + 2k pi.
  const double first_peak = kPi / 2 + 2 * kPi * std::ceil((lo - kPi / 2) / (2 * kPi));
  if (first_peak <= hi) smax = 1.0;
  const double first_trough = 3 * kPi / 2 + 2 * kPi * std::ceil((lo - 3 * kPi / 2) / (2 * kPi));
  if (first_trough <= hi) smin = -1.0;
  return {smin, smax};
}

double max_abs_cos(double lo, double hi) {
  const double first_extremum = kPi * std::ceil(lo / kPi);
  if (first_extremum <= hi) return 1.0;
  return std::max(std::abs(std::cos(lo)), std::abs(std::cos(hi)));
}

}  // namespace

DiffusionProfile::DiffusionProfile(ProfileKind kind, std::vector<double> params, double horizon)
    : kind_(kind), params_(std::move(params)), horizon_(horizon) {
  require(std::isfinite(horizon) && horizon > 0.0, "profile horizon must be positive");
  for (double v : params_) require(std::isfinite(v), "profile parameters must be finite");
  switch (kind_) {
    case ProfileKind::constant:
      p1_ = p2_ = params_[0];
      dp_inf_ = 0.0;
      break;
    case ProfileKind::affine: {
      const double c0 = params_[0], c1 = params_[1];
      p1_ = std::min(c0, c0 + c1 * horizon_);
      p2_ = std::max(c0, c0 + c1 * horizon_);
      dp_inf_ = std::abs(c1);
      break;
    }
    case ProfileKind::sinusoidal: {
      const double base = params_[0], amp = params_[1], freq = params_[2];
      const double lo = std::min(0.0, freq * horizon_);
      const double hi = std::max(0.0, freq * horizon_);
      const auto [smin, smax] = sin_range(lo, hi);
      p1_ = base + std::min(amp * smin, amp * smax);
      p2_ = base + std::max(amp * smin, amp * smax);
      dp_inf_ = std::abs(amp * freq) * max_abs_cos(lo, hi);
      break;
    }
  }
  require(p1_ > 0.0, "diffusion profile must stay positive on [0, horizon]");
}

DiffusionProfile DiffusionProfile::constant(double value, double horizon) {
  return DiffusionProfile(ProfileKind::constant, {value}, horizon);
}

DiffusionProfile DiffusionProfile::affine(double intercept, double slope, double horizon) {
  return DiffusionProfile(ProfileKind::affine, {intercept, slope}, horizon);
}

DiffusionProfile DiffusionProfile::sinusoidal(double base, double amplitude, double frequency,
                                              double horizon) {
  return DiffusionProfile(ProfileKind::sinusoidal, {base, amplitude, frequency}, horizon);
}

DiffusionProfile DiffusionProfile::make(ProfileKind kind, std::span<const double> params,
                                        double horizon) {
  const std::size_t expected = kind == ProfileKind::constant ? 1
                               : kind == ProfileKind::affine ? 2
                                                             : 3;
  require(params.size() == expected, std::string(to_string(kind)) + " profile takes " +
                                         std::to_string(expected) + " parameter(s)");
  return DiffusionProfile(kind, std::vector<double>(params.begin(), params.end()), horizon);
}

DiffusionProfile DiffusionProfile::with_horizon(double horizon) const {
  return DiffusionProfile(kind_, params_, horizon);
}

double DiffusionProfile::value(double t) const {
  switch (kind_) {
    case ProfileKind::constant: return params_[0];
    case ProfileKind::affine: return params_[0] + params_[1] * t;
    case ProfileKind::sinusoidal: return params_[0] + params_[1] * std::sin(params_[2] * t);
  }
  return 0.0;
}

double DiffusionProfile::derivative(double t) const {
  switch (kind_) {
    case ProfileKind::constant: return 0.0;
    case ProfileKind::affine: return params_[1];
    case ProfileKind::sinusoidal: return params_[1] * params_[2] * std::cos(params_[2] * t);
  }
  return 0.0;
}

double DiffusionProfile::antiderivative(double t) const {
  switch (kind_) {
    case ProfileKind::constant: return params_[0] * t;
    case ProfileKind::affine: return params_[0] * t + 0.5 * params_[1] * t * t;
    case ProfileKind::sinusoidal:
      if (params_[2] == 0.0) return params_[0] * t;
      return params_[0] * t - params_[1] * std::cos(params_[2] * t) / params_[2];
  }
  return 0.0;
}

double DiffusionProfile::integral(double t0, double t1) const {
  require(t0 <= t1, "p_integral: reversed interval");
  require(t0 >= -kTimeSlack * horizon_ && t1 <= horizon_ * (1.0 + kTimeSlack),
          "p_integral: interval outside [0, horizon]");
  if (t0 == t1) return 0.0;
  switch (kind_) {
    case ProfileKind::constant: return params_[0] * (t1 - t0);
    case ProfileKind::affine: return (t1 - t0) * (params_[0] + 0.5 * params_[1] * (t0 + t1));
    case ProfileKind::sinusoidal: {
      if (params_[2] == 0.0) return params_[0] * (t1 - t0);
      // cos(w t0) - cos(w t1) = 2 sin(w (t0 + t1)/2) sin(w (t1 - t0)/2) avoids cancellation.
      const double w = params_[2];
      const double dcos = 2.0 * std::sin(0.5 * w * (t0 + t1)) * std::sin(0.5 * w * (t1 - t0));
      return params_[0] * (t1 - t0) + params_[1] * dcos / w;
    }
  }
  return antiderivative(t1) - antiderivative(t0);
}

double p_integral(const DiffusionProfile& profile, double t0, double t1) {
  return profile.integral(t0, t1);
}

// --------------------------------------------------------------------------
// Eigenbasis

double EigenPair::operator()(double x) const {
  return std::sqrt(2.0 / length) * std::sin(index * kPi * x / length);
}

EigenPair eigen_pair(int i, const DomainSpec& domain) {
  require(i >= 1, "eigen_pair: mode index must be >= 1");
  const double k = i * kPi / domain.length();
  return EigenPair{i, domain.length(), k * k};
}

EigenBasis::EigenBasis(DomainSpec domain, int modes)
    : domain_(domain), modes_(modes), eigenvalues_(std::max(modes, 0)) {
  require(modes >= 1, "basis needs at least one mode");
  for (int i = 1; i <= modes; ++i) eigenvalues_[i - 1] = eigen_pair(i, domain_).eigenvalue;
}

double EigenBasis::eval(int i, double x) const {
  return std::sqrt(2.0 / length()) * std::sin(i * kPi * x / length());
}

SpectralField::SpectralField(EigenBasis b, Eigen::VectorXd a)
    : basis(std::move(b)), coeffs(std::move(a)) {
  require(coeffs.size() == basis.modes(), "coefficient count must match the basis size");
}

SpectralField SpectralField::unit(const EigenBasis& b, int i) {
  require(i >= 1 && i <= b.modes(), "unit field: mode out of range");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(b.modes());
  a[i - 1] = 1.0;
  return SpectralField(b, std::move(a));
}

double SpectralField::operator()(double x) const {
  double s = 0.0;
  for (int i = 1; i <= modes(); ++i) s += coeffs[i - 1] * basis.eval(i, x);
  return s;
}

Eigen::VectorXd propagator(const EigenBasis& basis, const DiffusionProfile& profile, double t0,
                           double t1) {
  const double integral = profile.integral(t0, t1);
  return (-basis.eigenvalues().array() * integral).exp().matrix();
}

SpectralField evolve(const SpectralField& field, double t0, double t1,
                     const DiffusionProfile& profile) {
  require(t0 >= 0.0 && t0 <= t1, "evolve needs 0 <= t0 <= t1");
  if (t0 == t1) return field;
  Eigen::VectorXd a = field.coeffs.cwiseProduct(propagator(field.basis, profile, t0, t1));
  return SpectralField(field.basis, std::move(a));
}

// --------------------------------------------------------------------------
// Quadrature

std::vector<double> uniform_points(double a, double b, int intervals) {
  require(intervals >= 1 && a < b, "uniform_points: need a < b and at least one interval");
  std::vector<double> xs(static_cast<std::size_t>(intervals) + 1);
  const double h = (b - a) / intervals;
  for (int k = 0; k <= intervals; ++k) xs[k] = a + k * h;
  xs.back() = b;
  return xs;
}

std::vector<double> simpson_weights(std::size_t points, double step) {
  require(points >= 2, "quadrature needs at least two points");
  std::vector<double> w(points, 0.0);
  if (points == 2) {
    w[0] = w[1] = 0.5 * step;
    return w;
  }
  const std::size_t intervals = points - 1;
  // Simpson part covers an even number of intervals; an odd remainder is
  // closed with the 3/8 rule over the last three.
  const std::size_t simpson_intervals = intervals % 2 == 0 ? intervals : intervals - 3;
  for (std::size_t k = 0; k + 2 <= simpson_intervals; k += 2) {
    w[k] += step / 3.0;
    w[k + 1] += 4.0 * step / 3.0;
    w[k + 2] += step / 3.0;
  }
  if (simpson_intervals != intervals) {
    const std::size_t k = simpson_intervals;
    w[k] += 3.0 * step / 8.0;
    w[k + 1] += 9.0 * step / 8.0;
    w[k + 2] += 9.0 * step / 8.0;
    w[k + 3] += 3.0 * step / 8.0;
  }
  return w;
}

double uniform_step(std::span<const double> xs) {
  require(xs.size() >= 2, "sample grid needs at least two points");
  const double h = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  require(h > 0.0, "sample grid must be increasing");
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double expected = xs.front() + static_cast<double>(k) * h;
    require(std::abs(xs[k] - expected) <= 1e-9 * std::max(1.0, std::abs(xs.back())),
            "sample grid is not uniform (point " + std::to_string(k) + ")");
  }
  return h;
}

Eigen::VectorXd quadrature_moments(std::span<const double> xs, std::span<const double> values,
                                   const EigenBasis& basis) {
  require(xs.size() == values.size(), "sample positions and values differ in length");
  const double h = uniform_step(xs);
  const std::vector<double> w = simpson_weights(xs.size(), h);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(basis.modes());
  const double scale = std::sqrt(2.0 / basis.length());
  const double k = kPi / basis.length();
  for (std::size_t m = 0; m < xs.size(); ++m) {
    const double wf = w[m] * values[m];
    if (wf == 0.0) continue;
    for (int i = 1; i <= basis.modes(); ++i) q[i - 1] += wf * scale * std::sin(i * k * xs[m]);
  }
  return q;
}

double quadrature_norm(std::span<const double> xs, std::span<const double> values) {
  require(xs.size() == values.size(), "sample positions and values differ in length");
  const std::vector<double> w = simpson_weights(xs.size(), uniform_step(xs));
  double s = 0.0;
  for (std::size_t m = 0; m < xs.size(); ++m) s += w[m] * values[m] * values[m];
  return std::sqrt(s);
}

SpectralField project(std::span<const double> xs, std::span<const double> values,
                      const EigenBasis& basis) {
  require(xs.size() == values.size(), "sample positions and values differ in length");
  const double L = basis.length();
  require(xs.size() >= 2 && std::abs(xs.front()) <= 1e-12 * L &&
              std::abs(xs.back() - L) <= 1e-12 * L,
          "project: samples must cover [0, L] including both endpoints");
  const std::size_t needed = 8 * static_cast<std::size_t>(basis.modes());
  require(xs.size() >= needed, "project: grid too coarse for " + std::to_string(basis.modes()) +
                                   " modes (" + std::to_string(xs.size()) + " samples, need >= " +
                                   std::to_string(needed) + ")");
  return SpectralField(basis, quadrature_moments(xs, values, basis));
}

std::vector<double> sample(const SpectralField& field, std::span<const double> xs) {
  std::vector<double> v(xs.size());
  for (std::size_t m = 0; m < xs.size(); ++m) v[m] = field(xs[m]);
  return v;
}

// --------------------------------------------------------------------------
// Gram matrices and norms

Eigen::MatrixXd gram_subdomain(const Subdomain& omega, const EigenBasis& basis) {
  omega.validate(basis.domain());
  const int n = basis.modes();
  const double L = basis.length();
  const double k = kPi / L;
  const double a = omega.a(), b = omega.b();
  Eigen::MatrixXd G(n, n);
  if (omega.covers(basis.domain())) {
    G.setIdentity();
    return G;
  }
  // e_i e_j = (1/L) [cos((i-j) k x) - cos((i+j) k x)]
  auto sin_diff = [&](int m) {
    // (sin(m k b) - sin(m k a)) / (m k), written as a product to avoid cancellation.
    const double mk = m * k;
    return 2.0 * std::cos(0.5 * mk * (a + b)) * std::sin(0.5 * mk * (b - a)) / mk;
  };
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      const double plus = sin_diff(i + j);
      const double minus = i == j ? (b - a) : sin_diff(i - j);
      G(i - 1, j - 1) = (minus - plus) / L;
      G(j - 1, i - 1) = G(i - 1, j - 1);
    }
  }
  return G;
}

double subdomain_norm(const Eigen::VectorXd& a, const Eigen::MatrixXd& gram) {
  return std::sqrt(std::max(0.0, a.dot(gram * a)));
}

FieldNorms norms(const SpectralField& field) {
  const Eigen::VectorXd& a = field.coeffs;
  return FieldNorms{a.norm(),
                    std::sqrt((field.basis.eigenvalues().array() * a.array().square()).sum()),
                    std::nullopt};
}

FieldNorms norms(const SpectralField& field, const Eigen::MatrixXd& gram) {
  require(gram.rows() == field.modes() && gram.cols() == field.modes(),
          "gram matrix does not match the field's basis");
  FieldNorms n = norms(field);
  n.l2_sub = subdomain_norm(field.coeffs, gram);
  return n;
}

SpectralField synthesize_initial(const EigenBasis& basis, double decay, std::uint64_t seed) {
  require(decay > 1.0, "synthesize_initial: decay must exceed 1");
  Rng rng(seed);
  Eigen::VectorXd a(basis.modes());
  for (int i = 1; i <= basis.modes(); ++i) {
    const double u = 0.5 + 0.5 * rng.uniform();
    const double sign = rng.coin() ? 1.0 : -1.0;
    a[i - 1] = sign * u / std::pow(static_cast<double>(i), decay);
  }
  return SpectralField(basis, std::move(a));
}

// --------------------------------------------------------------------------
// CSV

void write_field_csv(std::ostream& out, const SpectralField& field) {
  out << "i,lambda_i,a_i\n";
  for (int i = 1; i <= field.modes(); ++i) {
    out << i << ',' << format_double(field.basis.eigenvalue(i)) << ','
        << format_double(field.coeffs[i - 1]) << '\n';
  }
}

SpectralField read_field_csv(std::istream& in, const DomainSpec& domain) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "field CSV is empty");
  const auto header = split_csv_line(line);
  require(header.size() == 3 && header[0] == "i" && header[1] == "lambda_i" && header[2] == "a_i",
          "field CSV header must be `i,lambda_i,a_i`");
  std::vector<double> coeffs;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == 3, "field CSV row " + std::to_string(row) + ": expected 3 columns");
    const double i = parse_double(cells[0], "mode index");
    require(i == static_cast<double>(coeffs.size() + 1),
            "field CSV row " + std::to_string(row) + ": modes must be listed 1..N in order");
    coeffs.push_back(parse_double(cells[2], "coefficient"));
  }
  require(!coeffs.empty(), "field CSV has no modes");
  EigenBasis basis(domain, static_cast<int>(coeffs.size()));
  return SpectralField(basis, Eigen::Map<Eigen::VectorXd>(coeffs.data(), coeffs.size()));
}

// --------------------------------------------------------------------------
// CSV helpers

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos
                                                                               : comma - start);
    const auto first = cell.find_first_not_of(" \t\r\n");
    const auto last = cell.find_last_not_of(" \t\r\n");
    cells.emplace_back(first == cell.npos ? std::string_view{}
                                          : cell.substr(first, last - first + 1));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_double(std::string_view text, std::string_view what) {
  std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(),
          "malformed number '" + s + "' for " + std::string(what));
  return v;
}

}  // namespace backheat

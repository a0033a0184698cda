#pragma once

// Dirichlet sine eigenbasis on an interval, diffusion profiles p(t), spectral
// fields and the exact diagonal forward propagator of u_t = p(t) u_xx.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace backheat {

/// The interval (0, L) together with a reference point x0 used by the
/// observability constants. R = max(x0, L - x0).
class DomainSpec {
public:
  DomainSpec(double length, double x0);
  /// Domain centered at L/2.
  explicit DomainSpec(double length) : DomainSpec(length, 0.5 * length) {}

  double length() const { return length_; }
  double x0() const { return x0_; }
  double radius() const;

  bool operator==(const DomainSpec&) const = default;

private:
  double length_;
  double x0_;
};

/// Observation window (a, b) inside (0, L).
class Subdomain {
public:
  Subdomain(double a, double b);
  static Subdomain centered(double x0, double r) { return Subdomain(x0 - r, x0 + r); }
  static Subdomain whole(const DomainSpec& domain) { return Subdomain(0.0, domain.length()); }

  double a() const { return a_; }
  double b() const { return b_; }
  double width() const { return b_ - a_; }
  double center() const { return 0.5 * (a_ + b_); }
  double half_width() const { return 0.5 * (b_ - a_); }

  /// Throws InputError unless (a, b) lies inside (0, L).
  void validate(const DomainSpec& domain) const;
  bool covers(const DomainSpec& domain) const;

  bool operator==(const Subdomain&) const = default;

private:
  double a_;
  double b_;
};

enum class ProfileKind { constant, affine, sinusoidal };

const char* to_string(ProfileKind kind);
ProfileKind parse_profile_kind(const std::string& name);

/// Diffusion coefficient p(t) from a closed-form-integrable family:
///   constant    p(t) = c
///   affine      p(t) = c0 + c1 t
///   sinusoidal  p(t) = base + amp sin(freq t)
/// Bounds p1 <= p <= p2 and |p'| <= dp_inf are exact on [0, horizon].
class DiffusionProfile {
public:
  static DiffusionProfile constant(double value, double horizon);
  static DiffusionProfile affine(double intercept, double slope, double horizon);
  static DiffusionProfile sinusoidal(double base, double amplitude, double frequency,
                                     double horizon);
  static DiffusionProfile make(ProfileKind kind, std::span<const double> params, double horizon);

  ProfileKind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }
  double horizon() const { return horizon_; }

  double value(double t) const;
  double derivative(double t) const;
  /// Exact antiderivative difference over [t0, t1].
  double integral(double t0, double t1) const;

  double lower() const { return p1_; }
  double upper() const { return p2_; }
  double derivative_bound() const { return dp_inf_; }
  bool is_constant() const { return dp_inf_ == 0.0; }

  /// Same family and parameters, different validity window.
  DiffusionProfile with_horizon(double horizon) const;

  bool operator==(const DiffusionProfile&) const = default;

private:
  DiffusionProfile(ProfileKind kind, std::vector<double> params, double horizon);
  double antiderivative(double t) const;

  ProfileKind kind_;
  std::vector<double> params_;
  double horizon_;
  double p1_ = 0.0;
  double p2_ = 0.0;
  double dp_inf_ = 0.0;
};

/// Integral of p over [t0, t1]; rejects reversed or out-of-window intervals.
double p_integral(const DiffusionProfile& profile, double t0, double t1);

/// lambda_i = (i pi / L)^2 with e_i(x) = sqrt(2/L) sin(i pi x / L).
struct EigenPair {
  int index;
  double length;
  double eigenvalue;

  double operator()(double x) const;
};

EigenPair eigen_pair(int i, const DomainSpec& domain);

/// First N Dirichlet eigenpairs of -d^2/dx^2 on the domain.
class EigenBasis {
public:
  EigenBasis(DomainSpec domain, int modes);

  const DomainSpec& domain() const { return domain_; }
  int modes() const { return modes_; }
  double length() const { return domain_.length(); }

  /// 1-based mode index.
  double eigenvalue(int i) const { return eigenvalues_[i - 1]; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double eval(int i, double x) const;

  bool operator==(const EigenBasis& other) const {
    return domain_ == other.domain_ && modes_ == other.modes_;
  }

private:
  DomainSpec domain_;
  int modes_;
  Eigen::VectorXd eigenvalues_;
};

/// A function on the domain stored as N sine coefficients.
struct SpectralField {
  EigenBasis basis;
  Eigen::VectorXd coeffs;

  SpectralField(EigenBasis b, Eigen::VectorXd a);
  static SpectralField zero(const EigenBasis& b) {
    return SpectralField(b, Eigen::VectorXd::Zero(b.modes()));
  }
  static SpectralField unit(const EigenBasis& b, int i);

  int modes() const { return basis.modes(); }
  double operator()(double x) const;
};

/// Diagonal propagator entries exp(-lambda_i * int_{t0}^{t1} p).
Eigen::VectorXd propagator(const EigenBasis& basis, const DiffusionProfile& profile, double t0,
                           double t1);

SpectralField evolve(const SpectralField& field, double t0, double t1,
                     const DiffusionProfile& profile);

// ---------------------------------------------------------------------------
// Quadrature on uniform grids.

/// intervals + 1 equally spaced points from a to b, endpoints included.
std::vector<double> uniform_points(double a, double b, int intervals);

/// Composite Simpson weights for `points` equally spaced nodes. An odd number
/// of intervals closes with the 3/8 rule on the last three.
std::vector<double> simpson_weights(std::size_t points, double step);

/// Checks that xs is uniform and increasing; returns the spacing.
double uniform_step(std::span<const double> xs);

/// Quadrature moments q_j = int f e_j over the span of the sample grid.
Eigen::VectorXd quadrature_moments(std::span<const double> xs, std::span<const double> values,
                                   const EigenBasis& basis);

/// Quadrature L2 norm of samples on their grid.
double quadrature_norm(std::span<const double> xs, std::span<const double> values);

/// L2 projection of samples on a uniform grid covering [0, L] onto the basis.
/// Requires at least 8 N samples.
SpectralField project(std::span<const double> xs, std::span<const double> values,
                      const EigenBasis& basis);

std::vector<double> sample(const SpectralField& field, std::span<const double> xs);

// ---------------------------------------------------------------------------

/// G_ij = int_a^b e_i e_j dx in closed form.
Eigen::MatrixXd gram_subdomain(const Subdomain& omega, const EigenBasis& basis);

struct FieldNorms {
  double l2;
  double h01;
  std::optional<double> l2_sub;
};

FieldNorms norms(const SpectralField& field);
FieldNorms norms(const SpectralField& field, const Eigen::MatrixXd& gram);

/// sqrt(a^T G a), clamped at zero against round-off.
double subdomain_norm(const Eigen::VectorXd& a, const Eigen::MatrixXd& gram);

/// Deterministic test data: a_i = +-u_i / i^decay with u_i uniform in (0.5, 1].
SpectralField synthesize_initial(const EigenBasis& basis, double decay, std::uint64_t seed);

// CSV: header `i,lambda_i,a_i`, one row per mode.
void write_field_csv(std::ostream& out, const SpectralField& field);
SpectralField read_field_csv(std::istream& in, const DomainSpec& domain);

}  // namespace backheat

#pragma once

// Unnormalized fully factorized Gaussians in natural-parameter form,
//
//   g(theta) = exp( log_scale + sum_i linear_i theta_i + neg_half_precision_i theta_i^2 ),
//
// i.e. exp(alpha' phi(theta)) for the monomial basis (1, theta_i, theta_i^2).
// Products and quotients are exact additions and subtractions of the natural
// parameters. Messages may be improper (some quadratic coefficient >= 0);
// only the conversions to moments require a proper density.

#include <Eigen/Core>
#include <span>

namespace ffep {

using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Raw moments of order 0, 1 and 2 (per coordinate) of an unnormalized density.
struct MomentVector {
  double m0 = 0.0;
  Vector m1;
  Vector m2;

  Index dim() const { return m1.size(); }
};

class DiagGaussian {
 public:
  DiagGaussian() = default;
  DiagGaussian(double log_scale, Vector linear, Vector neg_half_precision);

  // All natural parameters zero: g == 1.
  static DiagGaussian unit(Index dim);
  static DiagGaussian from_mean_variance(const Vector& mean, const Vector& variance,
                                         double log_mass = 0.0);

  Index dim() const { return linear_.size(); }
  double log_scale() const { return log_scale_; }
  const Vector& linear() const { return linear_; }
  const Vector& neg_half_precision() const { return neg_half_precision_; }

  // Every per-coordinate precision strictly exceeds precision_floor.
  bool is_proper(double precision_floor = 0.0) const;
  bool is_finite() const;

  // Derived views; these throw ImproperGaussianError for improper inputs.
  Vector precision() const { return -2.0 * neg_half_precision_; }
  Vector mean() const;
  Vector variance() const;
  // log of the integral of g over R^d.
  double log_mass() const;

  double eval_log(std::span<const double> theta) const;
  double eval_log(const Vector& theta) const {
    return eval_log(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
  }

  bool operator==(const DiagGaussian&) const = default;

 private:
  void require_proper(const char* what) const;

  double log_scale_ = 0.0;
  Vector linear_;
  Vector neg_half_precision_;
};

DiagGaussian multiply(const DiagGaussian& a, const DiagGaussian& b);
DiagGaussian divide(const DiagGaussian& a, const DiagGaussian& b);

DiagGaussian moments_to_natural(const MomentVector& m);
MomentVector natural_to_moments(const DiagGaussian& g);

}  // namespace ffep

#include "ffep/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ffep/errors.hpp"

namespace ffep {
namespace {

void check_same_dim(const DiagGaussian& a, const DiagGaussian& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw UsageError(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
  }
}

}  // namespace

DiagGaussian::DiagGaussian(double log_scale, Vector linear, Vector neg_half_precision)
    : log_scale_(log_scale),
      linear_(std::move(linear)),
      neg_half_precision_(std::move(neg_half_precision)) {
  if (linear_.size() != neg_half_precision_.size()) {
    throw UsageError("DiagGaussian: linear and quadratic parameters differ in length");
  }
  if (linear_.size() < 1) throw UsageError("DiagGaussian: dimension must be at least 1");
}

DiagGaussian DiagGaussian::unit(Index dim) {
  return DiagGaussian(0.0, Vector::Zero(dim), Vector::Zero(dim));
}

DiagGaussian DiagGaussian::from_mean_variance(const Vector& mean, const Vector& variance,
                                              double log_mass) {
  if (mean.size() != variance.size()) {
    throw UsageError("from_mean_variance: mean and variance differ in length");
  }
  if ((variance.array() <= 0.0).any()) {
    throw ImproperGaussianError("from_mean_variance: variances must be positive");
  }
  const Vector linear = mean.cwiseQuotient(variance);
  const Vector nhp = -0.5 * variance.cwiseInverse();
  double log_scale = log_mass;
  for (Index i = 0; i < mean.size(); ++i) {
    log_scale -= 0.5 * std::log(2.0 * std::numbers::pi * variance[i]) +
                 0.5 * mean[i] * mean[i] / variance[i];
  }
  return DiagGaussian(log_scale, linear, nhp);
}

bool DiagGaussian::is_proper(double precision_floor) const {
  return dim() > 0 && ((-2.0 * neg_half_precision_.array()) > precision_floor).all();
}

bool DiagGaussian::is_finite() const {
  return std::isfinite(log_scale_) && linear_.allFinite() && neg_half_precision_.allFinite();
}

void DiagGaussian::require_proper(const char* what) const {
  if (!is_proper()) {
    throw ImproperGaussianError(std::string(what) + ": Gaussian is improper");
  }
}

Vector DiagGaussian::mean() const {
  require_proper("mean");
  return -0.5 * linear_.cwiseQuotient(neg_half_precision_);
}

Vector DiagGaussian::variance() const {
  require_proper("variance");
  return -0.5 * neg_half_precision_.cwiseInverse();
}

double DiagGaussian::log_mass() const {
  require_proper("log_mass");
  double total = log_scale_;
  for (Index i = 0; i < dim(); ++i) {
    const double c = neg_half_precision_[i];
    const double b = linear_[i];
    total += 0.5 * std::log(std::numbers::pi / -c) - b * b / (4.0 * c);
  }
  return total;
}

double DiagGaussian::eval_log(std::span<const double> theta) const {
  if (static_cast<Index>(theta.size()) != dim()) {
    throw UsageError("eval_log: dimension mismatch");
  }
  double total = log_scale_;
  for (Index i = 0; i < dim(); ++i) {
    const double t = theta[static_cast<std::size_t>(i)];
    total += (linear_[i] + neg_half_precision_[i] * t) * t;
  }
  return total;
}

DiagGaussian multiply(const DiagGaussian& a, const DiagGaussian& b) {
  check_same_dim(a, b, "multiply");
  return DiagGaussian(a.log_scale() + b.log_scale(), a.linear() + b.linear(),
                      a.neg_half_precision() + b.neg_half_precision());
}

DiagGaussian divide(const DiagGaussian& a, const DiagGaussian& b) {
  check_same_dim(a, b, "divide");
  return DiagGaussian(a.log_scale() - b.log_scale(), a.linear() - b.linear(),
                      a.neg_half_precision() - b.neg_half_precision());
}

DiagGaussian moments_to_natural(const MomentVector& m) {
  if (m.m1.size() != m.m2.size() || m.m1.size() < 1) {
    throw UsageError("moments_to_natural: inconsistent moment vector");
  }
  if (!(m.m0 > 0.0) || !std::isfinite(m.m0)) {
    throw MomentMatchError("moments_to_natural: nonpositive mass", -1);
  }
  const Vector mean = m.m1 / m.m0;
  Vector variance(mean.size());
  for (Index i = 0; i < mean.size(); ++i) {
    variance[i] = m.m2[i] / m.m0 - mean[i] * mean[i];
    if (!(variance[i] > 0.0) || !std::isfinite(variance[i])) {
      throw MomentMatchError(
          "moments_to_natural: nonpositive variance at coordinate " + std::to_string(i), i);
    }
  }
  return DiagGaussian::from_mean_variance(mean, variance, std::log(m.m0));
}

MomentVector natural_to_moments(const DiagGaussian& g) {
  if (!g.is_proper()) throw ImproperGaussianError("natural_to_moments: Gaussian is improper");
  const Vector mean = g.mean();
  const Vector variance = g.variance();
  const double mass = std::exp(g.log_mass());
  MomentVector m;
  m.m0 = mass;
  m.m1 = mass * mean;
  m.m2 = mass * (variance.array() + mean.array().square()).matrix();
  return m;
}

}  // namespace ffep

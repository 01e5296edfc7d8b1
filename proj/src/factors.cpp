#include "ffep/factors.hpp"

#include <cmath>

#include "ffep/errors.hpp"
#include "ffep/simd.hpp"

namespace ffep {
namespace {

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

MiniBatchFactor::MiniBatchFactor(const Dataset& data, std::span<const std::size_t> indices,
                                 LossKind loss, double beta)
    : data_(&data), indices_(indices.begin(), indices.end()), loss_(loss), beta_(beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw UsageError("MiniBatchFactor: beta must be > 0");
  for (const std::size_t k : indices_) {
    if (k >= data.n_examples()) throw UsageError("MiniBatchFactor: example index out of range");
  }
}

double MiniBatchFactor::log_value(const Vector& theta) const {
  if (theta.size() != dim()) throw UsageError("MiniBatchFactor: dimension mismatch");
  const auto& kernels = simd::active();
  const auto t = as_span(theta);
  double cost = 0.0;
  for (const std::size_t k : indices_) {
    const auto x = data_->row(k);
    const double margin = data_->label(k) * kernels.dot(x.data(), t.data(), x.size());
    cost += loss_value(loss_, margin);
  }
  return -beta_ * cost;
}

FactorDerivatives MiniBatchFactor::log_derivatives(const Vector& theta) const {
  if (theta.size() != dim()) throw UsageError("MiniBatchFactor: dimension mismatch");
  const auto& kernels = simd::active();
  FactorDerivatives out{Vector::Zero(dim()), Vector::Zero(dim())};
  auto grad = as_span(out.grad);
  auto hess = as_span(out.hessdiag);
  const auto t = as_span(theta);
  for (const std::size_t k : indices_) {
    const auto x = data_->row(k);
    const double y = data_->label(k);
    const double margin = y * kernels.dot(x.data(), t.data(), x.size());
    const LossDerivatives d = loss_derivatives(loss_, margin);
    if (d.first != 0.0) kernels.axpy(-beta_ * d.first * y, x.data(), grad.data(), x.size());
    if (d.second != 0.0) kernels.axpy_squared(-beta_ * d.second, x.data(), hess.data(), x.size());
  }
  return out;
}

FactorDerivatives GaussianFactor::log_derivatives(const Vector& theta) const {
  if (theta.size() != dim()) throw UsageError("GaussianFactor: dimension mismatch");
  const Vector& c = g_.neg_half_precision();
  return {g_.linear() + 2.0 * c.cwiseProduct(theta), 2.0 * c};
}

PriorFactor::PriorFactor(double var, Vector m) : mean(std::move(m)), variance(var) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw UsageError("PriorFactor: variance must be positive");
  }
}

DiagGaussian prior_as_message(const PriorFactor& prior, Index dim) {
  if (dim < 1) throw UsageError("prior_as_message: dimension must be at least 1");
  if (!(prior.variance > 0.0)) throw UsageError("prior_as_message: variance must be positive");
  Vector mean = prior.mean.size() == 0 ? Vector::Zero(dim) : prior.mean;
  if (mean.size() != dim) throw UsageError("prior_as_message: prior mean has wrong dimension");
  return DiagGaussian::from_mean_variance(mean, Vector::Constant(dim, prior.variance), 0.0);
}

double prior_penalty(const PriorFactor& prior, const Vector& theta) {
  const double sq = prior.mean.size() == 0 ? theta.squaredNorm()
                                           : (theta - prior.mean).squaredNorm();
  return sq / (2.0 * prior.variance);
}

}  // namespace ffep

#pragma once

// Factors of the target distribution exposed through their logarithm.
// Nothing at this layer exponentiates: schemes do that with a max shift.

#include <span>
#include <vector>

#include "ffep/gaussian.hpp"
#include "ffep/ingest.hpp"
#include "ffep/losses.hpp"

namespace ffep {

struct FactorDerivatives {
  Vector grad;      // gradient of log f
  Vector hessdiag;  // diagonal of the Hessian of log f
};

class LogFactor {
 public:
  virtual ~LogFactor() = default;

  virtual Index dim() const = 0;
  virtual double log_value(const Vector& theta) const = 0;
  virtual FactorDerivatives log_derivatives(const Vector& theta) const = 0;
};

// f(theta) = exp(-beta * sum_{k in batch} loss(y_k theta'x_k)).
class MiniBatchFactor final : public LogFactor {
 public:
  MiniBatchFactor(const Dataset& data, std::span<const std::size_t> indices, LossKind loss,
                  double beta = 1.0);

  Index dim() const override { return data_->dim(); }
  double log_value(const Vector& theta) const override;
  FactorDerivatives log_derivatives(const Vector& theta) const override;

  std::span<const std::size_t> indices() const { return indices_; }
  const LossKind& loss() const { return loss_; }
  double beta() const { return beta_; }

 private:
  const Dataset* data_;
  std::vector<std::size_t> indices_;
  LossKind loss_;
  double beta_;
};

// A factor that is itself an unnormalized diagonal Gaussian (possibly improper).
class GaussianFactor final : public LogFactor {
 public:
  explicit GaussianFactor(DiagGaussian g) : g_(std::move(g)) {}

  Index dim() const override { return g_.dim(); }
  double log_value(const Vector& theta) const override { return g_.eval_log(theta); }
  FactorDerivatives log_derivatives(const Vector& theta) const override;
  const DiagGaussian& gaussian() const { return g_; }

 private:
  DiagGaussian g_;
};

// Isotropic Gaussian prior; an empty mean means the zero vector.
struct PriorFactor {
  Vector mean;
  double variance = 25.0;

  PriorFactor() = default;
  explicit PriorFactor(double variance, Vector mean = {});
};

DiagGaussian prior_as_message(const PriorFactor& prior, Index dim);

// Negative log-density of the prior up to a constant: |theta - mean|^2 / (2 variance).
double prior_penalty(const PriorFactor& prior, const Vector& theta);

}  // namespace ffep

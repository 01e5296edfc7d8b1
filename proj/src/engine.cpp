#include "ffep/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ffep/bench.hpp"
#include "ffep/errors.hpp"

namespace ffep {
namespace {

using Clock = std::chrono::steady_clock;

double max_abs_diff(const DiagGaussian& a, const DiagGaussian& b) {
  return std::max({std::abs(a.log_scale() - b.log_scale()),
                   (a.linear() - b.linear()).lpNorm<Eigen::Infinity>(),
                   (a.neg_half_precision() - b.neg_half_precision()).lpNorm<Eigen::Infinity>()});
}

DiagGaussian blend(const DiagGaussian& fresh, const DiagGaussian& previous, double keep) {
  return DiagGaussian((1.0 - keep) * fresh.log_scale() + keep * previous.log_scale(),
                      (1.0 - keep) * fresh.linear() + keep * previous.linear(),
                      (1.0 - keep) * fresh.neg_half_precision() +
                          keep * previous.neg_half_precision());
}

}  // namespace

EpMode parse_mode(std::string_view name) {
  if (name == "looping") return EpMode::kLooping;
  if (name == "streaming") return EpMode::kStreaming;
  throw UsageError("unknown mode '" + std::string(name) + "' (expected looping|streaming)");
}

std::string mode_name(EpMode mode) {
  return mode == EpMode::kLooping ? "looping" : "streaming";
}

std::string status_name(UpdateStatus status) {
  switch (status) {
    case UpdateStatus::kApplied:
      return "applied";
    case UpdateStatus::kRejected:
      return "rejected";
    case UpdateStatus::kSchemeFailed:
      return "scheme_failed";
  }
  return "unknown";
}

EpConfig normalized(EpConfig config) {
  validate(config.scheme.options);
  if (!(config.beta > 0.0) || !std::isfinite(config.beta)) throw UsageError("beta must be > 0");
  if (config.n_sweeps < 1) throw UsageError("n_sweeps must be at least 1");
  if (config.batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (!(config.damping >= 0.0 && config.damping < 1.0)) {
    throw UsageError("damping must lie in [0, 1)");
  }
  if (config.cost_every < 0) throw UsageError("cost_every must be nonnegative");
  if (!(config.prior.variance > 0.0)) throw UsageError("prior variance must be positive");
  if (config.mode == EpMode::kStreaming) config.n_sweeps = 1;
  return config;
}

double EpState::product_residual() const {
  DiagGaussian product = prior_message;
  for (const auto& m : messages) product = multiply(product, m);
  return max_abs_diff(product, global_approx);
}

bool gate_update(const DiagGaussian& cavity, const DiagGaussian& candidate) {
  if (cavity.dim() != candidate.dim()) return false;
  if (!candidate.is_finite()) return false;
  return multiply(cavity, candidate).is_proper(kPrecisionFloor);
}

Vector posterior_mode(const EpState& state) {
  if (!state.global_approx.is_proper()) {
    throw ImproperGaussianError("posterior_mode: global approximation is improper");
  }
  return state.global_approx.mean();
}

EpResult run_ep(const EpConfig& raw_config, const DiagGaussian& prior_message,
                std::span<const LogFactor* const> factors, const CostFunction& cost) {
  const EpConfig config = normalized(raw_config);
  if (!prior_message.is_proper()) throw UsageError("run_ep: prior message must be proper");
  for (const LogFactor* f : factors) {
    if (f == nullptr || f->dim() != prior_message.dim()) {
      throw UsageError("run_ep: factor dimension does not match the prior");
    }
  }

  const bool looping = config.mode == EpMode::kLooping;
  EpResult result;
  EpState& state = result.state;
  EpTrace& trace = result.trace;
  state.prior_message = prior_message;
  state.global_approx = prior_message;
  if (looping) state.messages.assign(factors.size(), DiagGaussian::unit(prior_message.dim()));
  trace.records.reserve(factors.size() * static_cast<std::size_t>(config.n_sweeps));

  std::vector<std::size_t> visit_order(factors.size());
  std::iota(visit_order.begin(), visit_order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed.value_or(0));

  std::size_t visit = 0;
  for (int sweep = 1; sweep <= config.n_sweeps; ++sweep) {
    state.sweep = sweep;
    if (config.shuffle_visits) std::shuffle(visit_order.begin(), visit_order.end(), rng);
    for (const std::size_t k : visit_order) {
      const auto start = Clock::now();
      TraceRecord record;
      record.sweep = sweep;
      record.factor_index = k;

      // Streaming keeps no messages; its cavity is the running posterior,
      // which equals global / unit in the looping arithmetic.
      const DiagGaussian cavity =
          looping ? divide(state.global_approx, state.messages[k]) : state.global_approx;
      if (!cavity.is_proper(kPrecisionFloor)) {
        record.status = UpdateStatus::kRejected;
        ++state.rejected_updates;
      } else {
        try {
          DiagGaussian candidate = approximate(config.scheme, cavity, *factors[k]);
          if (looping && config.damping > 0.0) {
            candidate = blend(candidate, state.messages[k], config.damping);
          }
          if (gate_update(cavity, candidate)) {
            state.global_approx = multiply(cavity, candidate);
            if (looping) state.messages[k] = std::move(candidate);
            record.status = UpdateStatus::kApplied;
          } else {
            record.status = UpdateStatus::kRejected;
            ++state.rejected_updates;
          }
        } catch (const SchemeFailure& e) {
          record.status = UpdateStatus::kSchemeFailed;
          ++state.failed_updates;
          trace.failures.emplace_back(e.what());
        } catch (const MomentMatchError& e) {
          record.status = UpdateStatus::kSchemeFailed;
          ++state.failed_updates;
          trace.failures.emplace_back(e.what());
        }
      }
      const double elapsed =
          std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      trace.update_ms += elapsed;
      record.cumulative_ms = trace.update_ms;

      if (config.check_invariants) {
        if (!state.global_approx.is_proper()) {
          throw std::logic_error("EP invariant violated: global approximation is improper");
        }
        if (looping && state.product_residual() > 1e-9) {
          throw std::logic_error("EP invariant violated: product residual exceeds 1e-9");
        }
      }

      ++visit;
      record.total_cost = std::numeric_limits<double>::quiet_NaN();
      record.objective = std::numeric_limits<double>::quiet_NaN();
      const bool last_visit = visit == factors.size() * static_cast<std::size_t>(config.n_sweeps);
      if (cost && config.cost_every > 0 &&
          (visit % static_cast<std::size_t>(config.cost_every) == 0 || last_visit)) {
        const Vector mode = state.global_approx.mean();
        record.total_cost = cost(mode);
        record.objective = record.total_cost + prior_penalty(config.prior, mode);
      }
      if (config.record_snapshots) trace.snapshots.push_back(state.global_approx.mean());
      trace.records.push_back(record);
    }
  }
  return result;
}

EpResult ep_run(const EpConfig& raw_config, const Dataset& dataset) {
  const EpConfig config = normalized(raw_config);
  const MiniBatchPartition parts = partition(dataset.n_examples(), config.batch_size, config.seed);
  std::vector<MiniBatchFactor> factors;
  factors.reserve(parts.n_batches());
  for (std::size_t b = 0; b < parts.n_batches(); ++b) {
    factors.emplace_back(dataset, parts.indices(b), config.loss, config.beta);
  }
  std::vector<const LogFactor*> pointers;
  for (const auto& f : factors) pointers.push_back(&f);
  const DiagGaussian prior = prior_as_message(config.prior, dataset.dim());
  const LossKind loss = config.loss;
  const CostFunction cost = [&dataset, loss](const Vector& theta) {
    return total_cost(theta, dataset, loss);
  };
  return run_ep(config, prior, pointers, cost);
}

}  // namespace ffep

#pragma once

// Fully factorized expectation propagation over a list of factors plus a
// fixed Gaussian prior.
//
// Looping mode keeps one message per factor (initially the unit message) and
// revisits every factor n_sweeps times. Streaming mode keeps no messages:
// each factor is visited once and its message is folded straight into the
// running posterior. A looping run with one sweep and the streaming run go
// through the same arithmetic and give bit-identical posteriors.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffep/factors.hpp"
#include "ffep/gaussian.hpp"
#include "ffep/ingest.hpp"
#include "ffep/losses.hpp"
#include "ffep/schemes.hpp"

namespace ffep {

enum class EpMode { kLooping, kStreaming };

EpMode parse_mode(std::string_view name);
std::string mode_name(EpMode mode);

struct EpConfig {
  SchemeKind scheme;
  LossKind loss;
  double beta = 1.0;
  std::size_t batch_size = 10;
  int n_sweeps = 5;
  EpMode mode = EpMode::kLooping;
  PriorFactor prior;
  // Shuffles the examples before partitioning; also seeds per-sweep visit
  // shuffling when shuffle_visits is set.
  std::optional<std::uint64_t> seed;
  bool shuffle_visits = false;
  // Fraction of the previous message kept in each update (0 = plain EP).
  double damping = 0.0;
  // Total cost is evaluated after every cost_every-th visit; 0 disables it.
  int cost_every = 1;
  bool record_snapshots = false;
  bool check_invariants = false;
};

// Throws UsageError on inconsistent settings. Streaming forces one sweep.
EpConfig normalized(EpConfig config);

enum class UpdateStatus { kApplied, kRejected, kSchemeFailed };
std::string status_name(UpdateStatus status);

struct TraceRecord {
  int sweep = 0;
  std::size_t factor_index = 0;
  UpdateStatus status = UpdateStatus::kApplied;
  double total_cost = 0.0;   // NaN when not evaluated at this visit
  double objective = 0.0;    // total_cost plus the prior penalty
  double cumulative_ms = 0.0;
};

struct EpTrace {
  std::vector<TraceRecord> records;
  // Posterior mean after each visit (record_snapshots only).
  std::vector<Vector> snapshots;
  std::vector<std::string> failures;  // scheme failure messages, in order
  double update_ms = 0.0;             // timed region only

  double mean_ms_per_visit() const {
    return records.empty() ? 0.0 : update_ms / static_cast<double>(records.size());
  }
};

struct EpState {
  DiagGaussian prior_message;
  DiagGaussian global_approx;
  std::vector<DiagGaussian> messages;  // looping mode only
  std::size_t rejected_updates = 0;
  std::size_t failed_updates = 0;
  int sweep = 0;

  // max |natural(global) - natural(prior * prod messages)|
  double product_residual() const;
};

struct EpResult {
  EpState state;
  EpTrace trace;
};

// Accept iff the candidate is finite and cavity * candidate has every
// precision above the floor.
inline constexpr double kPrecisionFloor = 1e-12;
bool gate_update(const DiagGaussian& cavity, const DiagGaussian& candidate);

Vector posterior_mode(const EpState& state);

using CostFunction = std::function<double(const Vector&)>;

// Generic driver: factors are visited in the given order each sweep.
// `cost` (optional) maps the posterior mode to the traced total cost.
EpResult run_ep(const EpConfig& config, const DiagGaussian& prior_message,
                std::span<const LogFactor* const> factors, const CostFunction& cost = {});

// Partitions the dataset into mini-batch factors and runs EP. The traced
// total cost is the full-dataset loss at the posterior mode.
EpResult ep_run(const EpConfig& config, const Dataset& dataset);

}  // namespace ffep

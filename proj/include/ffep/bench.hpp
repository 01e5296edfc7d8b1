#pragma once

// Offline reference solvers and the experiment harness.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ffep/engine.hpp"
#include "ffep/factors.hpp"
#include "ffep/ingest.hpp"
#include "ffep/losses.hpp"
#include "ffep/schemes.hpp"

namespace ffep {

// Sum of per-example losses over the whole dataset; the prior penalty is added
// only when a prior is supplied.
double total_cost(const Vector& theta, const Dataset& dataset, const LossKind& loss,
                  const std::optional<PriorFactor>& prior = std::nullopt);

struct ReferenceResult {
  Vector theta;
  double cost = 0.0;       // total loss, prior excluded
  double objective = 0.0;  // total loss plus prior penalty
  int iterations = 0;
  bool converged = false;
};

// Full-Hessian Newton with backtracking on the logistic cost plus the prior
// penalty; stops when the gradient sup-norm is <= grad_tol. Throws
// SolverError after max_iter iterations.
ReferenceResult reference_newton_logistic(const Dataset& dataset, const PriorFactor& prior,
                                          double grad_tol = 1e-8, int max_iter = 200);

struct PowellOptions {
  double ftol = 1e-8;         // relative objective change per sweep of directions
  int max_line_searches = 0;  // 0 means 100 * dim
};

struct PowellResult {
  Vector x;
  double value = 0.0;
  int line_searches = 0;
  bool converged = false;  // false: stopped on the line-search cap
};

using Objective = std::function<double(const Vector&)>;

// Brent minimization of phi(t) along x + t*direction after golden bracketing.
// Returns the step t.
double line_minimize(const Objective& f, const Vector& x, const Vector& direction,
                     double& value_inout, double tol = 1e-8);

// Direction-set minimization (no derivatives) with Brent line searches.
PowellResult powell_minimize(const Objective& f, const Vector& x0, const PowellOptions& options = {});

// Powell on total cost plus prior penalty, started from theta_init.
ReferenceResult reference_powell(const Dataset& dataset, const LossKind& loss,
                                 const PriorFactor& prior, const Vector& theta_init,
                                 const PowellOptions& options = {});

// ---------------------------------------------------------------------------
// Experiment harness

struct RunConfig {
  std::string dataset_name = "dataset";
  std::filesystem::path dataset_path;
  ColumnSchema schema;
  std::vector<LossKind> losses;
  std::vector<SchemeType> schemes;
  EpConfig ep;  // scheme/loss fields are overridden per run
  std::filesystem::path output_dir = "out";
  int timing_repetitions = 3;
  bool run_reference = true;
};

// Reads the JSON run configuration. Relative dataset paths are resolved
// against the configuration file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
void validate(const RunConfig& config);

struct TimingRow {
  std::string dataset;
  std::size_t n_examples = 0;
  Index dim = 0;
  std::size_t batch_size = 0;
  std::string loss;
  std::string scheme;
  double ms_per_batch = 0.0;
};

struct RunOutcome {
  std::string loss;
  std::string scheme;
  bool ok = true;
  std::string message;
  double final_cost = 0.0;
  double final_objective = 0.0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
  std::filesystem::path trace_file;
  EpResult result;
};

struct ReferenceRow {
  std::string loss;
  std::string method;
  ReferenceResult result;
};

struct ExperimentReport {
  Dataset dataset;
  std::vector<RunOutcome> runs;
  std::vector<TimingRow> timing;
  std::vector<ReferenceRow> references;

  bool all_ok() const;
};

// Executes every (loss, scheme) run on a preprocessed dataset and writes the
// trace files, timing table, manifest and reference table into output_dir
// (when output_dir is non-empty).
ExperimentReport run_experiment(const RunConfig& config, const Dataset& dataset);
// Loads and preprocesses the configured dataset first.
ExperimentReport run_experiment(const RunConfig& config);

// Reference minimizers for each configured loss: Newton for logistic, Powell
// from the logistic solution for the others.
std::vector<ReferenceRow> compute_references(const Dataset& dataset,
                                             const std::vector<LossKind>& losses,
                                             const PriorFactor& prior);

std::string trace_file_name(const std::string& dataset, const std::string& loss,
                            const std::string& scheme);
inline constexpr const char* kTraceHeader = "sweep,factor_index,update_status,total_cost,cumulative_ms";
inline constexpr const char* kTimingHeader = "dataset,N,d,s,loss,scheme,ms_per_batch";

void write_trace(std::ostream& out, const EpTrace& trace);
void write_timing_table(std::ostream& out, const std::vector<TimingRow>& rows);
std::vector<TimingRow> read_timing_table(std::istream& in);
void write_references(std::ostream& out, const std::string& dataset,
                      const std::vector<ReferenceRow>& rows);

// Table of ms per mini-batch with one row per (dataset, loss) and one column
// per scheme.
void print_timing_report(std::ostream& out, const std::vector<TimingRow>& rows);

}  // namespace ffep

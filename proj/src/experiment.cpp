#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "ffep/bench.hpp"
#include "ffep/errors.hpp"
#include "json.hpp"

namespace ffep {
namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys = {
    "dataset",   "losses",       "epsilon",     "schemes",         "beta",
    "batch_size", "sweeps",      "mode",        "prior_variance",  "seed",
    "shuffle_visits", "damping", "newton_tol",  "newton_max_iter", "gamma",
    "cost_every", "timing_repetitions", "reference", "output_dir", "vq_start"};

const std::set<std::string> kDatasetKeys = {
    "name", "path", "has_header", "delimiter", "label_column", "labels",
    "numeric_columns", "categorical_columns", "missing_token"};

void reject_unknown(const json& object, const std::set<std::string>& allowed, const char* where) {
  for (const auto& [key, value] : object.items()) {
    if (!allowed.contains(key)) {
      throw UsageError(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  body(out);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("run config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("run config must be a JSON object");
  reject_unknown(doc, kTopLevelKeys, "run config");

  RunConfig cfg;
  try {
    if (!doc.contains("dataset")) throw UsageError("run config lacks 'dataset'");
    const json& ds = doc.at("dataset");
    reject_unknown(ds, kDatasetKeys, "dataset");
    cfg.dataset_name = ds.value("name", std::string("dataset"));
    std::filesystem::path path = ds.at("path").get<std::string>();
    cfg.dataset_path = path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    cfg.schema.has_header = ds.value("has_header", false);
    const std::string delim = ds.value("delimiter", std::string(","));
    if (delim.size() != 1) throw UsageError("dataset.delimiter must be a single character");
    cfg.schema.delimiter = delim[0];
    cfg.schema.label_column = ds.at("label_column").get<std::string>();
    for (const auto& [token, value] : ds.at("labels").items()) {
      cfg.schema.label_map[token] = value.get<int>();
    }
    cfg.schema.numeric_columns =
        ds.value("numeric_columns", std::vector<std::string>{});
    cfg.schema.categorical_columns =
        ds.value("categorical_columns", std::vector<std::string>{});
    cfg.schema.missing_token = ds.value("missing_token", std::string("?"));

    const double epsilon = doc.value("epsilon", 0.1);
    for (const auto& name :
         doc.value("losses", std::vector<std::string>{"logistic", "hinge", "quasi01"})) {
      cfg.losses.push_back(parse_loss(name, epsilon));
    }
    for (const auto& name : doc.value("schemes", std::vector<std::string>{"la", "qla", "gq", "vq"})) {
      cfg.schemes.push_back(parse_scheme(name));
    }
    EpConfig& ep = cfg.ep;
    ep.beta = doc.value("beta", 1.0);
    ep.batch_size = doc.value("batch_size", std::size_t{10});
    ep.mode = parse_mode(doc.value("mode", std::string("looping")));
    ep.n_sweeps = doc.value("sweeps", ep.mode == EpMode::kLooping ? 5 : 1);
    ep.prior = PriorFactor(doc.value("prior_variance", 25.0));
    if (doc.contains("seed") && !doc.at("seed").is_null()) {
      ep.seed = doc.at("seed").get<std::uint64_t>();
    }
    ep.shuffle_visits = doc.value("shuffle_visits", false);
    ep.damping = doc.value("damping", 0.0);
    ep.scheme.options.newton_tol = doc.value("newton_tol", 1e-5);
    ep.scheme.options.newton_max_iter = doc.value("newton_max_iter", 50);
    if (doc.contains("gamma") && !doc.at("gamma").is_null()) {
      ep.scheme.options.gamma = doc.at("gamma").get<double>();
    }
    const std::string vq_start = doc.value("vq_start", std::string("logfit"));
    if (vq_start == "logfit") {
      ep.scheme.options.vq_start = VqStart::kLogFit;
    } else if (vq_start == "constant") {
      ep.scheme.options.vq_start = VqStart::kConstant;
    } else {
      throw UsageError("vq_start must be 'logfit' or 'constant'");
    }
    ep.cost_every = doc.value("cost_every", 1);
    cfg.timing_repetitions = doc.value("timing_repetitions", 3);
    cfg.run_reference = doc.value("reference", true);
    std::filesystem::path out = doc.value("output_dir", std::string("out"));
    cfg.output_dir = out.is_relative() && !base_dir.empty() ? base_dir / out : out;
  } catch (const json::exception& e) {
    throw UsageError(std::string("run config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open run config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

void validate(const RunConfig& config) {
  if (config.schemes.empty()) throw UsageError("run config needs at least one scheme");
  if (config.losses.empty()) throw UsageError("run config needs at least one loss");
  if (config.timing_repetitions < 1) throw UsageError("timing_repetitions must be at least 1");
  normalized(config.ep);
}

bool ExperimentReport::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok; });
}

std::string trace_file_name(const std::string& dataset, const std::string& loss,
                            const std::string& scheme) {
  return dataset + "_" + loss + "_" + scheme + ".trace.csv";
}

void write_trace(std::ostream& out, const EpTrace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.sweep << ',' << r.factor_index << ',' << status_name(r.status) << ','
        << format_double(r.total_cost) << ',' << format_double(r.cumulative_ms) << '\n';
  }
}

void write_timing_table(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << kTimingHeader << '\n';
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.n_examples << ',' << r.dim << ',' << r.batch_size << ','
        << r.loss << ',' << r.scheme << ',' << format_double(r.ms_per_batch) << '\n';
  }
}

std::vector<TimingRow> read_timing_table(std::istream& in) {
  std::vector<TimingRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != kTimingHeader) {
    throw DataError("timing table has an unexpected header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) {
      throw DataError("timing table row " + std::to_string(line_no) + ": expected 7 fields");
    }
    try {
      rows.push_back({fields[0], std::stoul(fields[1]), std::stol(fields[2]),
                      std::stoul(fields[3]), fields[4], fields[5], std::stod(fields[6])});
    } catch (const std::exception&) {
      throw DataError("timing table row " + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

void write_references(std::ostream& out, const std::string& dataset,
                      const std::vector<ReferenceRow>& rows) {
  out << "dataset,loss,method,total_cost,objective,converged,iterations\n";
  for (const auto& r : rows) {
    out << dataset << ',' << r.loss << ',' << r.method << ',' << format_double(r.result.cost)
        << ',' << format_double(r.result.objective) << ',' << (r.result.converged ? 1 : 0) << ','
        << r.result.iterations << '\n';
  }
}

void print_timing_report(std::ostream& out, const std::vector<TimingRow>& rows) {
  const std::vector<std::string> order = {"la", "qla", "gq", "vq"};
  std::set<std::string> schemes;
  for (const auto& r : rows) schemes.insert(r.scheme);
  std::vector<std::string> columns;
  for (const auto& s : order) {
    if (schemes.contains(s)) columns.push_back(s);
  }
  for (const auto& s : schemes) {
    if (std::find(columns.begin(), columns.end(), s) == columns.end()) columns.push_back(s);
  }

  // (dataset, loss) in first-seen order
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, const TimingRow*> meta;
  std::map<std::tuple<std::string, std::string, std::string>, double> cell;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.dataset, r.loss);
    if (!meta.contains(key)) {
      keys.push_back(key);
      meta[key] = &r;
    }
    cell[{r.dataset, r.loss, r.scheme}] = r.ms_per_batch;
  }

  int name_width = 8;
  for (const auto& key : keys) name_width = std::max(name_width, static_cast<int>(key.first.size()) + 2);
  out << std::left << std::setw(name_width) << "dataset" << std::setw(8) << "N" << std::setw(6) << "d"
      << std::setw(6) << "s" << std::setw(10) << "loss";
  for (const auto& c : columns) out << std::right << std::setw(10) << c;
  out << "\n";
  out << std::setprecision(3);
  for (const auto& key : keys) {
    const TimingRow* m = meta[key];
    out << std::left << std::setw(name_width) << m->dataset << std::setw(8) << m->n_examples
        << std::setw(6) << m->dim << std::setw(6) << m->batch_size << std::setw(10) << m->loss;
    for (const auto& c : columns) {
      const auto it = cell.find({key.first, key.second, c});
      out << std::right << std::setw(10);
      if (it == cell.end()) {
        out << "-";
      } else {
        out << it->second;
      }
    }
    out << "\n";
  }
  out.unsetf(std::ios::fixed);
}

std::vector<ReferenceRow> compute_references(const Dataset& dataset,
                                             const std::vector<LossKind>& losses,
                                             const PriorFactor& prior) {
  std::vector<ReferenceRow> rows;
  const ReferenceResult logistic = reference_newton_logistic(dataset, prior);
  for (const auto& loss : losses) {
    if (loss.type == LossType::kLogistic) {
      rows.push_back({loss_name(loss), "newton", logistic});
    } else {
      rows.push_back({loss_name(loss), "powell", reference_powell(dataset, loss, prior, logistic.theta)});
    }
  }
  return rows;
}

ExperimentReport run_experiment(const RunConfig& config, const Dataset& dataset) {
  validate(config);
  ExperimentReport report;
  report.dataset = dataset;
  const bool write = !config.output_dir.empty();
  if (write) std::filesystem::create_directories(config.output_dir);

  for (const auto& loss : config.losses) {
    for (const auto scheme : config.schemes) {
      RunOutcome outcome;
      outcome.loss = loss_name(loss);
      outcome.scheme = scheme_name(scheme);
      try {
        EpConfig ep = config.ep;
        ep.loss = loss;
        ep.scheme.type = scheme;
        outcome.result = ep_run(ep, dataset);
        std::vector<double> timings = {outcome.result.trace.mean_ms_per_visit()};
        EpConfig timing_only = ep;
        timing_only.cost_every = 0;
        for (int rep = 1; rep < config.timing_repetitions; ++rep) {
          timings.push_back(ep_run(timing_only, dataset).trace.mean_ms_per_visit());
        }
        const Vector mode = posterior_mode(outcome.result.state);
        outcome.final_cost = total_cost(mode, dataset, loss);
        outcome.final_objective = outcome.final_cost + prior_penalty(ep.prior, mode);
        outcome.rejected = outcome.result.state.rejected_updates;
        outcome.failed = outcome.result.state.failed_updates;
        report.timing.push_back({config.dataset_name, dataset.n_examples(), dataset.dim(),
                                 ep.batch_size, outcome.loss, outcome.scheme, median(timings)});
        if (write) {
          outcome.trace_file =
              config.output_dir / trace_file_name(config.dataset_name, outcome.loss, outcome.scheme);
          write_file(outcome.trace_file,
                     [&](std::ostream& out) { write_trace(out, outcome.result.trace); });
        }
      } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.message = e.what();
      }
      report.runs.push_back(std::move(outcome));
    }
  }

  std::string reference_error;
  if (config.run_reference) {
    try {
      report.references = compute_references(dataset, config.losses, config.ep.prior);
    } catch (const std::exception& e) {
      reference_error = e.what();
    }
  }

  if (write) {
    write_file(config.output_dir / "timing.csv",
               [&](std::ostream& out) { write_timing_table(out, report.timing); });
    write_file(config.output_dir / "manifest.csv", [&](std::ostream& out) {
      out << "dataset,loss,scheme,status,final_cost,final_objective,rejected,scheme_failed,message\n";
      for (const auto& r : report.runs) {
        std::string message = r.message;
        std::replace(message.begin(), message.end(), ',', ';');
        out << config.dataset_name << ',' << r.loss << ',' << r.scheme << ','
            << (r.ok ? "ok" : "failed") << ',' << (r.ok ? format_double(r.final_cost) : "")
            << ',' << (r.ok ? format_double(r.final_objective) : "") << ',' << r.rejected << ','
            << r.failed << ',' << message << '\n';
      }
      if (!reference_error.empty()) {
        std::replace(reference_error.begin(), reference_error.end(), ',', ';');
        out << config.dataset_name << ",,reference,failed,,,0,0," << reference_error << '\n';
      }
    });
    if (config.run_reference && reference_error.empty()) {
      write_file(config.output_dir / "reference.csv", [&](std::ostream& out) {
        write_references(out, config.dataset_name, report.references);
      });
    }
  }
  if (!reference_error.empty()) {
    RunOutcome failed;
    failed.scheme = "reference";
    failed.ok = false;
    failed.message = reference_error;
    report.runs.push_back(std::move(failed));
  }
  return report;
}

ExperimentReport run_experiment(const RunConfig& config) {
  const RawTable raw = load_csv(config.dataset_path, config.schema);
  return run_experiment(config, preprocess(raw));
}

}  // namespace ffep

// ffep: run fully factorized EP experiments, offline reference solvers and
// timing reports.
//
//   ffep run --config run.json [--scheme vq] [--loss logistic] [--out dir] ...
//   ffep reference --config run.json
//   ffep report --out dir [dir...]
//   ffep synth --out haberman_like.csv
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 some run failed.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "ffep/bench.hpp"
#include "ffep/errors.hpp"
#include "ffep/simd.hpp"
#include "ffep/synthetic.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRunsFailed = 3;

struct Overrides {
  std::vector<std::string> schemes;
  std::vector<std::string> losses;
  std::optional<std::size_t> batch_size;
  std::optional<int> sweeps;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--scheme", o.schemes, "Scheme(s): la, qla, gq, vq")->delimiter(',');
  cmd->add_option("--loss", o.losses, "Loss(es): logistic, hinge, quasi01")->delimiter(',');
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd->add_option("--sweeps", o.sweeps, "Number of sweeps (looping mode)");
  cmd->add_option("--mode", o.mode, "looping | streaming");
  cmd->add_option("--seed", o.seed, "Shuffle seed");
  cmd->add_option("--out", o.out, "Output directory");
}

void apply(const Overrides& o, ffep::RunConfig& cfg, double epsilon) {
  if (!o.schemes.empty()) {
    cfg.schemes.clear();
    for (const auto& s : o.schemes) cfg.schemes.push_back(ffep::parse_scheme(s));
  }
  if (!o.losses.empty()) {
    cfg.losses.clear();
    for (const auto& l : o.losses) cfg.losses.push_back(ffep::parse_loss(l, epsilon));
  }
  if (o.batch_size) cfg.ep.batch_size = *o.batch_size;
  if (o.mode) {
    cfg.ep.mode = ffep::parse_mode(*o.mode);
    if (cfg.ep.mode == ffep::EpMode::kStreaming) cfg.ep.n_sweeps = 1;
  }
  if (o.sweeps) cfg.ep.n_sweeps = *o.sweeps;
  if (o.seed) cfg.ep.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  ffep::validate(cfg);
}

double configured_epsilon(const ffep::RunConfig& cfg) {
  for (const auto& l : cfg.losses) {
    if (l.type == ffep::LossType::kQuasi01) return l.epsilon;
  }
  return 0.1;
}

int cmd_run(const std::string& config_path, const Overrides& o) {
  ffep::RunConfig cfg = ffep::load_run_config(config_path);
  apply(o, cfg, configured_epsilon(cfg));
  const ffep::ExperimentReport report = ffep::run_experiment(cfg);
  std::cout << "dataset " << cfg.dataset_name << ": N=" << report.dataset.n_examples()
            << " d=" << report.dataset.dim() << " s=" << cfg.ep.batch_size
            << " mode=" << ffep::mode_name(cfg.ep.mode) << " simd="
            << ffep::simd::isa_name(ffep::simd::active().isa) << "\n";
  for (const auto& r : report.runs) {
    std::cout << "  " << r.loss << "/" << r.scheme << ": ";
    if (r.ok) {
      std::cout << "final cost " << r.final_cost << ", rejected " << r.rejected
                << ", scheme failures " << r.failed << "\n";
    } else {
      std::cout << "FAILED: " << r.message << "\n";
    }
  }
  for (const auto& ref : report.references) {
    std::cout << "  reference " << ref.loss << " (" << ref.method << "): cost " << ref.result.cost
              << ", objective " << ref.result.objective << "\n";
  }
  ffep::print_timing_report(std::cout, report.timing);
  std::cout << "outputs written to " << cfg.output_dir.string() << "\n";
  return report.all_ok() ? 0 : kExitRunsFailed;
}

int cmd_reference(const std::string& config_path, const Overrides& o) {
  ffep::RunConfig cfg = ffep::load_run_config(config_path);
  apply(o, cfg, configured_epsilon(cfg));
  const ffep::Dataset dataset = ffep::preprocess(ffep::load_csv(cfg.dataset_path, cfg.schema));
  const auto rows = ffep::compute_references(dataset, cfg.losses, cfg.ep.prior);
  ffep::write_references(std::cout, cfg.dataset_name, rows);
  if (o.out) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir / "reference.csv");
    ffep::write_references(out, cfg.dataset_name, rows);
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs) {
  std::vector<ffep::TimingRow> rows;
  for (const auto& input : inputs) {
    std::filesystem::path path = input;
    if (std::filesystem::is_directory(path)) path /= "timing.csv";
    std::ifstream in(path);
    if (!in) throw ffep::DataError("cannot open timing table '" + path.string() + "'");
    const auto part = ffep::read_timing_table(in);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  ffep::print_timing_report(std::cout, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fully factorized expectation propagation benchmarks"};
  app.require_subcommand(1);
  std::string simd_choice;
  app.add_option("--simd", simd_choice, "Kernel set: scalar | avx2 (default: detected)");

  std::string config_path;
  Overrides run_overrides;
  auto* run = app.add_subcommand("run", "Execute a run configuration");
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  add_overrides(run, run_overrides);

  std::string ref_config;
  Overrides ref_overrides;
  auto* reference = app.add_subcommand("reference", "Compute offline reference minimizers");
  reference->add_option("--config", ref_config, "Run configuration (JSON)")->required();
  add_overrides(reference, ref_overrides);

  std::vector<std::string> report_inputs;
  auto* report = app.add_subcommand("report", "Aggregate timing tables");
  report->add_option("--out,inputs", report_inputs, "Output directories or timing.csv files")
      ->required();

  std::string synth_out;
  std::size_t synth_n = 306;
  std::uint64_t synth_seed = 20161111;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Haberman-format dataset");
  synth->add_option("--out", synth_out, "Destination file")->required();
  synth->add_option("--n", synth_n, "Number of examples");
  synth->add_option("--seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (!simd_choice.empty()) {
      ffep::simd::Isa isa{};
      if (!ffep::simd::parse_isa(simd_choice, isa) || !ffep::simd::set_active_isa(isa)) {
        throw ffep::UsageError("kernel set '" + simd_choice + "' is not available");
      }
    }
    if (*run) return cmd_run(config_path, run_overrides);
    if (*reference) return cmd_reference(ref_config, ref_overrides);
    if (*report) return cmd_report(report_inputs);
    if (*synth) {
      std::ofstream out(synth_out);
      if (!out) throw ffep::UsageError("cannot write '" + synth_out + "'");
      ffep::write_haberman_like(out, synth_n, synth_seed);
      return 0;
    }
  } catch (const ffep::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ffep::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunsFailed;
  }
  return 0;
}

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ffep/bench.hpp"
#include "ffep/errors.hpp"
#include "test_support.hpp"

using namespace ffep;

namespace {

Dataset make(std::initializer_list<std::initializer_list<double>> rows,
             std::initializer_list<double> labels) {
  RowMatrix x(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (double v : row) x(r, c++) = v;
    ++r;
  }
  Eigen::VectorXd y(static_cast<Index>(labels.size()));
  r = 0;
  for (double v : labels) y[r++] = v;
  return Dataset(std::move(x), std::move(y));
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ffep_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("total cost at zero") {
  std::mt19937_64 rng(31);
  const Dataset ds = testing::random_dataset(rng, 40, 3);
  const Vector zero = Vector::Zero(3);
  CHECK(total_cost(zero, ds, LossKind::logistic()) == doctest::Approx(40 * std::log(2.0)));
  CHECK(total_cost(zero, ds, LossKind::quasi01()) == doctest::Approx(40.0));
  const Vector ones = Vector::Ones(3);
  CHECK(total_cost(ones, ds, LossKind::hinge(), PriorFactor()) ==
        doctest::Approx(total_cost(ones, ds, LossKind::hinge()) + 3.0 / 50.0));
}

TEST_CASE("separable hinge cost") {
  const Dataset ds = make({{1.0}, {-1.0}}, {1, -1});
  CHECK(total_cost(Vector::Constant(1, 2.0), ds, LossKind::hinge()) == 0.0);
  const auto r = reference_powell(ds, LossKind::hinge(), PriorFactor(), Vector::Zero(1));
  CHECK(r.cost == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("Newton reference on one logistic example matches bisection") {
  const Dataset ds = make({{1.0}}, {1});
  const auto r = reference_newton_logistic(ds, PriorFactor());
  // d/dt [log(1 + e^-t) + t^2/50] = -1/(1 + e^t) + t/25
  auto g = [](double t) { return -1.0 / (1.0 + std::exp(t)) + t / 25.0; };
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  CHECK(std::abs(r.theta[0] - 0.5 * (lo + hi)) <= 1e-8);
  CHECK(r.converged);
}

TEST_CASE("Newton reference on a symmetric dataset") {
  const Dataset ds = make({{0.7, 1.0}, {0.7, 1.0}}, {1, -1});
  const auto r = reference_newton_logistic(ds, PriorFactor());
  CHECK(std::abs(r.theta[0]) < 1e-10);
}

TEST_CASE("Newton reference gradient contract") {
  std::mt19937_64 rng(32);
  const Dataset ds = testing::random_dataset(rng, 80, 4);
  const PriorFactor prior;
  const auto r = reference_newton_logistic(ds, prior);
  const double h = 1e-5;
  for (Index i = 0; i < 4; ++i) {
    Vector tp = r.theta, tm = r.theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (total_cost(tp, ds, LossKind::logistic(), prior) -
                       total_cost(tm, ds, LossKind::logistic(), prior)) / (2 * h);
    CHECK(std::abs(fd) < 1e-6);
  }
  CHECK(r.objective == doctest::Approx(r.cost + prior_penalty(prior, r.theta)));
}

TEST_CASE("Powell on a quadratic bowl") {
  const Vector target = Eigen::Vector3d(1.0, -2.0, 0.5);
  const Objective bowl = [&](const Vector& x) {
    const Vector d = x - target;
    return d[0] * d[0] + 3 * d[1] * d[1] + 0.5 * d[2] * d[2] + d[0] * d[1];
  };
  const auto r = powell_minimize(bowl, Vector::Zero(3));
  CHECK((r.x - target).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(r.converged);
}

TEST_CASE("Powell line-search cap") {
  const Objective rosen = [](const Vector& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  PowellOptions o;
  o.max_line_searches = 3;
  const auto r = powell_minimize(rosen, Eigen::Vector2d(-1.2, 1.0), o);
  CHECK_FALSE(r.converged);
  CHECK(r.line_searches <= 3);
  CHECK(r.value < rosen(Eigen::Vector2d(-1.2, 1.0)));
}

namespace {

double grid_best(const Dataset& ds, const LossKind& loss, const PriorFactor& prior, Vector* arg) {
  double best = INFINITY;
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      const Vector t = Eigen::Vector2d(-10.0 + 20.0 * i / 199.0, -10.0 + 20.0 * j / 199.0);
      const double v = total_cost(t, ds, loss, prior);
      if (v < best) {
        best = v;
        if (arg) *arg = t;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("grid oracle: Powell on a quasi01 toy set is no worse than a 200x200 grid search") {
  // Two clusters split by a line through the origin, one mislabeled point.
  const Dataset ds = make({{1.0, 0.8}, {0.6, 1.2}, {1.4, 0.3}, {0.9, 0.1},
                           {-1.1, -0.7}, {-0.4, -1.3}, {-1.2, 0.2}, {0.3, 0.9}},
                          {1, 1, 1, 1, -1, -1, -1, -1});
  const PriorFactor prior;
  const LossKind q = LossKind::quasi01();
  const auto start = reference_newton_logistic(ds, prior).theta;
  const auto r = reference_powell(ds, q, prior, start);
  CHECK(r.objective <= grid_best(ds, q, prior, nullptr));
}

TEST_CASE("Powell is a local method on quasi01") {
  // On a random set the logistic start can sit in a worse basin than the
  // grid optimum; started from the grid optimum Powell never does worse.
  std::mt19937_64 rng(33);
  const Dataset ds = testing::random_dataset(rng, 30, 2);
  const PriorFactor prior;
  const LossKind q = LossKind::quasi01();
  Vector arg;
  const double best = grid_best(ds, q, prior, &arg);
  const auto from_grid = reference_powell(ds, q, prior, arg);
  CHECK(from_grid.objective <= best);
  const auto from_logistic = reference_powell(ds, q, prior, reference_newton_logistic(ds, prior).theta);
  CHECK(from_logistic.objective < total_cost(reference_newton_logistic(ds, prior).theta, ds, q, prior));
}

TEST_CASE("run config parsing") {
  const std::string text = R"({
    "dataset": {"name": "toy", "path": "toy.csv", "has_header": true, "label_column": "y",
                "labels": {"a": 1, "b": -1}, "categorical_columns": ["c"]},
    "losses": ["hinge"], "schemes": ["la", "vq"], "batch_size": 5, "sweeps": 2,
    "mode": "streaming", "seed": 7, "output_dir": "res"})";
  const RunConfig c = parse_run_config(text, "/base");
  CHECK(c.dataset_name == "toy");
  CHECK(c.dataset_path == std::filesystem::path("/base/toy.csv"));
  CHECK(c.output_dir == std::filesystem::path("/base/res"));
  CHECK(c.schema.label_map.at("b") == -1);
  CHECK(c.schemes.size() == 2);
  CHECK(c.ep.batch_size == 5);
  CHECK(c.ep.mode == EpMode::kStreaming);
  CHECK(c.ep.seed == std::uint64_t{7});
  CHECK_THROWS_AS(parse_run_config(R"({"schemes": ["vq"], "sweeps": 2, "typo": 1})"), UsageError);
  CHECK_THROWS_AS(parse_run_config("{not json"), UsageError);
  CHECK(parse_run_config(R"({"dataset": {"path": "a", "label_column": "0", "labels": {"1": 1}},
                             "vq_start": "constant"})").ep.scheme.options.vq_start == VqStart::kConstant);
  CHECK_THROWS_AS(parse_run_config(R"({"schemes": []})"), UsageError);
  CHECK_THROWS_AS(parse_run_config(R"({"schemes": ["zz"]})"), UsageError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), UsageError);
}

TEST_CASE("timing table round trip and report") {
  const std::vector<TimingRow> rows = {{"d", 306, 4, 10, "logistic", "la", 4.78},
                                       {"d", 306, 4, 10, "logistic", "qla", 0.59}};
  std::stringstream ss;
  write_timing_table(ss, rows);
  CHECK(ss.str().rfind(kTimingHeader, 0) == 0);
  const auto back = read_timing_table(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].ms_per_batch == 4.78);
  CHECK(back[1].scheme == "qla");
  std::ostringstream report;
  print_timing_report(report, back);
  CHECK(report.str().find("4.78") != std::string::npos);
  std::istringstream bad("dataset,N\nx,1\n");
  CHECK_THROWS_AS(read_timing_table(bad), DataError);
}

TEST_CASE("experiment writes traces, timing, manifest and references") {
  std::mt19937_64 rng(34);
  const Dataset ds = testing::random_dataset(rng, 45, 3);
  RunConfig c;
  c.dataset_name = "toy";
  c.losses = {LossKind::logistic(), LossKind::hinge(), LossKind::quasi01()};
  c.schemes = {SchemeType::kLaplace, SchemeType::kQuickLaplace, SchemeType::kGaussQuadrature,
               SchemeType::kVariationalQuadrature};
  c.ep.n_sweeps = 2;
  c.ep.record_snapshots = true;
  c.timing_repetitions = 1;
  c.output_dir = scratch_dir("experiment");
  const auto report = run_experiment(c, ds);
  CHECK(report.runs.size() == 12);
  CHECK(report.timing.size() == 12);
  std::size_t traces = 0;
  for (const auto& entry : std::filesystem::directory_iterator(c.output_dir)) {
    if (entry.path().string().ends_with(".trace.csv")) ++traces;
  }
  CHECK(traces == 12);
  const auto trace = c.output_dir / "toy_hinge_vq.trace.csv";
  REQUIRE(std::filesystem::exists(trace));
  std::ifstream in(trace);
  std::string header;
  std::getline(in, header);
  CHECK(header == kTraceHeader);
  CHECK(count_lines(trace) == 1 + 5 * 2);
  CHECK(count_lines(c.output_dir / "timing.csv") == 13);
  CHECK(std::filesystem::exists(c.output_dir / "manifest.csv"));
  CHECK(std::filesystem::exists(c.output_dir / "reference.csv"));

  for (const auto& run : report.runs) {
    CHECK(run.ok);
    // Costs recomputed from the stored posterior means match the trace.
    const auto& recs = run.result.trace.records;
    const auto& snaps = run.result.trace.snapshots;
    REQUIRE(recs.size() == snaps.size());
    const LossKind loss = parse_loss(run.loss);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(std::abs(total_cost(snaps[i], ds, loss) - recs[i].total_cost) <= 1e-9);
    }
    // The reference minimizes the same prior-inclusive objective.
    if (run.loss != "quasi01") {
      for (const auto& ref : report.references) {
        if (ref.loss == run.loss) CHECK(ref.result.objective <= run.final_objective + 1e-6);
      }
    }
  }
  std::filesystem::remove_all(c.output_dir);
}

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "alrnn/errors.hpp"
#include "alrnn/experiments.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace alrnn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("alrnn_exp_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.dataset.system = "lorenz63";
  c.dataset.discard = 200;
  c.dataset.train_length = 1500;
  c.dataset.test_length = 1500;
  c.M = 8;
  c.P = 2;
  c.train.epochs = 3;
  c.train.batches_per_epoch = 4;
  c.train.seqs_per_batch = 4;
  c.train.seq_len = 40;
  c.train.eval_every = 1;
  c.train.seed = 11;
  c.eval.discard = 100;
  c.eval.lyap_transient = 100;
  c.eval.lyap_horizon = 1000;
  c.validation_length = 400;
  c.analysis_length = 1000;
  c.failure_cutoff = 1e9;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("experiment config survives a JSON round trip") {
  ExperimentConfig c = tiny_config("somewhere");
  c.dataset.x0 = {1.0, 2.0, 3.0};
  c.dataset.smooth_sigma = 1.5;
  c.n_runs = 4;
  const nlohmann::json j = c;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.dataset.x0 == c.dataset.x0);
  CHECK(back.output_dir == c.output_dir);

  const fs::path dir = scratch_dir("cfg");
  save_experiment_config(c, dir / "c.json");
  CHECK(nlohmann::json(load_experiment_config(dir / "c.json")) == j);
  std::ofstream(dir / "bad.json") << "{\"M\": \"twenty\"}";
  CHECK_THROWS_AS(load_experiment_config(dir / "bad.json"), SchemaError);
}

TEST_CASE("validate rejects bad configurations") {
  ExperimentConfig c = tiny_config("x");
  c.n_runs = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = tiny_config("x");
  c.dataset.csv = "/nonexistent/file.csv";
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("run seeds are base seed plus index") {
  ExperimentConfig c;
  c.train.seed = 40;
  CHECK(run_seed(c, 0) == 40);
  CHECK(run_seed(c, 7) == 47);
}

TEST_CASE("prepare_dataset splits a standardized generated series") {
  const ExperimentConfig c = tiny_config("x");
  const Dataset d = prepare_dataset(c.dataset);
  CHECK(d.train.length() == 1500);
  CHECK(d.test.length() == 1500);
  CHECK(d.train.dim() == 3);
  // standardization happens before the split, so the concatenation is standard
  Eigen::MatrixXd all(3000, 3);
  all << d.train.data(), d.test.data();
  const Eigen::RowVectorXd mean = all.colwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
  // the test part continues the training part in time
  const double step = (d.test.row(0) - d.train.row(1499)).norm();
  const double typical = (d.train.row(1499) - d.train.row(1498)).norm();
  CHECK(step < 5.0 * typical);
  CHECK(prepare_dataset(c.dataset).train.data() == d.train.data());
}

TEST_CASE("prepare_dataset halves a short CSV") {
  const fs::path dir = scratch_dir("csv");
  Eigen::MatrixXd X(300, 2);
  for (int t = 0; t < 300; ++t) X.row(t) << std::sin(0.1 * t), std::cos(0.07 * t);
  save_csv(TimeSeries(X, 0.5), dir / "d.csv");
  DatasetSpec s;
  s.csv = dir / "d.csv";
  s.dt = 0.5;
  s.standardize = false;
  const Dataset d = prepare_dataset(s);
  CHECK(d.train.length() == 150);
  CHECK(d.test.length() == 150);
  CHECK(d.test.row(0).isApprox(X.row(150)));
  CHECK(d.train.dt() == 0.5);
}

TEST_CASE("coverage curve is nondecreasing and ends at one") {
  SymbolicSequence s;
  s.P = 3;
  const std::uint64_t pattern[] = {0, 0, 0, 1, 1, 5, 0, 2, 2, 2, 2, 7};
  for (int rep = 0; rep < 7; ++rep) {
    for (auto v : pattern) s.symbols.push_back(Symbol{v});
  }
  const TransitionGraph g = build_graph(s);
  const auto curve = coverage_curve(g);
  REQUIRE(curve.size() == g.size());
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);
  CHECK(curve.back() == 1.0);
  // symbol 0 and 2 each cover 4 of 12 positions
  CHECK(curve[0] == doctest::Approx(28.0 / 84.0));
  CHECK(curve[1] == doctest::Approx(56.0 / 84.0));
  CHECK(subregions_for_coverage(curve, 0.5) == 2);
  CHECK(subregions_for_coverage(curve, 0.99) == 5);
  CHECK(subregions_for_coverage(curve, 1.0) == 5);
}

TEST_CASE("run_single writes every artifact and they parse back") {
  const fs::path dir = scratch_dir("single");
  const ExperimentConfig c = tiny_config(dir);
  const Dataset d = prepare_dataset(c.dataset);
  const RunResult r = run_single(c, d, 2, dir);
  INFO(r.error);
  REQUIRE(!r.failed);
  REQUIRE(r.model);
  REQUIRE(r.analysis);
  CHECK(r.seed == 13);
  const fs::path run = dir / "run_2";
  for (const char* f : {"config.json", "checkpoint.json", "eval.json", "graph.json",
                        "fixed_points.json", "symbols.csv", "history.jsonl"}) {
    CHECK(fs::exists(run / f));
  }
  CHECK(!fs::exists(run / "error.txt"));

  const ALRNN loaded = load_checkpoint(run / "checkpoint.json");
  CHECK(loaded.parameters() == r.model->parameters());

  std::ifstream ev(run / "eval.json");
  const EvalReport rep = eval_report_from_json(nlohmann::json::parse(ev));
  CHECK(rep.d_stsp == r.report.d_stsp);
  CHECK(rep.d_hellinger == r.report.d_hellinger);

  std::ifstream gj(run / "graph.json");
  const TransitionGraph g = graph_from_json(nlohmann::json::parse(gj));
  CHECK(g.nodes == r.analysis->graph.nodes);
  CHECK(g.counts == r.analysis->graph.counts);

  std::ifstream fj(run / "fixed_points.json");
  const auto fps = nlohmann::json::parse(fj);
  CHECK(fps.size() == 4);
  for (const auto& fp : fps) (void)fixed_point_from_json(fp);

  const SymbolicSequence syms = load_symbols_csv(run / "symbols.csv", c.P);
  CHECK(syms.symbols == r.analysis->symbols.symbols);

  std::ifstream hj(run / "history.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(hj, line)) {
    CHECK(nlohmann::json::parse(line).is_object());
    ++lines;
  }
  CHECK(lines == c.train.epochs);

  CHECK(load_experiment_config(run / "config.json").M == c.M);
}

TEST_CASE("a re-run reproduces history and checkpoint byte for byte") {
  const fs::path a = scratch_dir("rerun_a");
  const fs::path b = scratch_dir("rerun_b");
  const ExperimentConfig ca = tiny_config(a);
  ExperimentConfig cb = tiny_config(b);
  const Dataset d = prepare_dataset(ca.dataset);
  (void)run_single(ca, d, 0, a);
  (void)run_single(cb, d, 0, b);
  CHECK(slurp(a / "run_0" / "history.jsonl") == slurp(b / "run_0" / "history.jsonl"));
  CHECK(slurp(a / "run_0" / "checkpoint.json") == slurp(b / "run_0" / "checkpoint.json"));
  CHECK(slurp(a / "run_0" / "eval.json") == slurp(b / "run_0" / "eval.json"));
}

TEST_CASE("failed runs are reported with error.txt") {
  const fs::path dir = scratch_dir("fail");
  ExperimentConfig c = tiny_config(dir);
  c.failure_cutoff = -1.0;
  const Dataset d = prepare_dataset(c.dataset);
  const RunResult r = run_single(c, d, 0, dir);
  CHECK(r.failed);
  CHECK(!r.error.empty());
  CHECK(fs::exists(dir / "run_0" / "error.txt"));
}

TEST_CASE("run_experiment runs n_runs seeds independently of thread count") {
  const fs::path dir = scratch_dir("exp");
  ExperimentConfig c = tiny_config(dir);
  c.n_runs = 2;
  const Dataset d = prepare_dataset(c.dataset);
  const ExperimentResult res = run_experiment(c, d);
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].seed == 11);
  CHECK(res.runs[1].seed == 12);
  CHECK(fs::exists(dir / "experiment.json"));
  const RunResult single = run_single(c, d, 1, scratch_dir("exp_single"));
  CHECK(single.model->parameters() == res.runs[1].model->parameters());
}

TEST_CASE("worker count honours the environment cap") {
  CHECK(worker_count(1) == 1);
  CHECK(worker_count(0) == 1);
  CHECK(worker_count(100) >= 1);
}

TEST_CASE("robustness study of a model against itself is exactly zero") {
  const fs::path dir = scratch_dir("robust");
  const ExperimentConfig c = tiny_config(dir);
  const Dataset d = prepare_dataset(c.dataset);
  RunResult a = run_single(c, d, 0, dir);
  REQUIRE(!a.failed);
  RunResult b = a;
  b.index = 1;
  const RobustnessReport rep = robustness_study(std::vector<RunResult>{a, b}, c.failure_cutoff);
  CHECK(rep.included_runs.size() == 2);
  REQUIRE(rep.pairs.size() == 1);
  CHECK(!rep.pairs[0].mismatch);
  CHECK(rep.pairs[0].matched.size() == a.analysis->graph.size());
  for (const auto& m : rep.pairs[0].matched) CHECK(m.reference == m.other);
  CHECK(rep.median_d_stsp == 0.0);
  CHECK(rep.median_sigma_max_difference == 0.0);
  if (!std::isnan(rep.median_fixed_point_distance)) {
    CHECK(rep.median_fixed_point_distance == 0.0);
  }
  CHECK_NOTHROW((void)to_json(rep).dump());

  RunResult bad = a;
  bad.index = 2;
  bad.report.d_stsp = std::numeric_limits<double>::infinity();
  const RobustnessReport rep2 =
      robustness_study(std::vector<RunResult>{a, b, bad}, c.failure_cutoff);
  CHECK(rep2.excluded_runs == std::vector<int>{2});
  CHECK(rep2.pairs.size() == 1);
  CHECK_THROWS_AS(robustness_study(std::vector<RunResult>{a}), InvalidArgument);
}

TEST_CASE("plot data has fixed headers and is deterministic") {
  const fs::path dir = scratch_dir("plots");
  emit_plot_data(SweepResult{}, dir);
  CHECK(slurp(dir / "metrics.csv") == "P,run,d_stsp,d_h\n");
  CHECK(slurp(dir / "coverage.csv") == "P,run,rank,cumulative_coverage\n");
  CHECK(slurp(dir / "layout.csv") == "P,run,node,x,y\n");

  const ExperimentConfig c = tiny_config(dir / "runs");
  const Dataset d = prepare_dataset(c.dataset);
  SweepResult s;
  s.entries.push_back({2, run_single(c, d, 0, dir / "runs")});
  emit_plot_data(s, dir / "a");
  emit_plot_data(s, dir / "b");
  for (const char* f : {"metrics.csv", "coverage.csv", "layout.csv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  std::istringstream cov(slurp(dir / "a" / "coverage.csv"));
  std::string line, last;
  int rows = 0;
  while (std::getline(cov, line)) {
    last = line;
    ++rows;
  }
  CHECK(rows == static_cast<int>(s.entries[0].run.visited()) + 1);
  CHECK(last.substr(last.rfind(',') + 1) == "1");
}

TEST_CASE("p_sweep rejects P larger than M - N") {
  ExperimentConfig c = tiny_config(scratch_dir("sweep_bad"));
  const Dataset d = prepare_dataset(c.dataset);
  CHECK_THROWS_AS(p_sweep(c, d, {6}), InvalidArgument);
}

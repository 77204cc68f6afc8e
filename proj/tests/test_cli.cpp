#include <filesystem>
#include <fstream>
#include <sstream>

#include "alrnn/experiments.hpp"
#include "cli.hpp"
#include "doctest.h"

using namespace alrnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("alrnn_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

EvalOptions quick_eval() {
  EvalOptions o;
  o.discard = 100;
  o.lyap_transient = 100;
  o.lyap_horizon = 1000;
  return o;
}

/// Small dataset and checkpoint shared by the evaluate/analyze/graph cases.
struct Fixture {
  fs::path dir = scratch_dir("fixture");
  fs::path data = dir / "d.csv";
  fs::path model = dir / "m.json";
  fs::path eval_cfg = dir / "eval.json";

  Fixture() {
    REQUIRE(call({"generate", "--system", "lorenz63", "--steps", "1500", "--out", data.string()})
                .code == 0);
    save_checkpoint(init_model(8, 2, 3, 5), model);
    std::ofstream(eval_cfg) << nlohmann::json(quick_eval()).dump();
  }
};

}  // namespace

TEST_CASE("generate writes the requested rows and matches the library") {
  const fs::path dir = scratch_dir("gen");
  const Outcome o = call({"generate", "--system", "lorenz63", "--steps", "10000", "--out",
                          (dir / "data.csv").string()});
  REQUIRE(o.code == 0);
  const TimeSeries ts = load_series(dir / "data.csv");
  CHECK(ts.length() == 10000);
  CHECK(ts.dim() == 3);
  CHECK(ts.dt() == 0.01);

  const OdeSystem sys = lorenz63();
  const TimeSeries lib = sample_trajectory(sys, default_initial_state(sys), 0.01, 10000, 1000);
  save_csv(lib, dir / "lib.csv");
  CHECK(slurp(dir / "data.csv") == slurp(dir / "lib.csv"));
}

TEST_CASE("generate with noise is seeded") {
  const fs::path dir = scratch_dir("noise");
  for (const char* name : {"a.csv", "b.csv"}) {
    REQUIRE(call({"generate", "--system", "roessler", "--steps", "500", "--noise", "0.05",
                  "--seed", "3", "--out", (dir / name).string()})
                .code == 0);
  }
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  REQUIRE(call({"generate", "--system", "roessler", "--steps", "500", "--noise", "0.05",
                "--out", (dir / "c.csv").string()})
              .code == 0);
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
}

TEST_CASE("usage errors exit with 1 and print usage") {
  const Outcome no_data = call({"train"});
  CHECK(no_data.code == 1);
  CHECK(no_data.err.find("--data") != std::string::npos);
  CHECK(no_data.err.find("Usage") != std::string::npos);

  CHECK(call({}).code == 1);
  CHECK(call({"frobnicate"}).code == 1);
  CHECK(call({"generate", "--system", "duffing", "--steps", "10", "--out", "x.csv"}).code == 1);
  CHECK(call({"graph", "--model", "/nonexistent.json"}).code == 1);
  CHECK(call({"generate", "--system", "lorenz63", "--steps", "ten", "--out", "x.csv"}).code == 1);
}

TEST_CASE("help exits with 0") {
  const Outcome o = call({"--help"});
  CHECK(o.code == 0);
  CHECK(o.out.find("evaluate") != std::string::npos);
}

TEST_CASE("runtime failures exit with 2") {
  const fs::path dir = scratch_dir("runtime");
  std::ofstream(dir / "broken.json") << "{not json";
  std::ofstream(dir / "d.csv") << "x\n1\n2\n";
  const Outcome o = call({"evaluate", "--model", (dir / "broken.json").string(), "--data",
                          (dir / "d.csv").string(), "--out", (dir / "e.json").string()});
  CHECK(o.code == 2);
  CHECK(o.err.find("error") != std::string::npos);
}

TEST_CASE("evaluate writes the three metrics exactly as the library does") {
  Fixture fx;
  const fs::path out = fx.dir / "report.json";
  const Outcome o = call({"evaluate", "--model", fx.model.string(), "--data", fx.data.string(),
                          "--config", fx.eval_cfg.string(), "--out", out.string()});
  INFO(o.err);
  REQUIRE(o.code == 0);
  std::ifstream in(out);
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.contains("d_stsp"));
  CHECK(j.contains("d_hellinger"));
  CHECK(j.contains("lambda_max"));

  const EvalReport lib = evaluate(load_checkpoint(fx.model), load_series(fx.data), quick_eval());
  CHECK(slurp(out) == to_json(lib).dump(2) + "\n");
}

TEST_CASE("graph output matches the library in both formats") {
  Fixture fx;
  const ALRNN model = load_checkpoint(fx.model);
  const TimeSeries ts = load_series(fx.data);
  const AnalysisBundle b = analyze_model(model, ts.row(0).transpose(), 2000, 100, ts.dt());

  const Outcome dot = call({"graph", "--model", fx.model.string(), "--data", fx.data.string(),
                            "--steps", "2000", "--discard", "100"});
  REQUIRE(dot.code == 0);
  CHECK(dot.out == to_dot(b.graph));

  const fs::path js = fx.dir / "g.json";
  REQUIRE(call({"graph", "--model", fx.model.string(), "--data", fx.data.string(), "--steps",
                "2000", "--discard", "100", "--format", "json", "--out", js.string()})
              .code == 0);
  CHECK(slurp(js) == to_json(b.graph, b.layout).dump(2) + "\n");
  CHECK(call({"graph", "--model", fx.model.string(), "--format", "svg"}).code == 1);
}

TEST_CASE("analyze writes its artifacts") {
  Fixture fx;
  const fs::path out = fx.dir / "analysis";
  const Outcome o = call({"analyze", "--model", fx.model.string(), "--data", fx.data.string(),
                          "--steps", "2000", "--discard", "100", "--out", out.string()});
  INFO(o.err);
  REQUIRE(o.code == 0);
  for (const char* f : {"graph.json", "fixed_points.json", "symbols.csv", "cycles.json",
                        "summary.json"}) {
    CHECK(fs::exists(out / f));
  }
  std::ifstream in(out / "fixed_points.json");
  CHECK(nlohmann::json::parse(in).size() == 4);
  const ALRNN model = load_checkpoint(fx.model);
  const TimeSeries ts = load_series(fx.data);
  const AnalysisBundle b = analyze_model(model, ts.row(0).transpose(), 2000, 100, ts.dt());
  CHECK(load_symbols_csv(out / "symbols.csv", 2).symbols == b.symbols.symbols);
}

TEST_CASE("train runs the experiment pipeline with flag overrides") {
  const fs::path dir = scratch_dir("train");
  REQUIRE(call({"generate", "--system", "lorenz63", "--steps", "3000", "--out",
                (dir / "d.csv").string()})
              .code == 0);
  ExperimentConfig cfg;
  cfg.M = 8;
  cfg.train.epochs = 2;
  cfg.train.batches_per_epoch = 3;
  cfg.train.seqs_per_batch = 4;
  cfg.train.seq_len = 40;
  cfg.train.eval_every = 1;
  cfg.eval = quick_eval();
  cfg.validation_length = 300;
  cfg.analysis_length = 500;
  cfg.failure_cutoff = 1e9;
  save_experiment_config(cfg, dir / "cfg.json");

  const Outcome o = call({"train", "--data", (dir / "d.csv").string(), "--config",
                          (dir / "cfg.json").string(), "--p", "1", "--tau", "10", "--seed", "9",
                          "--out", (dir / "runs").string()});
  INFO(o.err);
  REQUIRE(o.code == 0);
  CHECK(fs::exists(dir / "runs" / "run_0" / "checkpoint.json"));
  const ExperimentConfig used = load_experiment_config(dir / "runs" / "run_0" / "config.json");
  CHECK(used.P == 1);
  CHECK(used.train.tau == 10);
  CHECK(used.train.seed == 9);
  CHECK(load_checkpoint(dir / "runs" / "run_0" / "checkpoint.json").P() == 1);

  // same pipeline through the library
  const RunResult lib = run_single(used, prepare_dataset(used.dataset), 0, dir / "lib");
  CHECK(slurp(dir / "lib" / "run_0" / "history.jsonl") ==
        slurp(dir / "runs" / "run_0" / "history.jsonl"));
  CHECK(slurp(dir / "lib" / "run_0" / "checkpoint.json") ==
        slurp(dir / "runs" / "run_0" / "checkpoint.json"));
  CHECK(!lib.failed);
}

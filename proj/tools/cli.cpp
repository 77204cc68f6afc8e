#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>

#include "alrnn/analysis.hpp"
#include "alrnn/datasets.hpp"
#include "alrnn/errors.hpp"
#include "alrnn/evaluation.hpp"
#include "alrnn/experiments.hpp"
#include "alrnn/model.hpp"
#include "alrnn/symbolic.hpp"

namespace alrnn::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string system;
  int steps = 0;
  double dt = 0.0;
  int discard = 1000;
  double noise = 0.0;
  std::string data;
  std::string config;
  std::string model;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<int> p;
  int m = 0;
  int tau = 0;
  std::string format = "dot";
  int dimension = 20;
};

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

int cmd_generate(const Flags& f, std::ostream& out) {
  const OdeSystem sys = system_by_name(f.system, f.dimension);
  const double dt = f.dt > 0.0 ? f.dt : sys.default_dt;
  TimeSeries ts = sample_trajectory(sys, default_initial_state(sys), dt, f.steps, f.discard);
  if (f.noise > 0.0) ts = add_observation_noise(ts, f.noise, f.seed);
  ts = TimeSeries(ts.data(), ts.dt(), f.system);
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  save_csv(ts, f.out);
  save_metadata(ts, f.out);
  out << "wrote " << ts.length() << " rows to " << f.out << '\n';
  return kExitOk;
}

ExperimentConfig experiment_from(const Flags& f, const CLI::App& sub) {
  ExperimentConfig cfg;
  if (!f.config.empty()) cfg = load_experiment_config(f.config);
  if (!f.data.empty()) {
    cfg.dataset.csv = f.data;
    cfg.dataset.system.clear();
  }
  if (sub.count("--m")) cfg.M = f.m;
  if (sub.count("--p") && !f.p.empty()) cfg.P = f.p.front();
  if (sub.count("--tau")) cfg.train.tau = f.tau;
  if (sub.count("--seed")) cfg.train.seed = f.seed;
  if (sub.count("--noise")) cfg.train.noise_fraction = f.noise;
  if (!f.out.empty()) cfg.output_dir = f.out;
  return cfg;
}

int cmd_train(const Flags& f, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = experiment_from(f, sub);
  const ExperimentResult res = run_experiment(cfg);
  int produced = 0;
  for (const auto& r : res.runs) {
    nlohmann::json line = {{"run", r.index}, {"seed", r.seed}, {"failed", r.failed}};
    if (r.model) {
      ++produced;
      line["d_stsp"] = r.report.d_stsp;
      line["d_hellinger"] = r.report.d_hellinger;
      line["lambda_max"] = r.report.lambda_max;
      line["visited_subregions"] = r.visited();
    }
    if (!r.error.empty()) line["error"] = r.error;
    out << line.dump() << '\n';
  }
  if (produced == 0) {
    err << "error: no run produced a model\n";
    return kExitRuntime;
  }
  return kExitOk;
}

EvalOptions eval_options_from(const std::string& config) {
  if (config.empty()) return {};
  const nlohmann::json j = read_json(config);
  try {
    return (j.contains("eval") ? j["eval"] : j).get<EvalOptions>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(config + ": " + e.what());
  }
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  const ALRNN model = load_checkpoint(f.model);
  const TimeSeries truth = load_series(f.data);
  const EvalReport report = evaluate(model, truth, eval_options_from(f.config));
  const std::string path = f.out.empty() ? "eval.json" : f.out;
  write_text(path, to_json(report).dump(2) + "\n");
  out << "D_stsp " << report.d_stsp << "  D_H " << report.d_hellinger << "  lambda_max "
      << report.lambda_max << '\n';
  return kExitOk;
}

AnalysisBundle bundle_from(const Flags& f) {
  const ALRNN model = load_checkpoint(f.model);
  Eigen::VectorXd x1 = Eigen::VectorXd::Zero(model.N());
  double dt = 1.0;
  if (!f.data.empty()) {
    const TimeSeries ts = load_series(f.data);
    x1 = ts.row(0).transpose();
    dt = ts.dt();
  }
  return analyze_model(model, x1, f.steps, f.discard, dt);
}

int cmd_analyze(const Flags& f, std::ostream& out) {
  const ALRNN model = load_checkpoint(f.model);
  const AnalysisBundle b = bundle_from(f);
  const fs::path dir = f.out;
  fs::create_directories(dir);
  write_text(dir / "graph.json", to_json(b.graph, b.layout).dump(2) + "\n");
  nlohmann::json fps = nlohmann::json::array();
  for (const auto& fp : b.fixed_points) fps.push_back(to_json(fp));
  write_text(dir / "fixed_points.json", fps.dump(2) + "\n");
  save_symbols_csv(b.symbols, dir / "symbols.csv");

  nlohmann::json cycles = nlohmann::json::array();
  for (int k = 2; k <= 4; ++k) {
    CycleSearchOptions opts;
    opts.words = admissible_words(b.graph, k);
    if (opts.words->empty()) continue;
    for (const auto& c : find_cycles(model, k, opts)) cycles.push_back(to_json(c));
  }
  write_text(dir / "cycles.json", cycles.dump(2) + "\n");

  const nlohmann::json summary = {
      {"visited_subregions", b.graph.size()},
      {"coverage", b.coverage},
      {"subregions_for_99_percent", subregions_for_coverage(b.coverage, 0.99)},
      {"topological_entropy",
       topological_entropy(b.symbols, static_cast<int>(std::min<std::size_t>(20, b.symbols.size() / 10))).value}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << "visited " << b.graph.size() << " subregions, " << b.fixed_points.size()
      << " fixed points, " << cycles.size() << " cycles; wrote " << dir.string() << '\n';
  return kExitOk;
}

int cmd_graph(const Flags& f, std::ostream& out) {
  const AnalysisBundle b = bundle_from(f);
  const std::string text = f.format == "json" ? to_json(b.graph, b.layout).dump(2) + "\n"
                                              : to_dot(b.graph);
  if (f.out.empty()) {
    out << text;
  } else {
    write_text(f.out, text);
  }
  return kExitOk;
}

int cmd_sweep(const Flags& f, const CLI::App& sub, std::ostream& out) {
  ExperimentConfig cfg = experiment_from(f, sub);
  const std::vector<int> ps = f.p.empty() ? std::vector<int>{1, 2, 4, 6, 8, 10} : f.p;
  const SweepResult s = p_sweep(cfg, ps);
  emit_plot_data(s, cfg.output_dir / "plots");
  for (int p : ps) {
    std::vector<const RunResult*> runs;
    for (const auto& e : s.entries) {
      if (e.P == p) runs.push_back(&e.run);
    }
    if (runs.size() < 2) continue;
    const RobustnessReport rep = robustness_study(runs, cfg.failure_cutoff, cfg.eval.bins_per_dim);
    write_text(cfg.output_dir / ("P" + std::to_string(p)) / "robustness.json",
               to_json(rep).dump(2) + "\n");
  }
  out << sweep_summary(s).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Almost-linear RNN reconstruction and analysis of dynamical systems", "alrnn"};
  app.require_subcommand(1);
  Flags f;

  const std::vector<std::string> systems{"lorenz63", "roessler", "lorenz96"};

  auto* gen = app.add_subcommand("generate", "integrate a benchmark system to CSV");
  gen->add_option("--system", f.system, "system name")->required()->check(CLI::IsMember(systems));
  gen->add_option("--steps", f.steps, "number of rows written")->required()->check(CLI::PositiveNumber);
  gen->add_option("--dt", f.dt, "integration step (default: system specific)")->check(CLI::NonNegativeNumber);
  gen->add_option("--discard", f.discard, "transient samples dropped")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen->add_option("--noise", f.noise, "observation noise as a fraction of each column's std")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", f.seed, "noise seed")->capture_default_str();
  gen->add_option("--dimension", f.dimension, "lorenz96 dimension")->capture_default_str();
  gen->add_option("--out", f.out, "output CSV")->required();

  auto* train = app.add_subcommand("train", "train AL-RNNs on a CSV time series");
  train->add_option("--data", f.data, "training CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--config", f.config, "experiment JSON")->check(CLI::ExistingFile);
  train->add_option("--m", f.m, "latent dimension")->check(CLI::PositiveNumber);
  train->add_option("--p", f.p, "number of piecewise-linear units")->expected(1);
  train->add_option("--tau", f.tau, "teacher forcing interval")->check(CLI::PositiveNumber);
  train->add_option("--noise", f.noise, "training noise fraction")->check(CLI::NonNegativeNumber);
  train->add_option("--seed", f.seed, "base seed (default 0 or the config's)");
  train->add_option("--out", f.out, "output directory (default runs)");

  auto* ev = app.add_subcommand("evaluate", "compare a model's free rollout with data");
  ev->add_option("--model", f.model, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", f.data, "ground-truth CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--config", f.config, "evaluation options JSON")->check(CLI::ExistingFile);
  ev->add_option("--out", f.out, "report path (default eval.json)");

  auto* an = app.add_subcommand("analyze", "symbolic and fixed-point analysis of a model");
  auto* gr = app.add_subcommand("graph", "export the transition graph");
  for (auto* sub : {an, gr}) {
    sub->add_option("--model", f.model, "checkpoint JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", f.data, "CSV whose first row seeds the rollout")->check(CLI::ExistingFile);
    sub->add_option("--steps", f.steps, "analysed rollout length")->default_val(100000)->check(CLI::Range(100, 100000000));
    sub->add_option("--discard", f.discard, "transient steps dropped")->capture_default_str()->check(CLI::NonNegativeNumber);
  }
  an->add_option("--out", f.out, "output directory")->required();
  gr->add_option("--format", f.format, "dot or json")->capture_default_str()->check(CLI::IsMember({"dot", "json"}));
  gr->add_option("--out", f.out, "output file (default standard output)");

  auto* sw = app.add_subcommand("sweep", "train models for several P values");
  sw->add_option("--config", f.config, "experiment JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("--p", f.p, "P values (repeatable)");
  sw->add_option("--m", f.m, "latent dimension")->check(CLI::PositiveNumber);
  sw->add_option("--tau", f.tau, "teacher forcing interval")->check(CLI::PositiveNumber);
  sw->add_option("--seed", f.seed, "base seed");
  sw->add_option("--data", f.data, "training CSV overriding the config")->check(CLI::ExistingFile);
  sw->add_option("--out", f.out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(f, out);
    if (train->parsed()) return cmd_train(f, *train, out, err);
    if (ev->parsed()) return cmd_evaluate(f, out);
    if (an->parsed()) return cmd_analyze(f, out);
    if (gr->parsed()) return cmd_graph(f, out);
    return cmd_sweep(f, *sw, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace alrnn::cli

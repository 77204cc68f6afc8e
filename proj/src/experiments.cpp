#include "alrnn/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "alrnn/errors.hpp"
#include "alrnn/format.hpp"

namespace alrnn {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const DatasetSpec& d) {
  j = {{"system", d.system},
       {"csv", d.csv.string()},
       {"dimension", d.dimension},
       {"dt", d.dt},
       {"x0", d.x0},
       {"discard", d.discard},
       {"train_length", d.train_length},
       {"test_length", d.test_length},
       {"smooth_sigma", d.smooth_sigma},
       {"delay_dim", d.delay_dim},
       {"delay_lag", d.delay_lag},
       {"downsample", d.downsample},
       {"standardize", d.standardize}};
}

void from_json(const nlohmann::json& j, DatasetSpec& d) {
  d.system = j.value("system", d.system);
  d.csv = j.value("csv", d.csv.string());
  d.dimension = j.value("dimension", d.dimension);
  d.dt = j.value("dt", d.dt);
  d.x0 = j.value("x0", d.x0);
  d.discard = j.value("discard", d.discard);
  d.train_length = j.value("train_length", d.train_length);
  d.test_length = j.value("test_length", d.test_length);
  d.smooth_sigma = j.value("smooth_sigma", d.smooth_sigma);
  d.delay_dim = j.value("delay_dim", d.delay_dim);
  d.delay_lag = j.value("delay_lag", d.delay_lag);
  d.downsample = j.value("downsample", d.downsample);
  d.standardize = j.value("standardize", d.standardize);
}

Dataset prepare_dataset(const DatasetSpec& spec) {
  if (spec.train_length < 2 || spec.test_length < 2) {
    throw InvalidArgument("train_length and test_length must be >= 2");
  }
  if (spec.downsample < 1) throw InvalidArgument("downsample must be >= 1");
  TimeSeries raw;
  const bool from_csv = !spec.csv.empty();
  if (from_csv) {
    raw = load_series(spec.csv);
    if (spec.dt > 0.0) raw = TimeSeries(raw.data(), spec.dt, raw.name());
  } else {
    if (spec.system.empty()) throw InvalidArgument("dataset needs a system or a csv");
    const OdeSystem sys = system_by_name(spec.system, spec.dimension);
    const double dt = spec.dt > 0.0 ? spec.dt : sys.default_dt;
    Eigen::VectorXd x0 = default_initial_state(sys);
    if (!spec.x0.empty()) {
      if (static_cast<int>(spec.x0.size()) != sys.dimension) {
        throw InvalidArgument("x0 length does not match the system dimension");
      }
      x0 = Eigen::Map<const Eigen::VectorXd>(spec.x0.data(), sys.dimension);
    }
    // Enough raw samples for both splits after downsampling and embedding.
    const long needed =
        static_cast<long>(spec.train_length + spec.test_length) * spec.downsample +
        static_cast<long>(std::max(0, spec.delay_dim)) * 1000;
    raw = sample_trajectory(sys, x0, dt, static_cast<int>(needed), spec.discard);
  }

  TimeSeries ts = raw;
  if (spec.smooth_sigma > 0.0) ts = gaussian_smooth(ts, spec.smooth_sigma);
  if (spec.standardize) ts = standardize(ts);
  if (spec.delay_dim > 1) {
    const int lag = spec.delay_lag > 0 ? spec.delay_lag : suggest_delay_lag(ts);
    ts = delay_embed(ts, spec.delay_dim, lag);
  }
  if (spec.downsample > 1) ts = downsample(ts, spec.downsample);

  Dataset d;
  const Eigen::Index want = spec.train_length + spec.test_length;
  if (ts.length() >= want) {
    d.train = ts.slice(0, spec.train_length);
    d.test = ts.slice(spec.train_length, spec.test_length);
  } else if (from_csv) {
    const Eigen::Index half = ts.length() / 2;
    if (half < 2) throw InvalidArgument("CSV series too short to split");
    d.train = ts.slice(0, half);
    d.test = ts.slice(half, ts.length() - half);
  } else {
    throw Error("generated series shorter than train + test length");
  }
  return d;
}

void ExperimentConfig::validate() const {
  if (n_runs < 1) throw InvalidArgument("n_runs must be >= 1");
  if (M < 1 || P < 0) throw InvalidArgument("invalid model size");
  if (!dataset.csv.empty() && !fs::exists(dataset.csv)) {
    throw InvalidArgument("dataset file does not exist: " + dataset.csv.string());
  }
  if (validation_length < 2 || analysis_length < 2) {
    throw InvalidArgument("validation and analysis lengths must be >= 2");
  }
  train.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"dataset", c.dataset},
       {"M", c.M},
       {"P", c.P},
       {"train", c.train},
       {"eval", c.eval},
       {"n_runs", c.n_runs},
       {"output_dir", c.output_dir.string()},
       {"validation_length", c.validation_length},
       {"analysis_length", c.analysis_length},
       {"failure_cutoff", c.failure_cutoff}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (j.contains("dataset")) c.dataset = j["dataset"].get<DatasetSpec>();
  c.M = j.value("M", c.M);
  c.P = j.value("P", c.P);
  if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
  if (j.contains("eval")) c.eval = j["eval"].get<EvalOptions>();
  c.n_runs = j.value("n_runs", c.n_runs);
  c.output_dir = j.value("output_dir", c.output_dir.string());
  c.validation_length = j.value("validation_length", c.validation_length);
  c.analysis_length = j.value("analysis_length", c.analysis_length);
  c.failure_cutoff = j.value("failure_cutoff", c.failure_cutoff);
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    // run directories store {"experiment": ..., "run": i}
    return (j.contains("experiment") ? j["experiment"] : j).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_experiment_config(const ExperimentConfig& c, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << nlohmann::json(c).dump(2) << '\n';
}

std::uint64_t run_seed(const ExperimentConfig& c, int run) {
  return c.train.seed + static_cast<std::uint64_t>(run);
}

std::vector<double> coverage_curve(const TransitionGraph& g) {
  const double total = static_cast<double>(g.counts.sum() + 1);
  std::vector<std::int64_t> visits;
  for (Eigen::Index i = 0; i < g.occupation.size(); ++i) {
    visits.push_back(std::llround(g.occupation(i) * total));
  }
  std::sort(visits.begin(), visits.end(), std::greater<>());
  std::vector<double> curve;
  std::int64_t acc = 0;
  for (std::int64_t v : visits) {
    acc += v;
    curve.push_back(static_cast<double>(acc) / total);
  }
  return curve;
}

std::size_t subregions_for_coverage(const std::vector<double>& curve, double level) {
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve[k] >= level) return k + 1;
  }
  return curve.size();
}

AnalysisBundle analyze_model(const ALRNN& model, const Eigen::VectorXd& x1,
                             int length, int discard, double dt) {
  if (length < 2 || discard < 0) throw InvalidArgument("invalid analysis length");
  const Eigen::MatrixXd all =
      simulate_latent(model, model.init_latent(x1), discard + length);
  const Eigen::MatrixXd Z = all.bottomRows(length);

  AnalysisBundle b;
  b.generated = TimeSeries(Z.leftCols(model.N()), dt, "generated");
  b.symbols = encode(model, Z);
  b.graph = build_graph(b.symbols);
  if (b.graph.size() >= 3) b.layout = spectral_layout(b.graph);
  b.coverage = coverage_curve(b.graph);

  b.latent_means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.graph.size()), model.M());
  std::vector<long> n(b.graph.size(), 0);
  for (Eigen::Index t = 0; t < Z.rows(); ++t) {
    const std::size_t i = *b.graph.index_of(b.symbols.symbols[static_cast<std::size_t>(t)]);
    b.latent_means.row(static_cast<Eigen::Index>(i)) += Z.row(t);
    ++n[i];
  }
  for (std::size_t i = 0; i < n.size(); ++i) {
    b.latent_means.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(n[i]);
  }

  if (model.P() <= 12) {
    b.fixed_points = all_fixed_points(model);
  } else {
    for (Symbol s : b.graph.nodes) b.fixed_points.push_back(fixed_point(model, s));
  }
  return b;
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

double rollout_d_stsp(const ALRNN& model, const TimeSeries& truth,
                      const BinningSpec& spec, int discard) {
  const TimeSeries gen =
      free_rollout(model, truth.row(0).transpose(),
                   static_cast<int>(truth.length()) + discard, discard, truth.dt());
  return d_stsp(truth, gen, spec);
}

}  // namespace

RunResult run_single(const ExperimentConfig& cfg, const Dataset& data, int index,
                     const fs::path& dir) {
  RunResult r;
  r.index = index;
  r.seed = run_seed(cfg, index);
  const fs::path run_dir = dir / ("run_" + std::to_string(index));
  fs::create_directories(run_dir);
  ExperimentConfig persisted = cfg;
  persisted.output_dir = dir;
  write_json(run_dir / "config.json",
             {{"experiment", persisted}, {"run", index}, {"seed", r.seed}});

  try {
    TrainConfig tc = cfg.train;
    tc.seed = r.seed;
    const int N = static_cast<int>(data.train.dim());
    const ALRNN model0 = init_model(cfg.M, cfg.P, N, r.seed);

    const TimeSeries val_truth = data.test.slice(
        0, std::min<Eigen::Index>(cfg.validation_length, data.test.length()));
    const BinningSpec val_spec = BinningSpec::from_data(val_truth, cfg.eval.bins_per_dim);
    const Validator validator = [&](const ALRNN& m) {
      return rollout_d_stsp(m, val_truth, val_spec, cfg.eval.discard);
    };

    TrainResult tr = train(model0, data.train, tc, validator);
    r.history = tr.history;
    r.model = tr.model;
    {
      std::ofstream h(run_dir / "history.jsonl");
      write_history_jsonl(r.history, h);
    }
    save_checkpoint(*r.model, run_dir / "checkpoint.json",
                    {{"run", index}, {"seed", r.seed}, {"best_epoch", r.history.best_epoch}});

    r.report = evaluate(*r.model, data.test, cfg.eval);
    write_json(run_dir / "eval.json", to_json(r.report));

    r.analysis = analyze_model(*r.model, data.test.row(0).transpose(),
                               cfg.analysis_length, cfg.eval.discard, data.test.dt());
    write_json(run_dir / "graph.json", to_json(r.analysis->graph, r.analysis->layout));
    nlohmann::json fps = nlohmann::json::array();
    for (const auto& fp : r.analysis->fixed_points) fps.push_back(to_json(fp));
    write_json(run_dir / "fixed_points.json", fps);
    save_symbols_csv(r.analysis->symbols, run_dir / "symbols.csv");

    if (!(r.report.d_stsp <= cfg.failure_cutoff)) {
      r.failed = true;
      r.error = "D_stsp " + format_double(r.report.d_stsp) + " above cutoff " +
                format_double(cfg.failure_cutoff);
    }
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  if (r.failed) {
    std::ofstream(run_dir / "error.txt") << r.error << '\n';
  }
  return r;
}

int worker_count(int jobs) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ALRNN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = cap;
  }
  return std::clamp(n, 1, std::max(1, jobs));
}

namespace {

template <class Job>
void parallel_for(int jobs, Job&& job) {
  const int workers = worker_count(jobs);
  if (workers == 1) {
    for (int i = 0; i < jobs; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < jobs; i = next++) job(i);
    });
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  save_experiment_config(cfg, cfg.output_dir / "experiment.json");
  ExperimentResult res;
  res.config = cfg;
  res.runs.resize(static_cast<std::size_t>(cfg.n_runs));
  parallel_for(cfg.n_runs, [&](int i) {
    res.runs[static_cast<std::size_t>(i)] = run_single(cfg, data, i, cfg.output_dir);
  });
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, prepare_dataset(cfg.dataset));
}

RunResult minimal_reconstruction(const ExperimentConfig& cfg) {
  ExperimentResult res = run_experiment(cfg);
  const RunResult* best = nullptr;
  for (const auto& r : res.runs) {
    if (r.failed) continue;
    if (!best || r.report.d_stsp < best->report.d_stsp) best = &r;
  }
  if (!best) {
    throw Error("minimal reconstruction: all " + std::to_string(cfg.n_runs) +
                " runs failed (first error: " + res.runs.front().error + ")");
  }
  return *best;
}

SweepResult p_sweep(const ExperimentConfig& base, const Dataset& data,
                    const std::vector<int>& p_values) {
  base.validate();
  const int N = static_cast<int>(data.train.dim());
  for (int p : p_values) {
    if (p < 0 || p > base.M - N) {
      throw InvalidArgument("P = " + std::to_string(p) + " exceeds M - N");
    }
  }
  const int per = base.n_runs;
  const int jobs = static_cast<int>(p_values.size()) * per;
  SweepResult s;
  s.entries.resize(static_cast<std::size_t>(jobs));
  parallel_for(jobs, [&](int job) {
    ExperimentConfig cfg = base;
    cfg.P = p_values[static_cast<std::size_t>(job / per)];
    const fs::path dir = base.output_dir / ("P" + std::to_string(cfg.P));
    s.entries[static_cast<std::size_t>(job)] =
        SweepEntry{cfg.P, run_single(cfg, data, job % per, dir)};
  });
  for (int p : p_values) {
    const bool any_ok = std::any_of(s.entries.begin(), s.entries.end(), [&](const SweepEntry& e) {
      return e.P == p && !e.run.failed;
    });
    if (!any_ok) {
      throw Error("sweep failed: every run with P = " + std::to_string(p) + " failed");
    }
  }
  fs::create_directories(base.output_dir);
  write_json(base.output_dir / "sweep.json", sweep_summary(s));
  return s;
}

SweepResult p_sweep(const ExperimentConfig& base, const std::vector<int>& p_values) {
  base.validate();
  return p_sweep(base, prepare_dataset(base.dataset), p_values);
}

nlohmann::json sweep_summary(const SweepResult& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : s.entries) {
    nlohmann::json row = {{"P", e.P},
                          {"run", e.run.index},
                          {"seed", e.run.seed},
                          {"failed", e.run.failed},
                          {"visited", e.run.visited()}};
    if (e.run.model) {
      row["d_stsp"] = e.run.report.d_stsp;
      row["d_hellinger"] = e.run.report.d_hellinger;
      row["lambda_max"] = e.run.report.lambda_max;
    }
    if (e.run.analysis) row["coverage"] = e.run.analysis->coverage;
    if (!e.run.error.empty()) row["error"] = e.run.error;
    arr.push_back(row);
  }
  return arr;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TimeSeries points_in(const AnalysisBundle& b, Symbol s) {
  std::vector<Eigen::Index> rows;
  for (std::size_t t = 0; t < b.symbols.size(); ++t) {
    if (b.symbols.symbols[t] == s) rows.push_back(static_cast<Eigen::Index>(t));
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), b.generated.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = b.generated.data().row(rows[i]);
  }
  return TimeSeries(X, b.generated.dt(), "subregion");
}

const FixedPointReport* find_fp(const AnalysisBundle& b, Symbol s) {
  for (const auto& fp : b.fixed_points) {
    if (fp.symbol == s) return &fp;
  }
  return nullptr;
}

RunPairComparison compare_runs(const RunResult& a, const RunResult& b, int bins) {
  const AnalysisBundle& A = *a.analysis;
  const AnalysisBundle& B = *b.analysis;
  const Eigen::Index N = A.generated.dim();
  RunPairComparison c;
  c.run_a = a.index;
  c.run_b = b.index;
  c.mismatch = A.graph.size() != B.graph.size();

  std::vector<std::size_t> order(A.graph.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return A.graph.occupation(static_cast<Eigen::Index>(x)) >
           A.graph.occupation(static_cast<Eigen::Index>(y));
  });
  std::vector<bool> taken(B.graph.size(), false);
  const Eigen::VectorXd extent =
      A.generated.data().colwise().maxCoeff() - A.generated.data().colwise().minCoeff();
  const double diameter = extent.norm();

  for (std::size_t ia : order) {
    const Eigen::RowVectorXd ca = A.latent_means.row(static_cast<Eigen::Index>(ia)).head(N);
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t ib = 0; ib < B.graph.size(); ++ib) {
      if (taken[ib]) continue;
      const double d =
          (B.latent_means.row(static_cast<Eigen::Index>(ib)).head(N) - ca).norm();
      if (d < best_d) {
        best_d = d;
        best = ib;
      }
    }
    const Symbol sa = A.graph.nodes[ia];
    if (!best) {
      c.unmatched_a.push_back(sa);
      continue;
    }
    taken[*best] = true;
    const Symbol sb = B.graph.nodes[*best];
    MatchedSubregion m;
    m.reference = sa;
    m.other = sb;
    const TimeSeries pa = points_in(A, sa);
    const TimeSeries pb = points_in(B, sb);
    m.d_stsp = d_stsp(pa, pb, BinningSpec::from_data(pa, bins));
    const FixedPointReport* fa = find_fp(A, sa);
    const FixedPointReport* fb = find_fp(B, sb);
    if (fa && fb) {
      if (fa->location && fb->location && diameter > 0.0) {
        m.fixed_point_distance =
            (fa->location->head(N) - fb->location->head(N)).norm() / diameter;
      }
      const double top = std::max(fa->spectral_radius, fb->spectral_radius);
      m.sigma_max_relative_difference =
          top > 0.0 ? std::abs(fa->spectral_radius - fb->spectral_radius) / top : 0.0;
    }
    c.matched.push_back(m);
  }
  for (std::size_t ib = 0; ib < B.graph.size(); ++ib) {
    if (!taken[ib]) c.unmatched_b.push_back(B.graph.nodes[ib]);
  }
  std::sort(c.unmatched_a.begin(), c.unmatched_a.end());
  return c;
}

}  // namespace

RobustnessReport robustness_study(const std::vector<const RunResult*>& runs,
                                  double failure_cutoff, int bins_per_dim) {
  if (runs.size() < 2) throw InvalidArgument("robustness study needs >= 2 runs");
  RobustnessReport rep;
  std::vector<const RunResult*> ok;
  for (const RunResult* r : runs) {
    const bool good = r->model && r->analysis && r->report.d_stsp <= failure_cutoff;
    (good ? rep.included_runs : rep.excluded_runs).push_back(r->index);
    if (good) ok.push_back(r);
  }
  std::vector<double> ds, fd, sd;
  for (std::size_t i = 0; i < ok.size(); ++i) {
    for (std::size_t j = i + 1; j < ok.size(); ++j) {
      rep.pairs.push_back(compare_runs(*ok[i], *ok[j], bins_per_dim));
      for (const auto& m : rep.pairs.back().matched) {
        ds.push_back(m.d_stsp);
        if (m.fixed_point_distance) fd.push_back(*m.fixed_point_distance);
        sd.push_back(m.sigma_max_relative_difference);
      }
    }
  }
  rep.median_d_stsp = median(ds);
  rep.median_fixed_point_distance = median(fd);
  rep.median_sigma_max_difference = median(sd);
  return rep;
}

RobustnessReport robustness_study(const std::vector<RunResult>& runs,
                                  double failure_cutoff, int bins_per_dim) {
  std::vector<const RunResult*> ptrs;
  for (const auto& r : runs) ptrs.push_back(&r);
  return robustness_study(ptrs, failure_cutoff, bins_per_dim);
}

nlohmann::json to_json(const RobustnessReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : r.pairs) {
    nlohmann::json matched = nlohmann::json::array();
    for (const auto& m : p.matched) {
      matched.push_back({{"reference", m.reference.value},
                         {"other", m.other.value},
                         {"d_stsp", m.d_stsp},
                         {"fixed_point_distance",
                          m.fixed_point_distance ? nlohmann::json(*m.fixed_point_distance)
                                                 : nlohmann::json(nullptr)},
                         {"sigma_max_relative_difference", m.sigma_max_relative_difference}});
    }
    nlohmann::json ua = nlohmann::json::array(), ub = nlohmann::json::array();
    for (Symbol s : p.unmatched_a) ua.push_back(s.value);
    for (Symbol s : p.unmatched_b) ub.push_back(s.value);
    pairs.push_back({{"run_a", p.run_a},
                     {"run_b", p.run_b},
                     {"mismatch", p.mismatch},
                     {"matched", matched},
                     {"unmatched_a", ua},
                     {"unmatched_b", ub}});
  }
  const auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  return {{"included_runs", r.included_runs},
          {"excluded_runs", r.excluded_runs},
          {"median_d_stsp", num(r.median_d_stsp)},
          {"median_fixed_point_distance", num(r.median_fixed_point_distance)},
          {"median_sigma_max_difference", num(r.median_sigma_max_difference)},
          {"pairs", pairs}};
}

void emit_plot_data(const SweepResult& sweep, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream metrics(out_dir / "metrics.csv");
  std::ofstream coverage(out_dir / "coverage.csv");
  std::ofstream layout(out_dir / "layout.csv");
  if (!metrics || !coverage || !layout) {
    throw Error("cannot write plot data to " + out_dir.string());
  }
  metrics << "P,run,d_stsp,d_h\n";
  coverage << "P,run,rank,cumulative_coverage\n";
  layout << "P,run,node,x,y\n";
  for (const auto& e : sweep.entries) {
    const std::string key = std::to_string(e.P) + ',' + std::to_string(e.run.index);
    if (e.run.model) {
      metrics << key << ',' << format_double(e.run.report.d_stsp) << ','
              << format_double(e.run.report.d_hellinger) << '\n';
    }
    if (!e.run.analysis) continue;
    const auto& curve = e.run.analysis->coverage;
    for (std::size_t k = 0; k < curve.size(); ++k) {
      coverage << key << ',' << k + 1 << ',' << format_double(curve[k]) << '\n';
    }
    if (const auto& l = e.run.analysis->layout) {
      for (std::size_t i = 0; i < l->nodes.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        layout << key << ',' << l->nodes[i].value << ',' << format_double(l->coords(idx, 0))
               << ',' << format_double(l->coords(idx, 1)) << '\n';
      }
    }
  }
  if (!metrics || !coverage || !layout) {
    throw Error("failed while writing plot data to " + out_dir.string());
  }
}

}  // namespace alrnn

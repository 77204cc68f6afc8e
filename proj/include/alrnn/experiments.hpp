#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alrnn/analysis.hpp"
#include "alrnn/datasets.hpp"
#include "alrnn/evaluation.hpp"
#include "alrnn/model.hpp"
#include "alrnn/symbolic.hpp"
#include "alrnn/training.hpp"
#include "json.hpp"

namespace alrnn {

/// Where the data comes from and how it is preprocessed. Either `system`
/// names a built-in generator or `csv` points at a file.
struct DatasetSpec {
  std::string system;
  std::filesystem::path csv;
  int dimension = 20;  ///< lorenz96 only
  double dt = 0.0;     ///< 0 selects the system default (or CSV metadata)
  std::vector<double> x0;  ///< empty selects a fixed default per system
  int discard = 1000;      ///< transient samples dropped after integration
  int train_length = 100000;
  int test_length = 100000;
  double smooth_sigma = 0.0;  ///< Gaussian smoothing, 0 disables
  int delay_dim = 0;          ///< delay embedding, 0 disables (1-d input only)
  int delay_lag = 0;          ///< 0 picks the first autocorrelation zero
  int downsample = 1;
  bool standardize = true;
};

void to_json(nlohmann::json& j, const DatasetSpec& d);
void from_json(const nlohmann::json& j, DatasetSpec& d);

struct Dataset {
  TimeSeries train;
  TimeSeries test;  ///< ground truth for evaluation, follows train in time
};

/// Generates or loads the series, applies the preprocessing chain
/// (smoothing, standardization, delay embedding, downsampling) and splits it.
/// CSV input shorter than train + test uses the first half for training and
/// the second half as test data.
Dataset prepare_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
  DatasetSpec dataset;
  int M = 20;
  int P = 2;
  TrainConfig train;
  EvalOptions eval;
  int n_runs = 1;
  std::filesystem::path output_dir = "runs";
  /// Free-rollout length used for model selection during training.
  int validation_length = 10000;
  /// Latent samples (after eval.discard) used for symbolic analysis.
  int analysis_length = 100000;
  /// Runs with D_stsp above this value (or that diverged) count as failed.
  double failure_cutoff = 5.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const ExperimentConfig& c, const std::filesystem::path& path);

/// Seed of run i: base seed + i.
std::uint64_t run_seed(const ExperimentConfig& c, int run);

/// Symbolic and analytic description of a model's free dynamics.
struct AnalysisBundle {
  TimeSeries generated;  ///< readout of the analysed trajectory
  SymbolicSequence symbols;
  TransitionGraph graph;
  std::optional<SpectralLayout> layout;  ///< present with >= 3 nodes
  std::vector<FixedPointReport> fixed_points;
  std::vector<double> coverage;  ///< cumulative occupation, largest first
  Eigen::MatrixXd latent_means;  ///< per graph node, mean latent state
};

/// Simulates `length` states after `discard` transient steps from
/// init_latent(x1) and analyses them. Fixed points are enumerated for
/// P <= 12 and otherwise restricted to visited subregions.
AnalysisBundle analyze_model(const ALRNN& model, const Eigen::VectorXd& x1,
                             int length, int discard, double dt = 1.0);

/// Cumulative fraction of time steps covered by the k most occupied
/// subregions, k = 1..#nodes. Nondecreasing and ends at exactly 1.
std::vector<double> coverage_curve(const TransitionGraph& g);

/// Smallest number of subregions whose cumulative coverage reaches `level`.
std::size_t subregions_for_coverage(const std::vector<double>& curve, double level);

struct RunResult {
  int index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::optional<ALRNN> model;
  TrainHistory history;
  EvalReport report;
  std::optional<AnalysisBundle> analysis;

  std::size_t visited() const { return analysis ? analysis->graph.size() : 0; }
};

/// Trains, evaluates and analyses run `index` and writes
/// <dir>/run_<index>/{config.json, checkpoint.json, eval.json, graph.json,
/// fixed_points.json, symbols.csv, history.jsonl}. Failures are captured in
/// the result (and error.txt) instead of thrown.
RunResult run_single(const ExperimentConfig& cfg, const Dataset& data, int index,
                     const std::filesystem::path& dir);

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunResult> runs;
};

/// Number of worker threads: ALRNN_THREADS if set, else the hardware count,
/// never more than `jobs`.
int worker_count(int jobs);

/// All n_runs runs of one configuration, executed in parallel.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data);

/// Best successful run (lowest D_stsp) of a full pipeline execution.
RunResult minimal_reconstruction(const ExperimentConfig& cfg);

struct SweepEntry {
  int P = 0;
  RunResult run;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
};

/// Trains n_runs models for every P in `p_values` (outputs under
/// <output_dir>/P<p>/). A P value fails only when all of its runs fail.
SweepResult p_sweep(const ExperimentConfig& base, const std::vector<int>& p_values);
SweepResult p_sweep(const ExperimentConfig& base, const Dataset& data,
                    const std::vector<int>& p_values);

nlohmann::json sweep_summary(const SweepResult& s);

/// Subregion statistics across two runs after centroid matching.
struct MatchedSubregion {
  Symbol reference;
  Symbol other;
  double d_stsp = 0.0;
  std::optional<double> fixed_point_distance;  ///< normalized by diameter
  double sigma_max_relative_difference = 0.0;
};

struct RunPairComparison {
  int run_a = 0;
  int run_b = 0;
  std::vector<MatchedSubregion> matched;
  std::vector<Symbol> unmatched_a;
  std::vector<Symbol> unmatched_b;
  bool mismatch = false;  ///< visited-subregion counts differ
};

struct RobustnessReport {
  std::vector<int> included_runs;
  std::vector<int> excluded_runs;
  std::vector<RunPairComparison> pairs;
  double median_d_stsp = 0.0;
  double median_fixed_point_distance = 0.0;
  double median_sigma_max_difference = 0.0;
};

/// Compares every pair of successful runs. Subregions are matched one to
/// one by nearest occupancy-weighted centroids of their readout coordinates;
/// per-subregion D_stsp uses the points of the matched subregions, fixed
/// point distances are divided by the diameter of the first run's attractor
/// and sigma_max differences are |a - b| / max(a, b).
RobustnessReport robustness_study(const std::vector<RunResult>& runs,
                                  double failure_cutoff = 5.0,
                                  int bins_per_dim = 30);
RobustnessReport robustness_study(const std::vector<const RunResult*>& runs,
                                  double failure_cutoff = 5.0,
                                  int bins_per_dim = 30);

nlohmann::json to_json(const RobustnessReport& r);

/// Writes metrics.csv (P,run,d_stsp,d_h), coverage.csv
/// (P,run,rank,cumulative_coverage) and layout.csv (P,run,node,x,y).
void emit_plot_data(const SweepResult& sweep, const std::filesystem::path& out_dir);

}  // namespace alrnn

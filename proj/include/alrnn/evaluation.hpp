#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "alrnn/datasets.hpp"
#include "alrnn/model.hpp"
#include "json.hpp"

namespace alrnn {

/// Regular grid of bins_per_dim^N boxes over per-dimension ranges.
struct BinningSpec {
  int bins_per_dim = 30;
  std::vector<std::pair<double, double>> ranges;

  /// Ranges from the data extent widened by `margin` times the extent on
  /// both sides.
  static BinningSpec from_data(const TimeSeries& truth, int bins_per_dim = 30,
                               double margin = 0.01);

  std::uint64_t total_bins() const;
  void validate(Eigen::Index dim) const;
};

/// Sorted (bin index, count) pairs. Points outside the ranges are clipped
/// into the edge bins.
std::vector<std::pair<std::uint64_t, long>> bin_counts(const TimeSeries& ts,
                                                       const BinningSpec& spec);

inline constexpr double kEmptyBinFloor = 1e-7;

/// Binned KL divergence KL(p_true || p_gen). Bins the truth occupies but the
/// generated sample misses receive kEmptyBinFloor before renormalization.
double d_stsp(const TimeSeries& truth, const TimeSeries& generated,
              const BinningSpec& spec);
double d_stsp(const TimeSeries& truth, const TimeSeries& generated,
              int bins_per_dim = 30);

/// sqrt(1 - sum sqrt(F G)) for two normalized discrete spectra.
double hellinger_distance(const Eigen::VectorXd& F, const Eigen::VectorXd& G);

/// Power spectrum of the standardized signal, Gaussian-smoothed over
/// `kernel_sigma` frequency bins (0 disables), truncated to the lowest
/// `keep_fraction` of frequencies and normalized to sum 1.
Eigen::VectorXd smoothed_power_spectrum(const Eigen::VectorXd& x,
                                        double kernel_sigma,
                                        double keep_fraction);

inline constexpr double kDefaultSpectrumSigma = 20.0;
inline constexpr double kDefaultKeepFraction = 0.5;

/// Mean over dimensions of the Hellinger distance between smoothed power
/// spectra. Longer inputs are truncated to the shorter length.
double d_hellinger(const TimeSeries& truth, const TimeSeries& generated,
                   double kernel_sigma = kDefaultSpectrumSigma,
                   double keep_fraction = kDefaultKeepFraction);

/// Advances the state in place and returns the Jacobian of the map at the
/// state before the update.
using JacobianStepper = std::function<Eigen::MatrixXd(Eigen::VectorXd&)>;

/// Largest Lyapunov exponent by QR re-orthonormalization of the running
/// Jacobian product. Exponent is per map iteration.
double max_lyapunov_exponent(const JacobianStepper& advance,
                             Eigen::VectorXd state, int transient,
                             int horizon, int qr_interval);

double lyapunov_max(const ALRNN& model, const LatentState& z0,
                    int transient = 1000, int horizon = 100000,
                    int qr_interval = 10);

/// Unforced latent trajectory of `steps` states starting at z1 (steps x M).
/// Throws DivergenceError when a state is non-finite or exceeds `bound`.
Eigen::MatrixXd simulate_latent(const ALRNN& model, const LatentState& z1,
                                int steps, double bound = 1e6);

/// Unforced simulation from init_latent(x1): `steps` states, readout
/// applied, the first `discard` rows dropped.
TimeSeries free_rollout(const ALRNN& model, const Eigen::VectorXd& x1,
                        int steps, int discard = 0, double dt = 1.0);

struct EvalOptions {
  int bins_per_dim = 30;
  double kernel_sigma = kDefaultSpectrumSigma;
  double keep_fraction = kDefaultKeepFraction;
  int discard = 1000;
  int lyap_transient = 1000;
  int lyap_horizon = 100000;
  int qr_interval = 10;
};

void to_json(nlohmann::json& j, const EvalOptions& o);
void from_json(const nlohmann::json& j, EvalOptions& o);

struct EvalReport {
  double d_stsp = 0.0;
  double d_hellinger = 0.0;
  double lambda_max = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Generates a free trajectory as long as `truth` (after `discard` transient
/// steps) from truth's first observation and scores it.
EvalReport evaluate(const ALRNN& model, const TimeSeries& truth,
                    const EvalOptions& options = {});

/// Writes (frequency, power) rows of the smoothed spectrum per dimension.
void save_spectra_csv(const TimeSeries& ts, double kernel_sigma,
                      double keep_fraction, const std::string& path);

}  // namespace alrnn

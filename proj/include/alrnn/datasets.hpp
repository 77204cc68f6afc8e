#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

namespace alrnn {

/// Observation matrix with one row per time step and one column per observed
/// dimension, sampled every `dt` time units.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(Eigen::MatrixXd data, double dt, std::string name = "");

  const Eigen::MatrixXd& data() const { return data_; }
  double dt() const { return dt_; }
  const std::string& name() const { return name_; }

  Eigen::Index length() const { return data_.rows(); }
  Eigen::Index dim() const { return data_.cols(); }
  Eigen::RowVectorXd row(Eigen::Index t) const { return data_.row(t); }

  /// Rows [begin, begin + count) as a new series.
  TimeSeries slice(Eigen::Index begin, Eigen::Index count) const;

 private:
  Eigen::MatrixXd data_;
  double dt_ = 1.0;
  std::string name_;
};

struct OdeSystem {
  using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  std::string name;
  int dimension = 0;
  VectorField vector_field;
  std::map<std::string, double> params;
  double default_dt = 0.01;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    return vector_field(x);
  }
};

OdeSystem lorenz63(double sigma = 10.0, double beta = 8.0 / 3.0,
                   double rho = 28.0);
OdeSystem roessler(double a = 0.2, double b = 0.2, double c = 5.7);
OdeSystem lorenz96(int n, double forcing = 8.0);

/// Looks up one of the built-in systems by name ("lorenz63", "roessler",
/// "lorenz96"). `dimension` is only used by lorenz96.
OdeSystem system_by_name(const std::string& name, int dimension = 20);

/// Fixed starting point used when none is given: all ones, or for lorenz96
/// the forcing value with a 0.01 kick on the first coordinate.
Eigen::VectorXd default_initial_state(const OdeSystem& system);

/// Classical fixed-step RK4. Performs `steps` integration steps and returns
/// the states at t = 0, dt, ..., steps*dt with the first `discard` rows
/// dropped. Throws DivergenceError on a non-finite state.
TimeSeries integrate(const OdeSystem& system, const Eigen::VectorXd& x0,
                     double dt, int steps, int discard = 0);

/// Convenience wrapper returning exactly `samples` rows after dropping
/// `discard` transient samples.
TimeSeries sample_trajectory(const OdeSystem& system, const Eigen::VectorXd& x0,
                             double dt, int samples, int discard = 0);

/// Column-wise zero mean, unit (population) standard deviation.
TimeSeries standardize(const TimeSeries& ts);

/// Normalized Gaussian taps of length 8*sigma+1 (rounded to nearest odd).
Eigen::VectorXd gaussian_kernel(double sigma);

/// Convolves `x` with `kernel` using half-sample reflection at both ends.
Eigen::VectorXd convolve_reflect(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& kernel);

TimeSeries gaussian_smooth(const TimeSeries& ts, double sigma);

/// Row t of the output is (x_t, x_{t+lag}, ..., x_{t+(dim-1)lag}).
TimeSeries delay_embed(const TimeSeries& ts, int dim, int lag = 1);

/// First lag at which the autocorrelation of a 1-d series crosses zero.
int suggest_delay_lag(const TimeSeries& ts, int max_lag = 1000);

/// Every `factor`-th row starting from row 0.
TimeSeries downsample(const TimeSeries& ts, int factor);

/// Adds i.i.d. Gaussian noise with per-column standard deviation equal to
/// `fraction` times that column's standard deviation.
TimeSeries add_observation_noise(const TimeSeries& ts, double fraction,
                                 std::uint64_t seed);

/// Population standard deviation of each column.
Eigen::RowVectorXd column_std(const Eigen::MatrixXd& data);

TimeSeries load_csv(const std::filesystem::path& path, double dt = 1.0);
void save_csv(const TimeSeries& ts, const std::filesystem::path& path);

/// Sidecar `<csv>.json` holding {"dt", "name"}.
std::filesystem::path metadata_path(const std::filesystem::path& csv);
void save_metadata(const TimeSeries& ts, const std::filesystem::path& csv);
/// Loads the CSV and applies the sidecar metadata when present.
TimeSeries load_series(const std::filesystem::path& csv);

}  // namespace alrnn

#include "alrnn/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "alrnn/errors.hpp"
#include "alrnn/format.hpp"

namespace alrnn {

TimeSeries::TimeSeries(Eigen::MatrixXd data, double dt, std::string name)
    : data_(std::move(data)), dt_(dt), name_(std::move(name)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw InvalidArgument("time series needs at least one row and column");
  }
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
    throw InvalidArgument("time series sampling step must be positive");
  }
  if (!data_.allFinite()) {
    throw InvalidArgument("time series contains non-finite values");
  }
}

TimeSeries TimeSeries::slice(Eigen::Index begin, Eigen::Index count) const {
  if (begin < 0 || count < 1 || begin + count > length()) {
    throw InvalidArgument("slice out of range");
  }
  return TimeSeries(data_.middleRows(begin, count), dt_, name_);
}

OdeSystem lorenz63(double sigma, double beta, double rho) {
  OdeSystem sys;
  sys.name = "lorenz63";
  sys.dimension = 3;
  sys.params = {{"sigma", sigma}, {"beta", beta}, {"rho", rho}};
  sys.default_dt = 0.01;
  sys.vector_field = [=](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(3);
    dx(0) = sigma * (x(1) - x(0));
    dx(1) = x(0) * (rho - x(2)) - x(1);
    dx(2) = x(0) * x(1) - beta * x(2);
    return dx;
  };
  return sys;
}

OdeSystem roessler(double a, double b, double c) {
  OdeSystem sys;
  sys.name = "roessler";
  sys.dimension = 3;
  sys.params = {{"a", a}, {"b", b}, {"c", c}};
  sys.default_dt = 0.08;
  sys.vector_field = [=](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(3);
    dx(0) = -x(1) - x(2);
    dx(1) = x(0) + a * x(1);
    dx(2) = b + x(2) * (x(0) - c);
    return dx;
  };
  return sys;
}

OdeSystem lorenz96(int n, double forcing) {
  if (n < 4) {
    throw InvalidArgument("lorenz96 needs at least 4 variables for cyclic coupling");
  }
  OdeSystem sys;
  sys.name = "lorenz96";
  sys.dimension = n;
  sys.params = {{"F", forcing}};
  sys.default_dt = 0.04;
  sys.vector_field = [n, forcing](const Eigen::VectorXd& x) {
    Eigen::VectorXd dx(n);
    for (int i = 0; i < n; ++i) {
      const double next = x((i + 1) % n);
      const double prev = x((i + n - 1) % n);
      const double prev2 = x((i + n - 2) % n);
      dx(i) = (next - prev2) * prev - x(i) + forcing;
    }
    return dx;
  };
  return sys;
}

OdeSystem system_by_name(const std::string& name, int dimension) {
  if (name == "lorenz63") return lorenz63();
  if (name == "roessler") return roessler();
  if (name == "lorenz96") return lorenz96(dimension);
  throw InvalidArgument("unknown system '" + name + "'");
}

Eigen::VectorXd default_initial_state(const OdeSystem& system) {
  if (system.name == "lorenz96") {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(system.dimension, system.params.at("F"));
    x(0) += 0.01;
    return x;
  }
  return Eigen::VectorXd::Ones(system.dimension);
}

TimeSeries integrate(const OdeSystem& system, const Eigen::VectorXd& x0,
                     double dt, int steps, int discard) {
  if (x0.size() != system.dimension) {
    throw InvalidArgument("initial state has wrong dimension");
  }
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (steps < 1) throw InvalidArgument("steps must be at least 1");
  if (discard < 0 || discard > steps) {
    throw InvalidArgument("discard must lie in [0, steps]");
  }

  Eigen::MatrixXd out(steps + 1 - discard, system.dimension);
  Eigen::VectorXd x = x0;
  if (discard == 0) out.row(0) = x.transpose();
  for (int s = 1; s <= steps; ++s) {
    const Eigen::VectorXd k1 = system(x);
    const Eigen::VectorXd k2 = system(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = system(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = system(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) {
      throw DivergenceError("integration of " + system.name + " diverged",
                            static_cast<std::size_t>(s));
    }
    if (s >= discard) out.row(s - discard) = x.transpose();
  }
  return TimeSeries(std::move(out), dt, system.name);
}

TimeSeries sample_trajectory(const OdeSystem& system, const Eigen::VectorXd& x0,
                             double dt, int samples, int discard) {
  if (samples < 1) throw InvalidArgument("samples must be at least 1");
  if (samples == 1 && discard == 0) {
    return TimeSeries(x0.transpose(), dt, system.name);
  }
  return integrate(system, x0, dt, samples - 1 + discard, discard);
}

Eigen::RowVectorXd column_std(const Eigen::MatrixXd& data) {
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  return (centered.colwise().squaredNorm() / static_cast<double>(data.rows()))
      .cwiseSqrt();
}

TimeSeries standardize(const TimeSeries& ts) {
  const Eigen::MatrixXd& x = ts.data();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd sd = column_std(x);
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 0.0)) {
      throw InvalidArgument("column " + std::to_string(j) +
                            " has zero variance and cannot be standardized");
    }
  }
  Eigen::MatrixXd out = (x.rowwise() - mean).array().rowwise() / sd.array();
  return TimeSeries(std::move(out), ts.dt(), ts.name());
}

Eigen::VectorXd gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  // nearest odd integer to 8*sigma + 1
  const long length = 2 * std::lround(4.0 * sigma) + 1;
  const long half = length / 2;
  Eigen::VectorXd k(length);
  for (long i = -half; i <= half; ++i) {
    const double u = static_cast<double>(i) / sigma;
    k(i + half) = std::exp(-0.5 * u * u);
  }
  return k / k.sum();
}

Eigen::VectorXd convolve_reflect(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& kernel) {
  const Eigen::Index n = x.size();
  const Eigen::Index half = kernel.size() / 2;
  if (n < 1) throw InvalidArgument("cannot convolve an empty signal");
  // half-sample symmetric: x[-1] = x[0], x[n] = x[n-1], repeated as needed
  auto at = [&](Eigen::Index i) {
    i %= 2 * n;
    if (i < 0) i += 2 * n;
    return i < n ? x(i) : x(2 * n - 1 - i);
  };
  Eigen::VectorXd out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < kernel.size(); ++k) {
      acc += kernel(k) * at(t + k - half);
    }
    out(t) = acc;
  }
  return out;
}

TimeSeries gaussian_smooth(const TimeSeries& ts, double sigma) {
  const Eigen::VectorXd kernel = gaussian_kernel(sigma);
  if (ts.length() < kernel.size()) {
    throw InvalidArgument("series of length " + std::to_string(ts.length()) +
                          " is shorter than the smoothing kernel (" +
                          std::to_string(kernel.size()) + " taps)");
  }
  Eigen::MatrixXd out(ts.length(), ts.dim());
  for (Eigen::Index j = 0; j < ts.dim(); ++j) {
    out.col(j) = convolve_reflect(ts.data().col(j), kernel);
  }
  return TimeSeries(std::move(out), ts.dt(), ts.name());
}

TimeSeries delay_embed(const TimeSeries& ts, int dim, int lag) {
  if (ts.dim() != 1) {
    throw InvalidArgument("delay embedding expects a 1-dimensional series");
  }
  if (dim < 2) throw InvalidArgument("embedding dimension must be >= 2");
  if (lag < 1) throw InvalidArgument("embedding lag must be >= 1");
  const Eigen::Index span = static_cast<Eigen::Index>(dim - 1) * lag;
  if (ts.length() <= span) {
    throw InvalidArgument("series too short for the requested embedding");
  }
  const Eigen::Index rows = ts.length() - span;
  Eigen::MatrixXd out(rows, dim);
  for (int k = 0; k < dim; ++k) {
    out.col(k) = ts.data().col(0).segment(static_cast<Eigen::Index>(k) * lag, rows);
  }
  return TimeSeries(std::move(out), ts.dt(), ts.name());
}

int suggest_delay_lag(const TimeSeries& ts, int max_lag) {
  if (ts.dim() != 1) {
    throw InvalidArgument("lag suggestion expects a 1-dimensional series");
  }
  const Eigen::VectorXd x =
      ts.data().col(0).array() - ts.data().col(0).mean();
  const double var = x.squaredNorm();
  if (!(var > 0.0)) throw InvalidArgument("constant series has no lag");
  const int limit = static_cast<int>(std::min<Eigen::Index>(max_lag, x.size() - 1));
  for (int lag = 1; lag <= limit; ++lag) {
    const double c = x.head(x.size() - lag).dot(x.tail(x.size() - lag));
    if (c <= 0.0) return lag;
  }
  return 1;
}

TimeSeries downsample(const TimeSeries& ts, int factor) {
  if (factor < 1) throw InvalidArgument("downsampling factor must be >= 1");
  const Eigen::Index rows = (ts.length() + factor - 1) / factor;
  Eigen::MatrixXd out(rows, ts.dim());
  for (Eigen::Index i = 0; i < rows; ++i) out.row(i) = ts.data().row(i * factor);
  return TimeSeries(std::move(out), ts.dt() * factor, ts.name());
}

TimeSeries add_observation_noise(const TimeSeries& ts, double fraction,
                                 std::uint64_t seed) {
  if (!(fraction >= 0.0)) throw InvalidArgument("noise fraction must be >= 0");
  if (fraction == 0.0) return ts;
  const Eigen::RowVectorXd scale = fraction * column_std(ts.data());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out = ts.data();
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(t, j) += scale(j) * normal(rng);
    }
  }
  return TimeSeries(std::move(out), ts.dt(), ts.name());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TimeSeries load_csv(const std::filesystem::path& path, double dt) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  const std::size_t cols = split_csv_line(trim(line)).size();
  if (cols == 0) throw ParseError(path.string() + ": empty header");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != cols) {
      throw ParseError(path.string() + ": row " + std::to_string(lineno) +
                       " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError(path.string() + ": row " + std::to_string(lineno) +
                         ", column " + std::to_string(c + 1) +
                         ": not a finite number: '" + cell + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(path.string() + ": no data rows");
  Eigen::MatrixXd data(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) data(r, c) = values[r * cols + c];
  }
  return TimeSeries(std::move(data), dt, path.stem().string());
}

void save_csv(const TimeSeries& ts, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Eigen::Index j = 0; j < ts.dim(); ++j) {
    out << (j ? "," : "") << 'x' << (j + 1);
  }
  out << '\n';
  for (Eigen::Index t = 0; t < ts.length(); ++t) {
    for (Eigen::Index j = 0; j < ts.dim(); ++j) {
      out << (j ? "," : "") << format_double(ts.data()(t, j));
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::filesystem::path metadata_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".json");
}

void save_metadata(const TimeSeries& ts, const std::filesystem::path& csv) {
  std::ofstream out(metadata_path(csv));
  if (!out) throw Error("cannot write metadata for " + csv.string());
  out << nlohmann::json{{"dt", ts.dt()}, {"name", ts.name()}}.dump(2) << '\n';
}

TimeSeries load_series(const std::filesystem::path& csv) {
  TimeSeries ts = load_csv(csv);
  const auto meta = metadata_path(csv);
  if (!std::filesystem::exists(meta)) return ts;
  std::ifstream in(meta);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta.string() + ": " + e.what());
  }
  return TimeSeries(ts.data(), j.value("dt", 1.0),
                    j.value("name", ts.name()));
}

}  // namespace alrnn

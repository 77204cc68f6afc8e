#include "alrnn/evaluation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include "alrnn/errors.hpp"
#include "alrnn/format.hpp"

namespace alrnn {

BinningSpec BinningSpec::from_data(const TimeSeries& truth, int bins_per_dim,
                                   double margin) {
  BinningSpec spec;
  spec.bins_per_dim = bins_per_dim;
  for (Eigen::Index j = 0; j < truth.dim(); ++j) {
    const double lo = truth.data().col(j).minCoeff();
    const double hi = truth.data().col(j).maxCoeff();
    const double pad = hi > lo ? margin * (hi - lo) : 0.5;
    spec.ranges.emplace_back(lo - pad, hi + pad);
  }
  spec.validate(truth.dim());
  return spec;
}

std::uint64_t BinningSpec::total_bins() const {
  std::uint64_t k = 1;
  for (std::size_t d = 0; d < ranges.size(); ++d) {
    k *= static_cast<std::uint64_t>(bins_per_dim);
    if (k > 100000000ULL) return k;
  }
  return k;
}

void BinningSpec::validate(Eigen::Index dim) const {
  if (bins_per_dim < 2) throw InvalidArgument("need at least 2 bins per dimension");
  if (static_cast<Eigen::Index>(ranges.size()) != dim) {
    throw InvalidArgument("binning ranges do not match the data dimension");
  }
  for (const auto& [lo, hi] : ranges) {
    if (!(lo < hi)) throw InvalidArgument("binning range needs lo < hi");
  }
  if (total_bins() > 100000000ULL) {
    throw InvalidArgument(
        "m^N exceeds 1e8 bins; use fewer bins per dimension (e.g. m = 8 for "
        "5-d data)");
  }
}

std::vector<std::pair<std::uint64_t, long>> bin_counts(const TimeSeries& ts,
                                                       const BinningSpec& spec) {
  spec.validate(ts.dim());
  const int m = spec.bins_per_dim;
  std::vector<std::uint64_t> idx(static_cast<std::size_t>(ts.length()));
  for (Eigen::Index t = 0; t < ts.length(); ++t) {
    std::uint64_t flat = 0;
    for (Eigen::Index d = ts.dim() - 1; d >= 0; --d) {
      const auto [lo, hi] = spec.ranges[static_cast<std::size_t>(d)];
      const double u = (ts.data()(t, d) - lo) / (hi - lo) * m;
      const long k = std::clamp<long>(static_cast<long>(std::floor(u)), 0, m - 1);
      flat = flat * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(k);
    }
    idx[static_cast<std::size_t>(t)] = flat;
  }
  std::sort(idx.begin(), idx.end());
  std::vector<std::pair<std::uint64_t, long>> counts;
  for (std::uint64_t b : idx) {
    if (counts.empty() || counts.back().first != b) {
      counts.emplace_back(b, 0);
    }
    ++counts.back().second;
  }
  return counts;
}

double d_stsp(const TimeSeries& truth, const TimeSeries& generated,
              const BinningSpec& spec) {
  if (truth.dim() != generated.dim()) {
    throw InvalidArgument("d_stsp: dimension mismatch");
  }
  const auto pt = bin_counts(truth, spec);
  const auto pg = bin_counts(generated, spec);
  const double nt = static_cast<double>(truth.length());
  const double ng = static_cast<double>(generated.length());

  // q for every bin the truth occupies; missing ones get the floor, and the
  // total floored mass enters the normalizer.
  std::vector<double> q(pt.size());
  double floored = 0.0;
  std::size_t g = 0;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    while (g < pg.size() && pg[g].first < pt[i].first) ++g;
    if (g < pg.size() && pg[g].first == pt[i].first) {
      q[i] = static_cast<double>(pg[g].second) / ng;
    } else {
      q[i] = kEmptyBinFloor;
      floored += kEmptyBinFloor;
    }
  }
  const double z = 1.0 + floored;
  double kl = 0.0;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    const double p = static_cast<double>(pt[i].second) / nt;
    kl += p * std::log(p * z / q[i]);
  }
  return std::max(kl, 0.0);
}

double d_stsp(const TimeSeries& truth, const TimeSeries& generated,
              int bins_per_dim) {
  return d_stsp(truth, generated, BinningSpec::from_data(truth, bins_per_dim));
}

double hellinger_distance(const Eigen::VectorXd& F, const Eigen::VectorXd& G) {
  if (F.size() != G.size()) throw InvalidArgument("spectra differ in length");
  // 1 - sum sqrt(FG) written as half the squared distance of the root
  // vectors, which stays exact for identical inputs
  const double h2 = 0.5 * (F.array().sqrt() - G.array().sqrt()).square().sum();
  return std::sqrt(std::clamp(h2, 0.0, 1.0));
}

namespace {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

Eigen::VectorXd raw_power(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x.data(), x.data() + n);
  const int nf = n / 2 + 1;
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nf));
  if (!out) throw Error("fftw allocation failed");
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out_guard(
      out, [](void* p) { fftw_free(p); });
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(
      fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE));
  fftw_execute(plan.get());
  Eigen::VectorXd power(nf);
  for (int k = 0; k < nf; ++k) {
    power(k) = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / n;
  }
  return power;
}

}  // namespace

Eigen::VectorXd smoothed_power_spectrum(const Eigen::VectorXd& x,
                                        double kernel_sigma,
                                        double keep_fraction) {
  if (x.size() < 2) throw InvalidArgument("spectrum needs at least 2 samples");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw InvalidArgument("keep_fraction must lie in (0, 1]");
  }
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().mean());
  if (!(sd > 0.0)) throw InvalidArgument("constant series has no spectrum");
  const Eigen::VectorXd xs = (x.array() - mean) / sd;

  Eigen::VectorXd power = raw_power(xs);
  if (kernel_sigma > 0.0) {
    power = convolve_reflect(power, gaussian_kernel(kernel_sigma));
  }
  const Eigen::Index keep = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor(keep_fraction * power.size())));
  Eigen::VectorXd spec = power.head(keep);
  const double total = spec.sum();
  if (!(total > 0.0)) throw InvalidArgument("spectrum vanishes after truncation");
  return spec / total;
}

double d_hellinger(const TimeSeries& truth, const TimeSeries& generated,
                   double kernel_sigma, double keep_fraction) {
  if (truth.dim() != generated.dim()) {
    throw InvalidArgument("d_hellinger: dimension mismatch");
  }
  const Eigen::Index n = std::min(truth.length(), generated.length());
  if (n < 128) throw InvalidArgument("d_hellinger needs at least 128 samples");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < truth.dim(); ++j) {
    const Eigen::VectorXd F = smoothed_power_spectrum(
        truth.data().col(j).head(n), kernel_sigma, keep_fraction);
    const Eigen::VectorXd G = smoothed_power_spectrum(
        generated.data().col(j).head(n), kernel_sigma, keep_fraction);
    sum += hellinger_distance(F, G);
  }
  return sum / static_cast<double>(truth.dim());
}

double max_lyapunov_exponent(const JacobianStepper& advance,
                             Eigen::VectorXd state, int transient, int horizon,
                             int qr_interval) {
  if (qr_interval < 1) throw InvalidArgument("qr_interval must be >= 1");
  if (horizon < 10 * qr_interval) {
    throw InvalidArgument("horizon must be at least 10 * qr_interval");
  }
  for (int t = 0; t < transient; ++t) advance(state);

  const Eigen::Index m = state.size();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(m, m);
  double log_sum = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    Q = advance(state) * Q;
    if (t % qr_interval == 0 || t == horizon) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Q);
      const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
      const double r00 = std::abs(R(0, 0));
      if (!(r00 > 0.0) || !std::isfinite(r00)) {
        if (r00 == 0.0) return -std::numeric_limits<double>::infinity();
        throw DivergenceError("Jacobian product is not finite",
                              static_cast<std::size_t>(t));
      }
      log_sum += std::log(r00);
      Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
      // keep column orientation consistent with R's sign
      for (Eigen::Index c = 0; c < m; ++c) {
        if (R(c, c) < 0.0) Q.col(c) *= -1.0;
      }
    }
  }
  return log_sum / horizon;
}

double lyapunov_max(const ALRNN& model, const LatentState& z0, int transient,
                    int horizon, int qr_interval) {
  if (z0.size() != model.M()) throw InvalidArgument("z0 must have length M");
  std::size_t step = 0;
  const JacobianStepper advance = [&](Eigen::VectorXd& z) {
    Eigen::MatrixXd J = model.jacobian(model.symbol_of(z));
    z = model.step_unchecked(z);
    ++step;
    if (!z.allFinite() || z.cwiseAbs().maxCoeff() > 1e6) {
      throw DivergenceError("orbit diverged while estimating Lyapunov exponent",
                            step);
    }
    return J;
  };
  return max_lyapunov_exponent(advance, z0, transient, horizon, qr_interval);
}

Eigen::MatrixXd simulate_latent(const ALRNN& model, const LatentState& z1,
                                int steps, double bound) {
  if (steps < 1) throw InvalidArgument("steps must be >= 1");
  if (z1.size() != model.M()) throw InvalidArgument("z1 must have length M");
  Eigen::MatrixXd Z(model.M(), steps);
  Z.col(0) = z1;
  for (int t = 1; t < steps; ++t) {
    Z.col(t) = model.step_unchecked(Z.col(t - 1));
    const double peak = Z.col(t).cwiseAbs().maxCoeff();
    if (!(peak <= bound)) {
      throw DivergenceError("free rollout diverged", static_cast<std::size_t>(t));
    }
  }
  return Z.transpose();
}

TimeSeries free_rollout(const ALRNN& model, const Eigen::VectorXd& x1,
                        int steps, int discard, double dt) {
  if (discard < 0 || steps <= discard) {
    throw InvalidArgument("free_rollout requires steps > discard >= 0");
  }
  const Eigen::MatrixXd Z = simulate_latent(model, model.init_latent(x1), steps);
  return TimeSeries(Z.bottomRows(steps - discard).leftCols(model.N()), dt,
                    "generated");
}

void to_json(nlohmann::json& j, const EvalOptions& o) {
  j = {{"bins_per_dim", o.bins_per_dim},   {"kernel_sigma", o.kernel_sigma},
       {"keep_fraction", o.keep_fraction}, {"discard", o.discard},
       {"lyap_transient", o.lyap_transient}, {"lyap_horizon", o.lyap_horizon},
       {"qr_interval", o.qr_interval}};
}

void from_json(const nlohmann::json& j, EvalOptions& o) {
  o.bins_per_dim = j.value("bins_per_dim", o.bins_per_dim);
  o.kernel_sigma = j.value("kernel_sigma", o.kernel_sigma);
  o.keep_fraction = j.value("keep_fraction", o.keep_fraction);
  o.discard = j.value("discard", o.discard);
  o.lyap_transient = j.value("lyap_transient", o.lyap_transient);
  o.lyap_horizon = j.value("lyap_horizon", o.lyap_horizon);
  o.qr_interval = j.value("qr_interval", o.qr_interval);
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"d_stsp", r.d_stsp},
          {"d_hellinger", r.d_hellinger},
          {"lambda_max", r.lambda_max},
          {"details", r.details}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.d_stsp = j.at("d_stsp").get<double>();
    r.d_hellinger = j.at("d_hellinger").get<double>();
    r.lambda_max = j.at("lambda_max").get<double>();
    r.details = j.value("details", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed eval report: ") + e.what());
  }
}

EvalReport evaluate(const ALRNN& model, const TimeSeries& truth,
                    const EvalOptions& options) {
  if (truth.dim() != model.N()) {
    throw InvalidArgument("evaluation data dimension does not match model N");
  }
  const int total = static_cast<int>(truth.length()) + options.discard;
  const Eigen::MatrixXd Z =
      simulate_latent(model, model.init_latent(truth.row(0).transpose()), total);
  const TimeSeries gen(
      Z.bottomRows(truth.length()).leftCols(model.N()), truth.dt(), "generated");

  EvalReport r;
  const BinningSpec spec = BinningSpec::from_data(truth, options.bins_per_dim);
  r.d_stsp = d_stsp(truth, gen, spec);
  r.d_hellinger = d_hellinger(truth, gen, options.kernel_sigma, options.keep_fraction);
  r.lambda_max = lyapunov_max(model, Z.row(total - 1).transpose(),
                              options.lyap_transient, options.lyap_horizon,
                              options.qr_interval);
  r.details = {{"options", options},
               {"generated_length", gen.length()},
               {"occupied_true_bins", bin_counts(truth, spec).size()},
               {"occupied_generated_bins", bin_counts(gen, spec).size()},
               {"lambda_max_per_time_unit", r.lambda_max / truth.dt()}};
  return r;
}

void save_spectra_csv(const TimeSeries& ts, double kernel_sigma,
                      double keep_fraction, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "dim,frequency,power\n";
  for (Eigen::Index j = 0; j < ts.dim(); ++j) {
    const Eigen::VectorXd s =
        smoothed_power_spectrum(ts.data().col(j), kernel_sigma, keep_fraction);
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      const double freq = static_cast<double>(k) /
                          (static_cast<double>(ts.length()) * ts.dt());
      out << j << ',' << format_double(freq) << ',' << format_double(s(k)) << '\n';
    }
  }
}

}  // namespace alrnn

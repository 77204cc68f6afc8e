#include "alrnn/training.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "alrnn/random.hpp"

namespace alrnn {

void TrainConfig::validate() const {
  if (tau < 1) throw InvalidArgument("tau must be >= 1");
  if (seq_len < tau + 1) throw InvalidArgument("seq_len must be >= tau + 1");
  if (seq_len < 2) throw InvalidArgument("seq_len must be >= 2");
  if (batches_per_epoch < 1 || seqs_per_batch < 1) {
    throw InvalidArgument("batches_per_epoch and seqs_per_batch must be >= 1");
  }
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(lr_end > 0.0) || !(lr_start >= lr_end)) {
    throw InvalidArgument("learning rates must satisfy lr_start >= lr_end > 0");
  }
  if (!(noise_fraction >= 0.0)) throw InvalidArgument("noise_fraction must be >= 0");
  if (eval_every < 1) throw InvalidArgument("eval_every must be >= 1");
  if (!(reg_lambda_lin >= 0.0)) throw InvalidArgument("reg_lambda_lin must be >= 0");
  if (!(divergence_bound > 0.0)) throw InvalidArgument("divergence_bound must be > 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"tau", c.tau},
       {"seq_len", c.seq_len},
       {"batches_per_epoch", c.batches_per_epoch},
       {"seqs_per_batch", c.seqs_per_batch},
       {"epochs", c.epochs},
       {"lr_start", c.lr_start},
       {"lr_end", c.lr_end},
       {"seed", c.seed},
       {"noise_fraction", c.noise_fraction},
       {"eval_every", c.eval_every},
       {"reg_lambda_lin", c.reg_lambda_lin},
       {"divergence_bound", c.divergence_bound}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.tau = j.value("tau", c.tau);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.batches_per_epoch = j.value("batches_per_epoch", c.batches_per_epoch);
  c.seqs_per_batch = j.value("seqs_per_batch", c.seqs_per_batch);
  c.epochs = j.value("epochs", c.epochs);
  c.lr_start = j.value("lr_start", c.lr_start);
  c.lr_end = j.value("lr_end", c.lr_end);
  c.seed = j.value("seed", c.seed);
  c.noise_fraction = j.value("noise_fraction", c.noise_fraction);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.reg_lambda_lin = j.value("reg_lambda_lin", c.reg_lambda_lin);
  c.divergence_bound = j.value("divergence_bound", c.divergence_bound);
}

double scheduled_lr(const TrainConfig& cfg, int epoch) {
  if (epoch <= 0 || cfg.epochs <= 1) return cfg.lr_start;
  if (epoch >= cfg.epochs - 1) return cfg.lr_end;
  const double frac = static_cast<double>(epoch) / (cfg.epochs - 1);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

namespace {

// Shared forward/backward pass. Unit i uses phi_i(z) = z for z > 0 and
// slope_i * z otherwise, so the AL-RNN is the special case slope = 1 on
// linear units and 0 on piecewise-linear ones.
struct Network {
  const Eigen::VectorXd& A;
  const Eigen::MatrixXd& W;
  const Eigen::VectorXd& h;
  const Eigen::MatrixXd& L;
  int N;
  Eigen::VectorXd slope;

  Eigen::Index M() const { return A.size(); }

  void activate(const Eigen::VectorXd& z, Eigen::VectorXd& phi) const {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      phi(i) = z(i) > 0.0 ? z(i) : slope(i) * z(i);
    }
  }
};

Eigen::VectorXd alrnn_slopes(const ALRNN& model) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(model.M());
  s.tail(model.P()).setZero();
  return s;
}

struct Trace {
  Eigen::MatrixXd Z;    // M x T, states before forcing
  Eigen::MatrixXd Zin;  // M x (T-1), states fed into the map
};

Trace forward(const Network& net, const Eigen::MatrixXd& X, int tau,
              double bound) {
  const Eigen::Index M = net.M();
  const Eigen::Index T = X.cols();
  const int N = net.N;
  Trace tr{Eigen::MatrixXd(M, T), Eigen::MatrixXd(M, std::max<Eigen::Index>(T - 1, 0))};
  tr.Z.col(0).head(N) = X.col(0);
  tr.Z.col(0).tail(M - N).noalias() = net.L * X.col(0);
  Eigen::VectorXd phi(M);
  Eigen::VectorXd zin(M);
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    zin = tr.Z.col(t);
    if (t % tau == 0) zin.head(N) = X.col(t);
    tr.Zin.col(t) = zin;
    net.activate(zin, phi);
    auto next = tr.Z.col(t + 1);
    next.noalias() = net.W * phi;
    next += net.A.cwiseProduct(zin) + net.h;
    const double peak = next.cwiseAbs().maxCoeff();
    if (!(peak <= bound)) {
      throw DivergenceError("rollout left the admissible range",
                            static_cast<std::size_t>(t + 1));
    }
  }
  return tr;
}

struct NetworkGrad {
  double loss = 0.0;
  Eigen::VectorXd dA, dh, dslope;
  Eigen::MatrixXd dW, dL;
};

NetworkGrad backward(const Network& net, const Eigen::MatrixXd& X, int tau,
                     const Trace& tr, bool want_slope) {
  const Eigen::Index M = net.M();
  const Eigen::Index T = X.cols();
  const int N = net.N;
  NetworkGrad g;
  g.dA = Eigen::VectorXd::Zero(M);
  g.dh = Eigen::VectorXd::Zero(M);
  g.dW = Eigen::MatrixXd::Zero(M, M);
  g.dL = Eigen::MatrixXd::Zero(M - N, N);
  g.dslope = Eigen::VectorXd::Zero(M);
  if (T < 2) return g;

  const double c = 2.0 / (static_cast<double>(N) * static_cast<double>(T - 1));
  double sq = 0.0;
  for (Eigen::Index t = 1; t < T; ++t) {
    sq += (tr.Z.col(t).head(N) - X.col(t)).squaredNorm();
  }
  g.loss = sq / (static_cast<double>(N) * static_cast<double>(T - 1));

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(M);
  delta.head(N) = c * (tr.Z.col(T - 1).head(N) - X.col(T - 1));
  Eigen::VectorXd phi(M);
  Eigen::VectorXd back(M);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const auto zin = tr.Zin.col(t);
    net.activate(zin, phi);
    g.dA += delta.cwiseProduct(zin);
    g.dW.noalias() += delta * phi.transpose();
    g.dh += delta;
    back.noalias() = net.W.transpose() * delta;
    Eigen::VectorXd next_delta = net.A.cwiseProduct(delta);
    for (Eigen::Index i = 0; i < M; ++i) {
      const bool active = zin(i) > 0.0;
      next_delta(i) += (active ? 1.0 : net.slope(i)) * back(i);
      if (want_slope && !active) g.dslope(i) += back(i) * zin(i);
    }
    if (t % tau == 0) next_delta.head(N).setZero();
    if (t >= 1) next_delta.head(N) += c * (tr.Z.col(t).head(N) - X.col(t));
    delta = std::move(next_delta);
  }
  // delta is now d loss / d z_0 with the readout part cut by forcing.
  g.dL.noalias() = delta.tail(M - N) * X.col(0).transpose();
  return g;
}

void check_window(const Eigen::MatrixXd& obs, int N, int tau) {
  if (obs.rows() < 2) throw InvalidArgument("window needs at least 2 rows");
  if (obs.cols() != N) throw InvalidArgument("window must have N columns");
  if (tau < 1) throw InvalidArgument("tau must be >= 1");
}

}  // namespace

ForcedRollout forced_rollout(const ALRNN& model, const Eigen::MatrixXd& obs,
                             int tau, double divergence_bound) {
  check_window(obs, model.N(), tau);
  const Network net{model.A(), model.W(), model.h(), model.L(), model.N(),
                    alrnn_slopes(model)};
  const Eigen::MatrixXd X = obs.transpose();
  const Trace tr = forward(net, X, tau, divergence_bound);
  ForcedRollout out;
  out.latent = tr.Z.transpose();
  out.predictions = out.latent.leftCols(model.N());
  return out;
}

double mse_loss(const Eigen::MatrixXd& predictions,
                const Eigen::MatrixXd& observations) {
  if (predictions.rows() != observations.rows() ||
      predictions.cols() != observations.cols()) {
    throw InvalidArgument("mse_loss: shape mismatch");
  }
  if (predictions.size() == 0) return 0.0;
  return (predictions - observations).squaredNorm() /
         static_cast<double>(predictions.size());
}

double window_loss(const ALRNN& model, const Eigen::MatrixXd& obs, int tau,
                   double divergence_bound) {
  const ForcedRollout r = forced_rollout(model, obs, tau, divergence_bound);
  const Eigen::Index T = obs.rows();
  return mse_loss(r.predictions.bottomRows(T - 1), obs.bottomRows(T - 1));
}

Eigen::VectorXd Gradients::flat() const {
  Eigen::VectorXd out(A.size() + W.size() + h.size() + L.size());
  Eigen::Index o = 0;
  out.segment(o, A.size()) = A;
  o += A.size();
  out.segment(o, W.size()) = W.reshaped();
  o += W.size();
  out.segment(o, h.size()) = h;
  o += h.size();
  out.segment(o, L.size()) = L.reshaped();
  return out;
}

Gradients bptt_gradients(const ALRNN& model, const Eigen::MatrixXd& obs,
                         int tau, double divergence_bound) {
  check_window(obs, model.N(), tau);
  const Network net{model.A(), model.W(), model.h(), model.L(), model.N(),
                    alrnn_slopes(model)};
  const Eigen::MatrixXd X = obs.transpose();
  const Trace tr = forward(net, X, tau, divergence_bound);
  NetworkGrad g = backward(net, X, tau, tr, false);
  return Gradients{g.loss, std::move(g.dA), std::move(g.dW), std::move(g.dh),
                   std::move(g.dL)};
}

void radam_step(RAdamState& s, Eigen::VectorXd& params,
                const Eigen::VectorXd& grads, double lr) {
  if (grads.size() != params.size()) {
    throw InvalidArgument("radam_step: gradient/parameter size mismatch");
  }
  if (!grads.allFinite()) throw Error("radam_step: non-finite gradient");
  if (s.t == 0 || s.m.size() != params.size()) {
    s.m = Eigen::VectorXd::Zero(params.size());
    s.v = Eigen::VectorXd::Zero(params.size());
    s.t = 0;
  }
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();

  const double t = static_cast<double>(s.t);
  const double bc1 = 1.0 - std::pow(s.beta1, t);
  const double beta2_t = std::pow(s.beta2, t);
  const double bc2 = 1.0 - beta2_t;
  const double rho_inf = 2.0 / (1.0 - s.beta2) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * beta2_t / bc2;

  const Eigen::VectorXd m_hat = s.m / bc1;
  if (rho_t > 5.0) {
    const double rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                                  ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    const Eigen::ArrayXd adaptive =
        std::sqrt(bc2) / (s.v.array().sqrt() + s.eps);
    params.array() -= lr * rect * m_hat.array() * adaptive;
  } else {
    params -= lr * m_hat;
  }
}

ALRNN init_model(int M, int P, int N, std::uint64_t seed) {
  if (M < 1 || N < 1 || P < 0 || N + P > M) {
    throw InvalidArgument("init_model requires N + P <= M");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd G(M, M);
  for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = normal(rng);
  const Eigen::MatrixXd S = G * G.transpose();
  const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                         S, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
  Eigen::VectorXd A = S.diagonal() / top;
  Eigen::MatrixXd W(M, M);
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = 0.01 * normal(rng);
  return ALRNN(std::move(A), std::move(W), Eigen::VectorXd::Zero(M),
               Eigen::MatrixXd::Zero(M - N, N), P, N);
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"loss", r.loss}, {"lr", r.lr}};
  if (r.d_stsp) j["d_stsp"] = *r.d_stsp;
  return j;
}

void write_history_jsonl(const TrainHistory& history, std::ostream& out) {
  for (const auto& r : history.epochs) out << to_json(r).dump() << '\n';
}

namespace {

// One training run over a packed parameter vector. `batch_grad(theta)`
// returns a callable mapping a window to (loss, gradient).
template <class MakeWindowGrad, class Score>
TrainHistory optimize(Eigen::VectorXd& theta, const TimeSeries& ts,
                      const TrainConfig& cfg, MakeWindowGrad&& make_grad,
                      Score&& score, bool has_score,
                      Eigen::VectorXd& best_theta) {
  cfg.validate();
  if (ts.length() <= cfg.seq_len) {
    throw InvalidArgument("time series (" + std::to_string(ts.length()) +
                          " rows) must be longer than seq_len");
  }
  TrainHistory history;
  history.best_d_stsp = std::numeric_limits<double>::infinity();
  best_theta = theta;

  std::mt19937_64 rng(mix_seed(cfg.seed, 0));
  std::uniform_int_distribution<Eigen::Index> start_dist(
      0, ts.length() - cfg.seq_len);
  RAdamState opt;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    const TimeSeries data =
        cfg.noise_fraction > 0.0
            ? add_observation_noise(ts, cfg.noise_fraction,
                                    mix_seed(cfg.seed, 1000003ULL + epoch))
            : ts;
    double loss_sum = 0.0;
    long loss_count = 0;
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      auto window_grad = make_grad(theta);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      int ok = 0;
      int failed = 0;
      std::size_t last_fail_step = 0;
      for (int s = 0; s < cfg.seqs_per_batch; ++s) {
        const Eigen::Index start = start_dist(rng);
        const Eigen::MatrixXd window =
            data.data().middleRows(start, cfg.seq_len);
        try {
          auto [loss, g] = window_grad(window);
          grad += g;
          loss_sum += loss;
          ++loss_count;
          ++ok;
        } catch (const DivergenceError& e) {
          ++failed;
          last_fail_step = e.step();
        }
      }
      if (2 * failed > cfg.seqs_per_batch) {
        throw TrainingAborted(
            "training aborted at epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(b) + ": " + std::to_string(failed) + " of " +
            std::to_string(cfg.seqs_per_batch) +
            " rollouts diverged (last at step " +
            std::to_string(last_fail_step) + ")");
      }
      if (ok > 0) radam_step(opt, theta, grad / ok, lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    const bool eval_now = has_score && ((epoch + 1) % cfg.eval_every == 0 ||
                                        epoch == cfg.epochs - 1);
    if (eval_now) {
      double d = std::numeric_limits<double>::infinity();
      try {
        d = score(theta);
      } catch (const Error&) {
      }
      if (!std::isfinite(d)) d = std::numeric_limits<double>::infinity();
      rec.d_stsp = d;
      if (d < history.best_d_stsp) {
        history.best_d_stsp = d;
        history.best_epoch = epoch;
        best_theta = theta;
      }
    }
    history.epochs.push_back(rec);
  }
  if (!has_score || history.best_epoch < 0) {
    best_theta = theta;
    history.best_epoch = cfg.epochs - 1;
  }
  return history;
}

}  // namespace

TrainResult train(const ALRNN& model0, const TimeSeries& ts,
                  const TrainConfig& cfg, const Validator& validator) {
  if (ts.dim() != model0.N()) {
    throw InvalidArgument("time series dimension does not match model N");
  }
  Eigen::VectorXd theta = model0.parameters();
  Eigen::VectorXd best;
  auto make_grad = [&](const Eigen::VectorXd& th) {
    return [model = model0.with_parameters(th), &cfg](const Eigen::MatrixXd& w) {
      Gradients g = bptt_gradients(model, w, cfg.tau, cfg.divergence_bound);
      return std::pair<double, Eigen::VectorXd>(g.loss, g.flat());
    };
  };
  auto score = [&](const Eigen::VectorXd& th) {
    return validator(model0.with_parameters(th));
  };
  TrainHistory history = optimize(theta, ts, cfg, make_grad, score,
                                  static_cast<bool>(validator), best);
  return TrainResult{model0.with_parameters(best), std::move(history)};
}

double gate_slope(double gamma) {
  return 1.0 / (1.0 + std::exp(-500.0 * (gamma - 0.5)));
}

Eigen::VectorXd LeakyALRNN::slopes() const {
  return gammas.unaryExpr([](double g) { return gate_slope(g); });
}

LatentState LeakyALRNN::step(const LatentState& z) const {
  const Eigen::VectorXd s = slopes();
  Eigen::VectorXd phi(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    phi(i) = z(i) > 0.0 ? z(i) : s(i) * z(i);
  }
  return base.A().cwiseProduct(z) + base.W() * phi + base.h();
}

LeakyALRNN init_leaky_model(int M, int N, std::uint64_t seed, double gamma0) {
  return LeakyALRNN{init_model(M, 0, N, seed),
                    Eigen::VectorXd::Constant(M, gamma0)};
}

LeakyGradients leaky_bptt_gradients(const LeakyALRNN& model,
                                    const Eigen::MatrixXd& obs, int tau,
                                    double lambda_lin,
                                    double divergence_bound) {
  const ALRNN& b = model.base;
  check_window(obs, b.N(), tau);
  const Eigen::VectorXd alpha = model.slopes();
  const Network net{b.A(), b.W(), b.h(), b.L(), b.N(), alpha};
  const Eigen::MatrixXd X = obs.transpose();
  const Trace tr = forward(net, X, tau, divergence_bound);
  NetworkGrad g = backward(net, X, tau, tr, true);

  const Eigen::ArrayXd dalpha_dgamma = 500.0 * alpha.array() * (1.0 - alpha.array());
  const double penalty = lambda_lin * (1.0 - alpha.array()).abs().sum();
  // d|alpha - 1| / d alpha = -1 since alpha < 1
  LeakyGradients out;
  out.gammas = ((g.dslope.array() - lambda_lin) * dalpha_dgamma).matrix();
  out.base = Gradients{g.loss + penalty, std::move(g.dA), std::move(g.dW),
                       std::move(g.dh), std::move(g.dL)};
  return out;
}

RegularizedResult train_regularized(const LeakyALRNN& model0,
                                    const TimeSeries& ts,
                                    const TrainConfig& cfg) {
  const ALRNN& base = model0.base;
  if (ts.dim() != base.N()) {
    throw InvalidArgument("time series dimension does not match model N");
  }
  if (model0.gammas.size() != base.M()) {
    throw InvalidArgument("one gate parameter per unit required");
  }
  const Eigen::Index nb = base.parameter_size();
  Eigen::VectorXd theta(nb + base.M());
  theta << base.parameters(), model0.gammas;

  auto unpack = [&](const Eigen::VectorXd& th) {
    return LeakyALRNN{base.with_parameters(th.head(nb)), th.tail(base.M())};
  };
  auto make_grad = [&](const Eigen::VectorXd& th) {
    return [model = unpack(th), &cfg, nb](const Eigen::MatrixXd& w) {
      LeakyGradients g = leaky_bptt_gradients(model, w, cfg.tau,
                                              cfg.reg_lambda_lin,
                                              cfg.divergence_bound);
      Eigen::VectorXd flat(nb + g.gammas.size());
      flat << g.base.flat(), g.gammas;
      return std::pair<double, Eigen::VectorXd>(g.base.loss, flat);
    };
  };
  auto no_score = [](const Eigen::VectorXd&) { return 0.0; };
  Eigen::VectorXd best;
  TrainHistory history =
      optimize(theta, ts, cfg, make_grad, no_score, false, best);

  RegularizedResult out{unpack(best), {}, 0, std::move(history)};
  out.slopes = out.model.slopes();
  out.inferred_P = static_cast<int>(
      (out.slopes.array() <= kLinearSlopeThreshold).count());
  return out;
}

}  // namespace alrnn

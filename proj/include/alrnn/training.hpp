#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "alrnn/datasets.hpp"
#include "alrnn/errors.hpp"
#include "alrnn/model.hpp"
#include "json.hpp"

namespace alrnn {

struct TrainConfig {
  int tau = 16;
  int seq_len = 200;
  int batches_per_epoch = 50;
  int seqs_per_batch = 16;
  int epochs = 2000;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  std::uint64_t seed = 0;
  double noise_fraction = 0.05;
  int eval_every = 25;
  double reg_lambda_lin = 0.0;
  /// Rollouts abort once any |z| exceeds this bound.
  double divergence_bound = 1e6;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// Learning rate at `epoch`, geometric interpolation between lr_start
/// (epoch 0) and lr_end (epoch epochs-1).
double scheduled_lr(const TrainConfig& cfg, int epoch);

struct ForcedRollout {
  Eigen::MatrixXd predictions;  ///< T x N, row t = readout(z_t)
  Eigen::MatrixXd latent;       ///< T x M, z_t before any forcing
};

/// Identity teacher forcing: z_0 = init_latent(x_0); at every t with
/// t % tau == 0 the readout units of z_t are replaced by x_t before stepping.
ForcedRollout forced_rollout(const ALRNN& model, const Eigen::MatrixXd& obs,
                             int tau, double divergence_bound = 1e6);

/// (1 / (N T)) sum_t ||pred_t - obs_t||^2 over all rows.
double mse_loss(const Eigen::MatrixXd& predictions,
                const Eigen::MatrixXd& observations);

/// Training loss of one window: MSE between the predictions for rows
/// 1..T-1 and the observations (row 0 is the initial condition).
double window_loss(const ALRNN& model, const Eigen::MatrixXd& obs, int tau,
                   double divergence_bound = 1e6);

struct Gradients {
  double loss = 0.0;
  Eigen::VectorXd A;
  Eigen::MatrixXd W;
  Eigen::VectorXd h;
  Eigen::MatrixXd L;

  /// Packed in the same order as ALRNN::parameters().
  Eigen::VectorXd flat() const;
};

/// Exact reverse-mode gradient of window_loss. Forced coordinates are
/// treated as constants and the ReLU derivative at 0 is 0.
Gradients bptt_gradients(const ALRNN& model, const Eigen::MatrixXd& obs,
                         int tau, double divergence_bound = 1e6);

struct RAdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Rectified Adam update applied in place to `params`.
void radam_step(RAdamState& state, Eigen::VectorXd& params,
                const Eigen::VectorXd& grads, double lr);

/// W ~ N(0, 0.01^2), h = 0, L = 0, A = diag(G G^T) / lambda_max(G G^T).
ALRNN init_model(int M, int P, int N, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> d_stsp;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_d_stsp = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);
void write_history_jsonl(const TrainHistory& history, std::ostream& out);

/// Returns D_stsp (or any lower-is-better score) of a candidate model.
using Validator = std::function<double(const ALRNN&)>;

struct TrainResult {
  ALRNN model;
  TrainHistory history;
};

/// Raised when more than half of a batch's rollouts diverge.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

/// Runs cfg.epochs epochs of RAdam on randomly drawn windows. With a
/// validator, the model with the lowest score over all evaluations is
/// returned; otherwise the final model.
TrainResult train(const ALRNN& model0, const TimeSeries& ts,
                  const TrainConfig& cfg, const Validator& validator = {});

/// AL-RNN variant where every unit uses phi_i(z) = max(alpha_i z, z) with a
/// trainable slope alpha_i = 1 / (1 + exp(-500 (gamma_i - 0.5))).
struct LeakyALRNN {
  ALRNN base;  ///< stores A, W, h, L; base.P() is 0
  Eigen::VectorXd gammas;

  Eigen::VectorXd slopes() const;
  LatentState step(const LatentState& z) const;
};

double gate_slope(double gamma);

LeakyALRNN init_leaky_model(int M, int N, std::uint64_t seed,
                            double gamma0 = 0.5);

struct LeakyGradients {
  Gradients base;
  Eigen::VectorXd gammas;
};

/// Gradient of window_loss + lambda * sum_i |alpha_i - 1|.
LeakyGradients leaky_bptt_gradients(const LeakyALRNN& model,
                                    const Eigen::MatrixXd& obs, int tau,
                                    double lambda_lin,
                                    double divergence_bound = 1e6);

struct RegularizedResult {
  LeakyALRNN model;
  Eigen::VectorXd slopes;
  int inferred_P = 0;
  TrainHistory history;
};

/// Units whose slope exceeds this are counted as linear.
inline constexpr double kLinearSlopeThreshold = 0.99;

RegularizedResult train_regularized(const LeakyALRNN& model0,
                                    const TimeSeries& ts,
                                    const TrainConfig& cfg);

}  // namespace alrnn

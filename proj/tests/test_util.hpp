#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "alrnn/model.hpp"

namespace alrnn::testing {

/// Random model with W entries of standard deviation `scale`, A uniform in
/// (-0.5, 0.5), h and L standard normal.
inline ALRNN random_model(int M, int P, int N, std::uint64_t seed,
                          double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  Eigen::VectorXd A(M);
  for (auto& a : A) a = uni(rng);
  Eigen::MatrixXd W(M, M);
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = scale * normal(rng);
  Eigen::VectorXd h(M);
  for (auto& v : h) v = normal(rng);
  Eigen::MatrixXd L(M - N, N);
  for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = normal(rng);
  return ALRNN(A, W, h, L, P, N);
}

}  // namespace alrnn::testing

#include "alrnn/training.hpp"

namespace alrnn::testing {

/// Central finite-difference gradient of window_loss over the packed
/// parameter vector.
inline Eigen::VectorXd finite_difference_gradient(const ALRNN& model,
                                                  const Eigen::MatrixXd& obs,
                                                  int tau, double step = 1e-5) {
  const Eigen::VectorXd theta = model.parameters();
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd plus = theta;
    Eigen::VectorXd minus = theta;
    plus(i) += step;
    minus(i) -= step;
    grad(i) = (window_loss(model.with_parameters(plus), obs, tau) -
               window_loss(model.with_parameters(minus), obs, tau)) /
              (2.0 * step);
  }
  return grad;
}

/// Largest |a - b| / max(|a|, |b|, floor) over all entries.
inline double max_relative_error(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
  }
  return worst;
}

/// Smallest |z_i| over the piecewise-linear units of a forced rollout.
inline double min_pwl_magnitude(const ALRNN& model, const Eigen::MatrixXd& obs,
                                int tau) {
  if (model.P() == 0) return std::numeric_limits<double>::infinity();
  const ForcedRollout r = forced_rollout(model, obs, tau);
  return r.latent.rightCols(model.P()).cwiseAbs().minCoeff();
}

}  // namespace alrnn::testing

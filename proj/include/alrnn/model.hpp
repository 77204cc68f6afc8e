#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace alrnn {

/// Index of a linear subregion: bit j (most significant first) is set iff
/// the j-th piecewise-linear unit is strictly positive.
struct Symbol {
  std::uint64_t value = 0;

  friend auto operator<=>(const Symbol&, const Symbol&) = default;
};

using LatentState = Eigen::VectorXd;

/// z -> Wk z + hk, the dynamics restricted to one linear subregion.
struct AffineMap {
  Eigen::MatrixXd Wk;
  Eigen::VectorXd hk;

  Eigen::VectorXd operator()(const Eigen::VectorXd& z) const {
    return Wk * z + hk;
  }
};

/// Almost-linear RNN
///
///   z_t = diag(A) z_{t-1} + W phi(z_{t-1}) + h
///
/// where phi is the identity on the first M-P units and max(0, .) on the last
/// P units. Units [0, N) are read out directly as observations, units
/// [N, M-P) are linear hidden units. The initial latent state is
/// (x_1, L x_1). Instances are immutable.
class ALRNN {
 public:
  ALRNN(Eigen::VectorXd A, Eigen::MatrixXd W, Eigen::VectorXd h,
        Eigen::MatrixXd L, int num_pwl, int num_obs);

  /// All-zero parameters of the given shape.
  static ALRNN zeros(int M, int P, int N);

  int M() const { return static_cast<int>(A_.size()); }
  int P() const { return P_; }
  int N() const { return N_; }
  /// Index of the first piecewise-linear unit.
  int first_pwl() const { return M() - P_; }
  std::uint64_t num_symbols() const { return std::uint64_t{1} << P_; }

  const Eigen::VectorXd& A() const { return A_; }
  const Eigen::MatrixXd& W() const { return W_; }
  const Eigen::VectorXd& h() const { return h_; }
  const Eigen::MatrixXd& L() const { return L_; }

  /// One map iteration. Throws DivergenceError on a non-finite result.
  LatentState step(const LatentState& z) const;
  /// Same as step() without the finiteness check.
  LatentState step_unchecked(const LatentState& z) const;

  Symbol symbol_of(const LatentState& z) const;
  AffineMap affine_map_of(Symbol s) const;
  /// Jacobian of the map inside subregion `s` (equals affine_map_of(s).Wk).
  Eigen::MatrixXd jacobian(Symbol s) const;

  Eigen::VectorXd readout(const LatentState& z) const;
  LatentState init_latent(const Eigen::VectorXd& x1) const;

  /// Diagonal 0/1 mask D_s: ones on linear units, the bits of `s` on the
  /// piecewise-linear units.
  Eigen::VectorXd activation_mask(Symbol s) const;

  /// Parameters packed as [A, vec(W) column-major, h, vec(L) column-major].
  Eigen::VectorXd parameters() const;
  ALRNN with_parameters(const Eigen::VectorXd& theta) const;
  Eigen::Index parameter_size() const;

 private:
  void validate() const;

  Eigen::VectorXd A_;
  Eigen::MatrixXd W_;
  Eigen::VectorXd h_;
  Eigen::MatrixXd L_;
  int P_ = 0;
  int N_ = 0;
};

/// Number of stored trainable parameters (A, W, h, L).
Eigen::Index parameter_count(const ALRNN& model);

/// Multinomial-logit readout of categorical observations from the
/// piecewise-linear units, with category K as the reference class.
struct CategoricalDecoder {
  Eigen::MatrixXd betas;  ///< P x (K-1)

  int num_categories() const { return static_cast<int>(betas.cols()) + 1; }
  Eigen::VectorXd decode(const Eigen::VectorXd& zp) const;
};

/// Checkpoint JSON, schema version 1.
nlohmann::json to_json(const ALRNN& model,
                       const nlohmann::json& meta = nlohmann::json::object());
ALRNN model_from_json(const nlohmann::json& j);

void save_checkpoint(const ALRNN& model, const std::filesystem::path& path,
                     const nlohmann::json& meta = nlohmann::json::object());
ALRNN load_checkpoint(const std::filesystem::path& path);

}  // namespace alrnn

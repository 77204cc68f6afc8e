#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "alrnn/model.hpp"
#include "alrnn/symbolic.hpp"
#include "json.hpp"

namespace alrnn {

enum class Stability {
  StableNode,
  StableSpiral,
  Saddle,
  UnstableNode,
  UnstableSpiral,
  NonHyperbolic,
};

std::string to_string(Stability s);
Stability stability_from_string(const std::string& s);

/// Eigenvalues with |lambda| within this distance of 1 make a point
/// non-hyperbolic.
inline constexpr double kHyperbolicityTolerance = 1e-10;
/// PWL coordinates closer to zero than this get the boundary caveat.
inline constexpr double kBoundaryTolerance = 1e-9;

/// Discrete-time classification: stable if every |lambda| < 1, unstable if
/// every |lambda| > 1, saddle otherwise. Spiral when the eigenvalue of
/// largest modulus is complex.
Stability classify_stability(const Eigen::VectorXcd& eigenvalues);

/// Eigenvalues of a general real matrix.
Eigen::VectorXcd eigenvalues_of(const Eigen::MatrixXd& J);

struct FixedPointReport {
  Symbol symbol;
  /// Empty when I - W_s is singular.
  std::optional<Eigen::VectorXd> location;
  /// The location lies in the subregion it was solved for.
  bool is_real = false;
  /// Some PWL coordinate of the location is within kBoundaryTolerance of 0.
  bool on_boundary = false;
  Eigen::VectorXcd eigenvalues;
  double spectral_radius = 0.0;
  Stability classification = Stability::NonHyperbolic;
};

FixedPointReport fixed_point(const ALRNN& model, Symbol s);

/// One report per symbol in ascending order. Requires P <= 20.
std::vector<FixedPointReport> all_fixed_points(const ALRNN& model);

struct CycleReport {
  std::vector<Symbol> word;
  std::vector<Eigen::VectorXd> points;
  /// Eigenvalues of the composed Jacobian W_{a_k} ... W_{a_1}.
  Eigen::VectorXcd eigenvalues;
  double spectral_radius = 0.0;
  Stability classification = Stability::NonHyperbolic;
  bool is_real = false;
  bool on_boundary = false;
};

struct CycleSearchOptions {
  /// Symbols the words are built from; all 2^P symbols when unset.
  std::optional<std::vector<Symbol>> alphabet;
  /// Explicit candidate words (length k each); overrides the alphabet.
  std::optional<std::vector<std::vector<Symbol>>> words;
  bool include_virtual = false;
  std::size_t max_words = 1'000'000;
};

/// Period-k cycles through the composed subregion maps. Words are taken up
/// to rotation (smallest rotation is canonical); words that are powers of a
/// shorter word are skipped.
std::vector<CycleReport> find_cycles(const ALRNN& model, int k,
                                     const CycleSearchOptions& options = {});

/// Canonical words of length k whose consecutive symbols, including the
/// wrap-around, are edges of the graph.
std::vector<std::vector<Symbol>> admissible_words(const TransitionGraph& g, int k,
                                                  std::size_t max_words = 1'000'000);

nlohmann::json to_json(const FixedPointReport& r);
FixedPointReport fixed_point_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CycleReport& r);
CycleReport cycle_from_json(const nlohmann::json& j);

}  // namespace alrnn

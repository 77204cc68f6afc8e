#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alrnn/datasets.hpp"
#include "alrnn/model.hpp"
#include "json.hpp"

namespace alrnn {

struct SymbolicSequence {
  std::vector<Symbol> symbols;
  int P = 0;

  std::size_t size() const { return symbols.size(); }
};

/// Symbol of every row of a T x M latent trace.
SymbolicSequence encode(const ALRNN& model, const Eigen::MatrixXd& latent_trace);

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Directed transition statistics of a symbol sequence. Node i stands for
/// nodes[i]; nodes are sorted by symbol value.
struct TransitionGraph {
  std::vector<Symbol> nodes;
  CountMatrix counts;            ///< counts(i, j) = #{t : a_t = i, a_{t+1} = j}
  Eigen::VectorXd occupation;    ///< visits / T
  Eigen::MatrixXd edge_freq;     ///< counts / (T - 1)
  int P = 0;

  std::size_t size() const { return nodes.size(); }
  std::optional<std::size_t> index_of(Symbol s) const;
  std::int64_t edge_count() const;  ///< number of nonzero entries of counts
};

TransitionGraph build_graph(const SymbolicSequence& seq);

struct SpectralLayout {
  std::vector<Symbol> nodes;
  Eigen::MatrixXd coords;  ///< nodes.size() x 2
};

/// Node positions from the eigenvectors belonging to the two smallest
/// nonzero eigenvalues of the Laplacian D - S, where S = (A + A^T) / 2 is the
/// symmetrized edge-frequency matrix. Each eigenvector is sign-fixed so that
/// its largest-magnitude entry is positive. Disconnected components are laid
/// out separately and shifted apart along x.
SpectralLayout spectral_layout(const TransitionGraph& g);

struct EntropyEstimate {
  double value = 0.0;               ///< h(n_max)
  std::vector<double> curve;        ///< h(1), ..., h(n_max)
};

/// Block-growth estimate h(n) = ln(#distinct n-blocks) / n.
EntropyEstimate topological_entropy(const SymbolicSequence& seq, int n_max);

/// ln of the spectral radius of the 0/1 adjacency matrix of the graph.
double transition_matrix_entropy(const TransitionGraph& g);

struct EventualPeriod {
  int period = 1;
  std::size_t preperiod = 0;
};

/// Smallest p <= max_period with a_{n+p} = a_n for all n >= N inside the
/// window, where N is the smallest such index and the verified tail spans at
/// least half of the window. Empty when no period qualifies.
std::optional<EventualPeriod> detect_eventual_period(const SymbolicSequence& seq,
                                                     int max_period);

enum class ProximityConvention {
  SquaredDistance,  ///< close iff ||x_i - x_j||^2 < f * Var_total
  Distance,         ///< close iff ||x_i - x_j|| < f * Var_total
};

struct ProximityResult {
  double mismatch_fraction = 0.0;
  std::int64_t close_pairs = 0;
  std::int64_t mismatched_pairs = 0;
  std::size_t stride = 1;  ///< temporal subsampling applied to the points
};

inline constexpr std::int64_t kMaxProximityPairs = 10'000'000;

/// Fraction of pairs of observation-space points that are close (threshold
/// relative to the summed per-dimension variance) but carry different latent
/// symbols. Points are subsampled with a fixed stride when the number of
/// pairs would exceed kMaxProximityPairs.
ProximityResult proximity_match(const ALRNN& model, const TimeSeries& generated,
                                const Eigen::MatrixXd& latent_trace,
                                double threshold_fraction,
                                ProximityConvention convention =
                                    ProximityConvention::SquaredDistance);

/// Graphviz export. Edge labels are relative frequencies with 4 decimals.
std::string to_dot(const TransitionGraph& g, bool include_self_loops = true);

nlohmann::json to_json(const TransitionGraph& g,
                       const std::optional<SpectralLayout>& layout = std::nullopt);
/// Inverse of to_json. Counts determine everything else; the layout, if
/// present, is returned through `layout`.
TransitionGraph graph_from_json(const nlohmann::json& j,
                                std::optional<SpectralLayout>* layout = nullptr);

/// One line per time step: "t,symbol".
void save_symbols_csv(const SymbolicSequence& seq, const std::filesystem::path& path);
SymbolicSequence load_symbols_csv(const std::filesystem::path& path, int P);

}  // namespace alrnn

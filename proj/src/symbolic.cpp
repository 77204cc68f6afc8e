#include "alrnn/symbolic.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>

#include "alrnn/errors.hpp"

namespace alrnn {

SymbolicSequence encode(const ALRNN& model, const Eigen::MatrixXd& latent_trace) {
  if (latent_trace.cols() != model.M()) {
    throw InvalidArgument("latent trace must have M columns");
  }
  SymbolicSequence seq;
  seq.P = model.P();
  seq.symbols.reserve(static_cast<std::size_t>(latent_trace.rows()));
  for (Eigen::Index t = 0; t < latent_trace.rows(); ++t) {
    seq.symbols.push_back(model.symbol_of(latent_trace.row(t).transpose()));
  }
  return seq;
}

std::optional<std::size_t> TransitionGraph::index_of(Symbol s) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), s);
  if (it == nodes.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

std::int64_t TransitionGraph::edge_count() const {
  return (counts.array() > 0).count();
}

namespace {

void fill_frequencies(TransitionGraph& g, const std::vector<std::int64_t>& visits,
                      std::size_t length) {
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  g.occupation.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.occupation(i) = static_cast<double>(visits[static_cast<std::size_t>(i)]) /
                      static_cast<double>(length);
  }
  g.edge_freq = g.counts.cast<double>() / static_cast<double>(length - 1);
}

}  // namespace

TransitionGraph build_graph(const SymbolicSequence& seq) {
  if (seq.size() < 2) throw InvalidArgument("build_graph needs at least 2 symbols");
  const std::uint64_t limit = std::uint64_t{1} << seq.P;
  TransitionGraph g;
  g.P = seq.P;
  g.nodes = seq.symbols;
  for (Symbol s : g.nodes) {
    if (s.value >= limit) throw InvalidArgument("symbol exceeds 2^P");
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());

  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  g.counts = CountMatrix::Zero(n, n);
  std::vector<std::int64_t> visits(g.nodes.size(), 0);
  std::size_t prev = *g.index_of(seq.symbols[0]);
  ++visits[prev];
  for (std::size_t t = 1; t < seq.size(); ++t) {
    const std::size_t cur = *g.index_of(seq.symbols[t]);
    ++g.counts(static_cast<Eigen::Index>(prev), static_cast<Eigen::Index>(cur));
    ++visits[cur];
    prev = cur;
  }
  fill_frequencies(g, visits, seq.size());
  return g;
}

namespace {

// Connected components of the undirected support, each sorted ascending.
std::vector<std::vector<Eigen::Index>> components(const Eigen::MatrixXd& S) {
  const Eigen::Index n = S.rows();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<Eigen::Index>> out;
  for (Eigen::Index root = 0; root < n; ++root) {
    if (label[static_cast<std::size_t>(root)] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<Eigen::Index> stack{root};
    label[static_cast<std::size_t>(root)] = id;
    while (!stack.empty()) {
      const Eigen::Index v = stack.back();
      stack.pop_back();
      out.back().push_back(v);
      for (Eigen::Index u = 0; u < n; ++u) {
        if (u != v && S(v, u) > 0.0 && label[static_cast<std::size_t>(u)] < 0) {
          label[static_cast<std::size_t>(u)] = id;
          stack.push_back(u);
        }
      }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

Eigen::MatrixXd component_layout(const Eigen::MatrixXd& S) {
  const Eigen::Index n = S.rows();
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, 2);
  if (n == 1) return coords;
  if (n == 2) {
    coords(0, 0) = -0.5;
    coords(1, 0) = 0.5;
    return coords;
  }
  Eigen::MatrixXd Lap = -S;
  Lap.diagonal() = S.rowwise().sum();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Lap);
  // Connected component: exactly one zero eigenvalue, columns 1 and 2 are the
  // smallest nonzero directions.
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(k + 1);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    coords.col(k) = v;
  }
  return coords;
}

}  // namespace

SpectralLayout spectral_layout(const TransitionGraph& g) {
  if (g.size() < 3) throw InvalidArgument("spectral layout needs at least 3 nodes");
  Eigen::MatrixXd S = 0.5 * (g.edge_freq + g.edge_freq.transpose());
  S.diagonal().setZero();

  SpectralLayout layout;
  layout.nodes = g.nodes;
  const auto comps = components(S);
  if (comps.size() == 1) {
    layout.coords = component_layout(S);
    return layout;
  }
  layout.coords = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), 2);
  double offset = 0.0;
  for (const auto& comp : comps) {
    const auto n = static_cast<Eigen::Index>(comp.size());
    Eigen::MatrixXd sub(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = S(comp[a], comp[b]);
    }
    Eigen::MatrixXd c = component_layout(sub);
    const double left = c.col(0).minCoeff();
    const double width = c.col(0).maxCoeff() - left;
    for (Eigen::Index a = 0; a < n; ++a) {
      layout.coords(comp[a], 0) = c(a, 0) - left + offset;
      layout.coords(comp[a], 1) = c(a, 1);
    }
    offset += width + 1.0;
  }
  return layout;
}

EntropyEstimate topological_entropy(const SymbolicSequence& seq, int n_max) {
  if (n_max < 1) throw InvalidArgument("n_max must be >= 1");
  if (seq.size() < static_cast<std::size_t>(10 * n_max)) {
    throw InvalidArgument("sequence must be at least 10 * n_max long");
  }
  std::vector<std::uint64_t> a(seq.size());
  std::transform(seq.symbols.begin(), seq.symbols.end(), a.begin(),
                 [](Symbol s) { return s.value; });

  EntropyEstimate est;
  for (int n = 1; n <= n_max; ++n) {
    const std::size_t count = a.size() - static_cast<std::size_t>(n) + 1;
    std::vector<std::size_t> starts(count);
    std::iota(starts.begin(), starts.end(), 0);
    const auto block = [&](std::size_t s) {
      return std::span<const std::uint64_t>(a.data() + s, static_cast<std::size_t>(n));
    };
    const auto less = [&](std::size_t x, std::size_t y) {
      const auto bx = block(x), by = block(y);
      return std::lexicographical_compare(bx.begin(), bx.end(), by.begin(), by.end());
    };
    std::sort(starts.begin(), starts.end(), less);
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < count; ++i) {
      if (less(starts[i - 1], starts[i])) ++distinct;
    }
    est.curve.push_back(std::log(static_cast<double>(distinct)) / n);
  }
  est.value = est.curve.back();
  return est;
}

double transition_matrix_entropy(const TransitionGraph& g) {
  const Eigen::MatrixXd adj = (g.counts.array() > 0).cast<double>().matrix();
  const double rho = adj.eigenvalues().cwiseAbs().maxCoeff();
  return rho > 0.0 ? std::log(rho) : -std::numeric_limits<double>::infinity();
}

std::optional<EventualPeriod> detect_eventual_period(const SymbolicSequence& seq,
                                                     int max_period) {
  if (max_period < 1) throw InvalidArgument("max_period must be >= 1");
  const std::size_t T = seq.size();
  if (T < 4 * static_cast<std::size_t>(max_period)) {
    throw InvalidArgument("sequence must be at least 4 * max_period long");
  }
  for (int p = 1; p <= max_period; ++p) {
    const auto up = static_cast<std::size_t>(p);
    // scan backwards for the last violation of a_{n+p} = a_n
    std::size_t start = 0;
    for (std::size_t n = T - up; n-- > 0;) {
      if (seq.symbols[n] != seq.symbols[n + up]) {
        start = n + 1;
        break;
      }
    }
    const std::size_t verified = T - up - start;
    if (2 * verified >= T) return EventualPeriod{p, start};
  }
  return std::nullopt;
}

ProximityResult proximity_match(const ALRNN& model, const TimeSeries& generated,
                                const Eigen::MatrixXd& latent_trace,
                                double threshold_fraction,
                                ProximityConvention convention) {
  if (latent_trace.rows() != generated.length()) {
    throw InvalidArgument("generated and latent trajectories must be aligned");
  }
  if (!(threshold_fraction > 0.0)) throw InvalidArgument("threshold must be > 0");
  const SymbolicSequence seq = encode(model, latent_trace);
  const Eigen::MatrixXd& X = generated.data();
  const auto T = static_cast<std::int64_t>(X.rows());

  const Eigen::RowVectorXd mean = X.colwise().mean();
  const double var_total =
      (X.rowwise() - mean).array().square().sum() / static_cast<double>(T);
  double cutoff = threshold_fraction * var_total;
  if (convention == ProximityConvention::Distance) cutoff *= cutoff;

  ProximityResult res;
  std::int64_t n = T;
  while (n * (n - 1) / 2 > kMaxProximityPairs) {
    ++res.stride;
    n = (T + static_cast<std::int64_t>(res.stride) - 1) /
        static_cast<std::int64_t>(res.stride);
  }
  const auto stride = static_cast<Eigen::Index>(res.stride);
  for (Eigen::Index i = 0; i < T; i += stride) {
    for (Eigen::Index j = i + stride; j < T; j += stride) {
      if ((X.row(i) - X.row(j)).squaredNorm() < cutoff) {
        ++res.close_pairs;
        if (seq.symbols[static_cast<std::size_t>(i)] !=
            seq.symbols[static_cast<std::size_t>(j)]) {
          ++res.mismatched_pairs;
        }
      }
    }
  }
  res.mismatch_fraction = res.close_pairs > 0
                              ? static_cast<double>(res.mismatched_pairs) /
                                    static_cast<double>(res.close_pairs)
                              : 0.0;
  return res;
}

std::string to_dot(const TransitionGraph& g, bool include_self_loops) {
  std::string out = "digraph subregions {\n";
  char buf[64];
  for (std::size_t i = 0; i < g.size(); ++i) {
    out += "  " + std::to_string(g.nodes[i].value) + " [label=\"" +
           std::to_string(g.nodes[i].value) + "\"];\n";
  }
  for (Eigen::Index i = 0; i < g.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.counts.cols(); ++j) {
      if (g.counts(i, j) == 0 || (i == j && !include_self_loops)) continue;
      std::snprintf(buf, sizeof buf, "%.4f", g.edge_freq(i, j));
      out += "  " + std::to_string(g.nodes[static_cast<std::size_t>(i)].value) +
             " -> " + std::to_string(g.nodes[static_cast<std::size_t>(j)].value) +
             " [label=\"" + buf + "\"];\n";
    }
  }
  out += "}\n";
  return out;
}

nlohmann::json to_json(const TransitionGraph& g,
                       const std::optional<SpectralLayout>& layout) {
  nlohmann::json nodes = nlohmann::json::array();
  const std::int64_t length =
      g.counts.sum() + 1;  // T - 1 transitions for a sequence of length T
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    nodes.push_back({{"symbol", g.nodes[i].value},
                     {"occupation", g.occupation(idx)},
                     {"visits", std::llround(g.occupation(idx) *
                                             static_cast<double>(length))}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (Eigen::Index i = 0; i < g.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.counts.cols(); ++j) {
      if (g.counts(i, j) == 0) continue;
      edges.push_back({{"from", g.nodes[static_cast<std::size_t>(i)].value},
                       {"to", g.nodes[static_cast<std::size_t>(j)].value},
                       {"count", g.counts(i, j)},
                       {"freq", g.edge_freq(i, j)}});
    }
  }
  nlohmann::json j = {{"P", g.P}, {"length", length}, {"nodes", nodes}, {"edges", edges}};
  if (layout) {
    nlohmann::json pos = nlohmann::json::array();
    for (std::size_t i = 0; i < layout->nodes.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      pos.push_back({{"symbol", layout->nodes[i].value},
                     {"x", layout->coords(idx, 0)},
                     {"y", layout->coords(idx, 1)}});
    }
    j["layout"] = pos;
  }
  return j;
}

TransitionGraph graph_from_json(const nlohmann::json& j,
                                std::optional<SpectralLayout>* layout) {
  try {
    TransitionGraph g;
    g.P = j.at("P").get<int>();
    const auto length = j.at("length").get<std::int64_t>();
    if (length < 2) throw SchemaError("graph length must be >= 2");
    std::vector<std::int64_t> visits;
    for (const auto& node : j.at("nodes")) {
      g.nodes.push_back(Symbol{node.at("symbol").get<std::uint64_t>()});
      visits.push_back(node.at("visits").get<std::int64_t>());
    }
    if (!std::is_sorted(g.nodes.begin(), g.nodes.end())) {
      throw SchemaError("graph nodes must be sorted by symbol");
    }
    const auto n = static_cast<Eigen::Index>(g.nodes.size());
    g.counts = CountMatrix::Zero(n, n);
    for (const auto& e : j.at("edges")) {
      const auto from = g.index_of(Symbol{e.at("from").get<std::uint64_t>()});
      const auto to = g.index_of(Symbol{e.at("to").get<std::uint64_t>()});
      if (!from || !to) throw SchemaError("edge refers to an unknown node");
      g.counts(static_cast<Eigen::Index>(*from), static_cast<Eigen::Index>(*to)) =
          e.at("count").get<std::int64_t>();
    }
    fill_frequencies(g, visits, static_cast<std::size_t>(length));
    if (layout && j.contains("layout")) {
      SpectralLayout l;
      l.coords.resize(static_cast<Eigen::Index>(j["layout"].size()), 2);
      Eigen::Index r = 0;
      for (const auto& p : j["layout"]) {
        l.nodes.push_back(Symbol{p.at("symbol").get<std::uint64_t>()});
        l.coords(r, 0) = p.at("x").get<double>();
        l.coords(r, 1) = p.at("y").get<double>();
        ++r;
      }
      *layout = std::move(l);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed graph JSON: ") + e.what());
  }
}

void save_symbols_csv(const SymbolicSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,symbol\n";
  for (std::size_t t = 0; t < seq.size(); ++t) {
    out << t << ',' << seq.symbols[t].value << '\n';
  }
}

SymbolicSequence load_symbols_csv(const std::filesystem::path& path, int P) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  SymbolicSequence seq;
  seq.P = P;
  std::string line;
  std::getline(in, line);
  if (line != "t,symbol") throw ParseError(path.string() + ": bad header");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::uint64_t value = 0;
    const char* first = line.data() + (comma == std::string::npos ? 0 : comma + 1);
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (comma == std::string::npos || ec != std::errc{} || ptr != last) {
      throw ParseError(path.string() + ": bad symbol on row " + std::to_string(row));
    }
    if (value >= (std::uint64_t{1} << P)) {
      throw ParseError(path.string() + ": symbol exceeds 2^P on row " +
                       std::to_string(row));
    }
    seq.symbols.push_back(Symbol{value});
  }
  return seq;
}

}  // namespace alrnn

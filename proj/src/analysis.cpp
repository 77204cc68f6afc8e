#include "alrnn/analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>

#include "alrnn/errors.hpp"

namespace alrnn {

namespace {

constexpr std::array<std::pair<Stability, const char*>, 6> kStabilityNames{{
    {Stability::StableNode, "stable node"},
    {Stability::StableSpiral, "stable spiral"},
    {Stability::Saddle, "saddle"},
    {Stability::UnstableNode, "unstable node"},
    {Stability::UnstableSpiral, "unstable spiral"},
    {Stability::NonHyperbolic, "non-hyperbolic"},
}};

bool near_pwl_boundary(const ALRNN& model, const Eigen::VectorXd& z) {
  if (model.P() == 0) return false;
  return z.tail(model.P()).cwiseAbs().minCoeff() <= kBoundaryTolerance;
}

}  // namespace

std::string to_string(Stability s) {
  for (const auto& [value, name] : kStabilityNames) {
    if (value == s) return name;
  }
  return "unknown";
}

Stability stability_from_string(const std::string& s) {
  for (const auto& [value, name] : kStabilityNames) {
    if (s == name) return value;
  }
  throw SchemaError("unknown stability class: " + s);
}

Stability classify_stability(const Eigen::VectorXcd& eigenvalues) {
  if (eigenvalues.size() == 0) throw InvalidArgument("no eigenvalues to classify");
  const Eigen::VectorXd mod = eigenvalues.cwiseAbs();
  if (((mod.array() - 1.0).abs() <= kHyperbolicityTolerance).any()) {
    return Stability::NonHyperbolic;
  }
  Eigen::Index lead = 0;
  mod.maxCoeff(&lead);
  const bool spiral = eigenvalues(lead).imag() != 0.0;
  if ((mod.array() < 1.0).all()) {
    return spiral ? Stability::StableSpiral : Stability::StableNode;
  }
  if ((mod.array() > 1.0).all()) {
    return spiral ? Stability::UnstableSpiral : Stability::UnstableNode;
  }
  return Stability::Saddle;
}

Eigen::VectorXcd eigenvalues_of(const Eigen::MatrixXd& J) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(J, false);
  if (solver.info() != Eigen::Success) {
    throw Error("eigenvalue iteration did not converge");
  }
  return solver.eigenvalues();
}

FixedPointReport fixed_point(const ALRNN& model, Symbol s) {
  const AffineMap f = model.affine_map_of(s);
  FixedPointReport r;
  r.symbol = s;
  r.eigenvalues = eigenvalues_of(f.Wk);
  r.spectral_radius = r.eigenvalues.cwiseAbs().maxCoeff();
  r.classification = classify_stability(r.eigenvalues);

  const bool unit_eigenvalue =
      ((r.eigenvalues.array() - 1.0).abs() <= kHyperbolicityTolerance).any();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(model.M(), model.M());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(I - f.Wk);
  if (unit_eigenvalue || !lu.isInvertible()) return r;

  Eigen::VectorXd z = lu.solve(f.hk);
  // one step of iterative refinement
  z += lu.solve(f.hk - (I - f.Wk) * z);
  r.is_real = model.symbol_of(z) == s;
  r.on_boundary = near_pwl_boundary(model, z);
  r.location = std::move(z);
  return r;
}

std::vector<FixedPointReport> all_fixed_points(const ALRNN& model) {
  if (model.P() > 20) throw InvalidArgument("fixed point enumeration needs P <= 20");
  std::vector<FixedPointReport> out;
  out.reserve(model.num_symbols());
  for (std::uint64_t s = 0; s < model.num_symbols(); ++s) {
    out.push_back(fixed_point(model, Symbol{s}));
  }
  return out;
}

namespace {

bool is_canonical_primitive(const std::vector<Symbol>& w) {
  const std::size_t k = w.size();
  for (std::size_t shift = 1; shift < k; ++shift) {
    // compare w against its rotation by `shift`
    int cmp = 0;
    for (std::size_t i = 0; i < k && cmp == 0; ++i) {
      const Symbol a = w[i];
      const Symbol b = w[(i + shift) % k];
      cmp = a < b ? -1 : (b < a ? 1 : 0);
    }
    if (cmp >= 0) return false;  // a smaller or equal rotation exists
  }
  return true;
}

std::optional<CycleReport> solve_cycle(const ALRNN& model,
                                       const std::vector<Symbol>& word) {
  const int M = model.M();
  Eigen::MatrixXd Wc = Eigen::MatrixXd::Identity(M, M);
  Eigen::VectorXd hc = Eigen::VectorXd::Zero(M);
  std::vector<AffineMap> maps;
  maps.reserve(word.size());
  for (Symbol s : word) {
    maps.push_back(model.affine_map_of(s));
    Wc = maps.back().Wk * Wc;
    hc = maps.back().Wk * hc + maps.back().hk;
  }
  CycleReport r;
  r.word = word;
  r.eigenvalues = eigenvalues_of(Wc);
  r.spectral_radius = r.eigenvalues.cwiseAbs().maxCoeff();
  r.classification = classify_stability(r.eigenvalues);
  if (((r.eigenvalues.array() - 1.0).abs() <= kHyperbolicityTolerance).any()) {
    return std::nullopt;
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(M, M);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(I - Wc);
  if (!lu.isInvertible()) return std::nullopt;
  Eigen::VectorXd z = lu.solve(hc);
  z += lu.solve(hc - (I - Wc) * z);

  r.is_real = true;
  for (std::size_t i = 0; i < word.size(); ++i) {
    r.points.push_back(z);
    r.is_real = r.is_real && model.symbol_of(z) == word[i];
    r.on_boundary = r.on_boundary || near_pwl_boundary(model, z);
    z = maps[i](z);
  }
  return r;
}

}  // namespace

std::vector<CycleReport> find_cycles(const ALRNN& model, int k,
                                     const CycleSearchOptions& options) {
  if (k < 2) throw InvalidArgument("cycle length k must be >= 2");
  std::vector<std::vector<Symbol>> words;
  if (options.words) {
    for (const auto& w : *options.words) {
      if (static_cast<int>(w.size()) != k) {
        throw InvalidArgument("every candidate word must have length k");
      }
      for (Symbol s : w) {
        if (s.value >= model.num_symbols()) {
          throw InvalidArgument("word symbol exceeds 2^P");
        }
      }
      // reduce to the canonical rotation so duplicates collapse
      std::vector<Symbol> best = w;
      for (int r = 1; r < k; ++r) {
        std::vector<Symbol> rot(w.begin() + r, w.end());
        rot.insert(rot.end(), w.begin(), w.begin() + r);
        best = std::min(best, rot);
      }
      if (is_canonical_primitive(best)) words.push_back(std::move(best));
    }
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    if (words.size() > options.max_words) {
      throw InvalidArgument("too many candidate words");
    }
  } else {
    std::vector<Symbol> alphabet;
    if (options.alphabet) {
      alphabet = *options.alphabet;
      std::sort(alphabet.begin(), alphabet.end());
      alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
    } else {
      for (std::uint64_t s = 0; s < model.num_symbols(); ++s) alphabet.push_back({s});
    }
    const double tuples = std::pow(static_cast<double>(alphabet.size()), k);
    if (tuples / k > static_cast<double>(options.max_words)) {
      throw InvalidArgument(
          "cycle search space too large; restrict the alphabet or pass words");
    }
    std::vector<std::size_t> digits(static_cast<std::size_t>(k), 0);
    std::vector<Symbol> w(static_cast<std::size_t>(k));
    while (true) {
      for (int i = 0; i < k; ++i) w[i] = alphabet[digits[i]];
      if (is_canonical_primitive(w)) words.push_back(w);
      int pos = k - 1;
      while (pos >= 0 && ++digits[pos] == alphabet.size()) digits[pos--] = 0;
      if (pos < 0) break;
    }
  }

  std::vector<CycleReport> out;
  for (const auto& w : words) {
    auto r = solve_cycle(model, w);
    if (r && (r->is_real || options.include_virtual)) out.push_back(std::move(*r));
  }
  return out;
}

std::vector<std::vector<Symbol>> admissible_words(const TransitionGraph& g, int k,
                                                  std::size_t max_words) {
  if (k < 2) throw InvalidArgument("cycle length k must be >= 2");
  const auto n = static_cast<Eigen::Index>(g.size());
  std::vector<std::vector<Eigen::Index>> succ(g.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (g.counts(i, j) > 0) succ[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  std::vector<std::vector<Symbol>> out;
  std::vector<Eigen::Index> path;
  const auto extend = [&](auto&& self) -> void {
    if (static_cast<int>(path.size()) == k) {
      if (g.counts(path.back(), path.front()) == 0) return;
      std::vector<Symbol> w;
      for (Eigen::Index i : path) w.push_back(g.nodes[static_cast<std::size_t>(i)]);
      if (!is_canonical_primitive(w)) return;
      if (out.size() >= max_words) {
        throw InvalidArgument("too many admissible words");
      }
      out.push_back(std::move(w));
      return;
    }
    for (Eigen::Index next : succ[static_cast<std::size_t>(path.back())]) {
      // the canonical rotation starts with its smallest symbol
      if (next < path.front()) continue;
      path.push_back(next);
      self(self);
      path.pop_back();
    }
  };
  for (Eigen::Index start = 0; start < n; ++start) {
    path = {start};
    extend(extend);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

nlohmann::json eigen_json(const Eigen::VectorXcd& ev) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : ev) arr.push_back({{"re", v.real()}, {"im", v.imag()}});
  return arr;
}

Eigen::VectorXcd eigen_from_json(const nlohmann::json& arr) {
  Eigen::VectorXcd ev(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const auto& v : arr) {
    ev(i++) = {v.at("re").get<double>(), v.at("im").get<double>()};
  }
  return ev;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const FixedPointReport& r) {
  return {{"symbol", r.symbol.value},
          {"location", r.location ? vec_json(*r.location) : nlohmann::json(nullptr)},
          {"is_real", r.is_real},
          {"on_boundary", r.on_boundary},
          {"eigenvalues", eigen_json(r.eigenvalues)},
          {"spectral_radius", r.spectral_radius},
          {"classification", to_string(r.classification)}};
}

FixedPointReport fixed_point_from_json(const nlohmann::json& j) {
  try {
    FixedPointReport r;
    r.symbol = Symbol{j.at("symbol").get<std::uint64_t>()};
    if (!j.at("location").is_null()) r.location = vec_from_json(j["location"]);
    r.is_real = j.at("is_real").get<bool>();
    r.on_boundary = j.at("on_boundary").get<bool>();
    r.eigenvalues = eigen_from_json(j.at("eigenvalues"));
    r.spectral_radius = j.at("spectral_radius").get<double>();
    r.classification = stability_from_string(j.at("classification").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed fixed point report: ") + e.what());
  }
}

nlohmann::json to_json(const CycleReport& r) {
  nlohmann::json word = nlohmann::json::array();
  for (Symbol s : r.word) word.push_back(s.value);
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) points.push_back(vec_json(p));
  return {{"word", word},
          {"points", points},
          {"eigenvalues", eigen_json(r.eigenvalues)},
          {"spectral_radius", r.spectral_radius},
          {"classification", to_string(r.classification)},
          {"is_real", r.is_real},
          {"on_boundary", r.on_boundary}};
}

CycleReport cycle_from_json(const nlohmann::json& j) {
  try {
    CycleReport r;
    for (const auto& s : j.at("word")) r.word.push_back(Symbol{s.get<std::uint64_t>()});
    for (const auto& p : j.at("points")) r.points.push_back(vec_from_json(p));
    r.eigenvalues = eigen_from_json(j.at("eigenvalues"));
    r.spectral_radius = j.at("spectral_radius").get<double>();
    r.classification = stability_from_string(j.at("classification").get<std::string>());
    r.is_real = j.at("is_real").get<bool>();
    r.on_boundary = j.at("on_boundary").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed cycle report: ") + e.what());
  }
}

}  // namespace alrnn

#include "alrnn/model.hpp"

#include <cmath>
#include <fstream>

#include "alrnn/errors.hpp"

namespace alrnn {

namespace {
constexpr int kSchemaVersion = 1;
}

ALRNN::ALRNN(Eigen::VectorXd A, Eigen::MatrixXd W, Eigen::VectorXd h,
             Eigen::MatrixXd L, int num_pwl, int num_obs)
    : A_(std::move(A)),
      W_(std::move(W)),
      h_(std::move(h)),
      L_(std::move(L)),
      P_(num_pwl),
      N_(num_obs) {
  validate();
}

void ALRNN::validate() const {
  const Eigen::Index m = A_.size();
  if (m < 1) throw InvalidArgument("model needs at least one unit");
  if (P_ < 0 || P_ > m) throw InvalidArgument("P must lie in [0, M]");
  if (P_ > 62) throw InvalidArgument("P > 62 cannot be symbol-coded");
  if (N_ < 1 || N_ > m) throw InvalidArgument("N must lie in [1, M]");
  if (W_.rows() != m || W_.cols() != m) {
    throw InvalidArgument("W must be M x M");
  }
  if (h_.size() != m) throw InvalidArgument("h must have length M");
  if (L_.rows() != m - N_ || L_.cols() != N_) {
    throw InvalidArgument("L must be (M-N) x N");
  }
  if (!A_.allFinite() || !W_.allFinite() || !h_.allFinite() ||
      !L_.allFinite()) {
    throw InvalidArgument("model parameters must be finite");
  }
}

ALRNN ALRNN::zeros(int M, int P, int N) {
  return ALRNN(Eigen::VectorXd::Zero(M), Eigen::MatrixXd::Zero(M, M),
               Eigen::VectorXd::Zero(M), Eigen::MatrixXd::Zero(M - N, N), P,
               N);
}

LatentState ALRNN::step_unchecked(const LatentState& z) const {
  const int k = first_pwl();
  LatentState phi = z;
  for (int i = k; i < M(); ++i) phi(i) = z(i) > 0.0 ? z(i) : 0.0;
  return A_.cwiseProduct(z) + W_ * phi + h_;
}

LatentState ALRNN::step(const LatentState& z) const {
  if (z.size() != M()) throw InvalidArgument("latent state must have length M");
  LatentState next = step_unchecked(z);
  if (!next.allFinite()) throw DivergenceError("model step is not finite", 0);
  return next;
}

Symbol ALRNN::symbol_of(const LatentState& z) const {
  if (z.size() != M()) throw InvalidArgument("latent state must have length M");
  std::uint64_t v = 0;
  for (int i = first_pwl(); i < M(); ++i) {
    v = (v << 1) | (z(i) > 0.0 ? 1u : 0u);
  }
  return Symbol{v};
}

Eigen::VectorXd ALRNN::activation_mask(Symbol s) const {
  if (s.value >= num_symbols()) {
    throw InvalidArgument("symbol " + std::to_string(s.value) +
                          " outside alphabet of size " +
                          std::to_string(num_symbols()));
  }
  Eigen::VectorXd d = Eigen::VectorXd::Ones(M());
  for (int j = 0; j < P_; ++j) {
    const int bit = P_ - 1 - j;
    d(first_pwl() + j) = static_cast<double>((s.value >> bit) & 1u);
  }
  return d;
}

AffineMap ALRNN::affine_map_of(Symbol s) const {
  return AffineMap{jacobian(s), h_};
}

Eigen::MatrixXd ALRNN::jacobian(Symbol s) const {
  const Eigen::VectorXd d = activation_mask(s);
  Eigen::MatrixXd J = W_ * d.asDiagonal();
  J.diagonal() += A_;
  return J;
}

Eigen::VectorXd ALRNN::readout(const LatentState& z) const {
  if (z.size() != M()) throw InvalidArgument("latent state must have length M");
  return z.head(N_);
}

LatentState ALRNN::init_latent(const Eigen::VectorXd& x1) const {
  if (x1.size() != N_) throw InvalidArgument("observation must have length N");
  LatentState z(M());
  z.head(N_) = x1;
  z.tail(M() - N_) = L_ * x1;
  return z;
}

Eigen::Index ALRNN::parameter_size() const {
  const Eigen::Index m = M();
  return m + m * m + m + (m - N_) * N_;
}

Eigen::VectorXd ALRNN::parameters() const {
  Eigen::VectorXd theta(parameter_size());
  Eigen::Index o = 0;
  theta.segment(o, A_.size()) = A_;
  o += A_.size();
  theta.segment(o, W_.size()) = W_.reshaped();
  o += W_.size();
  theta.segment(o, h_.size()) = h_;
  o += h_.size();
  theta.segment(o, L_.size()) = L_.reshaped();
  return theta;
}

ALRNN ALRNN::with_parameters(const Eigen::VectorXd& theta) const {
  if (theta.size() != parameter_size()) {
    throw InvalidArgument("parameter vector has wrong length");
  }
  const Eigen::Index m = M();
  Eigen::Index o = 0;
  Eigen::VectorXd A = theta.segment(o, m);
  o += m;
  Eigen::MatrixXd W = theta.segment(o, m * m).reshaped(m, m);
  o += m * m;
  Eigen::VectorXd h = theta.segment(o, m);
  o += m;
  Eigen::MatrixXd L = theta.segment(o, L_.size()).reshaped(L_.rows(), L_.cols());
  return ALRNN(std::move(A), std::move(W), std::move(h), std::move(L), P_, N_);
}

Eigen::Index parameter_count(const ALRNN& model) {
  return model.parameter_size();
}

Eigen::VectorXd CategoricalDecoder::decode(const Eigen::VectorXd& zp) const {
  if (betas.cols() < 1) throw InvalidArgument("decoder needs K >= 2");
  if (zp.size() != betas.rows()) {
    throw InvalidArgument("decoder input must have length P");
  }
  const int k = num_categories();
  // logits with the reference category fixed at 0, max-shifted
  Eigen::VectorXd logits(k);
  logits.head(k - 1) = betas.transpose() * zp;
  logits(k - 1) = 0.0;
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

namespace {

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_array(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) {
    throw SchemaError(std::string("checkpoint (schema v") +
                      std::to_string(kSchemaVersion) + ") is missing field '" +
                      name + "'");
  }
  return j.at(name);
}

Eigen::VectorXd read_vector(const nlohmann::json& j, const char* name,
                            Eigen::Index n) {
  const auto& a = field(j, name);
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != n) {
    throw SchemaError(std::string("checkpoint field '") + name +
                      "' must be an array of " + std::to_string(n) + " reals");
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = a.at(i).get<double>();
  return v;
}

Eigen::MatrixXd read_matrix(const nlohmann::json& j, const char* name,
                            Eigen::Index rows, Eigen::Index cols) {
  const auto& a = field(j, name);
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows) {
    throw SchemaError(std::string("checkpoint field '") + name + "' must have " +
                      std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = a.at(i);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw SchemaError(std::string("checkpoint field '") + name + "' row " +
                        std::to_string(i) + " must have " +
                        std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const ALRNN& model, const nlohmann::json& meta) {
  return {{"schema_version", kSchemaVersion},
          {"M", model.M()},
          {"P", model.P()},
          {"N", model.N()},
          {"A", vector_array(model.A())},
          {"W", matrix_rows(model.W())},
          {"h", vector_array(model.h())},
          {"L", matrix_rows(model.L())},
          {"meta", meta}};
}

ALRNN model_from_json(const nlohmann::json& j) {
  try {
    const int version = field(j, "schema_version").get<int>();
    if (version != kSchemaVersion) {
      throw SchemaError("unsupported checkpoint schema_version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
    }
    const int m = field(j, "M").get<int>();
    const int p = field(j, "P").get<int>();
    const int n = field(j, "N").get<int>();
    if (m < 1 || p < 0 || p > m || n < 1 || n > m) {
      throw SchemaError("checkpoint has inconsistent M/P/N");
    }
    return ALRNN(read_vector(j, "A", m), read_matrix(j, "W", m, m),
                 read_vector(j, "h", m), read_matrix(j, "L", m - n, n), p, n);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ALRNN& model, const std::filesystem::path& path,
                     const nlohmann::json& meta) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(model, meta).dump(1) << '\n';
}

ALRNN load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace alrnn

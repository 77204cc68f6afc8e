#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "alrnn/errors.hpp"
#include "alrnn/evaluation.hpp"
#include "alrnn/training.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace alrnn;

namespace {

TimeSeries column(std::initializer_list<double> values) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) X(i++, 0) = v;
  return TimeSeries(X, 1.0, "test");
}

TimeSeries sine(int n, double cycles_per_sample, double phase = 0.0) {
  Eigen::MatrixXd X(n, 1);
  for (int t = 0; t < n; ++t) {
    X(t, 0) = std::sin(2.0 * std::numbers::pi * cycles_per_sample * t + phase);
  }
  return TimeSeries(X, 1.0, "sine");
}

}  // namespace

TEST_CASE("d_stsp two-bin hand case") {
  const TimeSeries truth = column({0.0, 1.0});
  const TimeSeries gen = column({0.0, 1.0, 1.0, 1.0});
  const BinningSpec spec = BinningSpec::from_data(truth, 2);
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  CHECK(d_stsp(truth, gen, spec) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(d_stsp(truth, gen, spec) == doctest::Approx(0.1438).epsilon(1e-3));
  CHECK(d_stsp(truth, truth, spec) == 0.0);
}

TEST_CASE("d_stsp concentrated generator against uniform truth") {
  const int m = 30;
  Eigen::MatrixXd X(m * 10, 1);
  for (int i = 0; i < X.rows(); ++i) X(i, 0) = (i % m) + 0.5;
  const TimeSeries truth(X, 1.0, "uniform");
  const TimeSeries gen(Eigen::MatrixXd::Constant(50, 1, 0.5), 1.0, "spike");
  const BinningSpec spec = BinningSpec::from_data(truth, m);

  // One occupied bin gets mass 1/Z, the other 29 get eps/Z.
  const double eps = 1e-7;
  const double z = 1.0 + 29.0 * eps;
  const double p = 1.0 / m;
  const double closed =
      p * std::log(p / (1.0 / z)) + (m - 1) * p * std::log(p / (eps / z));
  const double value = d_stsp(truth, gen, spec);
  CHECK(value == doctest::Approx(closed).epsilon(1e-12));
  CHECK(value > 3.0);
}

TEST_CASE("d_stsp clipping, determinism and errors") {
  const TimeSeries truth = column({0.0, 0.5, 1.0});
  const TimeSeries far = column({-100.0, 100.0, 0.5});
  const BinningSpec spec = BinningSpec::from_data(truth, 3);
  const auto counts = bin_counts(far, spec);
  REQUIRE(counts.size() == 3);
  CHECK(counts[0] == std::pair<std::uint64_t, long>{0, 1});
  CHECK(counts[2] == std::pair<std::uint64_t, long>{2, 1});
  CHECK(d_stsp(truth, far, spec) == 0.0);
  CHECK(bin_counts(far, spec) == counts);

  Eigen::MatrixXd wide = Eigen::MatrixXd::Random(20, 6);
  const TimeSeries big(wide, 1.0, "wide");
  CHECK_THROWS_AS(BinningSpec::from_data(big, 30), InvalidArgument);
  CHECK_NOTHROW(BinningSpec::from_data(big, 8));
  CHECK_THROWS_AS(BinningSpec::from_data(truth, 1), InvalidArgument);
}

TEST_CASE("d_stsp in two dimensions") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(2000, 2);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Random(2000, 2) * 0.5;
  const TimeSeries a(X, 1.0, "a"), b(Y, 1.0, "b");
  CHECK(d_stsp(a, a) == 0.0);
  CHECK(d_stsp(a, b) > 0.5);
}

TEST_CASE("hellinger hand case and bounds") {
  const Eigen::Vector2d F(0.5, 0.5), G(0.25, 0.75);
  const double expected =
      std::sqrt(1.0 - (std::sqrt(0.125) + std::sqrt(0.375)));
  CHECK(hellinger_distance(F, G) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(hellinger_distance(F, G) == doctest::Approx(0.1846).epsilon(1e-3));
  CHECK(hellinger_distance(F, F) == 0.0);
  CHECK(hellinger_distance(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 1.0);
}

TEST_CASE("d_hellinger on signals") {
  const TimeSeries a = sine(4096, 0.02);
  const TimeSeries b = sine(4096, 0.2);
  CHECK(d_hellinger(a, a) == 0.0);
  CHECK(d_hellinger(a, b, 0.0, 1.0) >= 0.95);
  CHECK(d_hellinger(a, b) == doctest::Approx(d_hellinger(b, a)).epsilon(1e-12));

  Eigen::MatrixXd noise = Eigen::MatrixXd::Random(1024, 2);
  const TimeSeries n1(noise, 1.0, "n1");
  const TimeSeries n2(Eigen::MatrixXd::Random(1024, 2), 1.0, "n2");
  const double d = d_hellinger(n1, n2);
  CHECK(d >= 0.0);
  CHECK(d <= 1.0);
  CHECK(d < 0.2);

  const TimeSeries flat(Eigen::MatrixXd::Constant(256, 1, 3.0), 1.0, "flat");
  CHECK_THROWS_AS(d_hellinger(flat, sine(256, 0.1)), InvalidArgument);
  CHECK_THROWS_AS(d_hellinger(sine(100, 0.1), sine(100, 0.1)), InvalidArgument);
}

TEST_CASE("smoothed spectrum peaks at the sine frequency") {
  const int n = 1000;
  const Eigen::VectorXd s =
      smoothed_power_spectrum(sine(n, 0.05).data().col(0), 0.0, 0.5);
  CHECK(s.size() == (n / 2 + 1) / 2);
  Eigen::Index peak = 0;
  s.maxCoeff(&peak);
  CHECK(peak == 50);
  CHECK(s.sum() == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::VectorXd smooth =
      smoothed_power_spectrum(sine(n, 0.05).data().col(0), 5.0, 0.5);
  smooth.maxCoeff(&peak);
  CHECK(std::abs(peak - 50) <= 1);
  CHECK(smooth.maxCoeff() < s.maxCoeff());
}

TEST_CASE("lyapunov exponent examples") {
  SUBCASE("one-dimensional contraction") {
    const ALRNN m(Eigen::VectorXd::Constant(1, 0.5), Eigen::MatrixXd::Zero(1, 1),
                  Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(0, 1), 0, 1);
    const double lam = lyapunov_max(m, Eigen::VectorXd::Ones(1), 100, 1000, 10);
    CHECK(lam == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  }
  SUBCASE("clamped diagonal map") {
    const JacobianStepper stepper = [](Eigen::VectorXd& x) {
      const Eigen::Matrix2d J = Eigen::Vector2d(2.0, 0.5).asDiagonal();
      x = (J * x).cwiseMax(-1.0).cwiseMin(1.0);
      return Eigen::MatrixXd(J);
    };
    const double lam =
        max_lyapunov_exponent(stepper, Eigen::Vector2d(0.3, 0.7), 10, 1000, 10);
    CHECK(lam == doctest::Approx(std::log(2.0)).epsilon(1e-3));
  }
  SUBCASE("linear model gives the log spectral radius") {
    ALRNN m = testing::random_model(4, 0, 2, 21, 0.5);
    Eigen::MatrixXd F = m.W();
    F.diagonal() += m.A();
    const double rho = F.eigenvalues().cwiseAbs().maxCoeff();
    // rescale to a contracting but not trivial map
    const double s = 0.9 / rho;
    m = ALRNN(m.A() * s, m.W() * s, m.h(), m.L(), 0, 2);
    const double expected = std::log(0.9);
    for (double start : {-3.0, 0.5, 10.0}) {
      const double lam =
          lyapunov_max(m, Eigen::VectorXd::Constant(4, start), 100, 1000000, 10);
      CHECK(std::abs(lam - expected) < 1e-6);
    }
  }
  SUBCASE("argument checks and divergence") {
    const ALRNN grow(Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Zero(1, 1),
                     Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(0, 1), 0, 1);
    CHECK_THROWS_AS(lyapunov_max(grow, Eigen::VectorXd::Ones(1), 0, 50, 10),
                    InvalidArgument);
    CHECK_THROWS_AS(lyapunov_max(grow, Eigen::VectorXd::Ones(1), 0, 1000, 10),
                    DivergenceError);
  }
}

TEST_CASE("free rollout") {
  const ALRNN identity(Eigen::Vector2d::Ones(), Eigen::Matrix2d::Zero(),
                       Eigen::Vector2d::Zero(), Eigen::MatrixXd::Zero(0, 2), 0, 2);
  const TimeSeries still = free_rollout(identity, Eigen::Vector2d(1.5, -2.0), 20);
  CHECK(still.length() == 20);
  for (Eigen::Index t = 0; t < 20; ++t) {
    CHECK(still.row(t) == Eigen::RowVector2d(1.5, -2.0));
  }

  const ALRNN m = testing::random_model(6, 2, 2, 4, 0.3);
  const Eigen::Vector2d x1(0.4, -0.1);
  CHECK(free_rollout(m, x1, 30, 29).length() == 1);
  CHECK_THROWS_AS(free_rollout(m, x1, 30, 30), InvalidArgument);

  // Forcing only at t = 0 reproduces the free trajectory.
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(30, 2);
  obs.row(0) = x1.transpose();
  const ForcedRollout forced = forced_rollout(m, obs, 100);
  const TimeSeries free = free_rollout(m, x1, 30);
  CHECK((forced.predictions - free.data()).cwiseAbs().maxCoeff() < 1e-12);

  const ALRNN grow(Eigen::VectorXd::Constant(1, 10.0), Eigen::MatrixXd::Zero(1, 1),
                   Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(0, 1), 0, 1);
  CHECK_THROWS_AS(free_rollout(grow, Eigen::VectorXd::Ones(1), 20), DivergenceError);
}

TEST_CASE("evaluate and report serialization") {
  const ALRNN m = testing::random_model(5, 2, 1, 9, 0.2);
  const TimeSeries truth = free_rollout(m, Eigen::VectorXd::Constant(1, 0.3), 3000, 1000);
  EvalOptions opt;
  opt.discard = 1000;
  opt.lyap_horizon = 2000;
  opt.lyap_transient = 100;
  const EvalReport r = evaluate(m, truth, opt);
  CHECK(r.d_stsp >= 0.0);
  CHECK(r.d_hellinger >= 0.0);
  CHECK(r.d_hellinger <= 1.0);
  CHECK(std::isfinite(r.lambda_max));
  CHECK(r.details.at("options").at("lyap_horizon") == 2000);

  const EvalReport back = eval_report_from_json(to_json(r));
  CHECK(back.d_stsp == r.d_stsp);
  CHECK(back.lambda_max == r.lambda_max);
  CHECK_THROWS_AS(eval_report_from_json(nlohmann::json{{"d_stsp", 1.0}}), SchemaError);

  const auto path = std::filesystem::temp_directory_path() / "alrnn_spectra.csv";
  save_spectra_csv(truth, 5.0, 0.5, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "dim,frequency,power");
}

#include <cmath>
#include <filesystem>
#include <numbers>

#include "tempo/external_timing.hpp"
#include "tempo/rng.hpp"
#include "test_util.hpp"

using namespace tempo;

namespace {

SensorTrace single(double y) {
  SensorTrace t;
  t.values.resize(1, 1);
  t.values(0, 0) = y;
  return t;
}

double closed_form_1d(double y, double variance) {
  return -0.5 * y * y / variance - 0.5 * std::log(2.0 * std::numbers::pi * variance);
}

}  // namespace

TEST_CASE("OU kernel values") {
  CHECK(ou_kernel(0.0, {1.0, 0.5}) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(ou_kernel(1.0, {1.0, 0.5}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(ou_kernel(-2.0, {0.5, 0.5}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK_THROWS_CATEGORY(ou_kernel(1.0, {0.0, 0.1}), ErrorCategory::kParameterDomain);
  CHECK_THROWS_CATEGORY(ou_kernel(1.0, {-1.0, 0.1}), ErrorCategory::kParameterDomain);
}

TEST_CASE("Gram matrix is symmetric Toeplitz") {
  const OUHyperparams p{0.7, 0.3};
  const Eigen::MatrixXd k = gram_matrix(5, 0.5, p);
  CHECK((k - k.transpose()).norm() == 0.0);
  for (int i = 0; i < 5; ++i) {
    CHECK(k(i, i) == doctest::Approx(1.09));
    for (int j = 0; j < 5; ++j) {
      if (i != j) CHECK(k(i, j) == doctest::Approx(std::exp(-0.7 * 0.5 * std::abs(i - j))));
    }
  }
  const Eigen::MatrixXd jittered = gram_matrix(2, 1.0, {1.0, 0.0});
  CHECK(jittered(0, 0) == 1.0 + kJitter);
}

TEST_CASE("one-dimensional log-likelihood matches the closed form") {
  for (double sigma : {0.01, 0.1, 0.5, 1.0, 2.0}) {
    for (double y : {-2.0, -0.3, 0.0, 0.7, 1.0, 3.5}) {
      const double got = gp_log_likelihood(single(y), {1.3, sigma});
      CHECK(std::abs(got - closed_form_1d(y, 1.0 + sigma * sigma)) < 1e-10);
    }
  }
  // With sigma below the jitter threshold the variance is 1 + jitter.
  CHECK(std::abs(gp_log_likelihood(single(0.0), {1.0, 0.0}) - closed_form_1d(0.0, 1.0 + kJitter)) <
        1e-10);
  CHECK(gp_log_likelihood(single(0.0), {1.0, 0.0}) == doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(gp_log_likelihood(single(1.0), {1.0, 0.0}) == doctest::Approx(-1.418939).epsilon(1e-6));
}

TEST_CASE("independent channels add") {
  Rng rng(17);
  const SensorTrace one = synthesize_trace(3.0, {1.0, 0.2}, 1, 12, rng);
  SensorTrace two;
  two.values.resize(2, 12);
  two.values.row(0) = one.values.row(0);
  two.values.row(1) = one.values.row(0);
  const OUHyperparams p{0.8, 0.2};
  CHECK(gp_log_likelihood(two, p, 0.25) == doctest::Approx(2.0 * gp_log_likelihood(one, p, 0.25)));
}

TEST_CASE("multivariate log-likelihood matches a direct dense evaluation") {
  Rng rng(23);
  const OUHyperparams p{0.6, 0.4};
  const SensorTrace t = synthesize_trace(4.0, p, 3, 7, rng);
  const Eigen::MatrixXd k = gram_matrix(7, 0.5, p);
  const Eigen::MatrixXd k_inv = k.inverse();
  const double log_det = std::log(k.determinant());
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd y = t.values.row(i).transpose();
    expected += -0.5 * y.dot(k_inv * y) - 0.5 * (log_det + 7 * std::log(2 * std::numbers::pi));
  }
  CHECK(gp_log_likelihood(t, p, 0.5) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("analytic gradient matches central differences on 100 instances") {
  Rng rng(derive_seed(99, 3));
  int passed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const OUHyperparams gen{0.3 + 2.7 * uniform01(rng), 0.05 + 0.95 * uniform01(rng)};
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(uniform_index(rng, 20));
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(uniform_index(rng, 5));
    const double spacing = 0.1 + uniform01(rng);
    const SensorTrace t = synthesize_trace(spacing * static_cast<double>(n - 1), gen, m, n, rng);
    const OUHyperparams at{0.2 + 3.0 * uniform01(rng), 0.05 + 1.0 * uniform01(rng)};
    const LikelihoodGradient g = gp_log_likelihood_gradient(t, at, spacing);
    const double hl = 1e-5 * at.lambda;
    const double hs = 1e-5 * at.sigma;
    const double fd_l = (gp_log_likelihood(t, {at.lambda + hl, at.sigma}, spacing) -
                         gp_log_likelihood(t, {at.lambda - hl, at.sigma}, spacing)) /
                        (2 * hl);
    const double fd_s = (gp_log_likelihood(t, {at.lambda, at.sigma + hs}, spacing) -
                         gp_log_likelihood(t, {at.lambda, at.sigma - hs}, spacing)) /
                        (2 * hs);
    const double err = std::hypot(g.d_lambda - fd_l, g.d_sigma - fd_s);
    const double scale = std::hypot(fd_l, fd_s);
    const bool ok = err <= 1e-4 * scale;
    CHECK_MESSAGE(ok, "trial " << trial << " err " << err << " scale " << scale);
    passed += ok ? 1 : 0;
  }
  CHECK(passed == 100);
}

TEST_CASE("fit recovers the generating lambda") {
  const OUHyperparams truth{1.0, 0.1};
  int hits = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng = make_stream(7, Stream::kSensor, static_cast<std::uint64_t>(trial));
    const SensorTrace t = synthesize_trace(199.0, truth, 10, 200, rng);
    const OUHyperparams init{0.5, 0.5};
    const FitResult r = fit_hyperparameters(t, init);
    CHECK(r.log_likelihood >= r.initial_log_likelihood);
    CHECK(r.log_likelihood == doctest::Approx(gp_log_likelihood(t, r.params)));
    hits += (r.params.lambda >= 0.8 && r.params.lambda <= 1.2) ? 1 : 0;
  }
  CHECK(hits >= 45);
}

TEST_CASE("fit on constant-zero data reports a boundary") {
  SensorTrace t;
  t.values = Eigen::MatrixXd::Zero(3, 10);
  const FitResult r = fit_hyperparameters(t, {1.0, 0.1});
  CHECK(r.at_boundary());
  CHECK(r.log_likelihood >= r.initial_log_likelihood);
}

TEST_CASE("fit needs at least three samples") {
  SensorTrace t;
  t.values = Eigen::MatrixXd::Ones(2, 2);
  CHECK_THROWS_CATEGORY(fit_hyperparameters(t, {1.0, 0.1}), ErrorCategory::kUsage);
}

TEST_CASE("elapsed-time estimate near the truth") {
  const OUHyperparams p{1.0, 0.1};
  std::vector<int> candidates{1, 2, 3, 4, 5, 6, 7, 8};
  const ElapsedTimeEstimator est(p, candidates, 20);
  int close = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng = make_stream(31, Stream::kSensor, static_cast<std::uint64_t>(trial));
    const SensorTrace t = synthesize_trace(4.0, p, 10, 20, rng);
    const int tau_hat = est.estimate(t);
    CHECK(tau_hat == estimate_elapsed_time(t, p, candidates));
    close += std::abs(tau_hat - 4) <= 1 ? 1 : 0;
  }
  CHECK(close >= 80);
}

TEST_CASE("estimate spread grows with the interval") {
  const OUHyperparams p{1.0, 0.1};
  std::vector<int> candidates{1, 2, 3, 4, 5, 6, 7, 8};
  const ElapsedTimeEstimator est(p, candidates, 20);
  std::vector<double> sd;
  for (int tau = 1; tau <= 8; ++tau) {
    double sum = 0.0;
    double sq = 0.0;
    const int n = 200;
    for (int trial = 0; trial < n; ++trial) {
      Rng rng = make_stream(41 + tau, Stream::kSensor, static_cast<std::uint64_t>(trial));
      const double e = est.estimate(synthesize_trace(tau, p, 10, 20, rng)) - tau;
      sum += e;
      sq += e * e;
    }
    const double mean = sum / n;
    sd.push_back(std::sqrt(std::max(0.0, sq / n - mean * mean)));
  }
  int inversions = 0;
  for (std::size_t i = 1; i < sd.size(); ++i) inversions += sd[i] < sd[i - 1] ? 1 : 0;
  CHECK(sd.back() >= sd.front());
  CHECK(inversions <= 2);
}

TEST_CASE("single candidate is always chosen") {
  Rng rng(5);
  const OUHyperparams p{1.0, 0.1};
  const std::vector<int> candidates{3};
  for (int trial = 0; trial < 20; ++trial) {
    const SensorTrace t = synthesize_trace(1 + trial % 8, p, 10, 20, rng);
    CHECK(estimate_elapsed_time(t, p, candidates) == 3);
  }
}

TEST_CASE("estimator input checks") {
  const OUHyperparams p{1.0, 0.1};
  CHECK_THROWS_CATEGORY(ElapsedTimeEstimator(p, {}, 20), ErrorCategory::kUsage);
  CHECK_THROWS_CATEGORY(ElapsedTimeEstimator(p, {0, 1}, 20), ErrorCategory::kParameterDomain);
  const ElapsedTimeEstimator est(p, {1, 2}, 20);
  Rng rng(1);
  CHECK_THROWS_CATEGORY(est.estimate(synthesize_trace(2, p, 2, 10, rng)), ErrorCategory::kUsage);
}

TEST_CASE("synthesized traces have the kernel moments") {
  const OUHyperparams p{1.0, 0.3};
  Rng rng(derive_seed(8, 3));
  const SensorTrace t = synthesize_trace(1.0, p, 10000, 2, rng);
  const double var0 = t.values.col(0).squaredNorm() / 10000.0;
  const double var1 = t.values.col(1).squaredNorm() / 10000.0;
  CHECK(std::abs(var0 - 1.09) < 0.05 * 1.09);
  CHECK(std::abs(var1 - 1.09) < 0.05 * 1.09);

  const OUHyperparams q{2.0, 0.0};
  const SensorTrace u = synthesize_trace(1.0, q, 10000, 2, rng);
  const double cov = u.values.col(0).dot(u.values.col(1)) / 10000.0;
  const double corr = cov / std::sqrt(u.values.col(0).squaredNorm() / 10000.0 *
                                      u.values.col(1).squaredNorm() / 10000.0);
  CHECK(std::abs(corr - std::exp(-2.0)) < 0.04);
}

TEST_CASE("synthesis is deterministic per seed") {
  Rng a(77);
  Rng b(77);
  const OUHyperparams p{1.0, 0.1};
  const SensorTrace x = synthesize_trace(5.0, p, 4, 9, a);
  const SensorTrace y = synthesize_trace(5.0, p, 4, 9, b);
  CHECK(x.values == y.values);
  Rng c(1);
  CHECK_THROWS_CATEGORY(synthesize_trace(5.0, p, 0, 9, c), ErrorCategory::kUsage);
}

TEST_CASE("trace CSV round trip") {
  Rng rng(3);
  const SensorTrace t = synthesize_trace(2.0, {1.0, 0.1}, 3, 6, rng);
  const auto path = std::filesystem::temp_directory_path() / "tempo_trace_roundtrip.csv";
  write_trace_csv(t, path);
  const SensorTrace back = read_trace_csv(path);
  CHECK(back.values == t.values);
  std::filesystem::remove(path);
  CHECK_THROWS_CATEGORY(read_trace_csv(path), ErrorCategory::kIo);
}

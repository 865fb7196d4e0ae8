#include <memory>

#include "tempo/simulation.hpp"
#include "test_util.hpp"

using namespace tempo;

namespace {

StepLog at(Phase phase, Action action) {
  StepLog s;
  s.phase = phase;
  s.action = action;
  return s;
}

EpisodeLog optimal_log(int tau, int L) {
  EpisodeLog log;
  log.tau = tau;
  log.tau_hat = tau;
  log.steps.push_back(at(Phase::kInit, Action::kStart));
  log.steps.push_back(at(Phase::kTone1, Action::kWait));
  for (int i = 0; i < tau; ++i) log.steps.push_back(at(Phase::kInterval, Action::kWait));
  log.steps.push_back(at(Phase::kTone2, classify(tau, L)));
  return log;
}

}  // namespace

TEST_CASE("episode log classification helpers") {
  EpisodeLog good = optimal_log(3, 8);
  CHECK(good.reached_tone2());
  CHECK(good.choice() == Action::kShort);
  CHECK(good.correct(8));
  CHECK(good.optimal(8));

  EpisodeLog wrong = optimal_log(6, 8);
  wrong.steps.back().action = Action::kShort;
  CHECK(wrong.choice() == Action::kShort);
  CHECK_FALSE(wrong.correct(8));
  CHECK_FALSE(wrong.optimal(8));

  EpisodeLog aborted;
  aborted.tau = 2;
  aborted.steps.push_back(at(Phase::kInit, Action::kLong));
  CHECK_FALSE(aborted.reached_tone2());
  CHECK_FALSE(aborted.choice().has_value());
  CHECK_FALSE(aborted.correct(8));
}

TEST_CASE("probe episodes follow the optimal sequence without learning") {
  Simulation sim(AgentParams{}, TaskConfig{}, TimingModel::exact(), 4);
  const auto weights = sim.agent().weights;
  const double eps = sim.agent().epsilon;
  for (int tau = 1; tau <= 8; ++tau) {
    const EpisodeLog log = sim.run_episode(EpisodeMode::kProbe, tau);
    CHECK(log.tau == tau);
    CHECK(log.tau_hat == tau);
    CHECK(log.optimal(8));
    CHECK(log.steps.back().reward == 1.0);
  }
  CHECK(sim.agent().weights == weights);
  CHECK(sim.agent().epsilon == eps);
}

TEST_CASE("greedy episodes do not learn") {
  Simulation sim(AgentParams{}, TaskConfig{}, TimingModel::exact(), 5);
  for (int i = 0; i < 20; ++i) sim.run_episode();
  const auto weights = sim.agent().weights;
  const double eps = sim.agent().epsilon;
  for (int i = 0; i < 10; ++i) sim.run_episode(EpisodeMode::kGreedy);
  CHECK(sim.agent().weights == weights);
  CHECK(sim.agent().epsilon == eps);
}

TEST_CASE("training decays exploration once per step") {
  AgentParams p;
  Simulation sim(p, TaskConfig{}, TimingModel::exact(), 6);
  const EpisodeLog log = sim.run_episode();
  double expected = p.epsilon0;
  for (const StepLog& s : log.steps) {
    CHECK(s.epsilon == doctest::Approx(expected).epsilon(1e-15));
    expected *= p.rho;
  }
  CHECK(sim.episodes_run() == 1);
}

TEST_CASE("simulations are reproducible and interleaving evaluation leaves training unchanged") {
  Simulation a(AgentParams{}, TaskConfig{}, TimingModel::exact(), 12);
  Simulation b(AgentParams{}, TaskConfig{}, TimingModel::exact(), 12);
  for (int i = 0; i < 100; ++i) {
    const EpisodeLog x = a.run_episode();
    b.run_episode(EpisodeMode::kProbe, 2);
    const EpisodeLog y = b.run_episode();
    REQUIRE(x.steps.size() == y.steps.size());
    CHECK(x.tau == y.tau);
    for (std::size_t k = 0; k < x.steps.size(); ++k) {
      CHECK(x.steps[k].action == y.steps[k].action);
      CHECK(x.steps[k].delta == y.steps[k].delta);
    }
  }
}

TEST_CASE("perceived interval comes from the estimator") {
  TimingModel timing;
  timing.sensor = {1.0, 0.1};
  timing.channels = 10;
  timing.estimator = std::make_shared<ElapsedTimeEstimator>(
      OUHyperparams{1.0, 0.1}, std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}, 20);
  Simulation sim(AgentParams{}, TaskConfig{}, timing, 21);
  int exact = 0;
  int close = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const EpisodeLog log = sim.run_episode(EpisodeMode::kProbe, 1 + i % 8);
    REQUIRE(log.tau_hat >= 1);
    REQUIRE(log.tau_hat <= 8);
    exact += log.tau_hat == log.tau ? 1 : 0;
    close += std::abs(log.tau_hat - log.tau) <= 1 ? 1 : 0;
  }
  CHECK(exact < n);
  CHECK(close > n / 2);
}

TEST_CASE("training learns the discrimination with exact timing") {
  Simulation sim(AgentParams{}, TaskConfig{}, TimingModel::exact(), 1);
  for (int i = 0; i < 2000; ++i) sim.run_episode();
  int optimal = 0;
  for (int tau : {1, 8}) {
    for (int i = 0; i < 50; ++i) optimal += sim.run_episode(EpisodeMode::kGreedy, tau).optimal(8);
  }
  CHECK(optimal >= 95);
}

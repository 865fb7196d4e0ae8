#include <cmath>
#include <vector>

#include "tempo/behavior_inference.hpp"
#include "tempo/rng.hpp"
#include "tempo/td_agent.hpp"
#include "test_util.hpp"

using namespace tempo;

namespace {

AgentState blank_agent(std::size_t dim) {
  AgentState s;
  for (int a = 0; a < kNumActions; ++a) {
    s.weights[a].assign(dim, 0.0);
    s.traces[a].assign(dim, 0.0);
  }
  return s;
}

// Upper 1% point of the chi-square distribution with 3 degrees of freedom.
constexpr double kChi2Crit3 = 11.344866730144373;

}  // namespace

TEST_CASE("q value is a dot product") {
  AgentState s = blank_agent(4);
  const std::vector<double> x{0.25, 0.5, 0.75, 1.0};
  for (Action a : kAllActions) CHECK(q_value(s, x, a) == 0.0);
  s.weights[index_of(Action::kWait)][2] = 1.0;
  const std::vector<double> y{0.0, 0.0, 0.25, 0.0};
  CHECK(q_value(s, y, Action::kWait) == 0.25);

  AgentState t = blank_agent(2);
  t.weights[index_of(Action::kShort)] = {0.1, -0.2};
  const std::vector<double> z{0.5, 0.5};
  CHECK(q_value(t, z, Action::kShort) == doctest::Approx(-0.05).epsilon(1e-14));
  const QValues q = q_values(t, z);
  CHECK(q[index_of(Action::kShort)] == doctest::Approx(-0.05));
  CHECK(q[index_of(Action::kLong)] == 0.0);
}

TEST_CASE("q value rejects a dimension mismatch") {
  AgentState s = blank_agent(3);
  const std::vector<double> x{1.0, 2.0};
  CHECK_THROWS_CATEGORY(q_value(s, x, Action::kStart), ErrorCategory::kInternal);
}

TEST_CASE("td error") {
  CHECK(td_error(1.0, 0.0, 0.0, 0.95) == 1.0);
  CHECK(td_error(0.0, 2.0, 0.95 * 2.0, 0.95) == doctest::Approx(0.0));
  CHECK(td_error(1.0, 0.5, 0.2, 0.9) == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("single feature update, trace first") {
  AgentParams p;
  p.alpha = 0.1;
  p.gamma = 0.9;
  p.eta = 0.8;
  AgentState s = blank_agent(1);
  s.traces[index_of(Action::kWait)][0] = 1.0;
  s.weights[index_of(Action::kWait)][0] = 0.3;
  const std::vector<double> x{0.5};
  update(s, 1.0, x, Action::kWait, p);
  CHECK(s.traces[index_of(Action::kWait)][0] == doctest::Approx(1.22).epsilon(1e-14));
  CHECK(s.weights[index_of(Action::kWait)][0] == doctest::Approx(0.3 + 0.122).epsilon(1e-14));
}

TEST_CASE("single feature update, weights first") {
  AgentParams p;
  p.alpha = 0.1;
  p.gamma = 0.9;
  p.eta = 0.8;
  p.update_order = UpdateOrder::kWeightsFirst;
  AgentState s = blank_agent(1);
  s.traces[index_of(Action::kWait)][0] = 1.0;
  const std::vector<double> x{0.5};
  update(s, 1.0, x, Action::kWait, p);
  // The weight step uses the previous trace, before decay and accumulation.
  CHECK(s.weights[index_of(Action::kWait)][0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(s.traces[index_of(Action::kWait)][0] == doctest::Approx(1.22).epsilon(1e-14));
}

TEST_CASE("untaken actions only decay their traces") {
  AgentParams p;
  p.gamma = 0.9;
  p.eta = 0.8;
  AgentState s = blank_agent(2);
  s.traces[index_of(Action::kLong)] = {1.0, 2.0};
  s.weights[index_of(Action::kLong)] = {0.4, 0.5};
  const std::vector<double> x{0.5, 0.5};
  update(s, 3.0, x, Action::kShort, p);
  CHECK(s.traces[index_of(Action::kLong)][0] == doctest::Approx(0.72));
  CHECK(s.traces[index_of(Action::kLong)][1] == doctest::Approx(1.44));
  CHECK(s.weights[index_of(Action::kLong)] == std::vector<double>{0.4, 0.5});
}

TEST_CASE("zero error leaves weights unchanged while traces move") {
  AgentParams p;
  AgentState s = blank_agent(2);
  s.weights[0] = {0.1, 0.2};
  const std::vector<double> x{0.3, 0.4};
  update(s, 0.0, x, Action::kStart, p);
  CHECK(s.weights[0] == std::vector<double>{0.1, 0.2});
  CHECK(s.traces[0][0] == doctest::Approx(0.3));

  AgentState z = blank_agent(2);
  const std::vector<double> zero{0.0, 0.0};
  update(z, 1.0, zero, Action::kStart, p);
  for (const auto& e : z.traces) CHECK(e == std::vector<double>{0.0, 0.0});
}

TEST_CASE("greedy selection and tie break") {
  CHECK(greedy_action({0.0, 0.0, 0.0, 0.0}) == Action::kStart);
  CHECK(greedy_action({0.0, 1.0, 1.0, 0.5}) == Action::kWait);
  CHECK(greedy_action({-1.0, -2.0, -0.5, -3.0}) == Action::kShort);
  // argmax is invariant to a common additive shift
  const QValues q{0.1, 0.7, 0.3, 0.2};
  QValues shifted = q;
  for (double& v : shifted) v += 42.0;
  CHECK(greedy_action(q) == greedy_action(shifted));
}

TEST_CASE("epsilon zero always exploits") {
  AgentState s = blank_agent(1);
  s.epsilon = 0.0;
  Rng rng(3);
  const QValues q{0.1, 0.2, 0.9, 0.3};
  for (int i = 0; i < 1000; ++i) CHECK(select_action(s, q, rng) == Action::kShort);
}

TEST_CASE("epsilon one is uniform over actions") {
  AgentState s = blank_agent(1);
  s.epsilon = 1.0;
  Rng rng(derive_seed(2024, 1));
  const QValues q{0.0, 5.0, 0.0, 0.0};
  const int n = 10000;
  std::array<int, kNumActions> counts{};
  for (int i = 0; i < n; ++i) ++counts[index_of(select_action(s, q, rng))];
  const double expected = n / 4.0;
  const double sd = std::sqrt(n * 0.25 * 0.75);
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - expected) <= 3.0 * sd);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < kChi2Crit3);
}

TEST_CASE("epsilon decay") {
  AgentState s;
  s.epsilon = 0.5;
  decay_epsilon(s, 1.0);
  CHECK(s.epsilon == 0.5);
  for (int i = 0; i < 100; ++i) decay_epsilon(s, 0.99);
  CHECK(s.epsilon == doctest::Approx(0.5 * std::pow(0.99, 100)).epsilon(1e-12));
  CHECK(s.epsilon == doctest::Approx(0.1830).epsilon(1e-3));
  s.epsilon = 0.0;
  decay_epsilon(s, 0.7);
  CHECK(s.epsilon == 0.0);
}

TEST_CASE("epsilon crosses 0.01 after 919 decays") {
  const auto eps = epsilon_schedule(1.0, 0.995, 1000);
  std::size_t first = eps.size();
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (eps[i] <= 0.01) {
      first = i;
      break;
    }
  }
  CHECK(first == static_cast<std::size_t>(std::ceil(std::log(0.01) / std::log(0.995))));
  CHECK(first == 919);
  AgentState s;
  s.epsilon = 1.0;
  for (std::size_t i = 0; i < 919; ++i) decay_epsilon(s, 0.995);
  CHECK(s.epsilon == eps[919]);
}

TEST_CASE("fresh agent") {
  AgentParams p;
  Rng rng(11);
  AgentState s = make_agent(p, rng);
  CHECK(s.dimension() == p.micro.dimension());
  CHECK(s.epsilon == p.epsilon0);
  for (int a = 0; a < kNumActions; ++a) {
    for (double w : s.weights[a]) {
      CHECK(w >= 0.0);
      CHECK(w < p.weight_init_scale);
    }
    for (double e : s.traces[a]) CHECK(e == 0.0);
  }
  s.traces[1][0] = 3.0;
  s.features.deploy(0, 0);
  s.epsilon = 0.25;
  const auto w = s.weights;
  begin_episode(s);
  CHECK(s.traces[1][0] == 0.0);
  CHECK(s.features.deployments().empty());
  CHECK(s.epsilon == 0.25);
  CHECK(s.weights == w);
}

TEST_CASE("agent parameter validation") {
  AgentParams p;
  CHECK_NOTHROW(p.validate());
  auto bad = [](auto mutate) {
    AgentParams q;
    mutate(q);
    CHECK_THROWS_CATEGORY(q.validate(), ErrorCategory::kParameterDomain);
  };
  bad([](AgentParams& q) { q.alpha = 0.0; });
  bad([](AgentParams& q) { q.gamma = 1.5; });
  bad([](AgentParams& q) { q.eta = -0.1; });
  bad([](AgentParams& q) { q.epsilon0 = 1.1; });
  bad([](AgentParams& q) { q.rho = 1.5; });
  bad([](AgentParams& q) { q.micro.m = 0; });
}

TEST_CASE("TD(lambda) converges on a fixed two-step chain") {
  // Two states with one-hot features; the second step earns reward 1.
  AgentParams p;
  p.alpha = 0.1;
  AgentState s = blank_agent(2);
  const std::vector<double> x0{1.0, 0.0};
  const std::vector<double> x1{0.0, 1.0};
  double last = 1.0;
  for (int episode = 0; episode < 500; ++episode) {
    for (auto& e : s.traces) std::fill(e.begin(), e.end(), 0.0);
    const QValues q1 = q_values(s, x1);
    const double max1 = *std::max_element(q1.begin(), q1.end());
    const double d0 = td_error(0.0, max1, q_value(s, x0, Action::kWait), p.gamma);
    update(s, d0, x0, Action::kWait, p);
    const double d1 = td_error(1.0, 0.0, q_value(s, x1, Action::kShort), p.gamma);
    update(s, d1, x1, Action::kShort, p);
    last = d1;
  }
  CHECK(std::abs(last) < 1e-3);
  CHECK(q_value(s, x1, Action::kShort) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(q_value(s, x0, Action::kWait) == doctest::Approx(p.gamma).epsilon(1e-2));
}

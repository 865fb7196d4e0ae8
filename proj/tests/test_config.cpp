#include <filesystem>
#include <fstream>

#include "tempo/config.hpp"
#include "test_util.hpp"

using namespace tempo;

TEST_CASE("default config is valid and round trips") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  const std::string text = dump_config(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(dump_config(back) == text);
  CHECK(back.agent == c.agent);
}

TEST_CASE("a modified config round trips through a file") {
  ExperimentConfig c;
  c.experiment = "scalability";
  c.agent.alpha = 0.125;
  c.agent.update_order = UpdateOrder::kWeightsFirst;
  c.task.max_interval = 6;
  c.q_trace_taus = {1, 6};
  c.timing.enabled = false;
  c.seeds = {3, 18446744073709551615ull};
  c.inference.masks = default_scalability_masks();
  for (auto& m : c.inference.masks) {
    std::erase_if(m.hidden_taus, [](int t) { return t > 6; });
  }
  c.inference.candidates = {2, 4, 6};
  c.inference.truth = 4;
  const auto path = std::filesystem::temp_directory_path() / "tempo_config_roundtrip.json";
  {
    std::ofstream out(path);
    out << dump_config(c);
  }
  const ExperimentConfig back = load_config(path);
  CHECK(dump_config(back) == dump_config(c));
  CHECK(back.seeds[1] == 18446744073709551615ull);
  CHECK(back.agent.update_order == UpdateOrder::kWeightsFirst);
  std::filesystem::remove(path);
  CHECK_THROWS_CATEGORY(load_config(path), ErrorCategory::kIo);
}

TEST_CASE("partial configs keep defaults") {
  const ExperimentConfig c = parse_config(R"({"experiment": "infer", "agent": {"alpha": 0.2}})");
  CHECK(c.experiment == "infer");
  CHECK(c.agent.alpha == 0.2);
  CHECK(c.agent.gamma == AgentParams{}.gamma);
  CHECK(c.episodes == 2000);
}

TEST_CASE("invalid configs are rejected") {
  const char* bad[] = {
      R"({"episodes": 0})",
      R"({"experiment": "dance"})",
      R"({"unknown_key": 1})",
      R"({"agent": {"alpha": "fast"}})",
      R"({"agent": {"gamma": 1.5}})",
      R"({"seeds": []})",
      R"({"task": {"L": 1}})",
      R"({"inference": {"parameter": "colour"}})",
      R"({"inference": {"masks": [{"hidden_actions": ["start", "wait", "short", "long"]}]}})",
      R"({"inference": {"masks": [{"hidden_taus": [9]}]}})",
      R"(not json)",
      R"([1, 2])",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_CATEGORY(parse_config(text), ErrorCategory::kConfig);
  }
}

TEST_CASE("named parameter access") {
  AgentParams p;
  CHECK(get_parameter(p, "alpha") == p.alpha);
  CHECK(get_parameter(p, "m") == p.micro.m);
  const AgentParams q = with_parameter(p, "m", 3.6);
  CHECK(q.micro.m == 4);
  const AgentParams r = with_parameter(p, "beta", 0.1);
  CHECK(r.micro.beta == 0.1);
  for (const char* name : kParameterNames) {
    CHECK(with_parameter(p, name, get_parameter(p, name)) == p);
  }
  CHECK_THROWS_CATEGORY(get_parameter(p, "colour"), ErrorCategory::kConfig);
  CHECK_THROWS_CATEGORY(with_parameter(p, "colour", 1.0), ErrorCategory::kConfig);
}

TEST_CASE("standard scalability masks") {
  const auto masks = default_scalability_masks();
  REQUIRE(masks.size() == 6);
  CHECK(masks[0].empty());
  CHECK(masks[1].hidden_taus.size() == 7);
  CHECK(masks[1].hidden_actions.empty());
  CHECK(masks[2].hides_action(Action::kLong));
  CHECK(masks[2].hides_tau(2));
  CHECK_FALSE(masks[2].hides_tau(1));
  CHECK(masks[4].hidden_actions.size() == 3);
  for (const auto& m : masks) CHECK_NOTHROW(m.validate(8));
}

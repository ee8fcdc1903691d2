#include "doctest.h"
#include "fixtures.hpp"
#include "ttr/scenario.hpp"

#include <algorithm>
#include <filesystem>

using namespace ttr;
using nlohmann::json;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

std::size_t count_model(const ScenarioConfig& cfg, const std::string& model) {
  return static_cast<std::size_t>(
      std::count_if(cfg.devices.begin(), cfg.devices.end(), [&](const DeviceSpec& d) { return d.model == model; }));
}

}  // namespace

TEST_CASE("ICS catalog composition") {
  const auto cfg = builtin_ics_catalog();
  CHECK(validate_scenario(cfg).empty());
  CHECK(cfg.devices.size() == 26);
  CHECK(count_model(cfg, "iPad") == 1);
  CHECK(count_model(cfg, "Pixel 8") == 8);
  CHECK(count_model(cfg, "DELL 5200") == 3);
  CHECK(count_model(cfg, "DELL 5820") == 3);
  CHECK(count_model(cfg, "Lambda") == 2);
  CHECK(count_model(cfg, "Rosbot Plus") == 4);
  CHECK(count_model(cfg, "Robofleet") == 5);

  const auto twc = *cfg.find_type("TWC");
  CHECK(cfg.type(twc).processing_density == 16800.0);
  const auto& lambda = *std::find_if(cfg.devices.begin(), cfg.devices.end(),
                                     [](const DeviceSpec& d) { return d.model == "Lambda"; });
  CHECK(lambda.supported_types.size() == 4);
  CHECK(lambda.cpu_hz == 4.5e9);

  // Every model with 3DM: iPad 1, Pixel 8, Lambda 2, Rosbot 4, Robofleet 5.
  const auto tdm = *cfg.find_type("3DM");
  std::size_t cluster = 0;
  for (const auto& d : cfg.devices) cluster += d.supports(tdm);
  CHECK(cluster == 1 + 8 + 2 + 4 + 5);
}

TEST_CASE("catalog is deterministic per seed") {
  CHECK(builtin_ics_catalog() == builtin_ics_catalog());
  CHECK_FALSE(builtin_ics_catalog(1) == builtin_ics_catalog(2));
}

TEST_CASE("per-model reliability override") {
  IcsLayout layout;
  layout.model_reliability["Robofleet"] = {0.3, 0.3};
  const auto cfg = builtin_ics_catalog(layout);
  for (const auto& d : cfg.devices)
    for (auto [s, r] : d.reliability) CHECK(r == (d.model == "Robofleet" ? 0.3 : kDefaultReliability));
}

TEST_CASE("JSON round trip") {
  const auto cfg = builtin_ics_catalog();
  CHECK(scenario_from_json(scenario_to_json(cfg)) == cfg);
  const auto path = std::filesystem::temp_directory_path() / "ttr_scenario_roundtrip.json";
  save_scenario(cfg, path);
  CHECK(load_scenario(path) == cfg);
  std::filesystem::remove(path);
}

TEST_CASE("bundled data matches the built-in catalog") {
  CHECK(load_scenario(std::filesystem::path(TTR_DATA_DIR) / "ics.json") == builtin_ics_catalog());
}

TEST_CASE("parser rejects malformed scenarios") {
  const json base = scenario_to_json(builtin_ics_catalog());

  SUBCASE("unknown key") {
    json j = base;
    j["colour"] = "blue";
    CHECK_THROWS_AS(scenario_from_json(j), ScenarioError);
  }
  SUBCASE("duplicate device id") {
    json j = base;
    j["devices"][1]["id"] = j["devices"][0]["id"];
    CHECK_THROWS_AS(scenario_from_json(j), ScenarioError);
  }
  SUBCASE("trust weights off the simplex") {
    json j = base;
    j["trust_weights"]["beta"] = {0.3, 0.3, 0.3};
    CHECK_THROWS_AS(scenario_from_json(j), ScenarioError);
  }
  SUBCASE("unknown type reference") {
    json j = base;
    j["devices"][0]["supported_types"].push_back("XR");
    CHECK_THROWS_AS(scenario_from_json(j), ScenarioError);
  }
}

TEST_CASE("validation reports ranges and shapes") {
  auto cfg = builtin_ics_catalog();
  SUBCASE("negative reliability") {
    cfg.devices[3].reliability.begin()->second = -0.1;
    CHECK(has_code(validate_scenario(cfg), "range"));
  }
  SUBCASE("beta sums to 0.9") {
    cfg.trust_weights.beta = {0.3, 0.3, 0.3};
    CHECK(has_code(validate_scenario(cfg), "simplex"));
  }
  SUBCASE("duplicate id") {
    cfg.devices[2].id = cfg.devices[1].id;
    CHECK(has_code(validate_scenario(cfg), "duplicate"));
  }
  SUBCASE("link loss shape") {
    cfg.link_loss.pop_back();
    CHECK_FALSE(validate_scenario(cfg).empty());
  }
}

TEST_CASE("task validation") {
  const auto cfg = builtin_ics_catalog();
  Task t{0, {{*cfg.find_type("FR"), 8e6, 0.6, 0.2, 0.0}}};
  CHECK(validate_task(t, cfg).empty());
  t.subtasks[0].min_trust = 1.2;
  CHECK(has_code(validate_task(t, cfg), "range"));
  t.subtasks[0].min_trust = 0.2;
  t.subtasks[0].deadline_s = 0.0;
  CHECK_FALSE(validate_task(t, cfg).empty());
  t.subtasks[0].deadline_s = 0.6;
  t.initiator = 99;
  CHECK_FALSE(validate_task(t, cfg).empty());
}

TEST_CASE("task JSON round trip") {
  const auto cfg = builtin_ics_catalog();
  Task t{0, {{*cfg.find_type("3DM"), 4e7, 0.6, 0.2, 8e7}, {*cfg.find_type("TWC"), 8e6, 0.6, 0.3, 0.0}}};
  CHECK(task_from_json(task_to_json(t, cfg), cfg) == t);
}

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ttr/model.hpp"

namespace ttr {

struct Violation {
  std::string code;  // "range", "duplicate", "simplex", "reference", "shape", ...
  std::string path;  // JSON-pointer-like location, e.g. "/devices/3/reliability/FR"
  std::string message;
};

std::vector<Violation> validate_scenario(const ScenarioConfig& cfg);

// Subtask and task invariants against a given scenario.
std::vector<Violation> validate_task(const Task& task, const ScenarioConfig& cfg);

// Parse and validate; throws ScenarioError naming the first problem.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path);

// Task documents reference devices and types by id/name.
Task task_from_json(const nlohmann::json& j, const ScenarioConfig& cfg);
nlohmann::json task_to_json(const Task& task, const ScenarioConfig& cfg);

// Seed of the bundled layout.
inline constexpr std::uint64_t kIcsLayoutSeed = 20240611;

struct IcsLayout {
  std::uint64_t seed = kIcsLayoutSeed;
  double area_m = 30.0;
  double max_link_loss = 0.06;
  double reliability_min = kDefaultReliability;  // per (device, type), uniform in [min, max]
  double reliability_max = kDefaultReliability;
  std::map<std::string, std::pair<double, double>> model_reliability;  // per model name, overrides the range
};

// The 26-device ICS fleet: iPad, 8 Pixel 8, 3 DELL 5200, 3 DELL 5820,
// 2 Lambda, 4 Rosbot Plus, 5 Robofleet, with four task types.
// Positions are uniform in an area_m x area_m square and nominal link losses
// are uniform in [0, max_link_loss], all drawn from the layout seed.
ScenarioConfig builtin_ics_catalog(const IcsLayout& layout = {});
inline ScenarioConfig builtin_ics_catalog(std::uint64_t seed) {
  IcsLayout layout;
  layout.seed = seed;
  return builtin_ics_catalog(layout);
}

// One catalog device model (CPU, power, supported type names).
struct DeviceModel {
  std::string name;
  double cpu_hz;
  double tx_power_w;
  std::vector<std::string> types;
};

const std::vector<DeviceModel>& ics_device_models();
const DeviceModel& ics_device_model(const std::string& name);
std::vector<TaskType> ics_task_types();

}  // namespace ttr

#pragma once

// Domain value types shared by every module. Units are SI throughout:
// bits, seconds, joules, watts, Hz and bits/second.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ttr {

using DeviceIndex = std::size_t;
using TypeIndex = std::size_t;

inline constexpr double kBitsPerMegabyte = 8e6;

struct TaskType {
  TypeIndex id = 0;
  std::string name;
  double processing_density = 0.0;  // CPU cycles per bit

  bool operator==(const TaskType&) const = default;
};

struct DeviceSpec {
  std::string id;
  std::string model;               // catalog label, informational
  double cpu_hz = 0.0;
  std::vector<double> position;    // 2 or 3 coordinates in meters; may be empty for matrix channels
  double tx_power_w = 0.0;
  std::vector<TypeIndex> supported_types;   // sorted, unique
  std::map<TypeIndex, double> reliability;  // per-type execution success probability (simulation only)

  bool supports(TypeIndex s) const;
  double reliability_for(TypeIndex s) const;

  bool operator==(const DeviceSpec&) const = default;
};

inline constexpr double kDefaultReliability = 0.95;

struct Subtask {
  TypeIndex task_type = 0;
  double size_bits = 0.0;
  double deadline_s = 0.0;
  double min_trust = 0.0;
  double min_rate_bps = 0.0;

  bool operator==(const Subtask&) const = default;
};

struct Task {
  DeviceIndex initiator = 0;
  std::vector<Subtask> subtasks;

  bool operator==(const Task&) const = default;
};

struct ChannelParams {
  double bandwidth_hz = 2e7;
  double noise_w = 1e-13;
  double alpha = 4.0;

  bool operator==(const ChannelParams&) const = default;
};

enum class ChannelModel { pathloss, matrix };

struct Channel {
  ChannelModel model = ChannelModel::pathloss;
  ChannelParams params;
  std::vector<std::vector<double>> rates_bps;  // used when model == matrix

  bool operator==(const Channel&) const = default;
};

struct ValueWeights {
  double xi_time = 0.5;
  double xi_energy = 0.5;

  bool operator==(const ValueWeights&) const = default;
};

struct TrustWeights {
  std::array<double, 3> beta{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<double, 3> delta{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double neutral_prior = 0.5;

  bool operator==(const TrustWeights&) const = default;
};

struct ReplicatorParams {
  std::size_t max_iters = 1000;
  double convergence_eps = 1e-9;
  std::optional<double> ess_threshold;  // defaults to 1/(2N) when unset

  bool operator==(const ReplicatorParams&) const = default;
};

struct ScenarioConfig {
  std::vector<TaskType> task_types;
  std::vector<DeviceSpec> devices;
  Channel channel;
  std::vector<std::vector<double>> link_loss;  // nominal packet loss per ordered pair
  TrustWeights trust_weights;
  ValueWeights value_weights;
  double loss_threshold = 0.05;
  ReplicatorParams replicator;
  std::uint64_t rng_seed = 0;

  std::optional<DeviceIndex> find_device(const std::string& id) const;
  std::optional<TypeIndex> find_type(const std::string& name) const;
  const TaskType& type(TypeIndex s) const { return task_types.at(s); }

  bool operator==(const ScenarioConfig&) const = default;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ttr

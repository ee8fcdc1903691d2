#pragma once

#include <string>
#include <vector>

#include "ttr/model.hpp"

namespace fixtures {

inline ttr::DeviceSpec device(std::string id, double cpu_hz, std::vector<double> pos,
                              std::vector<ttr::TypeIndex> types, double tx_power_w = 0.7) {
  ttr::DeviceSpec d;
  d.id = std::move(id);
  d.cpu_hz = cpu_hz;
  d.position = std::move(pos);
  d.tx_power_w = tx_power_w;
  d.supported_types = std::move(types);
  for (auto s : d.supported_types) d.reliability[s] = ttr::kDefaultReliability;
  return d;
}

// Types 0..n-1 named t0, t1, ... with the given densities.
inline std::vector<ttr::TaskType> types(std::vector<double> densities) {
  std::vector<ttr::TaskType> out;
  for (std::size_t s = 0; s < densities.size(); ++s) out.push_back({s, "t" + std::to_string(s), densities[s]});
  return out;
}

inline ttr::ScenarioConfig scenario(std::vector<ttr::TaskType> t, std::vector<ttr::DeviceSpec> d,
                                    double loss = 0.0) {
  ttr::ScenarioConfig cfg;
  cfg.task_types = std::move(t);
  cfg.devices = std::move(d);
  const std::size_t n = cfg.devices.size();
  cfg.link_loss.assign(n, std::vector<double>(n, loss));
  for (std::size_t i = 0; i < n; ++i) cfg.link_loss[i][i] = 0.0;
  return cfg;
}

}  // namespace fixtures

#pragma once

// Collaboration cost model and value of task completion.

#include <span>
#include <stdexcept>
#include <vector>

#include "ttr/model.hpp"

namespace ttr {

// Energy per CPU cycle is kEnergyCoefficient * f^2 with f in GHz.
inline constexpr double kEnergyCoefficient = 1e-11;

class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompletionRecord {
  double t_tra_s = 0.0;
  double t_exe_s = 0.0;
  double t_total_s = 0.0;
  double e_tra_j = 0.0;
  double e_exe_j = 0.0;
  double e_total_j = 0.0;
};

struct ValueBreakdown {
  double value = 0.0;
  double value_time = 0.0;
  double value_energy = 0.0;
  double expected_energy_j = 0.0;
  CompletionRecord cost;
};

double distance(const DeviceSpec& a, const DeviceSpec& b);

// Shannon rate over the |g_i - g_j|^-alpha path-loss channel.
double transmission_rate(const DeviceSpec& sender, const DeviceSpec& receiver,
                         const ChannelParams& channel);

// Precomputed sender -> receiver rates for a fleet (pathloss or explicit matrix).
class RateTable {
 public:
  RateTable() = default;
  RateTable(std::span<const DeviceSpec> devices, const Channel& channel);

  double rate(DeviceIndex from, DeviceIndex to) const { return rates_[from * n_ + to]; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> rates_;
};

CompletionRecord collaboration_cost(const Subtask& b, double processing_density,
                                    const DeviceSpec& initiator, const DeviceSpec& collaborator,
                                    double rate_bps);
CompletionRecord collaboration_cost(const Subtask& b, double processing_density,
                                    const DeviceSpec& initiator, const DeviceSpec& collaborator,
                                    const ChannelParams& channel);

// Energy the initiator would spend running the subtask itself.
double expected_self_energy(const Subtask& b, double processing_density, const DeviceSpec& initiator);

double value_time(double t_total_s, double deadline_s);
double value_energy(double e_actual_j, double e_expected_j);

ValueBreakdown value_of_completion(const Subtask& b, double processing_density,
                                   const DeviceSpec& initiator, const DeviceSpec& collaborator,
                                   double rate_bps, const ValueWeights& w);

}  // namespace ttr

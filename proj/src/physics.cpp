#include "ttr/physics.hpp"

#include <cmath>

namespace ttr {

double distance(const DeviceSpec& a, const DeviceSpec& b) {
  if (a.position.size() != b.position.size() || a.position.empty())
    throw PhysicsError("devices " + a.id + " and " + b.id + " lack comparable positions");
  double sq = 0.0;
  for (std::size_t k = 0; k < a.position.size(); ++k) {
    const double d = a.position[k] - b.position[k];
    sq += d * d;
  }
  return std::sqrt(sq);
}

double transmission_rate(const DeviceSpec& sender, const DeviceSpec& receiver,
                         const ChannelParams& channel) {
  const double dist = distance(sender, receiver);
  if (!(dist > 0.0))
    throw PhysicsError("zero distance between " + sender.id + " and " + receiver.id +
                       ": channel gain undefined");
  const double gain = std::pow(dist, -channel.alpha);
  return channel.bandwidth_hz * std::log2(1.0 + sender.tx_power_w * gain / channel.noise_w);
}

RateTable::RateTable(std::span<const DeviceSpec> devices, const Channel& channel)
    : n_(devices.size()), rates_(n_ * n_, 0.0) {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      if (i == j) continue;
      rates_[i * n_ + j] = channel.model == ChannelModel::matrix
                               ? channel.rates_bps.at(i).at(j)
                               : transmission_rate(devices[i], devices[j], channel.params);
    }
}

CompletionRecord collaboration_cost(const Subtask& b, double processing_density,
                                    const DeviceSpec& initiator, const DeviceSpec& collaborator,
                                    double rate_bps) {
  if (!(rate_bps > 0.0))
    throw PhysicsError("non-positive transmission rate from " + initiator.id + " to " + collaborator.id);
  const double cycles = b.size_bits * processing_density;
  const double f_ghz = collaborator.cpu_hz / 1e9;
  CompletionRecord r;
  r.t_tra_s = b.size_bits / rate_bps;
  r.e_tra_j = initiator.tx_power_w * r.t_tra_s;
  r.t_exe_s = cycles / collaborator.cpu_hz;
  r.e_exe_j = kEnergyCoefficient * f_ghz * f_ghz * cycles;
  r.t_total_s = r.t_tra_s + r.t_exe_s;
  r.e_total_j = r.e_tra_j + r.e_exe_j;
  return r;
}

CompletionRecord collaboration_cost(const Subtask& b, double processing_density,
                                    const DeviceSpec& initiator, const DeviceSpec& collaborator,
                                    const ChannelParams& channel) {
  return collaboration_cost(b, processing_density, initiator, collaborator,
                            transmission_rate(initiator, collaborator, channel));
}

double expected_self_energy(const Subtask& b, double processing_density, const DeviceSpec& initiator) {
  const double f_ghz = initiator.cpu_hz / 1e9;
  return kEnergyCoefficient * f_ghz * f_ghz * b.size_bits * processing_density;
}

double value_time(double t_total_s, double deadline_s) {
  if (t_total_s <= deadline_s) return 1.0;
  return std::exp(-std::abs((t_total_s - deadline_s) / deadline_s));
}

double value_energy(double e_actual_j, double e_expected_j) {
  if (!(e_expected_j > 0.0)) throw PhysicsError("expected energy must be > 0");
  if (e_expected_j >= e_actual_j) return 1.0;
  return std::exp(-std::abs((e_actual_j - e_expected_j) / e_expected_j));
}

ValueBreakdown value_of_completion(const Subtask& b, double processing_density,
                                   const DeviceSpec& initiator, const DeviceSpec& collaborator,
                                   double rate_bps, const ValueWeights& w) {
  ValueBreakdown v;
  v.cost = collaboration_cost(b, processing_density, initiator, collaborator, rate_bps);
  v.expected_energy_j = expected_self_energy(b, processing_density, initiator);
  v.value_time = value_time(v.cost.t_total_s, b.deadline_s);
  v.value_energy = value_energy(v.cost.e_total_j, v.expected_energy_j);
  v.value = w.xi_time * v.value_time + w.xi_energy * v.value_energy;
  return v;
}

}  // namespace ttr

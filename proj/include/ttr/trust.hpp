#pragma once

// Interaction ledger, pairwise trust, group-trust hypergraph, directed trust
// graph and task-specific trust.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "ttr/model.hpp"
#include "ttr/rng.hpp"

namespace ttr {

class TrustError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InteractionRecord {
  DeviceIndex initiator = 0;
  DeviceIndex collaborator = 0;
  TypeIndex task_type = 0;
  bool b_tra = false;
  bool b_exe = false;
  bool b_ret = false;

  bool operator==(const InteractionRecord&) const = default;
};

struct Tally {
  std::size_t total = 0;
  std::size_t successes = 0;

  // successes / total, or `prior` with no history.
  double rate_or(double prior) const {
    return total == 0 ? prior : static_cast<double>(successes) / static_cast<double>(total);
  }
  bool operator==(const Tally&) const = default;
};

// Append-only history of delegated subtasks.
class TrustLedger {
 public:
  // Throws TrustError unless b_ret == b_tra && b_exe.
  void append(const InteractionRecord& r);

  Tally pair(DeviceIndex initiator, DeviceIndex collaborator) const;
  Tally typed(DeviceIndex initiator, DeviceIndex collaborator, TypeIndex s) const;

  const std::vector<InteractionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  bool operator==(const TrustLedger& o) const { return records_ == o.records_; }

 private:
  std::vector<InteractionRecord> records_;
  std::map<std::pair<DeviceIndex, DeviceIndex>, Tally> by_pair_;
  std::map<std::tuple<DeviceIndex, DeviceIndex, TypeIndex>, Tally> by_type_;
};

// JSON lines, one record per line, devices and types by id/name.
void write_ledger_jsonl(std::ostream& out, const TrustLedger& ledger, const ScenarioConfig& cfg);
TrustLedger read_ledger_jsonl(std::istream& in, const ScenarioConfig& cfg);

// Type clusters C_s and the potential-cooperator sets G_x (which exclude x).
struct Clusters {
  std::vector<std::vector<DeviceIndex>> members;       // per type, ascending
  std::vector<std::vector<DeviceIndex>> cooperators;   // per device, ascending

  static Clusters build(std::span<const DeviceSpec> fleet, std::size_t type_count);
};

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b);

// R(a_i, a_j): cooperativeness, relationship proximity and overall success rate.
double pairwise_trust(const TrustLedger& ledger, std::span<const DeviceSpec> fleet,
                      const Clusters& clusters, DeviceIndex i, DeviceIndex j,
                      const TrustWeights& w);

struct GroupHyperedge {
  TypeIndex type = 0;
  DeviceIndex center = 0;
  double weight = 0.0;  // T^s_{a_j}
};

struct GroupTrustHypergraph {
  Clusters clusters;
  std::vector<GroupHyperedge> hyperedges;
  std::vector<std::vector<std::optional<double>>> group_trust;  // [device][type]

  // Mean of the device's group trust over the clusters containing it.
  double overall_trust(DeviceIndex j) const;
};

GroupTrustHypergraph build_group_trust_hypergraph(std::span<const DeviceSpec> fleet,
                                                  std::size_t type_count, const TrustLedger& ledger,
                                                  const TrustWeights& w);

struct DirectedEdge {
  DeviceIndex from = 0;
  DeviceIndex to = 0;
  double weight = 0.0;  // beta1 * T_{a_j} + beta2 * R(a_i, a_j)
};

class DirectedTrustGraph {
 public:
  void set(DeviceIndex from, DeviceIndex to, double weight);
  std::optional<double> weight(DeviceIndex from, DeviceIndex to) const;
  std::vector<DirectedEdge> edges() const;  // ordered by (from, to)
  std::size_t size() const { return weights_.size(); }

 private:
  std::map<std::pair<DeviceIndex, DeviceIndex>, double> weights_;
};

DirectedTrustGraph decompose_to_directed(const GroupTrustHypergraph& grp,
                                         std::span<const DeviceSpec> fleet,
                                         const TrustLedger& ledger, const TrustWeights& w);

// w_{i->j} + beta3 * per-type success rate. Throws TrustError when there is no
// edge i->j or either endpoint lacks type s.
double task_specific_trust(const DirectedTrustGraph& graph, const TrustLedger& ledger,
                           std::span<const DeviceSpec> fleet, DeviceIndex i, DeviceIndex j,
                           TypeIndex s, const TrustWeights& w);

// beta3 = 0 with beta1 kept and beta2 absorbing the old beta3.
TrustWeights one_to_one_weights(const TrustWeights& w);

// Everything needed to answer trust queries for one ledger snapshot.
class TrustModel {
 public:
  TrustModel(std::span<const DeviceSpec> fleet, std::size_t type_count, const TrustLedger& ledger,
             const TrustWeights& w);

  // Task-specific trust, or nullopt when no edge / type unsupported.
  std::optional<double> trust(DeviceIndex i, DeviceIndex j, TypeIndex s) const;

  const GroupTrustHypergraph& group() const { return group_; }
  const DirectedTrustGraph& graph() const { return graph_; }
  const TrustWeights& weights() const { return weights_; }
  const TrustLedger& ledger() const { return *ledger_; }
  std::span<const DeviceSpec> fleet() const { return fleet_; }

 private:
  std::span<const DeviceSpec> fleet_;
  const TrustLedger* ledger_;
  TrustWeights weights_;
  GroupTrustHypergraph group_;
  DirectedTrustGraph graph_;
};

struct OutcomeDraw {
  double packet_loss = 0.0;  // sampled eta^pkt
  bool exec_success = false;
};

// eta^pkt ~ U(0, 2 * nominal) clamped to [0,1]; execution ~ Bernoulli(reliability).
// The execution draw is always consumed so streams stay aligned.
OutcomeDraw sample_outcome(Rng& rng, double nominal_loss, double reliability);

InteractionRecord record_outcome(TrustLedger& ledger, DeviceIndex i, DeviceIndex j, TypeIndex s,
                                 const OutcomeDraw& draw, double loss_threshold);

InteractionRecord simulate_outcome(TrustLedger& ledger, const ScenarioConfig& cfg, DeviceIndex i,
                                   DeviceIndex j, TypeIndex s, Rng& rng);

struct BootstrapParams {
  std::size_t max_subtasks = 4;
};

// Runs n_tasks random delegations and records their outcomes. Each task picks a
// uniform initiator, 1..max_subtasks subtasks of types the initiator supports,
// and assigns each to a uniform supporting peer. Returns the number of
// subtasks generated.
std::size_t bootstrap_trust(const ScenarioConfig& cfg, TrustLedger& ledger, std::size_t n_tasks,
                            Rng& rng, const BootstrapParams& params = {});

}  // namespace ttr

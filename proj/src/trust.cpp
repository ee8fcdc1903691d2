#include "ttr/trust.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

namespace ttr {

void TrustLedger::append(const InteractionRecord& r) {
  if (r.b_ret != (r.b_tra && r.b_exe))
    throw TrustError("interaction record violates b_ret = b_tra * b_exe");
  records_.push_back(r);
  auto& p = by_pair_[{r.initiator, r.collaborator}];
  auto& t = by_type_[{r.initiator, r.collaborator, r.task_type}];
  ++p.total;
  ++t.total;
  if (r.b_ret) {
    ++p.successes;
    ++t.successes;
  }
}

Tally TrustLedger::pair(DeviceIndex initiator, DeviceIndex collaborator) const {
  auto it = by_pair_.find({initiator, collaborator});
  return it == by_pair_.end() ? Tally{} : it->second;
}

Tally TrustLedger::typed(DeviceIndex initiator, DeviceIndex collaborator, TypeIndex s) const {
  auto it = by_type_.find({initiator, collaborator, s});
  return it == by_type_.end() ? Tally{} : it->second;
}

void write_ledger_jsonl(std::ostream& out, const TrustLedger& ledger, const ScenarioConfig& cfg) {
  for (const auto& r : ledger.records()) {
    nlohmann::json j{{"initiator", cfg.devices.at(r.initiator).id},
                     {"collaborator", cfg.devices.at(r.collaborator).id},
                     {"task_type", cfg.type(r.task_type).name},
                     {"b_tra", r.b_tra ? 1 : 0},
                     {"b_exe", r.b_exe ? 1 : 0},
                     {"b_ret", r.b_ret ? 1 : 0}};
    out << j.dump() << '\n';
  }
}

TrustLedger read_ledger_jsonl(std::istream& in, const ScenarioConfig& cfg) {
  TrustLedger ledger;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto i = cfg.find_device(j.at("initiator").get<std::string>());
      auto k = cfg.find_device(j.at("collaborator").get<std::string>());
      auto s = cfg.find_type(j.at("task_type").get<std::string>());
      if (!i || !k || !s) throw TrustError("unknown device or task type");
      ledger.append({*i, *k, *s, j.at("b_tra").get<int>() != 0, j.at("b_exe").get<int>() != 0,
                     j.at("b_ret").get<int>() != 0});
    } catch (const std::exception& e) {
      throw TrustError("ledger line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ledger;
}

Clusters Clusters::build(std::span<const DeviceSpec> fleet, std::size_t type_count) {
  Clusters c;
  c.members.resize(type_count);
  for (DeviceIndex j = 0; j < fleet.size(); ++j)
    for (TypeIndex s : fleet[j].supported_types) c.members.at(s).push_back(j);

  c.cooperators.resize(fleet.size());
  for (DeviceIndex x = 0; x < fleet.size(); ++x) {
    auto& g = c.cooperators[x];
    for (TypeIndex s : fleet[x].supported_types)
      g.insert(g.end(), c.members[s].begin(), c.members[s].end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    g.erase(std::remove(g.begin(), g.end(), x), g.end());
  }
  return c;
}

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::size_t inter = 0, i = 0, k = 0;
  while (i < a.size() && k < b.size()) {
    if (a[i] < b[k]) {
      ++i;
    } else if (b[k] < a[i]) {
      ++k;
    } else {
      ++inter;
      ++i;
      ++k;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double pairwise_trust(const TrustLedger& ledger, std::span<const DeviceSpec> fleet,
                      const Clusters& clusters, DeviceIndex i, DeviceIndex j,
                      const TrustWeights& w) {
  const double coop = jaccard(fleet[i].supported_types, fleet[j].supported_types);
  const double proximity = jaccard(clusters.cooperators[i], clusters.cooperators[j]);
  const double history = ledger.pair(i, j).rate_or(w.neutral_prior);
  return w.delta[0] * coop + w.delta[1] * proximity + w.delta[2] * history;
}

double GroupTrustHypergraph::overall_trust(DeviceIndex j) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& t : group_trust.at(j))
    if (t) {
      sum += *t;
      ++count;
    }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

GroupTrustHypergraph build_group_trust_hypergraph(std::span<const DeviceSpec> fleet,
                                                  std::size_t type_count, const TrustLedger& ledger,
                                                  const TrustWeights& w) {
  GroupTrustHypergraph h;
  h.clusters = Clusters::build(fleet, type_count);
  h.group_trust.assign(fleet.size(), std::vector<std::optional<double>>(type_count));
  for (TypeIndex s = 0; s < type_count; ++s) {
    const auto& cluster = h.clusters.members[s];
    for (DeviceIndex j : cluster) {
      double weight = w.neutral_prior;
      if (cluster.size() >= 2) {
        double sum = 0.0;
        for (DeviceIndex i : cluster)
          if (i != j) sum += pairwise_trust(ledger, fleet, h.clusters, i, j, w);
        weight = sum / static_cast<double>(cluster.size() - 1);
      }
      h.hyperedges.push_back({s, j, weight});
      h.group_trust[j][s] = weight;
    }
  }
  return h;
}

void DirectedTrustGraph::set(DeviceIndex from, DeviceIndex to, double weight) {
  weights_[{from, to}] = weight;
}

std::optional<double> DirectedTrustGraph::weight(DeviceIndex from, DeviceIndex to) const {
  auto it = weights_.find({from, to});
  if (it == weights_.end()) return std::nullopt;
  return it->second;
}

std::vector<DirectedEdge> DirectedTrustGraph::edges() const {
  std::vector<DirectedEdge> out;
  out.reserve(weights_.size());
  for (const auto& [key, w] : weights_) out.push_back({key.first, key.second, w});
  return out;
}

DirectedTrustGraph decompose_to_directed(const GroupTrustHypergraph& grp,
                                         std::span<const DeviceSpec> fleet,
                                         const TrustLedger& ledger, const TrustWeights& w) {
  DirectedTrustGraph g;
  std::vector<double> overall(fleet.size());
  for (DeviceIndex j = 0; j < fleet.size(); ++j) overall[j] = grp.overall_trust(j);
  for (const auto& e : grp.hyperedges) {
    for (DeviceIndex i : grp.clusters.members[e.type]) {
      if (i == e.center || g.weight(i, e.center)) continue;
      const double r = pairwise_trust(ledger, fleet, grp.clusters, i, e.center, w);
      g.set(i, e.center, w.beta[0] * overall[e.center] + w.beta[1] * r);
    }
  }
  return g;
}

double task_specific_trust(const DirectedTrustGraph& graph, const TrustLedger& ledger,
                           std::span<const DeviceSpec> fleet, DeviceIndex i, DeviceIndex j,
                           TypeIndex s, const TrustWeights& w) {
  auto edge = graph.weight(i, j);
  if (!edge) throw TrustError("no trust edge " + fleet[i].id + " -> " + fleet[j].id);
  if (!fleet[i].supports(s) || !fleet[j].supports(s))
    throw TrustError("task type " + std::to_string(s) + " not supported by both " + fleet[i].id +
                     " and " + fleet[j].id);
  return *edge + w.beta[2] * ledger.typed(i, j, s).rate_or(w.neutral_prior);
}

TrustWeights one_to_one_weights(const TrustWeights& w) {
  TrustWeights o = w;
  o.beta = {w.beta[0], w.beta[1] + w.beta[2], 0.0};
  return o;
}

TrustModel::TrustModel(std::span<const DeviceSpec> fleet, std::size_t type_count,
                       const TrustLedger& ledger, const TrustWeights& w)
    : fleet_(fleet),
      ledger_(&ledger),
      weights_(w),
      group_(build_group_trust_hypergraph(fleet, type_count, ledger, w)),
      graph_(decompose_to_directed(group_, fleet, ledger, w)) {}

std::optional<double> TrustModel::trust(DeviceIndex i, DeviceIndex j, TypeIndex s) const {
  auto edge = graph_.weight(i, j);
  if (!edge || !fleet_[i].supports(s) || !fleet_[j].supports(s)) return std::nullopt;
  return *edge + weights_.beta[2] * ledger_->typed(i, j, s).rate_or(weights_.neutral_prior);
}

OutcomeDraw sample_outcome(Rng& rng, double nominal_loss, double reliability) {
  OutcomeDraw d;
  d.packet_loss = std::clamp(rng.uniform(0.0, 2.0 * nominal_loss), 0.0, 1.0);
  d.exec_success = rng.bernoulli(reliability);
  return d;
}

InteractionRecord record_outcome(TrustLedger& ledger, DeviceIndex i, DeviceIndex j, TypeIndex s,
                                 const OutcomeDraw& draw, double loss_threshold) {
  InteractionRecord r;
  r.initiator = i;
  r.collaborator = j;
  r.task_type = s;
  r.b_tra = draw.packet_loss <= loss_threshold;
  r.b_exe = r.b_tra && draw.exec_success;
  r.b_ret = r.b_tra && r.b_exe;
  ledger.append(r);
  return r;
}

InteractionRecord simulate_outcome(TrustLedger& ledger, const ScenarioConfig& cfg, DeviceIndex i,
                                   DeviceIndex j, TypeIndex s, Rng& rng) {
  const auto draw = sample_outcome(rng, cfg.link_loss.at(i).at(j), cfg.devices.at(j).reliability_for(s));
  return record_outcome(ledger, i, j, s, draw, cfg.loss_threshold);
}

std::size_t bootstrap_trust(const ScenarioConfig& cfg, TrustLedger& ledger, std::size_t n_tasks,
                            Rng& rng, const BootstrapParams& params) {
  const auto& fleet = cfg.devices;
  const auto clusters = Clusters::build(fleet, cfg.task_types.size());
  std::size_t generated = 0;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const DeviceIndex initiator = static_cast<DeviceIndex>(rng.index(fleet.size()));
    std::vector<TypeIndex> eligible;
    for (TypeIndex s : fleet[initiator].supported_types)
      if (clusters.members[s].size() >= 2) eligible.push_back(s);
    if (eligible.empty()) continue;
    const std::size_t m_count = 1 + static_cast<std::size_t>(rng.index(std::max<std::size_t>(1, params.max_subtasks)));
    for (std::size_t m = 0; m < m_count; ++m) {
      const TypeIndex s = eligible[rng.index(eligible.size())];
      std::vector<DeviceIndex> peers;
      for (DeviceIndex j : clusters.members[s])
        if (j != initiator) peers.push_back(j);
      const DeviceIndex j = peers[rng.index(peers.size())];
      simulate_outcome(ledger, cfg, initiator, j, s, rng);
      ++generated;
    }
  }
  return generated;
}

}  // namespace ttr

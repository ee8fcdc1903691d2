#include "ttr/hypergraph.hpp"

#include <ostream>
#include <stdexcept>

namespace ttr {

ResourceHypergraph::ResourceHypergraph(std::vector<DeviceVertex> devices, std::vector<TaskType> types)
    : devices_(std::move(devices)), types_(std::move(types)) {}

void ResourceHypergraph::add(const ResourceHyperedge& e) {
  if (e.initiator == e.collaborator) throw std::invalid_argument("resource hyperedge must join two devices");
  auto& bucket = index_[{e.initiator, e.task_type}];
  for (std::size_t k : bucket)
    if (edges_[k].collaborator == e.collaborator)
      throw std::invalid_argument("duplicate resource hyperedge (" + devices_[e.initiator].id + ", " +
                       types_[e.task_type].name + ", " + devices_[e.collaborator].id + ")");
  bucket.push_back(edges_.size());
  edges_.push_back(e);
}

std::span<const std::size_t> ResourceHypergraph::edges_from(DeviceIndex initiator, TypeIndex s) const {
  auto it = index_.find({initiator, s});
  if (it == index_.end()) return {};
  return it->second;
}

ResourceHypergraph build_resource_hypergraph(const DirectedTrustGraph& graph, const TrustLedger& ledger,
                                             std::span<const DeviceSpec> fleet,
                                             std::span<const TaskType> types, const TrustWeights& w) {
  std::vector<DeviceVertex> vertices;
  vertices.reserve(fleet.size());
  for (const auto& d : fleet) vertices.push_back({d.id, d.cpu_hz, d.position, d.tx_power_w});
  ResourceHypergraph h(std::move(vertices), {types.begin(), types.end()});

  for (const auto& e : graph.edges()) {
    const auto& from = fleet[e.from];
    const auto& to = fleet[e.to];
    for (TypeIndex s : from.supported_types) {
      if (!to.supports(s)) continue;
      const double typed = ledger.typed(e.from, e.to, s).rate_or(w.neutral_prior);
      h.add({e.from, s, e.to, e.weight + w.beta[2] * typed});
    }
  }
  return h;
}

std::vector<ResourceHyperedge> candidate_resource_edges(const ResourceHypergraph& h,
                                                        DeviceIndex initiator, TypeIndex s) {
  std::vector<ResourceHyperedge> out;
  for (std::size_t k : h.edges_from(initiator, s)) out.push_back(h.hyperedges()[k]);
  return out;
}

TaskHypergraph build_task_hypergraph(const Task& task) {
  TaskHypergraph h;
  h.initiator = task.initiator;
  h.subtasks = task.subtasks;
  for (std::size_t m = 0; m < task.subtasks.size(); ++m)
    h.hyperedges.push_back({task.initiator, m, task.subtasks[m].task_type, task.subtasks[m].min_trust});
  return h;
}

std::size_t IncidenceMatrix::column_sum(std::size_t e) const {
  std::size_t sum = 0;
  for (std::size_t v = 0; v < rows_; ++v) sum += at(v, e);
  return sum;
}

void IncidenceMatrix::write_csv(std::ostream& out, std::span<const std::string> row_labels) const {
  out << "vertex";
  for (std::size_t e = 0; e < cols_; ++e) out << ",e" << e;
  out << '\n';
  for (std::size_t v = 0; v < rows_; ++v) {
    out << (v < row_labels.size() ? row_labels[v] : std::to_string(v));
    for (std::size_t e = 0; e < cols_; ++e) out << ',' << static_cast<int>(at(v, e));
    out << '\n';
  }
}

IncidenceMatrix incidence_matrix(const ResourceHypergraph& h) {
  const auto edges = h.hyperedges();
  IncidenceMatrix m(h.vertex_count(), edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    m.set(h.device_vertex(edges[e].initiator), e);
    m.set(h.type_vertex(edges[e].task_type), e);
    m.set(h.device_vertex(edges[e].collaborator), e);
  }
  return m;
}

IncidenceMatrix incidence_matrix(const TaskHypergraph& h) {
  IncidenceMatrix m(h.vertex_count(), h.hyperedges.size());
  for (std::size_t e = 0; e < h.hyperedges.size(); ++e) {
    m.set(0, e);
    m.set(1 + h.hyperedges[e].subtask, e);
    m.set(h.phi_vertex(), e);
  }
  return m;
}

std::vector<std::string> vertex_labels(const ResourceHypergraph& h) {
  std::vector<std::string> out;
  for (const auto& d : h.devices()) out.push_back(d.id);
  for (const auto& t : h.types()) out.push_back(t.name);
  return out;
}

std::vector<std::string> vertex_labels(const TaskHypergraph& h) {
  std::vector<std::string> out{"initiator"};
  for (std::size_t m = 0; m < h.subtasks.size(); ++m) out.push_back("b" + std::to_string(m + 1));
  out.push_back("phi");
  return out;
}

nlohmann::json to_json(const ResourceHypergraph& h) {
  using nlohmann::json;
  json devices = json::array();
  for (const auto& d : h.devices())
    devices.push_back({{"id", d.id}, {"cpu_hz", d.cpu_hz}, {"position", d.position},
                       {"tx_power_w", d.tx_power_w}});
  json types = json::array();
  for (const auto& t : h.types())
    types.push_back({{"name", t.name}, {"processing_density", t.processing_density}});
  json edges = json::array();
  for (const auto& e : h.hyperedges())
    edges.push_back({{"initiator", h.devices()[e.initiator].id},
                     {"task_type", h.types()[e.task_type].name},
                     {"collaborator", h.devices()[e.collaborator].id},
                     {"weight", e.weight}});
  return {{"devices", devices}, {"task_types", types}, {"hyperedges", edges}};
}

nlohmann::json to_json(const TaskHypergraph& h, const ScenarioConfig& cfg) {
  using nlohmann::json;
  json subtasks = json::array();
  for (const auto& b : h.subtasks)
    subtasks.push_back({{"task_type", cfg.type(b.task_type).name},
                        {"size_bits", b.size_bits},
                        {"deadline_s", b.deadline_s},
                        {"min_trust", b.min_trust},
                        {"min_rate_bps", b.min_rate_bps}});
  json edges = json::array();
  for (const auto& e : h.hyperedges)
    edges.push_back({{"initiator", cfg.devices.at(e.initiator).id},
                     {"subtask", e.subtask},
                     {"task_type", cfg.type(e.task_type).name},
                     {"target", "phi"},
                     {"weight", e.weight}});
  return {{"initiator", cfg.devices.at(h.initiator).id}, {"subtasks", subtasks}, {"hyperedges", edges}};
}

}  // namespace ttr

#pragma once

// Directed 3-uniform hypergraphs: the task-specific trusted resource
// hypergraph (a_i, s, a_j) and the task hypergraph (a_i', b_m, phi).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "json.hpp"
#include "ttr/model.hpp"
#include "ttr/trust.hpp"

namespace ttr {

struct ResourceHyperedge {
  DeviceIndex initiator = 0;
  TypeIndex task_type = 0;
  DeviceIndex collaborator = 0;
  double weight = 0.0;  // T^s_{a_i,a_j}
};

// Physical attributes attached to a device vertex.
struct DeviceVertex {
  std::string id;
  double cpu_hz = 0.0;
  std::vector<double> position;
  double tx_power_w = 0.0;
};

// Vertices are numbered devices first (0..J-1), then task types (J..J+S-1).
class ResourceHypergraph {
 public:
  ResourceHypergraph(std::vector<DeviceVertex> devices, std::vector<TaskType> types);

  // Rejects a second hyperedge for the same (initiator, type, collaborator).
  void add(const ResourceHyperedge& e);

  std::span<const ResourceHyperedge> hyperedges() const { return edges_; }
  std::span<const DeviceVertex> devices() const { return devices_; }
  std::span<const TaskType> types() const { return types_; }
  std::size_t vertex_count() const { return devices_.size() + types_.size(); }
  std::size_t device_vertex(DeviceIndex j) const { return j; }
  std::size_t type_vertex(TypeIndex s) const { return devices_.size() + s; }

  // Indices into hyperedges() with the given initiator and type, by collaborator.
  std::span<const std::size_t> edges_from(DeviceIndex initiator, TypeIndex s) const;

 private:
  std::vector<DeviceVertex> devices_;
  std::vector<TaskType> types_;
  std::vector<ResourceHyperedge> edges_;
  std::map<std::pair<DeviceIndex, TypeIndex>, std::vector<std::size_t>> index_;
};

// Expands every directed trust edge into one hyperedge per shared task type,
// weighted by task-specific trust.
ResourceHypergraph build_resource_hypergraph(const DirectedTrustGraph& graph, const TrustLedger& ledger,
                                             std::span<const DeviceSpec> fleet,
                                             std::span<const TaskType> types, const TrustWeights& w);

std::vector<ResourceHyperedge> candidate_resource_edges(const ResourceHypergraph& h,
                                                        DeviceIndex initiator, TypeIndex s);

struct TaskHyperedge {
  DeviceIndex initiator = 0;
  std::size_t subtask = 0;  // index into the task's subtasks
  TypeIndex task_type = 0;
  double weight = 0.0;      // minimum trust demand
};

// Vertices: 0 = initiator, 1..M = subtasks, M+1 = the shared virtual node phi.
struct TaskHypergraph {
  DeviceIndex initiator = 0;
  std::vector<Subtask> subtasks;  // vertex weights
  std::vector<TaskHyperedge> hyperedges;

  std::size_t vertex_count() const { return subtasks.size() + 2; }
  std::size_t phi_vertex() const { return subtasks.size() + 1; }
};

TaskHypergraph build_task_hypergraph(const Task& task);

class IncidenceMatrix {
 public:
  IncidenceMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t at(std::size_t v, std::size_t e) const { return cells_[v * cols_ + e]; }
  void set(std::size_t v, std::size_t e) { cells_[v * cols_ + e] = 1; }
  std::size_t column_sum(std::size_t e) const;

  void write_csv(std::ostream& out, std::span<const std::string> row_labels) const;

 private:
  std::size_t rows_, cols_;
  std::vector<std::uint8_t> cells_;
};

IncidenceMatrix incidence_matrix(const ResourceHypergraph& h);
IncidenceMatrix incidence_matrix(const TaskHypergraph& h);

std::vector<std::string> vertex_labels(const ResourceHypergraph& h);
std::vector<std::string> vertex_labels(const TaskHypergraph& h);

nlohmann::json to_json(const ResourceHypergraph& h);
nlohmann::json to_json(const TaskHypergraph& h, const ScenarioConfig& cfg);

}  // namespace ttr

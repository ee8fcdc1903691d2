#pragma once

// Task-resource matching: hypergraph matching as a three-player clustering
// game solved with replicator dynamics, plus baselines and an exhaustive
// oracle for the underlying assignment problem.

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttr/hypergraph.hpp"
#include "ttr/model.hpp"
#include "ttr/physics.hpp"
#include "ttr/rng.hpp"

namespace ttr {

// Trust of initiator i in collaborator j for type s; nullopt when no
// relationship exists.
using TrustView = std::function<std::optional<double>(DeviceIndex, DeviceIndex, TypeIndex)>;

// Everything a solver needs about one task. Spans and the rate table are
// borrowed and must outlive the instance.
struct ProblemInstance {
  std::span<const DeviceSpec> devices;
  std::span<const TaskType> task_types;
  const RateTable* rates = nullptr;
  ValueWeights value_weights;
  Task task;
  TrustView trust;

  const Subtask& subtask(std::size_t m) const { return task.subtasks[m]; }
  std::size_t subtask_count() const { return task.subtasks.size(); }
  double rate(DeviceIndex j) const { return rates->rate(task.initiator, j); }
  ValueBreakdown value(std::size_t m, DeviceIndex j) const;

  // Type support, trust demand and rate demand for subtask m on device j.
  bool admissible(std::size_t m, DeviceIndex j) const;
};

class NoFeasibleStrategyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OracleBoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Strategy {
  std::size_t subtask = 0;        // task hyperedge
  std::size_t resource_edge = 0;  // index into the resource hypergraph
  DeviceIndex collaborator = 0;
  double trust = 0.0;
  double score = 0.0;             // value of completion
  ValueBreakdown detail;
};

struct StrategySet {
  std::vector<Strategy> strategies;
  std::size_t subtask_count = 0;
  std::size_t device_count = 0;

  std::size_t size() const { return strategies.size(); }
  bool empty() const { return strategies.empty(); }
};

// Coarse matches: same initiator, same type, resource weight >= task weight,
// link rate >= the subtask's rate demand. Scored by value of completion.
StrategySet generate_strategies(const TaskHypergraph& task_h, const ResourceHypergraph& res_h,
                                const ProblemInstance& problem);

// Mean score of three strategies that use pairwise-distinct subtasks and
// pairwise-distinct collaborators; 0 otherwise.
double triple_payoff(const StrategySet& set, std::size_t n1, std::size_t n2, std::size_t n3);

// u(theta^n, q, q) for every n in O(N * (M + J)).
std::vector<double> strategy_payoffs(const StrategySet& set, std::span<const double> q);

// u(q, q, q).
double population_payoff(const StrategySet& set, std::span<const double> q);

struct ReplicatorStep {
  std::vector<double> q;
  double payoff = 0.0;     // u(q, q, q) of the input state
  bool stagnated = false;  // input payoff was zero; q returned unchanged
};

ReplicatorStep replicator_step(std::span<const double> q, const StrategySet& set);

struct MatchDiagnostics {
  std::size_t strategy_count = 0;
  std::size_t iterations = 0;
  double residual = 0.0;
  double final_payoff = 0.0;
  bool fallback_greedy = false;
  bool stagnated = false;
  std::vector<std::pair<std::size_t, double>> survivors;  // (strategy, q) above threshold
};

struct MatchResult {
  std::string solver;
  std::vector<std::optional<DeviceIndex>> assignment;  // per subtask
  std::vector<std::optional<ValueBreakdown>> details;  // per subtask
  double average_value = 0.0;
  MatchDiagnostics diagnostics;

  std::size_t assigned_count() const;
};

MatchResult solve_matching(const TaskHypergraph& task_h, const ResourceHypergraph& res_h,
                           const ProblemInstance& problem, const ReplicatorParams& params);

// solve_matching over a resource hypergraph weighted by one-to-one trust.
MatchResult baseline_one_to_one(const TaskHypergraph& task_h, const ResourceHypergraph& one_to_one_h,
                                const ProblemInstance& problem, const ReplicatorParams& params);

MatchResult baseline_random(const ProblemInstance& problem, Rng& rng);
MatchResult baseline_nn(const ProblemInstance& problem);

struct OracleBounds {
  std::size_t max_subtasks = 5;
  std::size_t max_devices = 12;
};

MatchResult oracle_brute_force(const ProblemInstance& problem, const OracleBounds& bounds = {});

enum class Constraint {
  single_collaborator,  // every subtask on exactly one device
  device_capacity,      // at most one subtask per device
  trust_demand,
  type_support,
  rate_demand,
  not_initiator,
};

const char* to_string(Constraint c);

struct ConstraintViolation {
  Constraint constraint;
  std::size_t subtask = 0;
  std::optional<DeviceIndex> device;
  std::string message;
};

// Empty iff every constraint holds. With allow_partial, unassigned subtasks
// are not reported.
std::vector<ConstraintViolation> check_feasibility(std::span<const std::optional<DeviceIndex>> assignment,
                                                   const ProblemInstance& problem,
                                                   bool allow_partial = false);

// Mean value over all M subtasks; unassigned subtasks contribute 0.
double average_value(std::span<const std::optional<DeviceIndex>> assignment,
                     const ProblemInstance& problem);

// Fills details and average_value from an assignment.
MatchResult make_result(std::string solver, std::vector<std::optional<DeviceIndex>> assignment,
                        const ProblemInstance& problem);

}  // namespace ttr

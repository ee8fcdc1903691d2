#pragma once

// Experiment harness: seeded worlds, solver runs, parameter sweeps, trust
// evolution traces and CSV/JSON emission.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ttr/hypergraph.hpp"
#include "ttr/matching.hpp"
#include "ttr/model.hpp"
#include "ttr/physics.hpp"
#include "ttr/trust.hpp"

namespace ttr {

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Solver { ttr, one_to_one, nn, random, oracle };
enum class SweepAxis { none, min_trust, min_rate, fleet_size, value_weights, trust_weights };
enum class ExperimentMode { matching, trust_evolution };

const char* to_string(Solver s);
const char* to_string(SweepAxis a);
Solver parse_solver(const std::string& name);
SweepAxis parse_axis(const std::string& name);
std::vector<Solver> parse_solver_list(const std::string& comma_separated);

// Subtasks with the initiator named by id so the template survives fleet changes.
struct TaskTemplate {
  std::string initiator;
  std::vector<Subtask> subtasks;
};

// Large-fleet generation: an initiator plus collaborators cycling through the
// listed catalog models in equal numbers. Each device's CPU clock is drawn
// uniformly within +-cpu_jitter of its model's nominal clock. area_m and
// max_link_loss also drive per-replica layout resampling.
struct FleetScaling {
  std::vector<std::string> models{"Pixel 8", "DELL 5200", "DELL 5820", "Lambda", "Rosbot Plus"};
  std::string initiator_model = "iPad";
  double cpu_jitter = 0.2;
  double area_m = 30.0;
  double max_link_loss = 0.06;
};

struct TrustEvolution {
  std::vector<std::string> collaborators;
  std::size_t tasks = 30;
};

struct ExperimentSpec {
  std::string name;
  ScenarioConfig scenario;
  ExperimentMode mode = ExperimentMode::matching;
  std::size_t bootstrap_tasks = 500;
  std::size_t bootstrap_max_subtasks = 4;
  TaskTemplate task;
  std::optional<std::array<double, 2>> one_to_one_beta;  // (beta1, beta2); derived when unset
  SweepAxis axis = SweepAxis::none;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds{1};
  std::vector<Solver> solvers{Solver::ttr, Solver::one_to_one, Solver::nn, Solver::random};
  FleetScaling fleet;
  TrustEvolution evolution;
  OracleBounds oracle_bounds;
  bool resample_layout = false;  // redraw positions and link losses for every seed
  std::size_t jobs = 1;
  bool timing = false;  // measure runtime_ms; off keeps output byte-reproducible
};

// `base_dir` resolves a relative "scenario" path. A scenario given in
// `scenario_override` replaces the one named in the document.
ExperimentSpec experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                    const std::optional<ScenarioConfig>& scenario_override = std::nullopt);
ExperimentSpec load_experiment(const std::filesystem::path& path,
                               const std::optional<ScenarioConfig>& scenario_override = std::nullopt);

// The reference three-subtask batch (3DM 5 MB, TWC 1 MB, FR 5 MB) and the
// optional fourth VT subtask, initiated by a1.
TaskTemplate reference_task(const ScenarioConfig& cfg, bool with_fourth_subtask, double min_trust = 0.2);

ScenarioConfig scaled_fleet(const ScenarioConfig& base, const FleetScaling& fleet, std::size_t collaborators,
                            std::uint64_t seed);

// Same devices with positions uniform in an area_m square and nominal link
// losses uniform in [0, max_link_loss], drawn from `seed`.
ScenarioConfig resampled_layout(const ScenarioConfig& base, double area_m, double max_link_loss,
                                std::uint64_t seed);

// One fully built replica: scenario, ledger, trust models, hypergraphs.
class World {
 public:
  World(ScenarioConfig cfg, TrustLedger ledger, Task task, TrustWeights one_to_one);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  const ScenarioConfig& scenario() const { return cfg_; }
  const TrustLedger& ledger() const { return ledger_; }
  const Task& task() const { return task_; }
  const TrustModel& task_specific() const { return *ts_; }
  const TrustModel& one_to_one() const { return *oto_; }
  const ResourceHypergraph& resource_hypergraph() const { return *ts_h_; }
  const ResourceHypergraph& one_to_one_hypergraph() const { return *oto_h_; }
  const TaskHypergraph& task_hypergraph() const { return task_h_; }

  // Trust view used for admission: one-to-one or task-specific.
  ProblemInstance problem(bool one_to_one_trust = false) const;

  // NoFeasibleStrategyError and OracleBoundError propagate.
  MatchResult solve(Solver solver, std::uint64_t seed, const OracleBounds& bounds = {}) const;

 private:
  ScenarioConfig cfg_;
  TrustLedger ledger_;
  Task task_;
  RateTable rates_;
  std::unique_ptr<TrustModel> ts_, oto_;
  std::unique_ptr<ResourceHypergraph> ts_h_, oto_h_;
  TaskHypergraph task_h_;
};

TrustWeights one_to_one_weights_for(const ExperimentSpec& spec, const TrustWeights& w);

// Builds the replica for one (sweep value, seed).
std::unique_ptr<World> build_world(const ExperimentSpec& spec, std::optional<double> sweep_value,
                                   std::uint64_t seed);

// Random small instance over a subset of `base`'s devices, for oracle checks.
std::unique_ptr<World> random_instance(const ScenarioConfig& base, std::uint64_t seed, std::size_t max_devices,
                                       std::size_t max_subtasks, double min_trust);

struct SubtaskDetail {
  std::string collaborator;  // empty when unassigned
  double value = 0.0, value_time = 0.0, value_energy = 0.0, time_s = 0.0, energy_j = 0.0;

  bool operator==(const SubtaskDetail&) const = default;
};

struct ResultRow {
  std::string axis;
  std::optional<double> value;
  std::string solver;
  std::uint64_t seed = 0;
  double avg_value = 0.0;
  std::size_t assigned = 0;
  std::size_t unassigned = 0;
  std::size_t iterations = 0;
  double runtime_ms = 0.0;
  std::string error;  // non-empty rows are excluded from aggregates
  std::string note;   // e.g. "no_feasible_strategy", "greedy_fallback"
  std::vector<SubtaskDetail> subtasks;

  bool ok() const { return error.empty(); }
  bool operator==(const ResultRow&) const = default;
};

struct TrustSnapshot {
  std::uint64_t seed = 0;
  std::size_t task_index = 0;  // 0 = before the first evolution task
  std::string collaborator;
  std::string task_type;
  double task_specific = 0.0;
  double one_to_one = 0.0;

  bool operator==(const TrustSnapshot&) const = default;
};

struct Aggregate {
  std::string axis;
  std::optional<double> value;
  std::string solver;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct RunArtifacts {
  std::vector<ResultRow> rows;
  std::vector<TrustSnapshot> trust_snapshots;

  std::vector<Aggregate> aggregates() const;
  bool empty() const { return rows.empty() && trust_snapshots.empty(); }
};

// The experiment's base configuration, ignoring its sweep.
RunArtifacts run_scenario(const ExperimentSpec& spec);
// Sweep values x seeds x solvers.
RunArtifacts run_sweep(const ExperimentSpec& spec);

enum class OutputFormat { csv, json };

void write_results_csv(std::ostream& out, const RunArtifacts& a);
nlohmann::json results_to_json(const RunArtifacts& a);
RunArtifacts results_from_json(const nlohmann::json& j);
void write_summary_csv(std::ostream& out, const RunArtifacts& a);
void write_trust_csv(std::ostream& out, const RunArtifacts& a);

// Throws ExperimentError for empty artifacts or an unwritable path.
void emit_results(const RunArtifacts& a, OutputFormat format, const std::filesystem::path& path);

// Shortest round-trip decimal form.
std::string format_number(double x);

// Mean value per sweep point for one solver, in sweep order.
std::vector<double> solver_series(const std::vector<Aggregate>& aggs, const std::string& solver);

bool non_increasing(const std::vector<double>& xs, double tolerance);
bool non_decreasing(const std::vector<double>& xs, double tolerance);

}  // namespace ttr

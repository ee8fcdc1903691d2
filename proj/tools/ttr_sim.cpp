// ttr_sim: scenario runner, sweeps, ledger bootstrap and oracle checks.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ttr/hypergraph.hpp"
#include "ttr/matching.hpp"
#include "ttr/scenario.hpp"
#include "ttr/sim.hpp"
#include "ttr/trust.hpp"

namespace fs = std::filesystem;
using namespace ttr;

namespace {

struct Common {
  std::string scenario;
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
  std::string solvers;
  bool timing = false;
  std::size_t jobs = 0;
};

ScenarioConfig scenario_or_builtin(const std::string& path) {
  if (path.empty() || path == "builtin:ics") return builtin_ics_catalog();
  return load_scenario(path);
}

ExperimentSpec make_spec(const Common& c) {
  std::optional<ScenarioConfig> scenario;
  if (!c.scenario.empty()) scenario = scenario_or_builtin(c.scenario);
  ExperimentSpec spec;
  if (!c.spec.empty()) {
    spec = load_experiment(c.spec, scenario);
  } else {
    spec = experiment_from_json(nlohmann::json::object(), fs::current_path(), scenario);
  }
  if (c.seed) spec.seeds = {*c.seed};
  if (!c.solvers.empty()) spec.solvers = parse_solver_list(c.solvers);
  if (c.timing) spec.timing = true;
  if (c.jobs > 0) spec.jobs = c.jobs;
  return spec;
}

OutputFormat parse_format(const std::string& f) {
  if (f == "csv") return OutputFormat::csv;
  if (f == "json") return OutputFormat::json;
  throw ExperimentError("unknown format '" + f + "'");
}

void write_artifacts(const RunArtifacts& a, const Common& c) {
  const OutputFormat format = parse_format(c.format);
  fs::create_directories(c.out);
  const fs::path dir(c.out);
  emit_results(a, format, dir / (format == OutputFormat::csv ? "results.csv" : "results.json"));
  if (!a.rows.empty()) {
    std::ofstream summary(dir / "summary.csv", std::ios::binary);
    write_summary_csv(summary, a);
  }
  if (!a.trust_snapshots.empty()) {
    std::ofstream trust(dir / "trust_trajectory.csv", std::ios::binary);
    write_trust_csv(trust, a);
  }
}

void print_summary(const RunArtifacts& a) {
  for (const auto& g : a.aggregates()) {
    std::cout << g.solver;
    if (g.value) std::cout << " @ " << g.axis << "=" << format_number(*g.value);
    std::cout << ": mean " << (g.count ? format_number(g.mean) : "n/a") << " sd " << format_number(g.stddev)
              << " (n=" << g.count << ")\n";
  }
}

void add_common(CLI::App* cmd, Common& c, bool needs_spec) {
  cmd->add_option("--scenario", c.scenario, "Scenario JSON (default: built-in ICS fleet)");
  auto* spec = cmd->add_option("--spec", c.spec, "Experiment JSON")->check(CLI::ExistingFile);
  if (needs_spec) spec->required();
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_option("--seed", c.seed, "Run a single replica with this seed");
  cmd->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--solvers", c.solvers, "Comma-separated subset of ttr,one_to_one,nn,random,oracle");
  cmd->add_flag("--timing", c.timing, "Record wall-clock runtime_ms (output is no longer reproducible)");
  cmd->add_option("--jobs", c.jobs, "Worker threads");
}

int oracle_check(const std::string& scenario_path, std::size_t instances, std::size_t max_subtasks,
                 std::size_t max_devices, double min_trust, std::uint64_t seed) {
  const ScenarioConfig base = scenario_or_builtin(scenario_path);
  std::size_t within = 0, failures = 0, evaluated = 0;
  double gap_sum = 0.0, gap_max = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    auto world = random_instance(base, seed + k, max_devices, max_subtasks, min_trust);
    const auto problem = world->problem();
    const auto oracle = world->solve(Solver::oracle, seed + k);
    for (Solver s : {Solver::ttr, Solver::nn, Solver::random}) {
      MatchResult r;
      try {
        r = world->solve(s, seed + k);
      } catch (const NoFeasibleStrategyError&) {
        r = make_result(to_string(s), std::vector<std::optional<DeviceIndex>>(problem.subtask_count()), problem);
      }
      const auto violations = check_feasibility(r.assignment, problem, true);
      if (!violations.empty()) {
        std::cerr << "instance " << k << ": " << to_string(s) << " violates "
                  << to_string(violations.front().constraint) << "\n";
        ++failures;
      }
      if (r.average_value > oracle.average_value + 1e-12) {
        std::cerr << "instance " << k << ": " << to_string(s) << " exceeds the oracle\n";
        ++failures;
      }
      if (s != Solver::ttr) continue;
      const double gap = oracle.average_value > 0.0
                             ? (oracle.average_value - r.average_value) / oracle.average_value
                             : 0.0;
      ++evaluated;
      gap_sum += gap;
      gap_max = std::max(gap_max, gap);
      if (gap <= 0.05) ++within;
    }
  }
  std::cout << "instances " << evaluated << "\n"
            << "within_5pct " << within << " (" << format_number(evaluated ? 1.0 * within / evaluated : 0.0)
            << ")\n"
            << "mean_gap " << format_number(evaluated ? gap_sum / evaluated : 0.0) << "\n"
            << "max_gap " << format_number(gap_max) << "\n"
            << "invariant_failures " << failures << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-aware task/resource matching simulator"};
  app.require_subcommand(1);

  Common sim_opts;
  auto* simulate = app.add_subcommand("simulate", "Run the base configuration of an experiment");
  add_common(simulate, sim_opts, false);

  Common sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Run an experiment's parameter sweep");
  add_common(sweep, sweep_opts, true);

  std::string boot_scenario, boot_out;
  std::size_t boot_tasks = 500, boot_max = 4;
  std::uint64_t boot_seed = 1;
  auto* bootstrap = app.add_subcommand("bootstrap", "Generate an interaction ledger");
  bootstrap->add_option("--scenario", boot_scenario, "Scenario JSON (default: built-in ICS fleet)");
  bootstrap->add_option("--tasks", boot_tasks, "Number of random tasks");
  bootstrap->add_option("--max-subtasks", boot_max, "Subtasks per task, at most");
  bootstrap->add_option("--seed", boot_seed, "Replica seed");
  bootstrap->add_option("--out", boot_out, "Ledger JSONL path")->required();

  std::string oc_scenario;
  std::size_t oc_instances = 200, oc_max_subtasks = 3, oc_max_devices = 8;
  double oc_min_trust = 0.2;
  std::uint64_t oc_seed = 1;
  auto* oracle = app.add_subcommand("oracle-check", "Compare solvers against the exhaustive oracle");
  oracle->add_option("--scenario", oc_scenario, "Scenario JSON (default: built-in ICS fleet)");
  oracle->add_option("--instances", oc_instances, "Number of random instances");
  oracle->add_option("--max-subtasks", oc_max_subtasks, "Subtasks per instance, at most");
  oracle->add_option("--max-devices", oc_max_devices, "Devices per instance, at most");
  oracle->add_option("--min-trust", oc_min_trust, "Minimum trust demand of every subtask");
  oracle->add_option("--seed", oc_seed, "Seed of the first instance");

  std::string cat_out;
  IcsLayout layout;
  auto* catalog = app.add_subcommand("catalog", "Write the built-in ICS scenario");
  catalog->add_option("--out", cat_out, "Scenario JSON path")->required();
  catalog->add_option("--seed", layout.seed, "Layout seed");
  catalog->add_option("--area", layout.area_m, "Side of the square floor area in meters");
  catalog->add_option("--max-link-loss", layout.max_link_loss, "Upper bound of nominal packet loss");
  catalog->add_option("--reliability-min", layout.reliability_min, "Lower bound of execution reliability");
  catalog->add_option("--reliability-max", layout.reliability_max, "Upper bound of execution reliability");
  std::vector<std::string> model_rel;
  catalog->add_option("--model-reliability", model_rel, "Per-model range as MODEL=LO:HI (repeatable)");

  Common hg_opts;
  auto* export_hg = app.add_subcommand("export-hypergraph", "Write trust and task hypergraphs of one replica");
  add_common(export_hg, hg_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) {
      auto spec = make_spec(sim_opts);
      auto a = run_scenario(spec);
      write_artifacts(a, sim_opts);
      print_summary(a);
    } else if (*sweep) {
      auto spec = make_spec(sweep_opts);
      auto a = run_sweep(spec);
      write_artifacts(a, sweep_opts);
      print_summary(a);
      if (spec.axis != SweepAxis::none) {
        const auto aggs = a.aggregates();
        const bool up = spec.axis == SweepAxis::fleet_size;
        for (Solver s : spec.solvers) {
          const auto series = solver_series(aggs, to_string(s));
          const bool ok = up ? non_decreasing(series, 0.01) : non_increasing(series, 0.01);
          std::cout << "trend " << to_string(s) << " " << (up ? "non-decreasing" : "non-increasing") << ": "
                    << (ok ? "yes" : "no") << "\n";
        }
      }
    } else if (*bootstrap) {
      const auto cfg = scenario_or_builtin(boot_scenario);
      TrustLedger ledger;
      Rng rng = Rng::stream(boot_seed, "bootstrap");
      const auto n = bootstrap_trust(cfg, ledger, boot_tasks, rng, {boot_max});
      std::ofstream out(boot_out, std::ios::binary);
      if (!out) throw ExperimentError("cannot write " + boot_out);
      write_ledger_jsonl(out, ledger, cfg);
      std::cout << "tasks " << boot_tasks << " subtasks " << n << " records " << ledger.size() << "\n";
    } else if (*oracle) {
      return oracle_check(oc_scenario, oc_instances, oc_max_subtasks, oc_max_devices, oc_min_trust, oc_seed);
    } else if (*catalog) {
      for (const auto& item : model_rel) {
        const auto eq = item.rfind('=');
        const auto colon = item.rfind(':');
        if (eq == std::string::npos || colon == std::string::npos || colon < eq)
          throw ExperimentError("expected MODEL=LO:HI, got '" + item + "'");
        const std::string model = item.substr(0, eq);
        ics_device_model(model);
        layout.model_reliability[model] = {std::stod(item.substr(eq + 1, colon - eq - 1)),
                                           std::stod(item.substr(colon + 1))};
      }
      if (layout.reliability_min > layout.reliability_max) throw ExperimentError("empty reliability range");
      save_scenario(builtin_ics_catalog(layout), cat_out);
    } else if (*export_hg) {
      auto spec = make_spec(hg_opts);
      auto world = build_world(spec, std::nullopt, spec.seeds.front());
      fs::create_directories(hg_opts.out);
      const fs::path dir(hg_opts.out);
      std::ofstream(dir / "resource_hypergraph.json") << to_json(world->resource_hypergraph()).dump(2) << '\n';
      std::ofstream(dir / "task_hypergraph.json")
          << to_json(world->task_hypergraph(), world->scenario()).dump(2) << '\n';
      std::ofstream res(dir / "resource_incidence.csv", std::ios::binary);
      incidence_matrix(world->resource_hypergraph()).write_csv(res, vertex_labels(world->resource_hypergraph()));
      std::ofstream task(dir / "task_incidence.csv", std::ios::binary);
      incidence_matrix(world->task_hypergraph()).write_csv(task, vertex_labels(world->task_hypergraph()));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

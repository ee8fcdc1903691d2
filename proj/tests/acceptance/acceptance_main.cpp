#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "trust_oracle.hpp"
#include "ttr/hypergraph.hpp"
#include "ttr/matching.hpp"
#include "ttr/physics.hpp"
#include "ttr/scenario.hpp"
#include "ttr/sim.hpp"
#include "ttr/trust.hpp"

namespace fs = std::filesystem;
using namespace ttr;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void require(bool cond, const std::string& what) {
    if (!cond && out_.pass) {
      out_.pass = false;
      first_failure_ = what;
    }
  }
  void note(const std::string& s) { notes_ << (notes_.tellp() > 0 ? "; " : "") << s; }
  Outcome done() {
    out_.detail = out_.pass ? notes_.str() : first_failure_ + (notes_.tellp() > 0 ? " | " + notes_.str() : "");
    return out_;
  }

 private:
  Outcome out_;
  std::string first_failure_;
  std::ostringstream notes_;
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

std::string join(const std::vector<double>& xs) {
  std::string s = "[";
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? " " : "") + num(xs[k]);
  return s + "]";
}

const fs::path kData = TTR_DATA_DIR;

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome oracle_equivalence() {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  const auto base = builtin_ics_catalog();
  std::size_t within = 0, infeasible = 0;
  const std::size_t n = 200;
  for (std::uint64_t seed = 1; seed <= n; ++seed) {
    const auto world = random_instance(base, seed, 8, 3, 0.2);
    const auto problem = world->problem();
    c.require(problem.subtask_count() <= 3 && world->scenario().devices.size() <= 8, "instance exceeds bounds");
    const auto best = world->solve(Solver::oracle, seed);
    MatchResult r;
    try {
      r = world->solve(Solver::ttr, seed);
    } catch (const NoFeasibleStrategyError&) {
      r = make_result("ttr", std::vector<std::optional<DeviceIndex>>(problem.subtask_count()), problem);
    }
    if (!check_feasibility(r.assignment, problem, true).empty()) ++infeasible;
    if (r.average_value >= 0.95 * best.average_value) ++within;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double share = double(within) / double(n);
  c.require(share >= 0.8, "fewer than 80% of instances within 5% of the oracle");
  c.require(infeasible == 0, "infeasible assignment returned");
  c.require(secs < 60.0, "runtime over 60 s");
  c.note("within 5%: " + std::to_string(within) + "/" + std::to_string(n) + ", infeasible " +
         std::to_string(infeasible) + ", " + num(secs) + " s");
  return c.done();
}

Outcome replicator_invariants() {
  Check c;
  Rng rng = Rng::stream(2024, "acceptance-replicator");
  double worst_sum = 0.0, worst_drop = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    StrategySet set;
    set.subtask_count = 3 + rng.index(4);
    set.device_count = 4 + rng.index(12);
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t m = 0; m < set.subtask_count; ++m)
      for (std::size_t j = 0; j < set.device_count; ++j) cells.emplace_back(m, j);
    rng.shuffle(cells);
    const std::size_t N = std::min<std::size_t>(cells.size(), 3 + rng.index(38));
    for (std::size_t k = 0; k < N; ++k) {
      Strategy st;
      st.subtask = cells[k].first;
      st.collaborator = cells[k].second;
      st.score = rng.uniform();
      set.strategies.push_back(st);
    }
    c.require(set.size() <= 40, "strategy set above 40");
    std::vector<double> q(N, 1.0 / double(N));
    double prev = population_payoff(set, q);
    for (int it = 0; it < 1000; ++it) {
      auto step = replicator_step(q, set);
      double sum = 0.0;
      for (double x : step.q) sum += x;
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      const double now = population_payoff(set, step.q);
      worst_drop = std::max(worst_drop, prev - now);
      prev = now;
      q = std::move(step.q);
    }
  }
  c.require(worst_sum <= 1e-12, "simplex drift above 1e-12");
  c.require(worst_drop <= 1e-10, "population payoff decreased");
  c.note("max |sum q - 1| " + num(worst_sum) + ", max payoff drop " + num(std::max(0.0, worst_drop)));
  return c.done();
}

Outcome trust_diversity() {
  Check c;
  auto spec = load_experiment(kData / "experiments" / "trust_evolution.json");
  c.require(spec.scenario.trust_weights.beta == std::array<double, 3>{0.1, 0.1, 0.8}, "beta is not (0.1, 0.1, 0.8)");
  c.require(spec.evolution.tasks == 30, "evolution is not 30 tasks");
  const auto a = run_scenario(spec);

  std::size_t diverse_pairs = 0;
  for (const auto& id : spec.evolution.collaborators) {
    const auto& dev = spec.scenario.devices[*spec.scenario.find_device(id)];
    double rmin = 1, rmax = 0;
    for (auto [s, r] : dev.reliability) {
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    double tmin = 1e9, tmax = -1e9, omin = 1e9, omax = -1e9;
    for (const auto& snap : a.trust_snapshots) {
      if (snap.collaborator != id || snap.task_index != spec.evolution.tasks) continue;
      tmin = std::min(tmin, snap.task_specific);
      tmax = std::max(tmax, snap.task_specific);
      omin = std::min(omin, snap.one_to_one);
      omax = std::max(omax, snap.one_to_one);
    }
    c.require(omax - omin <= 1e-12, "one-to-one trust differs across types for " + id);
    if (rmax - rmin >= 0.2) {
      c.require(tmax - tmin >= 0.08, "per-type trust spread below 0.08 for " + id);
      ++diverse_pairs;
      c.note(id + " spread " + num(tmax - tmin));
    }
  }
  c.require(diverse_pairs > 0, "no collaborator with reliabilities 0.2 apart");

  // Selection flip: the evolved trusts of one collaborator, with a threshold
  // between its best per-type trust and its one-to-one trust.
  bool flipped = false;
  const auto& cfg = spec.scenario;
  const DeviceIndex initiator = *cfg.find_device(spec.task.initiator);
  for (const auto& id : spec.evolution.collaborators) {
    std::map<TypeIndex, double> ts;
    double oto = 0.0;
    for (const auto& snap : a.trust_snapshots)
      if (snap.collaborator == id && snap.task_index == spec.evolution.tasks) {
        ts[*cfg.find_type(snap.task_type)] = snap.task_specific;
        oto = snap.one_to_one;
      }
    const DeviceIndex j = *cfg.find_device(id);
    for (auto [s, t] : ts) {
      if (std::abs(t - oto) < 1e-6) continue;
      const double threshold = (t + oto) / 2.0;
      RateTable rates(cfg.devices, cfg.channel);
      auto view = [&](double value) {
        return TrustView([=](DeviceIndex i, DeviceIndex k, TypeIndex) -> std::optional<double> {
          if (i != initiator || k != j) return std::nullopt;
          return value;
        });
      };
      ProblemInstance p;
      p.devices = cfg.devices;
      p.task_types = cfg.task_types;
      p.rates = &rates;
      p.value_weights = cfg.value_weights;
      p.task = Task{initiator, {{s, kBitsPerMegabyte, 0.6, threshold, 0.0}}};
      p.trust = view(t);
      ProblemInstance q = p;
      q.trust = view(oto);
      const bool under_ts = p.admissible(0, j);
      const bool under_oto = q.admissible(0, j);
      const auto pick_ts = oracle_brute_force(p, OracleBounds{5, cfg.devices.size()}).assignment[0];
      const auto pick_oto = oracle_brute_force(q, OracleBounds{5, cfg.devices.size()}).assignment[0];
      if (under_ts != under_oto && pick_ts != pick_oto) {
        flipped = true;
        c.note("flip on " + id + "/" + cfg.type(s).name + " at threshold " + num(threshold) + ": task-specific " +
               num(t) + " vs one-to-one " + num(oto));
        break;
      }
    }
    if (flipped) break;
  }
  c.require(flipped, "no selection flip found");
  return c.done();
}

struct SweepResult {
  ExperimentSpec spec;
  std::vector<Aggregate> aggs;
};

SweepResult sweep(const std::string& file) {
  SweepResult r{load_experiment(kData / "experiments" / file), {}};
  r.spec.jobs = worker_count();
  r.aggs = run_sweep(r.spec).aggregates();
  return r;
}

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] < b[k]) return false;
  return true;
}

Outcome decreasing_trend(const std::string& file, SweepAxis axis) {
  Check c;
  const auto r = sweep(file);
  c.require(r.spec.axis == axis, "unexpected sweep axis");
  if (axis == SweepAxis::min_trust)
    c.require(r.spec.values == std::vector<double>{0.20, 0.25, 0.30, 0.35, 0.40, 0.45}, "unexpected trust grid");
  c.require(std::is_sorted(r.spec.values.begin(), r.spec.values.end()), "sweep values not increasing");
  c.require(r.spec.seeds.size() == 30, "not 30 seeds");
  for (const char* s : {"ttr", "one_to_one", "nn", "random"}) {
    const auto xs = solver_series(r.aggs, s);
    c.require(xs.size() == r.spec.values.size(), std::string("missing points for ") + s);
    c.require(non_increasing(xs, 0.01), std::string(s) + " not non-increasing");
    c.note(std::string(s) + " " + join(xs));
  }
  const auto ttr = solver_series(r.aggs, "ttr");
  c.require(dominates(ttr, solver_series(r.aggs, "random")), "ttr below random");
  c.require(dominates(ttr, solver_series(r.aggs, "nn")), "ttr below nn");
  return c.done();
}

Outcome fleet_trend() {
  Check c;
  const auto r = sweep("fleet_size_sweep.json");
  c.require(r.spec.axis == SweepAxis::fleet_size, "unexpected sweep axis");
  c.require(r.spec.values == std::vector<double>{25, 50, 100, 200}, "unexpected fleet grid");
  for (const auto& b : r.spec.task.subtasks) c.require(std::abs(b.min_trust - 0.2) < 1e-12, "trust demand not 0.2");
  const auto xs = solver_series(r.aggs, "ttr");
  c.require(xs.size() == 4, "missing fleet points");
  if (xs.size() == 4) {
    c.require(non_decreasing(xs, 0.0), "ttr not non-decreasing");
    c.require(xs[3] - xs[2] < xs[1] - xs[0], "gain 100->200 not below gain 25->50");
    c.note("ttr " + join(xs) + ", gain 25->50 " + num(xs[1] - xs[0]) + ", 100->200 " + num(xs[3] - xs[2]));
  }
  return c.done();
}

Outcome formula_checks() {
  Check c;
  c.require(std::abs(value_time(1.2, 0.6) - std::exp(-1.0)) <= 1e-12, "value_time(1.2, 0.6) != e^-1");

  double worst = 0.0;
  std::size_t compared = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto cfg = builtin_ics_catalog(seed);
    TrustLedger ledger;
    Rng rng = Rng::stream(seed, "bootstrap");
    bootstrap_trust(cfg, ledger, 400, rng);
    for (const auto& w : {cfg.trust_weights, TrustWeights{{0.1, 0.1, 0.8}, {0.2, 0.3, 0.5}, 0.5},
                          TrustWeights{{0.6, 0.4, 0.0}, {1.0, 0.0, 0.0}, 0.3}}) {
      TrustModel model(cfg.devices, cfg.task_types.size(), ledger, w);
      oracle::Trust direct(cfg.devices, cfg.task_types.size(), ledger, w);
      for (DeviceIndex i = 0; i < cfg.devices.size(); ++i)
        for (DeviceIndex j = 0; j < cfg.devices.size(); ++j)
          for (TypeIndex s = 0; s < cfg.task_types.size(); ++s) {
            const auto got = model.trust(i, j, s);
            const auto want = direct.trust(i, j, s);
            c.require(got.has_value() == want.has_value(), "trust edge set differs from the direct formula");
            if (got && want) {
              worst = std::max(worst, std::abs(*got - *want));
              ++compared;
            }
          }

      const auto h = build_resource_hypergraph(model.graph(), ledger, cfg.devices, cfg.task_types, w);
      const auto inc = incidence_matrix(h);
      for (std::size_t e = 0; e < inc.cols(); ++e) c.require(inc.column_sum(e) == 3, "resource column sum != 3");
    }
    for (bool four : {false, true}) {
      const auto t = reference_task(cfg, four);
      const auto inc = incidence_matrix(build_task_hypergraph({*cfg.find_device(t.initiator), t.subtasks}));
      for (std::size_t e = 0; e < inc.cols(); ++e) c.require(inc.column_sum(e) == 3, "task column sum != 3");
    }
  }
  c.require(worst <= 1e-12, "trust pipeline deviates from the direct formula");
  c.note("value_time ok, " + std::to_string(compared) + " trust values, max deviation " + num(worst) +
         ", incidence columns sum to 3");
  return c.done();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const std::string& cli) {
  Check c;
  const fs::path root = fs::temp_directory_path() / ("ttr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string spec = (kData / "experiments" / "min_rate_sweep.json").string();
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"simulate", "simulate --scenario '" + (kData / "ics.json").string() + "' --seed 42"},
      {"sweep", "sweep --spec '" + spec + "' --jobs 4"},
  };
  for (const auto& [name, args] : runs) {
    std::vector<std::string> outputs;
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = root / (name + std::to_string(k));
      fs::create_directories(dir);
      const std::string cmd = "'" + cli + "' " + args + " --out '" + dir.string() + "' > /dev/null";
      c.require(std::system(cmd.c_str()) == 0, name + " run failed");
      outputs.push_back(slurp(dir / "results.csv"));
      c.require(!outputs.back().empty(), name + " wrote no CSV");
    }
    c.require(outputs[0] == outputs[1], name + " CSV differs between runs");
    c.note(name + " " + std::to_string(outputs[0].size()) + " bytes identical");
  }
  fs::remove_all(root);
  return c.done();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: ttr_acceptance <path to ttr_sim>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"replicator invariants", replicator_invariants},
      {"trust-model diversity", trust_diversity},
      {"trust threshold trend", [] { return decreasing_trend("min_trust_sweep.json", SweepAxis::min_trust); }},
      {"rate threshold trend", [] { return decreasing_trend("min_rate_sweep.json", SweepAxis::min_rate); }},
      {"fleet size trend", fleet_trend},
      {"formula spot-checks", formula_checks},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (k + 1) << " " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

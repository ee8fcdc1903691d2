#include "ttr/sim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "ttr/scenario.hpp"

namespace ttr {

using nlohmann::json;

namespace {

constexpr std::string_view kBuiltinIcs = "builtin:ics";

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ExperimentError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ExperimentError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

void check_simplex(std::span<const double> xs, const std::string& what) {
  double sum = 0.0;
  for (double x : xs) {
    if (!(x >= 0.0 && x <= 1.0)) throw ExperimentError(what + ": weights must lie in [0, 1]");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ExperimentError(what + ": weights must sum to 1");
}

void validate_sweep(const ExperimentSpec& spec) {
  for (double v : spec.values) {
    if (!std::isfinite(v)) throw ExperimentError("sweep value must be finite");
    switch (spec.axis) {
      case SweepAxis::min_trust:
      case SweepAxis::value_weights:
      case SweepAxis::trust_weights:
        if (v < 0.0 || v > 1.0) throw ExperimentError("sweep value " + format_number(v) + " outside [0, 1]");
        break;
      case SweepAxis::min_rate:
        if (v < 0.0) throw ExperimentError("min_rate sweep value must be >= 0");
        break;
      case SweepAxis::fleet_size:
        if (v < 1.0 || v != std::floor(v))
          throw ExperimentError("fleet_size sweep values must be positive integers");
        if (static_cast<std::size_t>(v) % spec.fleet.models.size() != 0)
          throw ExperimentError("fleet_size " + format_number(v) + " is not a multiple of the model count");
        break;
      case SweepAxis::none:
        break;
    }
  }
}

TaskTemplate task_template(const Task& task, const ScenarioConfig& cfg) {
  return {cfg.devices.at(task.initiator).id, task.subtasks};
}

}  // namespace

const char* to_string(Solver s) {
  switch (s) {
    case Solver::ttr: return "ttr";
    case Solver::one_to_one: return "one_to_one";
    case Solver::nn: return "nn";
    case Solver::random: return "random";
    case Solver::oracle: return "oracle";
  }
  return "?";
}

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::min_trust: return "min_trust";
    case SweepAxis::min_rate: return "min_rate";
    case SweepAxis::fleet_size: return "fleet_size";
    case SweepAxis::value_weights: return "value_weights";
    case SweepAxis::trust_weights: return "trust_weights";
  }
  return "?";
}

Solver parse_solver(const std::string& name) {
  for (Solver s : {Solver::ttr, Solver::one_to_one, Solver::nn, Solver::random, Solver::oracle})
    if (name == to_string(s)) return s;
  throw ExperimentError("unknown solver '" + name + "'");
}

SweepAxis parse_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::none, SweepAxis::min_trust, SweepAxis::min_rate, SweepAxis::fleet_size,
                      SweepAxis::value_weights, SweepAxis::trust_weights})
    if (name == to_string(a)) return a;
  throw ExperimentError("unknown sweep axis '" + name + "'");
}

std::vector<Solver> parse_solver_list(const std::string& comma_separated) {
  std::vector<Solver> out;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_solver(item));
  if (out.empty()) throw ExperimentError("solver list is empty");
  return out;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

TaskTemplate reference_task(const ScenarioConfig& cfg, bool with_fourth_subtask, double min_trust) {
  auto type = [&](const char* name) {
    auto s = cfg.find_type(name);
    if (!s) throw ExperimentError(std::string("scenario lacks task type ") + name);
    return *s;
  };
  const double mb = kBitsPerMegabyte;
  TaskTemplate t{"a1",
                 {{type("3DM"), 5 * mb, 0.6, min_trust, 10 * mb},
                  {type("TWC"), 1 * mb, 0.6, min_trust, 2 * mb},
                  {type("FR"), 5 * mb, 0.6, min_trust, 10 * mb}}};
  if (with_fourth_subtask) t.subtasks.push_back({type("VT"), 10 * mb, 0.6, min_trust, 10 * mb});
  return t;
}

ExperimentSpec experiment_from_json(const json& j, const std::filesystem::path& base_dir,
                                    const std::optional<ScenarioConfig>& scenario_override) {
  ExperimentSpec spec;
  try {
    reject_unknown(j, {"name", "scenario", "mode", "bootstrap_tasks", "bootstrap_max_subtasks", "task",
                       "trust_weights", "value_weights", "one_to_one_beta", "sweep", "seeds", "repeats",
                       "base_seed", "solvers", "fleet", "evolution", "oracle_bounds", "resample_layout",
                       "jobs"},
                   "experiment");
    spec.name = get_or<std::string>(j, "name", "");

    if (scenario_override) {
      spec.scenario = *scenario_override;
    } else {
      const auto ref = get_or<std::string>(j, "scenario", std::string(kBuiltinIcs));
      if (ref == kBuiltinIcs) {
        spec.scenario = builtin_ics_catalog();
      } else {
        std::filesystem::path p(ref);
        spec.scenario = load_scenario(p.is_absolute() ? p : base_dir / p);
      }
    }

    const auto mode = get_or<std::string>(j, "mode", "matching");
    if (mode == "matching") spec.mode = ExperimentMode::matching;
    else if (mode == "trust_evolution") spec.mode = ExperimentMode::trust_evolution;
    else throw ExperimentError("unknown mode '" + mode + "'");

    spec.bootstrap_tasks = get_or<std::size_t>(j, "bootstrap_tasks", spec.bootstrap_tasks);
    spec.bootstrap_max_subtasks = get_or<std::size_t>(j, "bootstrap_max_subtasks", spec.bootstrap_max_subtasks);
    if (spec.bootstrap_max_subtasks == 0) throw ExperimentError("bootstrap_max_subtasks must be >= 1");

    if (auto it = j.find("trust_weights"); it != j.end()) {
      reject_unknown(*it, {"beta", "delta", "neutral_prior"}, "trust_weights");
      auto& w = spec.scenario.trust_weights;
      w.beta = get_or(*it, "beta", w.beta);
      w.delta = get_or(*it, "delta", w.delta);
      w.neutral_prior = get_or(*it, "neutral_prior", w.neutral_prior);
      check_simplex(w.beta, "trust_weights.beta");
      check_simplex(w.delta, "trust_weights.delta");
    }
    if (auto it = j.find("value_weights"); it != j.end()) {
      reject_unknown(*it, {"xi_time", "xi_energy"}, "value_weights");
      auto& w = spec.scenario.value_weights;
      w.xi_time = get_or(*it, "xi_time", w.xi_time);
      w.xi_energy = get_or(*it, "xi_energy", w.xi_energy);
      const std::array<double, 2> xi{w.xi_time, w.xi_energy};
      check_simplex(xi, "value_weights");
    }
    if (auto it = j.find("one_to_one_beta"); it != j.end()) {
      auto beta = it->get<std::array<double, 2>>();
      check_simplex(beta, "one_to_one_beta");
      spec.one_to_one_beta = beta;
    }

    if (auto it = j.find("task"); it != j.end()) {
      if (it->is_string()) {
        const auto name = it->get<std::string>();
        if (name == "reference") spec.task = reference_task(spec.scenario, false);
        else if (name == "reference4") spec.task = reference_task(spec.scenario, true);
        else throw ExperimentError("unknown task preset '" + name + "'");
      } else {
        spec.task = task_template(task_from_json(*it, spec.scenario), spec.scenario);
      }
    } else {
      spec.task = reference_task(spec.scenario, false);
    }

    if (auto it = j.find("sweep"); it != j.end()) {
      reject_unknown(*it, {"axis", "values"}, "sweep");
      spec.axis = parse_axis(it->at("axis").get<std::string>());
      spec.values = get_or(*it, "values", std::vector<double>{});
      if (spec.axis != SweepAxis::none && spec.values.empty())
        throw ExperimentError("sweep needs at least one value");
    }

    if (j.contains("seeds") && j.contains("repeats"))
      throw ExperimentError("give either seeds or repeats, not both");
    if (auto it = j.find("seeds"); it != j.end()) {
      spec.seeds = it->get<std::vector<std::uint64_t>>();
    } else if (auto rep = j.find("repeats"); rep != j.end()) {
      const auto repeats = rep->get<std::int64_t>();
      if (repeats < 1) throw ExperimentError("repeats must be >= 1");
      const auto base = get_or<std::uint64_t>(j, "base_seed", 1);
      spec.seeds.clear();
      for (std::int64_t k = 0; k < repeats; ++k) spec.seeds.push_back(base + static_cast<std::uint64_t>(k));
    }
    if (spec.seeds.empty()) throw ExperimentError("at least one seed is required");

    if (auto it = j.find("solvers"); it != j.end()) {
      spec.solvers.clear();
      for (const auto& s : *it) spec.solvers.push_back(parse_solver(s.get<std::string>()));
      if (spec.solvers.empty()) throw ExperimentError("solver list is empty");
    }

    if (auto it = j.find("fleet"); it != j.end()) {
      reject_unknown(*it, {"models", "initiator_model", "cpu_jitter", "area_m", "max_link_loss"}, "fleet");
      auto& f = spec.fleet;
      f.models = get_or(*it, "models", f.models);
      f.initiator_model = get_or(*it, "initiator_model", f.initiator_model);
      f.cpu_jitter = get_or(*it, "cpu_jitter", f.cpu_jitter);
      f.area_m = get_or(*it, "area_m", f.area_m);
      f.max_link_loss = get_or(*it, "max_link_loss", f.max_link_loss);
      if (f.models.empty()) throw ExperimentError("fleet.models is empty");
      if (f.cpu_jitter < 0.0 || f.cpu_jitter >= 1.0) throw ExperimentError("fleet.cpu_jitter must be in [0, 1)");
      if (f.area_m <= 0.0) throw ExperimentError("fleet.area_m must be > 0");
      if (f.max_link_loss < 0.0 || f.max_link_loss > 1.0)
        throw ExperimentError("fleet.max_link_loss must be in [0, 1]");
      for (const auto& m : f.models) ics_device_model(m);
      ics_device_model(f.initiator_model);
    }

    if (auto it = j.find("evolution"); it != j.end()) {
      reject_unknown(*it, {"collaborators", "tasks"}, "evolution");
      spec.evolution.collaborators = get_or(*it, "collaborators", spec.evolution.collaborators);
      spec.evolution.tasks = get_or(*it, "tasks", spec.evolution.tasks);
    }
    if (spec.mode == ExperimentMode::trust_evolution) {
      if (spec.evolution.collaborators.empty()) spec.evolution.collaborators = {"a2", "a3", "a16"};
      for (const auto& id : spec.evolution.collaborators)
        if (!spec.scenario.find_device(id)) throw ExperimentError("unknown evolution collaborator " + id);
    }

    if (auto it = j.find("oracle_bounds"); it != j.end()) {
      reject_unknown(*it, {"max_subtasks", "max_devices"}, "oracle_bounds");
      spec.oracle_bounds.max_subtasks = get_or(*it, "max_subtasks", spec.oracle_bounds.max_subtasks);
      spec.oracle_bounds.max_devices = get_or(*it, "max_devices", spec.oracle_bounds.max_devices);
    }
    spec.resample_layout = get_or(j, "resample_layout", false);
    if (spec.resample_layout && spec.scenario.channel.model != ChannelModel::pathloss)
      throw ExperimentError("resample_layout needs a path-loss channel");
    spec.jobs = std::max<std::size_t>(1, get_or<std::size_t>(j, "jobs", 1));
  } catch (const json::exception& e) {
    throw ExperimentError(std::string("experiment parse error: ") + e.what());
  }
  validate_sweep(spec);
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path,
                               const std::optional<ScenarioConfig>& scenario_override) {
  std::ifstream in(path);
  if (!in) throw ExperimentError("cannot open experiment file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ExperimentError("parse error in " + path.string() + ": " + e.what());
  }
  auto spec = experiment_from_json(j, path.parent_path(), scenario_override);
  if (spec.name.empty()) spec.name = path.stem().string();
  return spec;
}

ScenarioConfig scaled_fleet(const ScenarioConfig& base, const FleetScaling& fleet, std::size_t collaborators,
                            std::uint64_t seed) {
  if (base.channel.model != ChannelModel::pathloss)
    throw ExperimentError("fleet scaling needs a path-loss channel");
  ScenarioConfig cfg = base;
  cfg.devices.clear();

  auto model_reliability = [&](const std::string& model) -> const std::map<TypeIndex, double>* {
    for (const auto& d : base.devices)
      if (d.model == model) return &d.reliability;
    return nullptr;
  };

  // Device k's attributes come from its own stream, so a larger fleet extends
  // a smaller one with the same seed.
  const std::uint64_t root = mix64(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t k = 0; k <= collaborators; ++k) {
    const std::string& model_name = k == 0 ? fleet.initiator_model : fleet.models[(k - 1) % fleet.models.size()];
    const DeviceModel& model = ics_device_model(model_name);
    Rng rng = Rng::stream(root + k, "fleet-device");
    DeviceSpec d;
    d.id = "a" + std::to_string(k + 1);
    d.model = model.name;
    d.cpu_hz = model.cpu_hz * rng.uniform(1.0 - fleet.cpu_jitter, 1.0 + fleet.cpu_jitter);
    d.position = {rng.uniform(0.0, fleet.area_m), rng.uniform(0.0, fleet.area_m)};
    d.tx_power_w = model.tx_power_w;
    for (const auto& name : model.types)
      if (auto s = cfg.find_type(name)) d.supported_types.push_back(*s);
    std::sort(d.supported_types.begin(), d.supported_types.end());
    const auto* rel = model_reliability(model.name);
    for (TypeIndex s : d.supported_types) {
      double p = kDefaultReliability;
      if (rel)
        if (auto it = rel->find(s); it != rel->end()) p = it->second;
      d.reliability[s] = p;
    }
    cfg.devices.push_back(std::move(d));
  }

  const std::size_t n = cfg.devices.size();
  cfg.link_loss.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      Rng rng = Rng::stream(root ^ mix64((static_cast<std::uint64_t>(i) << 32) | j), "fleet-link");
      cfg.link_loss[i][j] = rng.uniform(0.0, fleet.max_link_loss);
    }
  return cfg;
}

ScenarioConfig resampled_layout(const ScenarioConfig& base, double area_m, double max_link_loss,
                                std::uint64_t seed) {
  ScenarioConfig cfg = base;
  Rng pos = Rng::stream(seed, "replica-layout");
  for (auto& d : cfg.devices) d.position = {pos.uniform(0.0, area_m), pos.uniform(0.0, area_m)};
  Rng loss = Rng::stream(seed, "replica-link-loss");
  const std::size_t n = cfg.devices.size();
  cfg.link_loss.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) cfg.link_loss[i][j] = loss.uniform(0.0, max_link_loss);
  return cfg;
}

World::World(ScenarioConfig cfg, TrustLedger ledger, Task task, TrustWeights one_to_one)
    : cfg_(std::move(cfg)),
      ledger_(std::move(ledger)),
      task_(std::move(task)),
      rates_(cfg_.devices, cfg_.channel),
      task_h_(build_task_hypergraph(task_)) {
  const std::size_t S = cfg_.task_types.size();
  ts_ = std::make_unique<TrustModel>(cfg_.devices, S, ledger_, cfg_.trust_weights);
  oto_ = std::make_unique<TrustModel>(cfg_.devices, S, ledger_, one_to_one);
  ts_h_ = std::make_unique<ResourceHypergraph>(
      build_resource_hypergraph(ts_->graph(), ledger_, cfg_.devices, cfg_.task_types, ts_->weights()));
  oto_h_ = std::make_unique<ResourceHypergraph>(
      build_resource_hypergraph(oto_->graph(), ledger_, cfg_.devices, cfg_.task_types, oto_->weights()));
}

ProblemInstance World::problem(bool one_to_one_trust) const {
  const TrustModel* model = one_to_one_trust ? oto_.get() : ts_.get();
  return {cfg_.devices, cfg_.task_types, &rates_, cfg_.value_weights, task_,
          [model](DeviceIndex i, DeviceIndex j, TypeIndex s) { return model->trust(i, j, s); }};
}

MatchResult World::solve(Solver solver, std::uint64_t seed, const OracleBounds& bounds) const {
  switch (solver) {
    case Solver::ttr:
      return solve_matching(task_h_, *ts_h_, problem(false), cfg_.replicator);
    case Solver::one_to_one:
      return baseline_one_to_one(task_h_, *oto_h_, problem(true), cfg_.replicator);
    case Solver::nn:
      return baseline_nn(problem(false));
    case Solver::random: {
      Rng rng = Rng::stream(seed, "random-baseline");
      return baseline_random(problem(false), rng);
    }
    case Solver::oracle:
      return oracle_brute_force(problem(false), bounds);
  }
  throw ExperimentError("unknown solver");
}

TrustWeights one_to_one_weights_for(const ExperimentSpec& spec, const TrustWeights& w) {
  if (!spec.one_to_one_beta) return one_to_one_weights(w);
  TrustWeights out = w;
  out.beta = {(*spec.one_to_one_beta)[0], (*spec.one_to_one_beta)[1], 0.0};
  return out;
}

namespace {

// Applies a sweep value to the scenario-level knobs.
void apply_axis(ScenarioConfig& cfg, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::value_weights:
      cfg.value_weights = {v, 1.0 - v};
      break;
    case SweepAxis::trust_weights: {
      // v is beta3; beta1 and beta2 keep their ratio.
      auto& b = cfg.trust_weights.beta;
      const double rest = b[0] + b[1];
      const double share = rest > 0.0 ? b[0] / rest : 0.5;
      b = {share * (1.0 - v), (1.0 - share) * (1.0 - v), v};
      break;
    }
    default:
      break;
  }
}

Task resolve_task(const TaskTemplate& t, const ScenarioConfig& cfg, SweepAxis axis, std::optional<double> v) {
  auto initiator = cfg.find_device(t.initiator);
  if (!initiator) throw ExperimentError("task initiator " + t.initiator + " is not in the fleet");
  Task task{*initiator, t.subtasks};
  if (v) {
    for (auto& b : task.subtasks) {
      if (axis == SweepAxis::min_trust) b.min_trust = *v;
      if (axis == SweepAxis::min_rate) b.min_rate_bps = *v;
    }
  }
  auto violations = validate_task(task, cfg);
  if (!violations.empty())
    throw ExperimentError("invalid task: " + violations.front().path + ": " + violations.front().message);
  return task;
}

}  // namespace

std::unique_ptr<World> build_world(const ExperimentSpec& spec, std::optional<double> sweep_value,
                                   std::uint64_t seed) {
  ScenarioConfig cfg = spec.axis == SweepAxis::fleet_size && sweep_value
                           ? scaled_fleet(spec.scenario, spec.fleet, static_cast<std::size_t>(*sweep_value), seed)
                           : spec.resample_layout
                               ? resampled_layout(spec.scenario, spec.fleet.area_m, spec.fleet.max_link_loss, seed)
                               : spec.scenario;
  if (sweep_value) apply_axis(cfg, spec.axis, *sweep_value);

  Task task = resolve_task(spec.task, cfg, spec.axis, sweep_value);
  TrustLedger ledger;
  Rng rng = Rng::stream(seed, "bootstrap");
  bootstrap_trust(cfg, ledger, spec.bootstrap_tasks, rng, {spec.bootstrap_max_subtasks});
  const TrustWeights oto = one_to_one_weights_for(spec, cfg.trust_weights);
  return std::make_unique<World>(std::move(cfg), std::move(ledger), std::move(task), oto);
}

std::unique_ptr<World> random_instance(const ScenarioConfig& base, std::uint64_t seed, std::size_t max_devices,
                                       std::size_t max_subtasks, double min_trust) {
  const std::size_t N = base.devices.size();
  const std::size_t cap = std::min(max_devices, N);
  if (cap < 2 || max_subtasks == 0) throw ExperimentError("random instance needs >= 2 devices and >= 1 subtask");
  Rng rng = Rng::stream(seed, "instance");

  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::size_t J = 2 + static_cast<std::size_t>(rng.index(cap - 1));
    std::vector<DeviceIndex> pool(N);
    for (std::size_t k = 0; k < N; ++k) pool[k] = k;
    rng.shuffle(pool);
    pool.resize(J);
    std::sort(pool.begin(), pool.end());

    ScenarioConfig cfg = base;
    cfg.devices.clear();
    cfg.link_loss.assign(J, std::vector<double>(J, 0.0));
    if (base.channel.model == ChannelModel::matrix) cfg.channel.rates_bps.assign(J, std::vector<double>(J, 0.0));
    for (std::size_t a = 0; a < J; ++a) {
      cfg.devices.push_back(base.devices[pool[a]]);
      for (std::size_t b = 0; b < J; ++b) {
        cfg.link_loss[a][b] = base.link_loss[pool[a]][pool[b]];
        if (base.channel.model == ChannelModel::matrix)
          cfg.channel.rates_bps[a][b] = base.channel.rates_bps[pool[a]][pool[b]];
      }
    }

    // Initiators need at least one type shared with some peer.
    std::vector<std::pair<DeviceIndex, std::vector<TypeIndex>>> initiators;
    for (DeviceIndex i = 0; i < J; ++i) {
      std::vector<TypeIndex> shared;
      for (TypeIndex s : cfg.devices[i].supported_types)
        for (DeviceIndex k = 0; k < J; ++k)
          if (k != i && cfg.devices[k].supports(s)) {
            shared.push_back(s);
            break;
          }
      if (!shared.empty()) initiators.emplace_back(i, std::move(shared));
    }
    if (initiators.empty()) continue;
    const auto& [initiator, types] = initiators[rng.index(initiators.size())];

    const std::size_t M = 1 + static_cast<std::size_t>(rng.index(std::min(max_subtasks, J - 1)));
    Task task{initiator, {}};
    for (std::size_t m = 0; m < M; ++m) {
      Subtask b;
      b.task_type = types[rng.index(types.size())];
      b.size_bits = rng.uniform(1.0, 10.0) * kBitsPerMegabyte;
      b.deadline_s = rng.uniform(1.0, 120.0);
      b.min_trust = min_trust;
      b.min_rate_bps = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0.0, 50.0) * kBitsPerMegabyte;
      task.subtasks.push_back(b);
    }

    TrustLedger ledger;
    Rng boot = Rng::stream(seed, "bootstrap");
    bootstrap_trust(cfg, ledger, 200, boot);
    const TrustWeights oto = one_to_one_weights(cfg.trust_weights);
    return std::make_unique<World>(std::move(cfg), std::move(ledger), std::move(task), oto);
  }
  throw ExperimentError("could not draw a random instance with a feasible initiator");
}

namespace {

ResultRow run_solver(const World& world, const ExperimentSpec& spec, Solver solver, std::optional<double> value,
                     std::uint64_t seed) {
  ResultRow row;
  row.axis = to_string(value ? spec.axis : SweepAxis::none);
  row.value = value;
  row.solver = to_string(solver);
  row.seed = seed;
  const std::size_t M = world.task().subtasks.size();
  row.unassigned = M;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    MatchResult r = world.solve(solver, seed, spec.oracle_bounds);
    const auto violations =
        check_feasibility(r.assignment, world.problem(solver == Solver::one_to_one), /*allow_partial=*/true);
    if (!violations.empty()) {
      row.error = std::string("infeasible: ") + to_string(violations.front().constraint);
    } else {
      row.avg_value = r.average_value;
      row.assigned = r.assigned_count();
      row.unassigned = M - row.assigned;
      row.iterations = r.diagnostics.iterations;
      if (r.diagnostics.fallback_greedy) row.note = "greedy_fallback";
      const auto& devices = world.scenario().devices;
      for (std::size_t m = 0; m < M; ++m) {
        SubtaskDetail d;
        if (r.assignment[m]) {
          d.collaborator = devices[*r.assignment[m]].id;
          const auto& v = *r.details[m];
          d.value = v.value;
          d.value_time = v.value_time;
          d.value_energy = v.value_energy;
          d.time_s = v.cost.t_total_s;
          d.energy_j = v.cost.e_total_j;
        }
        row.subtasks.push_back(d);
      }
    }
  } catch (const NoFeasibleStrategyError&) {
    row.note = "no_feasible_strategy";
    row.subtasks.assign(M, SubtaskDetail{});
  } catch (const OracleBoundError& e) {
    row.error = std::string("oracle_bound: ") + e.what();
  }
  if (spec.timing)
    row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::vector<TrustSnapshot> evolve_trust(const ExperimentSpec& spec, const World& world, std::uint64_t seed) {
  const ScenarioConfig& cfg = world.scenario();
  TrustLedger ledger = world.ledger();
  const Task& task = world.task();
  const TrustWeights oto_w = one_to_one_weights_for(spec, cfg.trust_weights);

  std::vector<DeviceIndex> trio;
  for (const auto& id : spec.evolution.collaborators) trio.push_back(*cfg.find_device(id));

  std::vector<TrustSnapshot> out;
  auto snapshot = [&](std::size_t index) {
    const std::size_t S = cfg.task_types.size();
    TrustModel ts(cfg.devices, S, ledger, cfg.trust_weights);
    TrustModel oto(cfg.devices, S, ledger, oto_w);
    for (DeviceIndex c : trio)
      for (TypeIndex s = 0; s < S; ++s) {
        auto a = ts.trust(task.initiator, c, s);
        auto b = oto.trust(task.initiator, c, s);
        if (!a || !b) continue;
        out.push_back({seed, index, cfg.devices[c].id, cfg.type(s).name, *a, *b});
      }
  };

  Rng rng = Rng::stream(seed, "evolution");
  snapshot(0);
  for (std::size_t t = 1; t <= spec.evolution.tasks; ++t) {
    std::vector<DeviceIndex> order = trio;
    rng.shuffle(order);
    for (std::size_t m = 0; m < task.subtasks.size(); ++m) {
      const DeviceIndex c = order[m % order.size()];
      const TypeIndex s = task.subtasks[m].task_type;
      if (!cfg.devices[c].supports(s)) continue;
      simulate_outcome(ledger, cfg, task.initiator, c, s, rng);
    }
    snapshot(t);
  }
  return out;
}

struct Job {
  std::optional<double> value;
  std::uint64_t seed;
};

RunArtifacts run_jobs(const ExperimentSpec& spec, const std::vector<Job>& jobs, bool evolve) {
  std::vector<std::vector<ResultRow>> rows(jobs.size());
  std::vector<std::vector<TrustSnapshot>> snaps(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());

  auto work = [&](std::size_t k) {
    try {
      auto world = build_world(spec, jobs[k].value, jobs[k].seed);
      for (Solver s : spec.solvers) rows[k].push_back(run_solver(*world, spec, s, jobs[k].value, jobs[k].seed));
      if (evolve) snaps[k] = evolve_trust(spec, *world, jobs[k].seed);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  const std::size_t threads = std::min(spec.jobs, jobs.size());
  if (threads <= 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) work(k);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  RunArtifacts out;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    out.rows.insert(out.rows.end(), rows[k].begin(), rows[k].end());
    out.trust_snapshots.insert(out.trust_snapshots.end(), snaps[k].begin(), snaps[k].end());
  }
  return out;
}

}  // namespace

RunArtifacts run_scenario(const ExperimentSpec& spec) {
  std::vector<Job> jobs;
  for (auto seed : spec.seeds) jobs.push_back({std::nullopt, seed});
  return run_jobs(spec, jobs, spec.mode == ExperimentMode::trust_evolution);
}

RunArtifacts run_sweep(const ExperimentSpec& spec) {
  if (spec.axis == SweepAxis::none || spec.values.empty()) return run_scenario(spec);
  validate_sweep(spec);
  std::vector<Job> jobs;
  for (double v : spec.values)
    for (auto seed : spec.seeds) jobs.push_back({v, seed});
  return run_jobs(spec, jobs, spec.mode == ExperimentMode::trust_evolution);
}

std::vector<Aggregate> RunArtifacts::aggregates() const {
  struct Acc {
    Aggregate agg;
    std::vector<double> xs;
  };
  std::vector<Acc> accs;
  for (const auto& r : rows) {
    auto it = std::find_if(accs.begin(), accs.end(), [&](const Acc& a) {
      return a.agg.axis == r.axis && a.agg.value == r.value && a.agg.solver == r.solver;
    });
    if (it == accs.end()) {
      accs.push_back({{r.axis, r.value, r.solver, 0, 0.0, 0.0}, {}});
      it = std::prev(accs.end());
    }
    if (r.ok()) it->xs.push_back(r.avg_value);
  }
  std::vector<Aggregate> out;
  for (auto& a : accs) {
    const auto n = a.xs.size();
    a.agg.count = n;
    if (n > 0) {
      double sum = 0.0;
      for (double x : a.xs) sum += x;
      a.agg.mean = sum / static_cast<double>(n);
      if (n > 1) {
        double ss = 0.0;
        for (double x : a.xs) ss += (x - a.agg.mean) * (x - a.agg.mean);
        a.agg.stddev = std::sqrt(ss / static_cast<double>(n - 1));
      }
    } else {
      a.agg.mean = std::nan("");
    }
    out.push_back(a.agg);
  }
  return out;
}

void write_results_csv(std::ostream& out, const RunArtifacts& a) {
  out << "sweep_axis,sweep_value,solver,seed,avg_value,assigned_count,unassigned_count,iterations,runtime_ms\n";
  for (const auto& r : a.rows) {
    out << r.axis << ',' << (r.value ? format_number(*r.value) : "") << ',' << r.solver << ',' << r.seed << ','
        << (r.ok() ? format_number(r.avg_value) : "") << ',' << r.assigned << ',' << r.unassigned << ','
        << r.iterations << ',' << format_number(r.runtime_ms) << '\n';
  }
}

json results_to_json(const RunArtifacts& a) {
  json rows = json::array();
  for (const auto& r : a.rows) {
    json subtasks = json::array();
    for (const auto& d : r.subtasks)
      subtasks.push_back({{"collaborator", d.collaborator.empty() ? json(nullptr) : json(d.collaborator)},
                          {"value", d.value},
                          {"value_time", d.value_time},
                          {"value_energy", d.value_energy},
                          {"time_s", d.time_s},
                          {"energy_j", d.energy_j}});
    rows.push_back({{"sweep_axis", r.axis},
                    {"sweep_value", r.value ? json(*r.value) : json(nullptr)},
                    {"solver", r.solver},
                    {"seed", r.seed},
                    {"avg_value", r.avg_value},
                    {"assigned_count", r.assigned},
                    {"unassigned_count", r.unassigned},
                    {"iterations", r.iterations},
                    {"runtime_ms", r.runtime_ms},
                    {"error", r.error},
                    {"note", r.note},
                    {"subtasks", subtasks}});
  }
  json aggs = json::array();
  for (const auto& g : a.aggregates())
    aggs.push_back({{"sweep_axis", g.axis},
                    {"sweep_value", g.value ? json(*g.value) : json(nullptr)},
                    {"solver", g.solver},
                    {"count", g.count},
                    {"mean", g.count ? json(g.mean) : json(nullptr)},
                    {"stddev", g.stddev}});
  json snaps = json::array();
  for (const auto& s : a.trust_snapshots)
    snaps.push_back({{"seed", s.seed},
                     {"task_index", s.task_index},
                     {"collaborator", s.collaborator},
                     {"task_type", s.task_type},
                     {"task_specific", s.task_specific},
                     {"one_to_one", s.one_to_one}});
  return {{"rows", rows}, {"aggregates", aggs}, {"trust_snapshots", snaps}};
}

RunArtifacts results_from_json(const json& j) {
  RunArtifacts a;
  try {
    for (const auto& r : j.at("rows")) {
      ResultRow row;
      row.axis = r.at("sweep_axis").get<std::string>();
      if (!r.at("sweep_value").is_null()) row.value = r.at("sweep_value").get<double>();
      row.solver = r.at("solver").get<std::string>();
      row.seed = r.at("seed").get<std::uint64_t>();
      row.avg_value = r.at("avg_value").get<double>();
      row.assigned = r.at("assigned_count").get<std::size_t>();
      row.unassigned = r.at("unassigned_count").get<std::size_t>();
      row.iterations = r.at("iterations").get<std::size_t>();
      row.runtime_ms = r.at("runtime_ms").get<double>();
      row.error = get_or<std::string>(r, "error", "");
      row.note = get_or<std::string>(r, "note", "");
      for (const auto& d : r.at("subtasks")) {
        SubtaskDetail sd;
        if (!d.at("collaborator").is_null()) sd.collaborator = d.at("collaborator").get<std::string>();
        sd.value = d.at("value").get<double>();
        sd.value_time = d.at("value_time").get<double>();
        sd.value_energy = d.at("value_energy").get<double>();
        sd.time_s = d.at("time_s").get<double>();
        sd.energy_j = d.at("energy_j").get<double>();
        row.subtasks.push_back(sd);
      }
      a.rows.push_back(std::move(row));
    }
    if (auto it = j.find("trust_snapshots"); it != j.end())
      for (const auto& s : *it)
        a.trust_snapshots.push_back({s.at("seed").get<std::uint64_t>(), s.at("task_index").get<std::size_t>(),
                                     s.at("collaborator").get<std::string>(), s.at("task_type").get<std::string>(),
                                     s.at("task_specific").get<double>(), s.at("one_to_one").get<double>()});
  } catch (const json::exception& e) {
    throw ExperimentError(std::string("results parse error: ") + e.what());
  }
  return a;
}

void write_summary_csv(std::ostream& out, const RunArtifacts& a) {
  out << "sweep_axis,sweep_value,solver,count,mean,stddev\n";
  for (const auto& g : a.aggregates())
    out << g.axis << ',' << (g.value ? format_number(*g.value) : "") << ',' << g.solver << ',' << g.count << ','
        << (g.count ? format_number(g.mean) : "") << ',' << format_number(g.stddev) << '\n';
}

void write_trust_csv(std::ostream& out, const RunArtifacts& a) {
  out << "seed,task_index,collaborator,task_type,task_specific,one_to_one\n";
  for (const auto& s : a.trust_snapshots)
    out << s.seed << ',' << s.task_index << ',' << s.collaborator << ',' << s.task_type << ','
        << format_number(s.task_specific) << ',' << format_number(s.one_to_one) << '\n';
}

void emit_results(const RunArtifacts& a, OutputFormat format, const std::filesystem::path& path) {
  if (a.empty()) throw ExperimentError("nothing to emit: run produced no rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExperimentError("cannot write " + path.string());
  if (format == OutputFormat::csv) write_results_csv(out, a);
  else out << results_to_json(a).dump(2) << '\n';
  if (!out) throw ExperimentError("write failed for " + path.string());
}

std::vector<double> solver_series(const std::vector<Aggregate>& aggs, const std::string& solver) {
  std::vector<double> out;
  for (const auto& g : aggs)
    if (g.solver == solver) out.push_back(g.mean);
  return out;
}

bool non_increasing(const std::vector<double>& xs, double tolerance) {
  for (std::size_t k = 1; k < xs.size(); ++k)
    if (xs[k] > xs[k - 1] + tolerance) return false;
  return true;
}

bool non_decreasing(const std::vector<double>& xs, double tolerance) {
  for (std::size_t k = 1; k < xs.size(); ++k)
    if (xs[k] < xs[k - 1] - tolerance) return false;
  return true;
}

}  // namespace ttr

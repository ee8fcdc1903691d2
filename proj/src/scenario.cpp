#include "ttr/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "ttr/rng.hpp"

namespace ttr {

using nlohmann::json;

bool DeviceSpec::supports(TypeIndex s) const {
  return std::binary_search(supported_types.begin(), supported_types.end(), s);
}

double DeviceSpec::reliability_for(TypeIndex s) const {
  auto it = reliability.find(s);
  if (it != reliability.end()) return it->second;
  return supports(s) ? kDefaultReliability : 0.0;
}

std::optional<DeviceIndex> ScenarioConfig::find_device(const std::string& id) const {
  for (DeviceIndex i = 0; i < devices.size(); ++i)
    if (devices[i].id == id) return i;
  return std::nullopt;
}

std::optional<TypeIndex> ScenarioConfig::find_type(const std::string& name) const {
  for (TypeIndex s = 0; s < task_types.size(); ++s)
    if (task_types[s].name == name) return s;
  return std::nullopt;
}

namespace {

constexpr double kSimplexTol = 1e-9;

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

void check_simplex(std::vector<Violation>& out, const std::string& path,
                   std::initializer_list<double> xs) {
  double sum = 0.0;
  for (double x : xs) {
    if (!in_unit(x)) {
      out.push_back({"range", path, "weight outside [0,1]"});
      return;
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    std::ostringstream msg;
    msg << "weights sum to " << sum << ", expected 1";
    out.push_back({"simplex", path, msg.str()});
  }
}

void check_square(std::vector<Violation>& out, const std::string& path,
                  const std::vector<std::vector<double>>& m, std::size_t n) {
  if (m.size() != n) {
    out.push_back({"shape", path, "expected " + std::to_string(n) + " rows"});
    return;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (m[i].size() != n) {
      out.push_back({"shape", path + "/" + std::to_string(i),
                     "expected " + std::to_string(n) + " columns"});
      return;
    }
}

// Strict key checking: every key in `j` must be listed.
void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ScenarioError("parse error: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = std::any_of(allowed.begin(), allowed.end(),
                          [&](const char* k) { return it.key() == k; });
    if (!ok) throw ScenarioError("parse error: unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

std::vector<std::vector<double>> parse_matrix(const json& j, std::size_t n) {
  if (j.is_number()) {
    double v = j.get<double>();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, v));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 0.0;
    return m;
  }
  return j.get<std::vector<std::vector<double>>>();
}

}  // namespace

std::vector<Violation> validate_scenario(const ScenarioConfig& cfg) {
  std::vector<Violation> out;
  const std::size_t S = cfg.task_types.size();
  const std::size_t J = cfg.devices.size();

  if (S == 0) out.push_back({"empty", "/task_types", "no task types"});
  std::set<std::string> type_names;
  for (std::size_t s = 0; s < S; ++s) {
    const auto& t = cfg.task_types[s];
    const std::string path = "/task_types/" + std::to_string(s);
    if (t.id != s) out.push_back({"reference", path + "/id", "ids must be dense 0..S-1"});
    if (t.name.empty()) out.push_back({"empty", path + "/name", "empty type name"});
    if (!type_names.insert(t.name).second)
      out.push_back({"duplicate", path + "/name", "duplicate type name " + t.name});
    if (!(t.processing_density > 0.0) || !std::isfinite(t.processing_density))
      out.push_back({"range", path + "/processing_density", "processing density must be > 0"});
  }

  if (J == 0) out.push_back({"empty", "/devices", "no devices"});
  std::set<std::string> ids;
  std::optional<std::size_t> dims;
  for (std::size_t i = 0; i < J; ++i) {
    const auto& d = cfg.devices[i];
    const std::string path = "/devices/" + std::to_string(i);
    if (d.id.empty()) out.push_back({"empty", path + "/id", "empty device id"});
    if (!ids.insert(d.id).second)
      out.push_back({"duplicate", path + "/id", "duplicate device id " + d.id});
    if (!(d.cpu_hz > 0.0) || !std::isfinite(d.cpu_hz))
      out.push_back({"range", path + "/cpu_hz", "cpu_hz must be > 0"});
    if (!(d.tx_power_w > 0.0) || !std::isfinite(d.tx_power_w))
      out.push_back({"range", path + "/tx_power_w", "tx_power_w must be > 0"});
    if (d.supported_types.empty())
      out.push_back({"empty", path + "/supported_types", "device supports no task type"});
    if (!std::is_sorted(d.supported_types.begin(), d.supported_types.end()) ||
        std::adjacent_find(d.supported_types.begin(), d.supported_types.end()) !=
            d.supported_types.end())
      out.push_back({"duplicate", path + "/supported_types", "types must be unique"});
    for (TypeIndex s : d.supported_types)
      if (s >= S) out.push_back({"reference", path + "/supported_types", "unknown task type"});
    for (const auto& [s, p] : d.reliability) {
      const std::string name = s < S ? cfg.task_types[s].name : std::to_string(s);
      if (s >= S) out.push_back({"reference", path + "/reliability/" + name, "unknown task type"});
      if (!in_unit(p))
        out.push_back({"range", path + "/reliability/" + name, "reliability outside [0,1]"});
    }
    const std::size_t n = d.position.size();
    if (n != 0 && n != 2 && n != 3)
      out.push_back({"shape", path + "/position", "position must have 2 or 3 coordinates"});
    if (cfg.channel.model == ChannelModel::pathloss) {
      if (n == 0) out.push_back({"missing", path + "/position", "pathloss channel needs positions"});
      if (n != 0 && dims && *dims != n)
        out.push_back({"shape", path + "/position", "mixed 2-D and 3-D positions"});
      if (n != 0 && !dims) dims = n;
    }
    for (double x : d.position)
      if (!std::isfinite(x)) out.push_back({"range", path + "/position", "non-finite coordinate"});
  }

  const auto& ch = cfg.channel;
  if (ch.model == ChannelModel::pathloss) {
    if (!(ch.params.bandwidth_hz > 0.0))
      out.push_back({"range", "/channel/bandwidth_hz", "bandwidth must be > 0"});
    if (!(ch.params.noise_w > 0.0)) out.push_back({"range", "/channel/noise_w", "noise must be > 0"});
    if (!(ch.params.alpha > 0.0)) out.push_back({"range", "/channel/alpha", "alpha must be > 0"});
  } else {
    const std::size_t before = out.size();
    check_square(out, "/channel/rates_bps", ch.rates_bps, J);
    if (out.size() == before)
      for (std::size_t i = 0; i < J; ++i)
        for (std::size_t k = 0; k < J; ++k)
          if (!(ch.rates_bps[i][k] >= 0.0) || !std::isfinite(ch.rates_bps[i][k]))
            out.push_back({"range", "/channel/rates_bps/" + std::to_string(i) + "/" + std::to_string(k),
                           "rate must be finite and >= 0"});
  }

  {
    const std::size_t before = out.size();
    check_square(out, "/link_loss", cfg.link_loss, J);
    if (out.size() == before)
      for (std::size_t i = 0; i < J; ++i)
        for (std::size_t k = 0; k < J; ++k)
          if (!in_unit(cfg.link_loss[i][k]))
            out.push_back({"range", "/link_loss/" + std::to_string(i) + "/" + std::to_string(k),
                           "loss rate outside [0,1]"});
  }

  const auto& tw = cfg.trust_weights;
  check_simplex(out, "/trust_weights/beta", {tw.beta[0], tw.beta[1], tw.beta[2]});
  check_simplex(out, "/trust_weights/delta", {tw.delta[0], tw.delta[1], tw.delta[2]});
  if (!in_unit(tw.neutral_prior))
    out.push_back({"range", "/trust_weights/neutral_prior", "prior outside [0,1]"});
  check_simplex(out, "/value_weights", {cfg.value_weights.xi_time, cfg.value_weights.xi_energy});
  if (!in_unit(cfg.loss_threshold))
    out.push_back({"range", "/loss_threshold", "threshold outside [0,1]"});
  if (cfg.replicator.max_iters == 0)
    out.push_back({"range", "/replicator/max_iters", "need at least one iteration"});
  if (!(cfg.replicator.convergence_eps > 0.0))
    out.push_back({"range", "/replicator/convergence_eps", "eps must be > 0"});
  if (cfg.replicator.ess_threshold &&
      !(*cfg.replicator.ess_threshold >= 0.0 && *cfg.replicator.ess_threshold < 1.0))
    out.push_back({"range", "/replicator/ess_threshold", "threshold outside [0,1)"});
  return out;
}

std::vector<Violation> validate_task(const Task& task, const ScenarioConfig& cfg) {
  std::vector<Violation> out;
  const std::size_t J = cfg.devices.size();
  if (task.initiator >= J) out.push_back({"reference", "/initiator", "initiator not in fleet"});
  const std::size_t M = task.subtasks.size();
  if (M == 0) out.push_back({"empty", "/subtasks", "task has no subtasks"});
  if (M >= J) out.push_back({"range", "/subtasks", "need fewer subtasks than devices"});
  for (std::size_t m = 0; m < M; ++m) {
    const auto& b = task.subtasks[m];
    const std::string path = "/subtasks/" + std::to_string(m);
    if (b.task_type >= cfg.task_types.size())
      out.push_back({"reference", path + "/task_type", "unknown task type"});
    if (!(b.size_bits > 0.0)) out.push_back({"range", path + "/size_bits", "size must be > 0"});
    if (!(b.deadline_s > 0.0)) out.push_back({"range", path + "/deadline_s", "deadline must be > 0"});
    if (!in_unit(b.min_trust)) out.push_back({"range", path + "/min_trust", "min_trust outside [0,1]"});
    if (!(b.min_rate_bps >= 0.0))
      out.push_back({"range", path + "/min_rate_bps", "min_rate must be >= 0"});
  }
  return out;
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig cfg;
  try {
    reject_unknown(j, {"task_types", "devices", "channel", "link_loss", "trust_weights",
                       "value_weights", "loss_threshold", "replicator", "rng_seed"},
                   "scenario");
    const auto& types = j.at("task_types");
    for (std::size_t s = 0; s < types.size(); ++s) {
      const auto& t = types[s];
      reject_unknown(t, {"id", "name", "processing_density"}, "task_types[" + std::to_string(s) + "]");
      cfg.task_types.push_back({get_or<std::size_t>(t, "id", s), t.at("name").get<std::string>(),
                                t.at("processing_density").get<double>()});
    }

    const auto& devices = j.at("devices");
    for (std::size_t i = 0; i < devices.size(); ++i) {
      const auto& d = devices[i];
      const std::string where = "devices[" + std::to_string(i) + "]";
      reject_unknown(d, {"id", "model", "cpu_hz", "position", "tx_power_w", "supported_types",
                         "reliability"},
                     where);
      DeviceSpec dev;
      dev.id = d.at("id").get<std::string>();
      dev.model = get_or<std::string>(d, "model", "");
      dev.cpu_hz = d.at("cpu_hz").get<double>();
      dev.position = get_or<std::vector<double>>(d, "position", {});
      dev.tx_power_w = d.at("tx_power_w").get<double>();
      for (const auto& name : d.at("supported_types")) {
        auto s = cfg.find_type(name.get<std::string>());
        if (!s) throw ScenarioError("validation error [reference] /" + where +
                                    "/supported_types: unknown task type " + name.get<std::string>());
        dev.supported_types.push_back(*s);
      }
      std::sort(dev.supported_types.begin(), dev.supported_types.end());
      if (auto it = d.find("reliability"); it != d.end()) {
        for (auto r = it->begin(); r != it->end(); ++r) {
          auto s = cfg.find_type(r.key());
          if (!s) throw ScenarioError("validation error [reference] /" + where +
                                      "/reliability: unknown task type " + r.key());
          dev.reliability[*s] = r->get<double>();
        }
      }
      for (TypeIndex s : dev.supported_types) dev.reliability.try_emplace(s, kDefaultReliability);
      cfg.devices.push_back(std::move(dev));
    }
    const std::size_t J = cfg.devices.size();

    if (auto it = j.find("channel"); it != j.end()) {
      const auto& c = *it;
      const std::string model = c.at("model").get<std::string>();
      if (model == "pathloss") {
        reject_unknown(c, {"model", "bandwidth_hz", "noise_w", "alpha"}, "channel");
        cfg.channel.model = ChannelModel::pathloss;
        cfg.channel.params.bandwidth_hz = get_or(c, "bandwidth_hz", cfg.channel.params.bandwidth_hz);
        cfg.channel.params.noise_w = get_or(c, "noise_w", cfg.channel.params.noise_w);
        cfg.channel.params.alpha = get_or(c, "alpha", cfg.channel.params.alpha);
      } else if (model == "matrix") {
        reject_unknown(c, {"model", "rates_bps"}, "channel");
        cfg.channel.model = ChannelModel::matrix;
        cfg.channel.rates_bps = c.at("rates_bps").get<std::vector<std::vector<double>>>();
      } else {
        throw ScenarioError("parse error: unknown channel model '" + model + "'");
      }
    }

    if (auto it = j.find("link_loss"); it != j.end())
      cfg.link_loss = parse_matrix(*it, J);
    else
      cfg.link_loss = parse_matrix(json(0.0), J);

    if (auto it = j.find("trust_weights"); it != j.end()) {
      reject_unknown(*it, {"beta", "delta", "neutral_prior"}, "trust_weights");
      cfg.trust_weights.beta = get_or(*it, "beta", cfg.trust_weights.beta);
      cfg.trust_weights.delta = get_or(*it, "delta", cfg.trust_weights.delta);
      cfg.trust_weights.neutral_prior = get_or(*it, "neutral_prior", cfg.trust_weights.neutral_prior);
    }
    if (auto it = j.find("value_weights"); it != j.end()) {
      reject_unknown(*it, {"xi_time", "xi_energy"}, "value_weights");
      cfg.value_weights.xi_time = get_or(*it, "xi_time", cfg.value_weights.xi_time);
      cfg.value_weights.xi_energy = get_or(*it, "xi_energy", cfg.value_weights.xi_energy);
    }
    cfg.loss_threshold = get_or(j, "loss_threshold", cfg.loss_threshold);
    if (auto it = j.find("replicator"); it != j.end()) {
      reject_unknown(*it, {"max_iters", "convergence_eps", "ess_threshold"}, "replicator");
      cfg.replicator.max_iters = get_or(*it, "max_iters", cfg.replicator.max_iters);
      cfg.replicator.convergence_eps = get_or(*it, "convergence_eps", cfg.replicator.convergence_eps);
      if (auto e = it->find("ess_threshold"); e != it->end() && !e->is_null())
        cfg.replicator.ess_threshold = e->get<double>();
    }
    cfg.rng_seed = get_or<std::uint64_t>(j, "rng_seed", 0);
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("parse error: ") + e.what());
  }

  auto violations = validate_scenario(cfg);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw ScenarioError("validation error [" + v.code + "] " + v.path + ": " + v.message);
  }
  return cfg;
}

json scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["task_types"] = json::array();
  for (const auto& t : cfg.task_types)
    j["task_types"].push_back({{"id", t.id}, {"name", t.name}, {"processing_density", t.processing_density}});
  j["devices"] = json::array();
  for (const auto& d : cfg.devices) {
    json dj{{"id", d.id}, {"cpu_hz", d.cpu_hz}, {"tx_power_w", d.tx_power_w}};
    if (!d.model.empty()) dj["model"] = d.model;
    if (!d.position.empty()) dj["position"] = d.position;
    json types = json::array();
    for (TypeIndex s : d.supported_types) types.push_back(cfg.task_types.at(s).name);
    dj["supported_types"] = types;
    json rel = json::object();
    for (const auto& [s, p] : d.reliability) rel[cfg.task_types.at(s).name] = p;
    dj["reliability"] = rel;
    j["devices"].push_back(dj);
  }
  if (cfg.channel.model == ChannelModel::pathloss) {
    j["channel"] = {{"model", "pathloss"},
                    {"bandwidth_hz", cfg.channel.params.bandwidth_hz},
                    {"noise_w", cfg.channel.params.noise_w},
                    {"alpha", cfg.channel.params.alpha}};
  } else {
    j["channel"] = {{"model", "matrix"}, {"rates_bps", cfg.channel.rates_bps}};
  }
  j["link_loss"] = cfg.link_loss;
  j["trust_weights"] = {{"beta", cfg.trust_weights.beta},
                        {"delta", cfg.trust_weights.delta},
                        {"neutral_prior", cfg.trust_weights.neutral_prior}};
  j["value_weights"] = {{"xi_time", cfg.value_weights.xi_time},
                        {"xi_energy", cfg.value_weights.xi_energy}};
  j["loss_threshold"] = cfg.loss_threshold;
  j["replicator"] = {{"max_iters", cfg.replicator.max_iters},
                     {"convergence_eps", cfg.replicator.convergence_eps},
                     {"ess_threshold", cfg.replicator.ess_threshold
                                           ? json(*cfg.replicator.ess_threshold)
                                           : json(nullptr)}};
  j["rng_seed"] = cfg.rng_seed;
  return j;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("parse error in " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write " + path.string());
  out << scenario_to_json(cfg).dump(2) << '\n';
}

Task task_from_json(const json& j, const ScenarioConfig& cfg) {
  Task task;
  try {
    reject_unknown(j, {"initiator", "subtasks"}, "task");
    const auto id = j.at("initiator").get<std::string>();
    auto initiator = cfg.find_device(id);
    if (!initiator) throw ScenarioError("validation error [reference] /initiator: unknown device " + id);
    task.initiator = *initiator;
    for (const auto& b : j.at("subtasks")) {
      reject_unknown(b, {"task_type", "size_bits", "deadline_s", "min_trust", "min_rate_bps"}, "subtask");
      const auto name = b.at("task_type").get<std::string>();
      auto s = cfg.find_type(name);
      if (!s) throw ScenarioError("validation error [reference] task_type: unknown " + name);
      task.subtasks.push_back({*s, b.at("size_bits").get<double>(), b.at("deadline_s").get<double>(),
                               get_or(b, "min_trust", 0.0), get_or(b, "min_rate_bps", 0.0)});
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("parse error: ") + e.what());
  }
  auto violations = validate_task(task, cfg);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw ScenarioError("validation error [" + v.code + "] " + v.path + ": " + v.message);
  }
  return task;
}

json task_to_json(const Task& task, const ScenarioConfig& cfg) {
  json subtasks = json::array();
  for (const auto& b : task.subtasks)
    subtasks.push_back({{"task_type", cfg.type(b.task_type).name},
                        {"size_bits", b.size_bits},
                        {"deadline_s", b.deadline_s},
                        {"min_trust", b.min_trust},
                        {"min_rate_bps", b.min_rate_bps}});
  return {{"initiator", cfg.devices.at(task.initiator).id}, {"subtasks", subtasks}};
}

const std::vector<DeviceModel>& ics_device_models() {
  static const std::vector<DeviceModel> models = {
      {"iPad", 2.34e9, 0.700, {"FR", "TWC", "3DM", "VT"}},
      {"Pixel 8", 2.91e9, 0.740, {"FR", "TWC", "3DM"}},
      {"DELL 5200", 3.8e9, 0.660, {"FR", "TWC", "VT"}},
      {"DELL 5820", 3.2e9, 0.660, {"FR", "TWC", "VT"}},
      {"Lambda", 4.5e9, 0.660, {"FR", "TWC", "VT", "3DM"}},
      {"Rosbot Plus", 168e6, 0.660, {"3DM"}},
      {"Robofleet", 72e6, 0.660, {"3DM"}},
  };
  return models;
}

const DeviceModel& ics_device_model(const std::string& name) {
  for (const auto& m : ics_device_models())
    if (m.name == name) return m;
  throw ScenarioError("unknown device model '" + name + "'");
}

std::vector<TaskType> ics_task_types() {
  return {{0, "FR", 2339.0}, {1, "VT", 1000.0}, {2, "TWC", 16800.0}, {3, "3DM", 1500.0}};
}

ScenarioConfig builtin_ics_catalog(const IcsLayout& opt) {
  const std::uint64_t seed = opt.seed;
  ScenarioConfig cfg;
  cfg.task_types = ics_task_types();
  const std::vector<std::pair<std::string, int>> fleet = {
      {"iPad", 1}, {"Pixel 8", 8}, {"DELL 5200", 3}, {"DELL 5820", 3},
      {"Lambda", 2}, {"Rosbot Plus", 4}, {"Robofleet", 5}};
  Rng layout = Rng::stream(seed, "layout");
  int next_id = 1;
  for (const auto& [name, count] : fleet) {
    const auto& model = ics_device_model(name);
    for (int k = 0; k < count; ++k) {
      DeviceSpec d;
      d.id = "a" + std::to_string(next_id++);
      d.model = model.name;
      d.cpu_hz = model.cpu_hz;
      d.tx_power_w = model.tx_power_w;
      const double x = layout.uniform(0.0, opt.area_m);
      const double y = layout.uniform(0.0, opt.area_m);
      d.position = {x, y};
      for (const auto& t : model.types) d.supported_types.push_back(*cfg.find_type(t));
      std::sort(d.supported_types.begin(), d.supported_types.end());
      cfg.devices.push_back(std::move(d));
    }
  }
  // Drawn after the layout so positions do not depend on the reliability range.
  Rng rel = Rng::stream(seed, "reliability");
  for (auto& d : cfg.devices) {
    auto [lo, hi] = std::pair{opt.reliability_min, opt.reliability_max};
    if (auto it = opt.model_reliability.find(d.model); it != opt.model_reliability.end()) std::tie(lo, hi) = it->second;
    for (TypeIndex s : d.supported_types) d.reliability[s] = lo == hi ? lo : rel.uniform(lo, hi);
  }
  const std::size_t J = cfg.devices.size();
  Rng loss = Rng::stream(seed, "link-loss");
  cfg.link_loss.assign(J, std::vector<double>(J, 0.0));
  for (std::size_t i = 0; i < J; ++i)
    for (std::size_t k = 0; k < J; ++k)
      if (i != k) cfg.link_loss[i][k] = loss.uniform(0.0, opt.max_link_loss);
  cfg.loss_threshold = 0.05;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace ttr

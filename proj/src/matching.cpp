#include "ttr/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ttr {

ValueBreakdown ProblemInstance::value(std::size_t m, DeviceIndex j) const {
  const auto& b = subtask(m);
  return value_of_completion(b, task_types[b.task_type].processing_density, devices[task.initiator],
                             devices[j], rate(j), value_weights);
}

bool ProblemInstance::admissible(std::size_t m, DeviceIndex j) const {
  if (j >= devices.size() || j == task.initiator) return false;
  const auto& b = subtask(m);
  if (!devices[j].supports(b.task_type)) return false;
  if (rate(j) < b.min_rate_bps) return false;
  auto t = trust(task.initiator, j, b.task_type);
  return t && *t >= b.min_trust;
}

std::size_t MatchResult::assigned_count() const {
  return static_cast<std::size_t>(
      std::count_if(assignment.begin(), assignment.end(), [](const auto& a) { return a.has_value(); }));
}

StrategySet generate_strategies(const TaskHypergraph& task_h, const ResourceHypergraph& res_h,
                                const ProblemInstance& problem) {
  if (task_h.initiator != problem.task.initiator)
    throw std::invalid_argument("task hypergraph and problem disagree on the initiator");
  StrategySet set;
  set.subtask_count = task_h.subtasks.size();
  set.device_count = problem.devices.size();
  const auto edges = res_h.hyperedges();
  for (const auto& te : task_h.hyperedges) {
    const auto& b = task_h.subtasks[te.subtask];
    for (std::size_t k : res_h.edges_from(te.initiator, te.task_type)) {
      const auto& re = edges[k];
      if (re.weight < te.weight) continue;
      if (problem.rate(re.collaborator) < b.min_rate_bps) continue;
      Strategy st;
      st.subtask = te.subtask;
      st.resource_edge = k;
      st.collaborator = re.collaborator;
      st.trust = re.weight;
      st.detail = problem.value(te.subtask, re.collaborator);
      st.score = st.detail.value;
      set.strategies.push_back(st);
    }
  }
  return set;
}

double triple_payoff(const StrategySet& set, std::size_t n1, std::size_t n2, std::size_t n3) {
  const auto& a = set.strategies.at(n1);
  const auto& b = set.strategies.at(n2);
  const auto& c = set.strategies.at(n3);
  const bool distinct_subtasks = a.subtask != b.subtask && a.subtask != c.subtask && b.subtask != c.subtask;
  const bool distinct_devices =
      a.collaborator != b.collaborator && a.collaborator != c.collaborator && b.collaborator != c.collaborator;
  if (!distinct_subtasks || !distinct_devices) return 0.0;
  return (a.score + b.score + c.score) / 3.0;
}

namespace {

// First and second weighted moments of a set of strategies:
// a = sum q, b = sum s q, qq = sum q^2, sqq = sum s q^2.
struct Moments {
  double a = 0.0, b = 0.0, qq = 0.0, sqq = 0.0;

  void add(double q, double s) {
    a += q;
    b += s * q;
    qq += q * q;
    sqq += s * q * q;
  }
  void remove(double q, double s) {
    a -= q;
    b -= s * q;
    qq -= q * q;
    sqq -= s * q * q;
  }
  // sum over ordered pairs (x, y) in the set of (s0 + s_x + s_y) q_x q_y
  double pairs(double s0) const { return s0 * a * a + 2.0 * a * b; }
  // same, restricted to x == y
  double diagonal(double s0) const { return s0 * qq + 2.0 * sqq; }
};

}  // namespace

std::vector<double> strategy_payoffs(const StrategySet& set, std::span<const double> q) {
  const std::size_t N = set.size();
  const std::size_t M = set.subtask_count;
  const std::size_t J = set.device_count;
  std::vector<double> u(N, 0.0);
  if (N == 0) return u;

  // Strategies are unique per (subtask, device); index them for O(1) lookup.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> at(M * J, kNone);
  Moments total;
  std::vector<Moments> by_subtask(M), by_device(J);
  for (std::size_t n = 0; n < N; ++n) {
    const auto& st = set.strategies[n];
    at[st.subtask * J + st.collaborator] = n;
    total.add(q[n], st.score);
    by_subtask[st.subtask].add(q[n], st.score);
    by_device[st.collaborator].add(q[n], st.score);
  }

  std::vector<char> device_has(J, 0);
  for (const auto& st : set.strategies) device_has[st.collaborator] = 1;
  std::vector<DeviceIndex> devices_used;
  for (DeviceIndex d = 0; d < J; ++d)
    if (device_has[d]) devices_used.push_back(d);

  for (std::size_t n = 0; n < N; ++n) {
    const auto& st = set.strategies[n];
    const double s0 = st.score;
    const std::size_t m = st.subtask;
    const DeviceIndex d = st.collaborator;

    // Strategies compatible with n: different subtask and different device.
    Moments compat = total;
    compat.a -= by_subtask[m].a + by_device[d].a;
    compat.b -= by_subtask[m].b + by_device[d].b;
    compat.qq -= by_subtask[m].qq + by_device[d].qq;
    compat.sqq -= by_subtask[m].sqq + by_device[d].sqq;
    compat.add(q[n], s0);

    // Ordered pairs within the compatible set, minus pairs sharing a subtask,
    // minus pairs sharing a device, plus pairs sharing both (the diagonal).
    const double scale = total.pairs(s0) + total.diagonal(s0);
    double sum = compat.pairs(s0) + compat.diagonal(s0);
    for (std::size_t g = 0; g < M; ++g) {
      if (g == m) continue;
      Moments grp = by_subtask[g];
      if (std::size_t k = at[g * J + d]; k != kNone) grp.remove(q[k], set.strategies[k].score);
      sum -= grp.pairs(s0);
    }
    for (DeviceIndex e : devices_used) {
      if (e == d) continue;
      Moments grp = by_device[e];
      if (std::size_t k = at[m * J + e]; k != kNone) grp.remove(q[k], set.strategies[k].score);
      sum -= grp.pairs(s0);
    }
    // The alternating sum cancels exactly when no consistent triple exists;
    // drop the rounding residue.
    u[n] = sum > 1e-12 * scale ? sum / 3.0 : 0.0;
  }
  return u;
}

double population_payoff(const StrategySet& set, std::span<const double> q) {
  const auto u = strategy_payoffs(set, q);
  double total = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) total += q[n] * u[n];
  return total;
}

ReplicatorStep replicator_step(std::span<const double> q, const StrategySet& set) {
  ReplicatorStep step;
  const auto u = strategy_payoffs(set, q);
  double payoff = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) payoff += q[n] * u[n];
  step.payoff = payoff;
  if (!(payoff > 0.0)) {
    step.q.assign(q.begin(), q.end());
    step.stagnated = true;
    return step;
  }
  step.q.resize(q.size());
  double sum = 0.0;
  for (std::size_t n = 0; n < q.size(); ++n) {
    step.q[n] = std::max(0.0, q[n] * u[n] / payoff);
    sum += step.q[n];
  }
  for (double& x : step.q) x /= sum;
  return step;
}

namespace {

// Highest-ranked strategies first; keep one per subtask and one per device.
std::vector<std::optional<DeviceIndex>> resolve_one_to_one(const StrategySet& set,
                                                           std::span<const std::size_t> ranked) {
  std::vector<std::optional<DeviceIndex>> assignment(set.subtask_count);
  std::vector<char> device_used(set.device_count, 0);
  for (std::size_t n : ranked) {
    const auto& st = set.strategies[n];
    if (assignment[st.subtask] || device_used[st.collaborator]) continue;
    assignment[st.subtask] = st.collaborator;
    device_used[st.collaborator] = 1;
  }
  return assignment;
}

std::vector<std::optional<DeviceIndex>> greedy_by_score(const StrategySet& set) {
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.strategies[a].score > set.strategies[b].score;
  });
  return resolve_one_to_one(set, order);
}

}  // namespace

MatchResult solve_matching(const TaskHypergraph& task_h, const ResourceHypergraph& res_h,
                           const ProblemInstance& problem, const ReplicatorParams& params) {
  const StrategySet set = generate_strategies(task_h, res_h, problem);
  if (set.empty()) throw NoFeasibleStrategyError("no feasible collaborator for any subtask");

  const std::size_t N = set.size();
  MatchDiagnostics diag;
  diag.strategy_count = N;
  std::vector<double> q(N, 1.0 / static_cast<double>(N));

  if (!(population_payoff(set, q) > 0.0)) {
    // Fewer than three mutually consistent strategies: the game has no payoff.
    auto result = make_result("ttr", greedy_by_score(set), problem);
    diag.fallback_greedy = true;
    result.diagnostics = diag;
    return result;
  }

  while (diag.iterations < params.max_iters) {
    auto step = replicator_step(q, set);
    diag.final_payoff = step.payoff;
    if (step.stagnated) {
      diag.stagnated = true;
      break;
    }
    double residual = 0.0;
    for (std::size_t n = 0; n < N; ++n) residual += std::abs(step.q[n] - q[n]);
    q = std::move(step.q);
    ++diag.iterations;
    diag.residual = residual;
    if (residual < params.convergence_eps) break;
  }

  const double threshold = params.ess_threshold.value_or(1.0 / (2.0 * static_cast<double>(N)));
  std::vector<std::size_t> survivors;
  for (std::size_t n = 0; n < N; ++n)
    if (q[n] > threshold) survivors.push_back(n);
  std::stable_sort(survivors.begin(), survivors.end(),
                   [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  for (std::size_t n : survivors) diag.survivors.emplace_back(n, q[n]);

  auto result = make_result("ttr", resolve_one_to_one(set, survivors), problem);
  result.diagnostics = std::move(diag);
  return result;
}

MatchResult baseline_one_to_one(const TaskHypergraph& task_h, const ResourceHypergraph& one_to_one_h,
                                const ProblemInstance& problem, const ReplicatorParams& params) {
  auto result = solve_matching(task_h, one_to_one_h, problem, params);
  result.solver = "one_to_one";
  return result;
}

MatchResult baseline_random(const ProblemInstance& problem, Rng& rng) {
  const std::size_t M = problem.subtask_count();
  const std::size_t J = problem.devices.size();
  // One independent priority per (subtask, device); the highest-priority
  // admissible unused device is a uniform draw from the remaining candidates.
  std::vector<double> priority(M * J);
  for (double& p : priority) p = rng.uniform();

  std::vector<std::optional<DeviceIndex>> assignment(M);
  std::vector<char> used(J, 0);
  for (std::size_t m = 0; m < M; ++m) {
    std::optional<DeviceIndex> best;
    for (DeviceIndex j = 0; j < J; ++j) {
      if (used[j] || !problem.admissible(m, j)) continue;
      if (!best || priority[m * J + j] > priority[m * J + *best]) best = j;
    }
    if (best) {
      assignment[m] = best;
      used[*best] = 1;
    }
  }
  return make_result("random", std::move(assignment), problem);
}

MatchResult baseline_nn(const ProblemInstance& problem) {
  const std::size_t M = problem.subtask_count();
  const std::size_t J = problem.devices.size();
  const auto& origin = problem.devices[problem.task.initiator];
  std::vector<std::optional<DeviceIndex>> assignment(M);
  std::vector<char> used(J, 0);
  for (std::size_t m = 0; m < M; ++m) {
    std::optional<DeviceIndex> best;
    double best_dist = 0.0;
    for (DeviceIndex j = 0; j < J; ++j) {
      if (used[j] || !problem.admissible(m, j)) continue;
      const double dist = distance(origin, problem.devices[j]);
      if (!best || dist < best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    if (best) {
      assignment[m] = best;
      used[*best] = 1;
    }
  }
  return make_result("nn", std::move(assignment), problem);
}

MatchResult oracle_brute_force(const ProblemInstance& problem, const OracleBounds& bounds) {
  const std::size_t M = problem.subtask_count();
  const std::size_t J = problem.devices.size();
  if (M > bounds.max_subtasks || J > bounds.max_devices)
    throw OracleBoundError("oracle search space too large: " + std::to_string(M) + " subtasks, " +
                           std::to_string(J) + " devices (limits " + std::to_string(bounds.max_subtasks) +
                           ", " + std::to_string(bounds.max_devices) + ")");

  // Per subtask: admissible devices ascending, values cached.
  std::vector<std::vector<std::pair<DeviceIndex, double>>> options(M);
  for (std::size_t m = 0; m < M; ++m)
    for (DeviceIndex j = 0; j < J; ++j)
      if (problem.admissible(m, j)) options[m].emplace_back(j, problem.value(m, j).value);

  std::vector<std::optional<DeviceIndex>> current(M), best;
  double best_sum = -1.0;
  std::vector<char> used(J, 0);

  // Depth-first in lexicographic order: devices ascending, "unassigned" last.
  auto search = [&](auto&& self, std::size_t m, double sum) -> void {
    if (m == M) {
      if (sum > best_sum) {
        best_sum = sum;
        best = current;
      }
      return;
    }
    for (const auto& [j, v] : options[m]) {
      if (used[j]) continue;
      used[j] = 1;
      current[m] = j;
      self(self, m + 1, sum + v);
      used[j] = 0;
    }
    current[m].reset();
    self(self, m + 1, sum);
  };
  search(search, 0, 0.0);
  return make_result("oracle", std::move(best), problem);
}

const char* to_string(Constraint c) {
  switch (c) {
    case Constraint::single_collaborator: return "single_collaborator";
    case Constraint::device_capacity: return "device_capacity";
    case Constraint::trust_demand: return "trust_demand";
    case Constraint::type_support: return "type_support";
    case Constraint::rate_demand: return "rate_demand";
    case Constraint::not_initiator: return "not_initiator";
  }
  return "unknown";
}

std::vector<ConstraintViolation> check_feasibility(std::span<const std::optional<DeviceIndex>> assignment,
                                                   const ProblemInstance& problem, bool allow_partial) {
  std::vector<ConstraintViolation> out;
  const std::size_t M = problem.subtask_count();
  if (assignment.size() != M) {
    out.push_back({Constraint::single_collaborator, 0, std::nullopt, "assignment length differs from subtask count"});
    return out;
  }
  std::vector<std::size_t> load(problem.devices.size(), 0);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& a = assignment[m];
    if (!a) {
      if (!allow_partial)
        out.push_back({Constraint::single_collaborator, m, std::nullopt, "subtask unassigned"});
      continue;
    }
    const DeviceIndex j = *a;
    if (j >= problem.devices.size()) {
      out.push_back({Constraint::single_collaborator, m, j, "unknown device"});
      continue;
    }
    if (++load[j] == 2)
      out.push_back({Constraint::device_capacity, m, j, "device " + problem.devices[j].id + " has two subtasks"});
    if (j == problem.task.initiator)
      out.push_back({Constraint::not_initiator, m, j, "subtask assigned to its own initiator"});
    const auto& b = problem.subtask(m);
    if (!problem.devices[j].supports(b.task_type))
      out.push_back({Constraint::type_support, m, j, "device lacks the task type"});
    auto t = problem.trust(problem.task.initiator, j, b.task_type);
    if (!t || *t < b.min_trust)
      out.push_back({Constraint::trust_demand, m, j, "trust below the subtask's demand"});
    if (j != problem.task.initiator && problem.rate(j) < b.min_rate_bps)
      out.push_back({Constraint::rate_demand, m, j, "link rate below the subtask's demand"});
  }
  return out;
}

double average_value(std::span<const std::optional<DeviceIndex>> assignment,
                     const ProblemInstance& problem) {
  const std::size_t M = problem.subtask_count();
  if (M == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t m = 0; m < M; ++m)
    if (assignment[m]) sum += problem.value(m, *assignment[m]).value;
  return sum / static_cast<double>(M);
}

MatchResult make_result(std::string solver, std::vector<std::optional<DeviceIndex>> assignment,
                        const ProblemInstance& problem) {
  MatchResult r;
  r.solver = std::move(solver);
  const std::size_t M = problem.subtask_count();
  assignment.resize(M);
  r.details.resize(M);
  for (std::size_t m = 0; m < M; ++m)
    if (assignment[m]) r.details[m] = problem.value(m, *assignment[m]);
  r.average_value = average_value(assignment, problem);
  r.assignment = std::move(assignment);
  return r;
}

}  // namespace ttr

#include "doctest.h"
#include "fixtures.hpp"
#include "ttr/hypergraph.hpp"
#include "ttr/scenario.hpp"
#include "ttr/sim.hpp"

#include <sstream>

using namespace ttr;

namespace {

ResourceHypergraph resource(const std::vector<DeviceSpec>& fleet, const std::vector<TaskType>& types,
                            const TrustLedger& l, const TrustWeights& w) {
  TrustModel m(fleet, types.size(), l, w);
  return build_resource_hypergraph(m.graph(), l, fleet, types, w);
}

}  // namespace

TEST_CASE("one hyperedge per shared type") {
  const auto types = fixtures::types({100, 200, 300});
  std::vector<DeviceSpec> fleet{fixtures::device("a", 1e9, {0, 0}, {0, 1}),
                                fixtures::device("b", 1e9, {1, 0}, {0, 1, 2}),
                                fixtures::device("c", 1e9, {2, 0}, {2})};
  TrustLedger l;
  const auto h = resource(fleet, types, l, TrustWeights{});
  std::size_t a_to_b = 0, a_to_c = 0;
  for (const auto& e : h.hyperedges()) {
    a_to_b += e.initiator == 0 && e.collaborator == 1;
    a_to_c += e.initiator == 0 && e.collaborator == 2;
  }
  CHECK(a_to_b == 2);
  CHECK(a_to_c == 0);
  CHECK(candidate_resource_edges(h, 0, 2).empty());
  CHECK(candidate_resource_edges(h, 1, 2).size() == 1);
}

TEST_CASE("robots share a single hyperedge in each direction") {
  const auto cfg = builtin_ics_catalog();
  TrustLedger l;
  const auto h = resource(cfg.devices, cfg.task_types, l, cfg.trust_weights);
  const auto rosbot = *cfg.find_device("a18");
  const auto robofleet = *cfg.find_device("a26");
  REQUIRE(cfg.devices[rosbot].model == "Rosbot Plus");
  REQUIRE(cfg.devices[robofleet].model == "Robofleet");
  std::size_t fwd = 0, back = 0;
  for (const auto& e : h.hyperedges()) {
    fwd += e.initiator == rosbot && e.collaborator == robofleet;
    back += e.initiator == robofleet && e.collaborator == rosbot;
  }
  CHECK(fwd == 1);
  CHECK(back == 1);
}

TEST_CASE("candidates match initiator and type") {
  const auto cfg = builtin_ics_catalog();
  TrustLedger l;
  Rng rng(4);
  bootstrap_trust(cfg, l, 100, rng);
  TrustModel m(cfg.devices, cfg.task_types.size(), l, cfg.trust_weights);
  const auto h = build_resource_hypergraph(m.graph(), l, cfg.devices, cfg.task_types, cfg.trust_weights);
  for (DeviceIndex i = 0; i < cfg.devices.size(); ++i)
    for (TypeIndex s = 0; s < cfg.task_types.size(); ++s) {
      const auto cands = candidate_resource_edges(h, i, s);
      std::size_t peers = 0;
      if (cfg.devices[i].supports(s))
        for (DeviceIndex j = 0; j < cfg.devices.size(); ++j) peers += j != i && cfg.devices[j].supports(s);
      CHECK(cands.size() == peers);
      for (const auto& e : cands) {
        CHECK(e.initiator == i);
        CHECK(e.task_type == s);
        CHECK(e.weight == doctest::Approx(*m.trust(i, e.collaborator, s)).epsilon(1e-12));
      }
    }
}

TEST_CASE("duplicate hyperedge is rejected") {
  ResourceHypergraph h({{"a", 1e9, {0, 0}, 0.7}, {"b", 1e9, {1, 0}, 0.7}}, fixtures::types({100}));
  h.add({0, 0, 1, 0.5});
  CHECK_THROWS(h.add({0, 0, 1, 0.6}));
  CHECK_THROWS(h.add({1, 0, 1, 0.6}));
}

TEST_CASE("resource incidence matrix") {
  std::vector<DeviceVertex> v;
  for (int k = 1; k <= 5; ++k) v.push_back({"a" + std::to_string(k), 1e9, {double(k), 0}, 0.7});
  ResourceHypergraph h(v, fixtures::types({100, 200}));
  h.add({0, 0, 1, 0.5});
  h.add({2, 1, 4, 0.5});
  const auto m = incidence_matrix(h);
  REQUIRE(m.rows() == 7);
  REQUIRE(m.cols() == 2);
  const int want[7][2] = {{1, 0}, {1, 0}, {0, 1}, {0, 0}, {0, 1}, {1, 0}, {0, 1}};
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(m.at(r, c) == want[r][c]);
  std::ostringstream csv;
  m.write_csv(csv, vertex_labels(h));
  CHECK(csv.str() == "vertex,e0,e1\na1,1,0\na2,1,0\na3,0,1\na4,0,0\na5,0,1\nt0,1,0\nt1,0,1\n");

  ResourceHypergraph none(v, fixtures::types({100}));
  CHECK(incidence_matrix(none).cols() == 0);
}

TEST_CASE("task hypergraph of the reference batch") {
  const auto cfg = builtin_ics_catalog();
  const auto tmpl = reference_task(cfg, false);
  const Task task{*cfg.find_device(tmpl.initiator), tmpl.subtasks};
  const auto h = build_task_hypergraph(task);
  REQUIRE(h.hyperedges.size() == 3);
  for (const auto& e : h.hyperedges) CHECK(e.weight == doctest::Approx(0.2));
  const auto m = incidence_matrix(h);
  CHECK(m.rows() == 5);
  for (std::size_t e = 0; e < m.cols(); ++e) {
    CHECK(m.column_sum(e) == 3);
    CHECK(m.at(0, e) == 1);
    CHECK(m.at(h.phi_vertex(), e) == 1);
    CHECK(m.at(1 + e, e) == 1);
  }

  const auto four = reference_task(cfg, true);
  CHECK(build_task_hypergraph({0, four.subtasks}).hyperedges.size() == 4);
  CHECK(incidence_matrix(build_task_hypergraph({0, {}})).cols() == 0);
}

TEST_CASE("resource hypergraph column sums") {
  const auto cfg = builtin_ics_catalog();
  TrustLedger l;
  TrustModel m(cfg.devices, cfg.task_types.size(), l, cfg.trust_weights);
  const auto h = build_resource_hypergraph(m.graph(), l, cfg.devices, cfg.task_types, cfg.trust_weights);
  const auto inc = incidence_matrix(h);
  CHECK(inc.rows() == 30);
  for (std::size_t e = 0; e < inc.cols(); ++e) CHECK(inc.column_sum(e) == 3);
}

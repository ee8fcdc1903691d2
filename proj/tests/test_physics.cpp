#include "doctest.h"
#include "fixtures.hpp"
#include "ttr/physics.hpp"

#include <cmath>

using namespace ttr;

namespace {

// Independent rate formula: W * ln(1 + snr) / ln 2.
double rate_oracle(double w, double p, double d, double alpha, double n0) {
  return w * std::log1p(p * std::pow(d, -alpha) / n0) / std::log(2.0);
}

}  // namespace

TEST_CASE("path-loss rate at 10 m") {
  auto a = fixtures::device("a", 1e9, {0, 0}, {0});
  auto b = fixtures::device("b", 1e9, {10, 0}, {0});
  const double r = transmission_rate(a, b, ChannelParams{});
  CHECK(r == doctest::Approx(rate_oracle(2e7, 0.7, 10, 4, 1e-13)).epsilon(1e-12));
  CHECK(r == doctest::Approx(5.876e8).epsilon(1e-3));
}

TEST_CASE("zero transmit power gives zero rate") {
  auto a = fixtures::device("a", 1e9, {0, 0}, {0}, 0.0);
  auto b = fixtures::device("b", 1e9, {3, 4}, {0});
  CHECK(transmission_rate(a, b, ChannelParams{}) == 0.0);
}

TEST_CASE("coincident devices are rejected") {
  auto a = fixtures::device("a", 1e9, {1, 1}, {0});
  auto b = fixtures::device("b", 1e9, {1, 1}, {0});
  CHECK_THROWS_AS(transmission_rate(a, b, ChannelParams{}), PhysicsError);
}

TEST_CASE("rate table passes a matrix through") {
  std::vector<DeviceSpec> d{fixtures::device("a", 1e9, {}, {0}), fixtures::device("b", 1e9, {}, {0})};
  Channel ch;
  ch.model = ChannelModel::matrix;
  ch.rates_bps = {{0, 3e6}, {5e6, 0}};
  RateTable t(d, ch);
  CHECK(t.rate(0, 1) == 3e6);
  CHECK(t.rate(1, 0) == 5e6);
}

TEST_CASE("execution cost of 1 MB TWC on a Pixel 8") {
  Subtask b{0, 8e6, 0.6, 0.2, 0.0};
  auto ini = fixtures::device("ipad", 2.34e9, {0, 0}, {0}, 0.7);
  auto pix = fixtures::device("pixel", 2.91e9, {5, 0}, {0}, 0.74);
  const auto c = collaboration_cost(b, 16800, ini, pix, 8e6);
  const double cycles = 8e6 * 16800;
  CHECK(c.t_exe_s == doctest::Approx(cycles / 2.91e9).epsilon(1e-12));
  CHECK(c.t_exe_s == doctest::Approx(46.19).epsilon(1e-3));
  CHECK(c.e_exe_j == doctest::Approx(1e-11 * 2.91 * 2.91 * cycles).epsilon(1e-12));
  CHECK(c.e_exe_j == doctest::Approx(11.38).epsilon(1e-3));
  CHECK(c.t_tra_s == doctest::Approx(1.0));
  CHECK(c.e_tra_j == doctest::Approx(0.7));
  CHECK(c.t_total_s == doctest::Approx(c.t_tra_s + c.t_exe_s));
  CHECK(c.e_total_j == doctest::Approx(c.e_tra_j + c.e_exe_j));
}

TEST_CASE("expected self energy") {
  Subtask b{0, 8e6, 0.6, 0.2, 0.0};
  auto ipad = fixtures::device("ipad", 2.34e9, {0, 0}, {0});
  const double e = expected_self_energy(b, 16800, ipad);
  CHECK(e == doctest::Approx(7.36).epsilon(1e-3));
  auto fast = ipad;
  fast.cpu_hz *= 2;
  CHECK(expected_self_energy(b, 16800, fast) == doctest::Approx(4 * e).epsilon(1e-12));
  Subtask empty{0, 0.0, 0.6, 0.2, 0.0};
  CHECK(expected_self_energy(empty, 16800, ipad) == 0.0);
}

TEST_CASE("time value") {
  CHECK(value_time(0.5, 0.6) == 1.0);
  CHECK(value_time(0.6, 0.6) == 1.0);
  CHECK(value_time(1.2, 0.6) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  double prev = 1.0;
  for (double t = 0.0; t < 10.0; t += 0.05) {
    const double v = value_time(t, 0.6);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK(value_time(0.6 + 1e-12, 0.6) == doctest::Approx(1.0));
}

TEST_CASE("energy value") {
  CHECK(value_energy(3.0, 4.0) == 1.0);
  CHECK(value_energy(4.0, 4.0) == 1.0);
  CHECK(value_energy(8.0, 4.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(value_energy(1.0, 0.0), PhysicsError);
}

TEST_CASE("value of completion weights") {
  Subtask b{0, 1e6, 1.0, 0.0, 0.0};
  auto ini = fixtures::device("i", 1e9, {0, 0}, {0}, 0.0);
  auto fast = fixtures::device("c", 2e9, {1, 0}, {0});
  // Zero transmit power: E = e_exe = 4 * E_exp for twice the clock.
  auto v = value_of_completion(b, 1000, ini, fast, 1e9, ValueWeights{0.0, 1.0});
  CHECK(v.value == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
  CHECK(v.value_time == 1.0);

  auto sqrt2 = fixtures::device("c", std::sqrt(2.0) * 1e9, {1, 0}, {0});
  v = value_of_completion(b, 1000, ini, sqrt2, 1e9, ValueWeights{0.0, 1.0});
  CHECK(v.value == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

  const Subtask loose{0, 1e6, 2.0, 0.0, 0.0};
  v = value_of_completion(loose, 1000, ini, ini, 1e9, ValueWeights{1.0, 0.0});
  CHECK(v.value == 1.0);
  v = value_of_completion(b, 1000, ini, fast, 1e9, ValueWeights{0.5, 0.5});
  CHECK(v.value == doctest::Approx(0.5 + 0.5 * std::exp(-3.0)).epsilon(1e-12));
  CHECK(v.expected_energy_j == doctest::Approx(1e-11 * 1.0 * 1e9).epsilon(1e-12));
}

TEST_CASE("non-positive rate is rejected") {
  Subtask b{0, 1e6, 1.0, 0.0, 0.0};
  auto a = fixtures::device("a", 1e9, {0, 0}, {0});
  CHECK_THROWS_AS(collaboration_cost(b, 1000, a, a, 0.0), PhysicsError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gridincent/errors.hpp"
#include "gridincent/feeder.hpp"
#include "gridincent/kernels.hpp"
#include "gridincent/rng.hpp"

using namespace gridincent;

namespace {

Network single_bus(double r = 0.1, double x = 0.05) {
  Network net;
  net.buses = 1;
  net.edges = {{0, 1, r, x}};
  return net;
}

// Chain-biased random tree; every bus draws its parent among earlier buses.
Network random_tree(int n, std::uint64_t seed) {
  Rng rng(seed);
  Network net;
  net.buses = n;
  for (int child = 1; child <= n; ++child) {
    Edge e;
    e.child = child;
    e.parent = child == 1 ? 0
               : rng.uniform01() < 0.6 ? child - 1
                                       : rng.uniform_int(0, child - 1);
    e.r = rng.uniform(0.01, 0.08);
    e.x = e.r * rng.uniform(0.5, 1.2);
    net.edges.push_back(e);
  }
  return net;
}

}  // namespace

TEST_CASE("single edge: sensitivities are the edge impedance") {
  const SensitivityModel m = build_sensitivities(single_bus());
  REQUIRE(m.n() == 1);
  CHECK(m.R(0, 0) == 0.1);
  CHECK(m.X(0, 0) == 0.05);
  CHECK(m.omega == Vector{1.0});
}

TEST_CASE("two-bus chain: shared path resistance accumulates") {
  Network net;
  net.buses = 2;
  net.edges = {{0, 1, 0.1, 0.01}, {1, 2, 0.2, 0.02}};
  const SensitivityModel m = build_sensitivities(net);
  CHECK(m.R(0, 0) == 0.1);
  CHECK(m.R(0, 1) == 0.1);  // common path of buses 1 and 2 is the first edge
  CHECK(m.R(1, 0) == 0.1);
  CHECK(m.R(1, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(m.X(1, 1) == doctest::Approx(0.03).epsilon(1e-15));
}

TEST_CASE("fork: siblings share only the trunk") {
  // bus 1 feeds buses 2 and 3 over different branches
  Network net;
  net.buses = 3;
  net.edges = {{0, 1, 0.5, 0.05}, {1, 2, 0.3, 0.03}, {1, 3, 0.7, 0.07}};
  const SensitivityModel m = build_sensitivities(net);
  CHECK(m.R(1, 1) == 0.8);
  CHECK(m.R(2, 2) == 1.2);
  CHECK(m.R(1, 2) == 0.5);  // only the trunk edge is shared
  CHECK(m.R(2, 1) == 0.5);
  CHECK(m.R(0, 1) == 0.5);
  CHECK(m.R(0, 2) == 0.5);
}

TEST_CASE("edge order in the file does not matter") {
  Network a, b;
  a.buses = b.buses = 3;
  a.edges = {{0, 1, 0.5, 0.05}, {1, 2, 0.3, 0.03}, {1, 3, 0.7, 0.07}};
  b.edges = {{1, 3, 0.7, 0.07}, {0, 1, 0.5, 0.05}, {1, 2, 0.3, 0.03}};
  const SensitivityModel ma = build_sensitivities(a);
  const SensitivityModel mb = build_sensitivities(b);
  CHECK(ma.R == mb.R);
  CHECK(ma.X == mb.X);
}

TEST_CASE("sensitivity matrices are symmetric, nonnegative, positive definite") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Network net = random_tree(24, seed);
    const SensitivityModel m = build_sensitivities(net);
    for (int i = 0; i < m.n(); ++i) {
      CHECK(m.omega[i] == 1.0);
      for (int j = 0; j < m.n(); ++j) {
        CHECK(m.R(i, j) == m.R(j, i));
        CHECK(m.R(i, j) >= 0.0);
        CHECK(m.X(i, j) >= 0.0);
      }
    }
    // Positive definiteness: distinct buses have distinct paths, so R is the
    // Gram matrix of linearly independent edge-indicator vectors.
    Matrix r = m.R;
    CHECK(kernels::cholesky_in_place(r));
  }
}

TEST_CASE("fast builder equals the quadratic reference bitwise") {
  for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
    const Network net = random_tree(40, seed);
    const SensitivityModel fast = build_sensitivities(net);
    const SensitivityModel ref = build_sensitivities_reference(net);
    CHECK(fast.R == ref.R);
    CHECK(fast.X == ref.X);
    CHECK(fast.omega == ref.omega);
    const SensitivityModel serial = build_sensitivities(net, kernels::Backend::serial);
    CHECK(fast.R == serial.R);
    CHECK(fast.X == serial.X);
  }
}

TEST_CASE("voltages: injection raises, withdrawal lowers") {
  const SensitivityModel m = build_sensitivities(single_bus());
  CHECK(voltages_of(m, Vector{0.5}, Vector{0.0}) == Vector{1.05});
  CHECK(voltages_of(m, Vector{-0.5}, Vector{0.0}) == Vector{0.95});
  CHECK(voltages_of(m, Vector{0.0}, Vector{0.2})[0] == doctest::Approx(1.01).epsilon(1e-15));
  CHECK_THROWS_AS(voltages_of(m, Vector{0.5, 1.0}, Vector{0.0}), ValidationError);
}

TEST_CASE("voltages: serial and openmp paths agree bitwise") {
  const Network net = random_tree(48, 21);
  const SensitivityModel m = build_sensitivities(net);
  Rng rng(22);
  Vector p(48), q(48);
  for (int i = 0; i < 48; ++i) {
    p[i] = rng.uniform(-0.2, 0.2);
    q[i] = rng.uniform(-0.1, 0.1);
  }
  CHECK(voltages_of(m, p, q, kernels::Backend::serial) ==
        voltages_of(m, p, q, kernels::Backend::openmp));
}

TEST_CASE("feeder power is total demand minus total generation") {
  CHECK(feeder_power_of(Vector{1.0, 2.0}, Vector{0.25, 0.25}) == 2.5);
  CHECK(feeder_power_of(Vector{0.5}, Vector{0.8}) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK_THROWS_AS(feeder_power_of(Vector{1.0}, Vector{1.0, 2.0}), ValidationError);
}

TEST_CASE("topology validation rejects malformed feeders") {
  Network net = single_bus();
  net.buses = 0;
  CHECK_THROWS_AS(validate(net), ValidationError);

  net = single_bus();
  net.base_mva = 0.0;
  CHECK_THROWS_AS(validate(net), ValidationError);

  net = single_bus();
  net.edges.push_back({1, 1, 0.1, 0.0});  // self loop (and wrong edge count)
  net.buses = 2;
  CHECK_THROWS_AS(validate(net), TopologyError);

  net = single_bus();
  net.edges = {{0, 2, 0.1, 0.0}};  // child out of range
  CHECK_THROWS_AS(validate(net), TopologyError);

  net = single_bus();
  net.edges = {{-1, 1, 0.1, 0.0}};
  CHECK_THROWS_AS(validate(net), TopologyError);

  // bus 2 fed twice, bus 3 not at all
  net.buses = 3;
  net.edges = {{0, 1, 0.1, 0.0}, {0, 2, 0.1, 0.0}, {1, 2, 0.1, 0.0}};
  CHECK_THROWS_AS(validate(net), TopologyError);

  // detached two-cycle: right edge count, not reachable from the root
  net.buses = 3;
  net.edges = {{0, 1, 0.1, 0.0}, {3, 2, 0.1, 0.0}, {2, 3, 0.1, 0.0}};
  CHECK_THROWS_AS(validate(net), TopologyError);

  // nonpositive resistance
  net = single_bus(0.0);
  CHECK_THROWS_AS(validate(net), ValidationError);

  // negative reactance
  net = single_bus(0.1, -0.01);
  CHECK_THROWS_AS(validate(net), ValidationError);

  CHECK_NOTHROW(validate(single_bus()));
}

TEST_CASE("larger feeder: voltage drop grows along a loaded chain") {
  Network net;
  net.buses = 10;
  for (int i = 1; i <= 10; ++i) net.edges.push_back({i - 1, i, 0.02, 0.01});
  const SensitivityModel m = build_sensitivities(net);
  const Vector p(10, -0.05);  // uniform consumption
  const Vector q(10, 0.0);
  const Vector v = voltages_of(m, p, q);
  for (int i = 1; i < 10; ++i) CHECK(v[i] < v[i - 1]);
  CHECK(v[0] < 1.0);
}

#pragma once

#include <span>
#include <vector>

#include "gridincent/dense.hpp"
#include "gridincent/kernels.hpp"

namespace gridincent {

// One branch of the radial feeder. Impedances are per-unit on the network
// base; parent is closer to the substation.
struct Edge {
  int parent = 0;
  int child = 0;
  double r = 0.0;
  double x = 0.0;
};

// Radial feeder with buses 0..buses, bus 0 the substation. Every bus
// 1..buses hosts exactly one prosumer and is fed by exactly one edge.
struct Network {
  int buses = 0;  // number of prosumer buses (N)
  double base_mva = 1.0;
  double base_kv = 1.0;
  std::vector<Edge> edges;
};

// Throws TopologyError / ValidationError when the edge list is not a tree
// rooted at bus 0 or carries non-physical impedances.
void validate(const Network& net);

// Linearized voltage sensitivities: v = R p + X q + omega, with
// R[n][m] the total resistance on the common path from the substation to
// buses n and m (likewise X), and omega the all-ones vector.
struct SensitivityModel {
  Matrix R;
  Matrix X;
  Vector omega;
  int n() const { return static_cast<int>(omega.size()); }
};

SensitivityModel build_sensitivities(const Network& net,
                                     kernels::Backend backend = kernels::default_backend());

// Quadratic-time reference construction (explicit path intersection per bus
// pair). Kept for testing the fast builder; produces bitwise-equal matrices.
SensitivityModel build_sensitivities_reference(const Network& net);

// v = R p + X q + omega for net injections p (active) and q (reactive),
// both per-unit, indexed by bus-1.
Vector voltages_of(const SensitivityModel& model, std::span<const double> p,
                   std::span<const double> q,
                   kernels::Backend backend = kernels::default_backend());

// Substation active power balance p0 = 1^T (d - r).
double feeder_power_of(std::span<const double> d, std::span<const double> r);

}  // namespace gridincent

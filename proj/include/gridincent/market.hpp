#pragma once

#include <span>
#include <vector>

#include "gridincent/dense.hpp"

namespace gridincent {

// Retail tariff shared by all prosumers: net injection p is charged
// -pi * p + pi0 (consumption pays, injection is remunerated).
struct Tariff {
  double pi = 1.0;   // retail rate, currency per p.u. power
  double pi0 = 0.0;  // non-volumetric surcharge, currency
};

// One prosumer: quadratic utility -(alpha/2) d^2 + beta d, behind-the-meter
// generation r, fixed reactive demand q, and a demand box used only by the
// optional clamped response.
struct Prosumer {
  double alpha = 1.0;  // utility curvature, > 0
  double beta = 1.0;   // utility slope, >= tariff.pi
  double r = 0.0;      // active generation, p.u., >= 0
  double q = 0.0;      // net reactive injection, p.u. (negative = consumption)
  double d_min = 0.0;
  double d_max = 1e30;
};

// Throws ValidationError (naming the offending bus) unless pi > 0 and every
// prosumer has alpha > 0, beta >= pi, r >= 0, d_min <= d_max.
void validate_prosumers(std::span<const Prosumer> prosumers, const Tariff& tariff);

// -(alpha/2) d^2 + beta d. Demands are physical: d < 0 throws.
double utility(const Prosumer& pros, double d);

// Net-metering charge for injection p.
double nem_charge(const Tariff& tariff, double p);

// d_hat = (beta - pi) / alpha, the surplus maximizer absent incentives.
double nominal_demand(const Prosumer& pros, const Tariff& tariff);

// d*(xi) = d_hat + xi / alpha. No projection: the rational response is left
// unclamped and nonnegativity is priced through the nu multiplier instead.
double optimal_demand(const Prosumer& pros, const Tariff& tariff, double xi);

// d*(xi) clamped onto [d_min, d_max]; opt-in for practical runs, never used
// by the solvers' analysis paths.
double optimal_demand_clamped(const Prosumer& pros, const Tariff& tariff, double xi);

// Payment xi * (d - d_hat): zero at nominal demand for every xi.
double incentive_payment(const Prosumer& pros, const Tariff& tariff, double xi, double d);

// Prosumer surplus: utility(d) - pi d + pi r - pi0 + incentive_payment.
double surplus(const Prosumer& pros, const Tariff& tariff, double xi, double d);

// Column vectors of per-prosumer data, indexed bus-1.
Vector nominal_demands(std::span<const Prosumer> prosumers, const Tariff& tariff);
Vector generations(std::span<const Prosumer> prosumers);
Vector reactive_injections(std::span<const Prosumer> prosumers);

}  // namespace gridincent

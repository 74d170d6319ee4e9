#include "gridincent/market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gridincent/errors.hpp"

namespace gridincent {

void validate_prosumers(std::span<const Prosumer> prosumers, const Tariff& tariff) {
  if (!(tariff.pi > 0.0) || !std::isfinite(tariff.pi) || !std::isfinite(tariff.pi0))
    throw ValidationError("tariff: retail rate pi must be positive and finite");
  for (std::size_t i = 0; i < prosumers.size(); ++i) {
    const Prosumer& p = prosumers[i];
    const std::string bus = "prosumer at bus " + std::to_string(i + 1);
    if (!(p.alpha > 0.0) || !std::isfinite(p.alpha))
      throw ValidationError(bus + ": utility curvature alpha must be positive");
    if (!(p.beta >= tariff.pi))
      throw ValidationError(bus + ": utility slope beta = " + std::to_string(p.beta) +
                            " is below the retail rate pi = " + std::to_string(tariff.pi) +
                            " (nominal demand would be negative)");
    if (p.r < 0.0 || !std::isfinite(p.r))
      throw ValidationError(bus + ": generation r must be nonnegative");
    if (!std::isfinite(p.q))
      throw ValidationError(bus + ": reactive injection q must be finite");
    if (!(p.d_min <= p.d_max))
      throw ValidationError(bus + ": demand bounds need d_min <= d_max");
  }
}

double utility(const Prosumer& pros, double d) {
  if (d < 0.0) throw std::domain_error("utility: demand must be nonnegative");
  return -(pros.alpha / 2.0) * d * d + pros.beta * d;
}

double nem_charge(const Tariff& tariff, double p) { return -tariff.pi * p + tariff.pi0; }

double nominal_demand(const Prosumer& pros, const Tariff& tariff) {
  return (pros.beta - tariff.pi) / pros.alpha;
}

double optimal_demand(const Prosumer& pros, const Tariff& tariff, double xi) {
  return nominal_demand(pros, tariff) + xi / pros.alpha;
}

double optimal_demand_clamped(const Prosumer& pros, const Tariff& tariff, double xi) {
  return std::clamp(optimal_demand(pros, tariff, xi), pros.d_min, pros.d_max);
}

double incentive_payment(const Prosumer& pros, const Tariff& tariff, double xi, double d) {
  return xi * (d - nominal_demand(pros, tariff));
}

double surplus(const Prosumer& pros, const Tariff& tariff, double xi, double d) {
  return utility(pros, d) - tariff.pi * d + tariff.pi * pros.r - tariff.pi0 +
         incentive_payment(pros, tariff, xi, d);
}

Vector nominal_demands(std::span<const Prosumer> prosumers, const Tariff& tariff) {
  Vector out(prosumers.size());
  for (std::size_t i = 0; i < prosumers.size(); ++i) out[i] = nominal_demand(prosumers[i], tariff);
  return out;
}

Vector generations(std::span<const Prosumer> prosumers) {
  Vector out(prosumers.size());
  for (std::size_t i = 0; i < prosumers.size(); ++i) out[i] = prosumers[i].r;
  return out;
}

Vector reactive_injections(std::span<const Prosumer> prosumers) {
  Vector out(prosumers.size());
  for (std::size_t i = 0; i < prosumers.size(); ++i) out[i] = prosumers[i].q;
  return out;
}

}  // namespace gridincent

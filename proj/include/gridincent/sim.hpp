#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gridincent/controllers.hpp"
#include "gridincent/dense.hpp"
#include "gridincent/feeder.hpp"
#include "gridincent/market.hpp"
#include "gridincent/program.hpp"

namespace gridincent {

enum class Algorithm { dual_ascent, first_order, zero_order };

// Scripted mid-run change: generation stepping on/off at a bus, or new
// operating limits. Applied at the start of the named iteration, before the
// controller acts; controller state survives the event (warm start).
struct Event {
  enum class Kind { generator_off, generator_on, set_limits };
  long iteration = 0;
  Kind kind = Kind::generator_off;
  int bus = 0;          // generator events
  double capacity = 0;  // p.u., generator events
  OperationalLimits limits;  // set_limits
};

struct Scenario {
  Network network;
  std::vector<Prosumer> prosumers;
  Tariff tariff;
  OperationalLimits limits;
  Algorithm algorithm = Algorithm::dual_ascent;
  ControllerConfig config;
  std::vector<Event> events;
};

// Throws ValidationError / TopologyError on broken invariants (events out of
// order, unknown buses, negative capacities, inconsistent sizes).
void validate_scenario(const Scenario& scenario);

struct TraceRecord {
  long iteration = 0;
  Vector xi;
  Vector d;
  Vector v;
  double p0 = 0.0;
  double total_incentive = 0.0;
  double min_voltage = 0.0;
  double so_cost_value = 0.0;
  double constraint_violation = 0.0;
};

enum class RunStatus { converged, max_iterations, diverged };

struct RunResult {
  std::vector<TraceRecord> trace;
  RunStatus status = RunStatus::max_iterations;
  std::uint64_t seed = 0;
  long plant_probes = 0;
  MultiplierState final_state;
  QpData qp;  // program in force at the end of the run (all events applied)
};

struct Summary {
  long iterations_to_feasible = -1;  // -1: never entered the feasible band
  double final_cost = 0.0;
  double final_min_voltage = 0.0;
  double final_p0 = 0.0;
  double final_total_incentive = 0.0;
  RunStatus status = RunStatus::max_iterations;
};

// The feedback loop: the plant is the linearized feeder with the rational
// demand response; the controller sees only measurements.
class ClosedLoopSim {
 public:
  explicit ClosedLoopSim(Scenario scenario);

  // Linear plant response under the current generation: d = d_hat + A xi
  // (optionally clamped to the demand boxes), v from the injections, p0 the
  // substation balance.
  Measurement plant_respond(const Vector& xi) const;

  const QpData& qp() const { return qp_; }
  const SensitivityModel& model() const { return model_; }
  const Scenario& scenario() const { return scenario_; }

  RunResult run();

 private:
  void apply_event(const Event& event);
  void rebuild_program();

  Scenario scenario_;
  SensitivityModel model_;
  std::vector<Prosumer> prosumers_;  // generation mutates with events
  OperationalLimits limits_;
  QpData qp_;
  PlantSensitivities sens_;
  Vector xi_floor_;
  mutable long probes_ = 0;
};

// Convenience wrapper: build the sim and run it.
RunResult run(const Scenario& scenario);

// The steady-state inputs once every scripted event has fired, for solving
// the post-event program directly.
std::pair<std::vector<Prosumer>, OperationalLimits> apply_all_events(const Scenario& scenario);

// Condenses a trace: first iteration from which the constraint violation
// stays within `tolerance` for `window` consecutive records (a run that
// holds to the end of a converged trace qualifies), plus the final operating
// point. Throws ValidationError on an empty trace.
Summary summarize(const RunResult& result, double tolerance, int window = 50);

}  // namespace gridincent

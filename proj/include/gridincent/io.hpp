#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridincent/sim.hpp"

// Line-oriented text formats with a version tag on line 1 and `#` comments.
// Files speak engineering units (MW, MVar, prices per MW); the library
// speaks per-unit. Parsed documents keep the file units so that a
// parse -> write -> parse cycle reproduces identical values; conversion
// happens once, in make_scenario.

namespace gridincent::io {

// One `prosumer` record, file units: alpha currency/MW^2, beta currency/MW,
// powers MW / MVar.
struct ProsumerRecord {
  int bus = 0;
  double alpha = 1.0;
  double beta = 1.0;
  double r_mw = 0.0;
  double q_mvar = 0.0;
  double d_min_mw = 0.0;
  double d_max_mw = 1e30;
};

// Scripted event in file units.
struct EventRecord {
  long iteration = 0;
  Event::Kind kind = Event::Kind::generator_off;
  int bus = 0;
  double capacity_mw = 0.0;
  double v_min = 0.0, v_max = 0.0;        // set_limits
  double p0_min_mw = 0.0, p0_max_mw = 0.0;  // set_limits
};

// Scenario document: tariff, limits, solver knobs, events. Voltage limits
// are per-unit (dimensionless band), powers MW, prices per MW.
struct ScenarioDoc {
  double pi = 1.0;
  double pi0 = 0.0;
  double v_min_default = 0.0;
  double v_max_default = 2.0;
  std::vector<std::pair<int, std::pair<double, double>>> v_overrides;  // bus -> (lo, hi)
  double p0_min_mw = -1e30;
  double p0_max_mw = 1e30;
  Algorithm algorithm = Algorithm::dual_ascent;
  double epsilon_dual = 0.5;
  double epsilon_first = 0.3;
  double epsilon_zero = 0.05;
  double sigma = 0.02;
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  long max_iterations = 100000;
  int settle = 20;
  Perturbation perturbation = Perturbation::uniform;
  DualSource dual_source = DualSource::probe;
  double divergence_guard_per_mw = 1e6;
  bool clamp_demand = false;
  std::vector<EventRecord> events;
};

// Throw ParseError with file/line context on malformed input.
Network read_network(const std::string& path);
std::vector<ProsumerRecord> read_prosumers(const std::string& path, const Network& net);
ScenarioDoc read_scenario(const std::string& path, const Network& net);

// Writers emit %.17g (round-trip exact) and replace the target atomically.
void write_network(const std::string& path, const Network& net);
void write_prosumers(const std::string& path, std::span<const ProsumerRecord> records,
                     const Network& net);
void write_scenario(const std::string& path, const ScenarioDoc& doc, const Network& net);

// Converts file units to per-unit on the network base and assembles the
// runnable scenario for the chosen algorithm (step size picked per
// algorithm). Throws ValidationError on semantic violations.
Scenario make_scenario(const Network& net, std::span<const ProsumerRecord> records,
                       const ScenarioDoc& doc, Algorithm algorithm);

// Per-unit -> engineering-unit helpers for reporting.
double to_mw(double pu, const Network& net);
double incentive_per_mw(double xi_internal, const Network& net);

// Trace: one row per (strided) record; iteration, payout and cost in
// currency, powers MW, voltages p.u., then per-bus incentive, demand and
// voltage columns. stride <= 0 picks one that keeps roughly 5000 rows, and
// the final record is always written.
void write_trace(const std::string& path, const RunResult& result, const Network& net,
                 Algorithm algorithm, long stride = 0);

void write_summary(const std::string& path, const Summary& summary, const RunResult& result,
                   const Network& net, Algorithm algorithm);

// Steady-state report of the direct solution: cost, operating point,
// active constraints with their multipliers. Prosumers supply the current
// generation for the substation balance.
void write_solution(const std::string& path, const QpData& qp, const OracleSolution& sol,
                    const Network& net, std::span<const Prosumer> prosumers);

// Side-by-side table padded with final values: iteration, then
// total_incentive / min_voltage / p0_mw per algorithm.
void write_compare(const std::string& path, const RunResult& dual, const RunResult& first,
                   const RunResult& zero, const Network& net, long stride = 0);

const char* algorithm_name(Algorithm algorithm);

}  // namespace gridincent::io

#include "gridincent/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "gridincent/errors.hpp"
#include "gridincent/kernels.hpp"

namespace gridincent {

void validate_scenario(const Scenario& scenario) {
  validate(scenario.network);
  if (static_cast<int>(scenario.prosumers.size()) != scenario.network.buses)
    throw ValidationError("scenario: one prosumer per bus required");
  validate_prosumers(scenario.prosumers, scenario.tariff);
  validate_limits(scenario.limits, scenario.network.buses);
  validate_config(scenario.config, scenario.algorithm == Algorithm::zero_order);
  long prev = 0;
  for (const Event& ev : scenario.events) {
    if (ev.iteration < prev)
      throw ValidationError("scenario: event iterations must be non-decreasing");
    prev = ev.iteration;
    switch (ev.kind) {
      case Event::Kind::generator_off:
      case Event::Kind::generator_on:
        if (ev.bus < 1 || ev.bus > scenario.network.buses)
          throw ValidationError("scenario: event references unknown bus " +
                                std::to_string(ev.bus));
        if (!(ev.capacity >= 0.0) || !std::isfinite(ev.capacity))
          throw ValidationError("scenario: event capacity must be nonnegative");
        break;
      case Event::Kind::set_limits:
        validate_limits(ev.limits, scenario.network.buses);
        break;
    }
  }
}

ClosedLoopSim::ClosedLoopSim(Scenario scenario) : scenario_(std::move(scenario)) {
  validate_scenario(scenario_);
  model_ = build_sensitivities(scenario_.network);
  prosumers_ = scenario_.prosumers;
  limits_ = scenario_.limits;
  rebuild_program();
}

void ClosedLoopSim::rebuild_program() {
  qp_ = assemble_qp(model_, prosumers_, scenario_.tariff, limits_);
  sens_ = exact_sensitivities(qp_, model_);
  xi_floor_ = incentive_floor(qp_);
}

namespace {

void apply_event_to(std::vector<Prosumer>& prosumers, OperationalLimits& limits,
                    const Event& event) {
  switch (event.kind) {
    case Event::Kind::generator_off: {
      double& r = prosumers[event.bus - 1].r;
      if (r < event.capacity - 1e-12)
        throw ValidationError("event: generator_off at bus " + std::to_string(event.bus) +
                              " removes more capacity than present");
      r = std::max(0.0, r - event.capacity);
      break;
    }
    case Event::Kind::generator_on:
      prosumers[event.bus - 1].r += event.capacity;
      break;
    case Event::Kind::set_limits:
      limits = event.limits;
      break;
  }
}

}  // namespace

void ClosedLoopSim::apply_event(const Event& event) {
  apply_event_to(prosumers_, limits_, event);
  rebuild_program();
}

Measurement ClosedLoopSim::plant_respond(const Vector& xi) const {
  const int n = qp_.n();
  if (static_cast<int>(xi.size()) != n)
    throw ValidationError("plant_respond: incentive vector has the wrong size");
  ++probes_;
  Measurement meas;
  meas.d.resize(n);
  Vector p(n), q(n);
  for (int i = 0; i < n; ++i) {
    double d = qp_.d_hat[i] + qp_.a[i] * xi[i];
    if (scenario_.config.clamp_demand)
      d = std::clamp(d, prosumers_[i].d_min, prosumers_[i].d_max);
    meas.d[i] = d;
    p[i] = prosumers_[i].r - d;
    q[i] = prosumers_[i].q;
  }
  meas.v = voltages_of(model_, p, q);
  meas.p0 = feeder_power_of(meas.d, generations(prosumers_));
  return meas;
}

RunResult ClosedLoopSim::run() {
  const int n = qp_.n();
  const ControllerConfig& cfg = scenario_.config;
  Rng rng(cfg.seed);
  probes_ = 0;

  MultiplierState state = MultiplierState::zeros(n);
  std::size_t next_event = 0;
  const auto apply_due_events = [&](long t) {
    bool touched = false;
    while (next_event < scenario_.events.size() &&
           scenario_.events[next_event].iteration == t) {
      apply_event(scenario_.events[next_event]);
      ++next_event;
      touched = true;
    }
    return touched;
  };

  apply_due_events(0);
  // Dual ascent derives its incentive from the multipliers in closed form;
  // the other two integrate it as a state of its own, starting at zero.
  if (scenario_.algorithm == Algorithm::dual_ascent)
    state.xi = primal_of(qp_, state.stacked());

  RunResult result;
  result.seed = cfg.seed;
  result.status = RunStatus::max_iterations;
  result.trace.reserve(static_cast<std::size_t>(std::min<long>(cfg.max_iterations, 1 << 20)) + 1);

  const PlantFn plant = [this](const Vector& xi) { return plant_respond(xi); };

  const auto record = [&](long t, const Vector& xi, const Measurement& meas) {
    TraceRecord rec;
    rec.iteration = t;
    rec.xi = xi;
    rec.d = meas.d;
    rec.v = meas.v;
    rec.p0 = meas.p0;
    double payout = 0.0;
    for (int i = 0; i < n; ++i) payout += xi[i] * (meas.d[i] - qp_.d_hat[i]);
    rec.total_incentive = payout;
    rec.min_voltage = kernels::min_val(meas.v);
    rec.so_cost_value = so_cost(qp_, xi);
    rec.constraint_violation = constraint_violation(qp_, xi);
    result.trace.push_back(std::move(rec));
  };

  int streak = 0;
  for (long t = 0; t < cfg.max_iterations; ++t) {
    if (t > 0 && apply_due_events(t) && scenario_.algorithm == Algorithm::dual_ascent)
      state.xi = primal_of(qp_, state.stacked());

    MultiplierState next;
    if (scenario_.algorithm == Algorithm::zero_order) {
      ZeroOrderResult zo = zero_order_step(state, plant, cfg, scenario_.tariff, qp_.d_hat,
                                           qp_.c_prime, xi_floor_, limits_, rng);
      record(t, state.xi, zo.at_current);
      next = std::move(zo.state);
    } else {
      const Measurement meas = plant_respond(state.xi);
      record(t, state.xi, meas);
      next = scenario_.algorithm == Algorithm::dual_ascent
                 ? dual_ascent_step(state, qp_, meas, limits_, cfg.epsilon)
                 : first_order_step(state, meas, sens_, scenario_.tariff, qp_.d_hat,
                                    xi_floor_, limits_, cfg.epsilon);
    }

    double delta = 0.0;
    for (int i = 0; i < n; ++i) delta = std::max(delta, std::abs(next.xi[i] - state.xi[i]));
    state = std::move(next);

    if (kernels::max_abs(state.xi) > cfg.divergence_guard ||
        kernels::max_abs(state.stacked()) > 1e6 * cfg.divergence_guard) {
      result.status = RunStatus::diverged;
      break;
    }
    const double progress = std::max(delta, constraint_violation(qp_, state.xi));
    streak = progress <= cfg.tolerance ? streak + 1 : 0;
    if (streak >= cfg.settle) {
      result.status = RunStatus::converged;
      break;
    }
  }

  // Terminal record: the settled (or last) incentive with its own response.
  record(state.iteration, state.xi, plant_respond(state.xi));
  result.final_state = std::move(state);
  result.qp = qp_;
  result.plant_probes = probes_;
  return result;
}

RunResult run(const Scenario& scenario) { return ClosedLoopSim(scenario).run(); }

std::pair<std::vector<Prosumer>, OperationalLimits> apply_all_events(const Scenario& scenario) {
  validate_scenario(scenario);
  std::vector<Prosumer> prosumers = scenario.prosumers;
  OperationalLimits limits = scenario.limits;
  for (const Event& ev : scenario.events) apply_event_to(prosumers, limits, ev);
  return {std::move(prosumers), limits};
}

Summary summarize(const RunResult& result, double tolerance, int window) {
  if (result.trace.empty()) throw ValidationError("summarize: empty trace");
  if (window < 1) throw ValidationError("summarize: window must be at least 1");

  Summary s;
  s.status = result.status;
  const TraceRecord& last = result.trace.back();
  s.final_cost = last.so_cost_value;
  s.final_min_voltage = last.min_voltage;
  s.final_p0 = last.p0;
  s.final_total_incentive = last.total_incentive;

  const long size = static_cast<long>(result.trace.size());
  long run_start = -1;
  for (long i = 0; i < size; ++i) {
    if (result.trace[i].constraint_violation <= tolerance) {
      if (run_start < 0) run_start = i;
      const long len = i - run_start + 1;
      const bool holds_to_end = i == size - 1 && result.status == RunStatus::converged;
      if (len >= window || holds_to_end) {
        s.iterations_to_feasible = result.trace[run_start].iteration;
        break;
      }
    } else {
      run_start = -1;
    }
  }
  return s;
}

}  // namespace gridincent

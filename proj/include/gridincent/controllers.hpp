#pragma once

#include <cstdint>
#include <functional>

#include "gridincent/dense.hpp"
#include "gridincent/program.hpp"
#include "gridincent/rng.hpp"

namespace gridincent {

// Dual variables of the operating constraints plus the incentive they
// currently induce. The stacked order matches the constraint rows of QpData:
// [lambda_up; lambda_lo; mu_up; mu_lo; nu].
struct MultiplierState {
  Vector xi;
  Vector lambda_up;  // voltage upper band
  Vector lambda_lo;  // voltage lower band
  double mu_up = 0.0;  // feeder power upper
  double mu_lo = 0.0;  // feeder power lower
  Vector nu;         // demand nonnegativity
  long iteration = 0;

  static MultiplierState zeros(int n);
  static MultiplierState from_stacked(const Vector& theta, const Vector& xi, long iteration = 0);
  Vector stacked() const;
  int n() const { return static_cast<int>(xi.size()); }
};

// What the feedback loop reads back from the grid each iteration.
struct Measurement {
  Vector v;
  Vector d;
  double p0 = 0.0;
};

enum class Perturbation { uniform, coordinate };

// Where the zero-order dual updates take their measurement from: an extra
// probe at the unperturbed incentive, or the average of the two perturbed
// probes (saves one plant evaluation per iteration, adds O(sigma^2) bias).
enum class DualSource { probe, average };

struct ControllerConfig {
  double epsilon = 0.1;
  double sigma = 0.02;
  std::uint64_t seed = 1;
  Perturbation perturbation = Perturbation::uniform;
  DualSource dual_source = DualSource::probe;
  long max_iterations = 100000;
  double tolerance = 1e-6;
  // Iterations the stopping rule must hold consecutively before a run is
  // declared converged; guards the stochastic method against lucky draws.
  int settle = 20;
  bool clamp_demand = false;
  double divergence_guard = 1e6;
};

// Throws ValidationError on nonpositive step size / perturbation magnitude.
void validate_config(const ControllerConfig& config, bool zero_order);

// Gradients of the plant maps w.r.t. the incentive, in the layout the
// first-order update consumes: demand = A, voltage = -AR (the transposed
// voltage Jacobian), feeder = A1.
struct PlantSensitivities {
  Matrix demand;
  Matrix voltage;
  Vector feeder;
};

PlantSensitivities exact_sensitivities(const QpData& qp, const SensitivityModel& model);

// Incentive floor pi*1 - beta (demand nonnegativity rewritten in xi), read
// off the assembled constraint stack.
Vector incentive_floor(const QpData& qp);

// Model-based Lagrangian of the program at (xi, duals) given measured grid
// quantities.
double lagrangian_explicit(const QpData& qp, const MultiplierState& state,
                           const Measurement& meas, const OperationalLimits& limits);

// Measurement-only Lagrangian: every xi-dependent term is reconstructed from
// the metered demand, voltages and feeder power. c_prime collects the
// xi-independent tariff constants.
double lagrangian_implicit(const Vector& xi, const MultiplierState& duals,
                           const Measurement& meas, const Tariff& tariff, const Vector& d_hat,
                           double c_prime, const OperationalLimits& limits);

// Shared projected multiplier update: each dual ascends along its own
// measured constraint residual and is clipped at zero. xi and the iteration
// counter pass through unchanged.
MultiplierState dual_update(const MultiplierState& state, const Measurement& meas,
                            const OperationalLimits& limits, const Vector& xi_floor,
                            double epsilon);

// Projected dual ascent: multipliers move along measured residuals, then the
// incentive is recovered in closed form from the full model.
MultiplierState dual_ascent_step(const MultiplierState& state, const QpData& qp,
                                 const Measurement& meas, const OperationalLimits& limits,
                                 double epsilon);

// First-order saddle step: the incentive descends along the measured
// Lagrangian gradient assembled from the supplied plant sensitivities;
// multiplier updates are identical to dual ascent.
MultiplierState first_order_step(const MultiplierState& state, const Measurement& meas,
                                 const PlantSensitivities& sens, const Tariff& tariff,
                                 const Vector& d_hat, const Vector& xi_floor,
                                 const OperationalLimits& limits, double epsilon);

using PlantFn = std::function<Measurement(const Vector&)>;

struct ZeroOrderResult {
  MultiplierState state;
  // Measurement driving the dual update; also what the trace records for
  // this iteration.
  Measurement at_current;
  int probes = 0;
};

// Model-free saddle step: two plant probes at xi +/- sigma*zeta estimate the
// Lagrangian gradient along zeta; multipliers update from a third probe at
// the unperturbed xi (or the probe average, per config.dual_source).
ZeroOrderResult zero_order_step(const MultiplierState& state, const PlantFn& plant,
                                const ControllerConfig& config, const Tariff& tariff,
                                const Vector& d_hat, double c_prime, const Vector& xi_floor,
                                const OperationalLimits& limits, Rng& rng);

// Empirically verifies that theta -> [theta + eps * grad_h(theta)]+ is
// nonexpansive over random multiplier pairs; pairs along the dominant
// curvature direction are mixed in so an inadmissible step size is caught.
bool contraction_check(const QpData& qp, double epsilon, int trials, std::uint64_t seed = 7);

}  // namespace gridincent

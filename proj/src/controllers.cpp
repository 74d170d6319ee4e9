#include "gridincent/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "gridincent/errors.hpp"
#include "gridincent/kernels.hpp"

namespace gridincent {

namespace {

void check_measurement(const Measurement& meas, int n) {
  if (static_cast<int>(meas.v.size()) != n || static_cast<int>(meas.d.size()) != n)
    throw ValidationError("measurement: vector sizes do not match the feeder");
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(meas.v[i]) || !std::isfinite(meas.d[i]))
      throw ValidationError("measurement: non-finite reading at bus " + std::to_string(i + 1));
  if (!std::isfinite(meas.p0)) throw ValidationError("measurement: non-finite feeder power");
}

}  // namespace

MultiplierState MultiplierState::zeros(int n) {
  MultiplierState s;
  s.xi.assign(n, 0.0);
  s.lambda_up.assign(n, 0.0);
  s.lambda_lo.assign(n, 0.0);
  s.nu.assign(n, 0.0);
  return s;
}

Vector MultiplierState::stacked() const {
  const int n = this->n();
  Vector theta(3 * n + 2);
  for (int i = 0; i < n; ++i) {
    theta[i] = lambda_up[i];
    theta[n + i] = lambda_lo[i];
    theta[2 * n + 2 + i] = nu[i];
  }
  theta[2 * n] = mu_up;
  theta[2 * n + 1] = mu_lo;
  return theta;
}

MultiplierState MultiplierState::from_stacked(const Vector& theta, const Vector& xi,
                                              long iteration) {
  const int n = static_cast<int>(xi.size());
  if (static_cast<int>(theta.size()) != 3 * n + 2)
    throw ValidationError("from_stacked: multiplier vector size does not match xi");
  MultiplierState s = zeros(n);
  s.xi = xi;
  for (int i = 0; i < n; ++i) {
    s.lambda_up[i] = theta[i];
    s.lambda_lo[i] = theta[n + i];
    s.nu[i] = theta[2 * n + 2 + i];
  }
  s.mu_up = theta[2 * n];
  s.mu_lo = theta[2 * n + 1];
  s.iteration = iteration;
  return s;
}

void validate_config(const ControllerConfig& config, bool zero_order) {
  if (!(config.epsilon > 0.0) || !std::isfinite(config.epsilon))
    throw ValidationError("controller config: step size must be positive");
  if (zero_order && (!(config.sigma > 0.0) || !std::isfinite(config.sigma)))
    throw ValidationError("controller config: perturbation magnitude must be positive");
  if (config.max_iterations < 1)
    throw ValidationError("controller config: need at least one iteration");
  if (config.tolerance < 0.0)
    throw ValidationError("controller config: tolerance must be nonnegative");
  if (config.settle < 1)
    throw ValidationError("controller config: settle window must be at least 1");
  if (!(config.divergence_guard > 0.0))
    throw ValidationError("controller config: divergence guard must be positive");
}

PlantSensitivities exact_sensitivities(const QpData& qp, const SensitivityModel& model) {
  const int n = qp.n();
  if (model.n() != n)
    throw ValidationError("exact_sensitivities: feeder model size does not match program");
  PlantSensitivities sens;
  sens.demand = Matrix(n, n, 0.0);
  sens.voltage = Matrix(n, n, 0.0);
  sens.feeder = qp.a;
  for (int i = 0; i < n; ++i) {
    sens.demand(i, i) = qp.a[i];
    for (int j = 0; j < n; ++j) sens.voltage(i, j) = -qp.a[i] * model.R(i, j);
  }
  return sens;
}

Vector incentive_floor(const QpData& qp) {
  const int n = qp.n();
  Vector floor(n);
  for (int i = 0; i < n; ++i) floor[i] = qp.offset[2 * n + 2 + i];
  return floor;
}

double lagrangian_explicit(const QpData& qp, const MultiplierState& state,
                           const Measurement& meas, const OperationalLimits& limits) {
  const int n = qp.n();
  check_measurement(meas, n);
  double L = so_cost(qp, state.xi);
  for (int i = 0; i < n; ++i) {
    L += state.lambda_up[i] * (meas.v[i] - limits.v_max[i]);
    L -= state.lambda_lo[i] * (meas.v[i] - limits.v_min[i]);
    L += state.nu[i] * (qp.offset[2 * n + 2 + i] - state.xi[i]);
  }
  L += state.mu_up * (meas.p0 - limits.p0_max);
  L -= state.mu_lo * (meas.p0 - limits.p0_min);
  return L;
}

double lagrangian_implicit(const Vector& xi, const MultiplierState& duals,
                           const Measurement& meas, const Tariff& tariff, const Vector& d_hat,
                           double c_prime, const OperationalLimits& limits) {
  const int n = static_cast<int>(xi.size());
  check_measurement(meas, n);
  double L = c_prime;
  for (int i = 0; i < n; ++i) {
    L += xi[i] * (meas.d[i] - d_hat[i]) - tariff.pi * meas.d[i] - duals.nu[i] * meas.d[i];
    L += duals.lambda_up[i] * (meas.v[i] - limits.v_max[i]);
    L -= duals.lambda_lo[i] * (meas.v[i] - limits.v_min[i]);
  }
  L += duals.mu_up * (meas.p0 - limits.p0_max);
  L -= duals.mu_lo * (meas.p0 - limits.p0_min);
  return L;
}

MultiplierState dual_update(const MultiplierState& state, const Measurement& meas,
                            const OperationalLimits& limits, const Vector& xi_floor,
                            double epsilon) {
  const int n = state.n();
  MultiplierState s = state;
  for (int i = 0; i < n; ++i) {
    s.lambda_up[i] = std::max(0.0, state.lambda_up[i] + epsilon * (meas.v[i] - limits.v_max[i]));
    s.lambda_lo[i] = std::max(0.0, state.lambda_lo[i] + epsilon * (limits.v_min[i] - meas.v[i]));
    s.nu[i] = std::max(0.0, state.nu[i] + epsilon * (xi_floor[i] - state.xi[i]));
  }
  s.mu_up = std::max(0.0, state.mu_up + epsilon * (meas.p0 - limits.p0_max));
  s.mu_lo = std::max(0.0, state.mu_lo + epsilon * (limits.p0_min - meas.p0));
  return s;
}

MultiplierState dual_ascent_step(const MultiplierState& state, const QpData& qp,
                                 const Measurement& meas, const OperationalLimits& limits,
                                 double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("dual_ascent_step: step size must be positive");
  check_measurement(meas, qp.n());
  MultiplierState s = dual_update(state, meas, limits, incentive_floor(qp), epsilon);
  s.xi = primal_of(qp, s.stacked());
  s.iteration = state.iteration + 1;
  return s;
}

MultiplierState first_order_step(const MultiplierState& state, const Measurement& meas,
                                 const PlantSensitivities& sens, const Tariff& tariff,
                                 const Vector& d_hat, const Vector& xi_floor,
                                 const OperationalLimits& limits, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("first_order_step: step size must be positive");
  const int n = state.n();
  check_measurement(meas, n);
  const auto un = static_cast<std::size_t>(n);
  if (sens.demand.rows() != un || sens.demand.cols() != un || sens.voltage.rows() != un ||
      sens.voltage.cols() != un || sens.feeder.size() != un)
    throw ValidationError("first_order_step: sensitivity dimensions do not match the state");

  MultiplierState s = dual_update(state, meas, limits, xi_floor, epsilon);

  // grad_xi L from measurements and supplied plant gradients, with the
  // multipliers of the step the measurement was taken under.
  Vector diff_lambda(n), ones(n, 1.0);
  for (int i = 0; i < n; ++i) diff_lambda[i] = state.lambda_up[i] - state.lambda_lo[i];
  Vector dxi(n), dones(n), vl(n), dnu(n);
  kernels::matvec(sens.demand, state.xi, dxi);
  kernels::matvec(sens.demand, ones, dones);
  kernels::matvec(sens.voltage, diff_lambda, vl);
  kernels::matvec(sens.demand, state.nu, dnu);
  const double diff_mu = state.mu_up - state.mu_lo;
  for (int i = 0; i < n; ++i) {
    const double g = meas.d[i] - d_hat[i] + dxi[i] - tariff.pi * dones[i] + vl[i] +
                     sens.feeder[i] * diff_mu - dnu[i];
    s.xi[i] = state.xi[i] - epsilon * g;
  }
  s.iteration = state.iteration + 1;
  return s;
}

ZeroOrderResult zero_order_step(const MultiplierState& state, const PlantFn& plant,
                                const ControllerConfig& config, const Tariff& tariff,
                                const Vector& d_hat, double c_prime, const Vector& xi_floor,
                                const OperationalLimits& limits, Rng& rng) {
  validate_config(config, true);
  const int n = state.n();

  Vector zeta(n, 0.0);
  if (config.perturbation == Perturbation::uniform) {
    for (int i = 0; i < n; ++i) zeta[i] = rng.uniform_pm1();
  } else {
    zeta[state.iteration % n] = 1.0;
  }

  ZeroOrderResult out;
  out.probes = 0;
  if (config.dual_source == DualSource::probe) {
    out.at_current = plant(state.xi);
    ++out.probes;
    check_measurement(out.at_current, n);
  }

  Vector xi_up = state.xi, xi_dn = state.xi;
  kernels::axpy(config.sigma, zeta, xi_up);
  kernels::axpy(-config.sigma, zeta, xi_dn);
  const Measurement meas_up = plant(xi_up);
  const Measurement meas_dn = plant(xi_dn);
  out.probes += 2;
  check_measurement(meas_up, n);
  check_measurement(meas_dn, n);

  if (config.dual_source == DualSource::average) {
    out.at_current.v.resize(n);
    out.at_current.d.resize(n);
    for (int i = 0; i < n; ++i) {
      out.at_current.v[i] = 0.5 * (meas_up.v[i] + meas_dn.v[i]);
      out.at_current.d[i] = 0.5 * (meas_up.d[i] + meas_dn.d[i]);
    }
    out.at_current.p0 = 0.5 * (meas_up.p0 + meas_dn.p0);
  }

  const double up = lagrangian_implicit(xi_up, state, meas_up, tariff, d_hat, c_prime, limits);
  const double dn = lagrangian_implicit(xi_dn, state, meas_dn, tariff, d_hat, c_prime, limits);
  const double slope = (up - dn) / (2.0 * config.sigma);

  MultiplierState s = dual_update(state, out.at_current, limits, xi_floor, config.epsilon);
  for (int i = 0; i < n; ++i) s.xi[i] = state.xi[i] - config.epsilon * slope * zeta[i];
  s.iteration = state.iteration + 1;
  out.state = std::move(s);
  return out;
}

bool contraction_check(const QpData& qp, double epsilon, int trials, std::uint64_t seed) {
  const int m = qp.rows();
  const int n = qp.n();
  Rng rng(seed);

  // Dominant curvature direction of the dual Hessian; pairs along it are the
  // first to reveal an expansive map.
  Vector u(m, 1.0 / std::sqrt(static_cast<double>(m))), w(n), tmp(m);
  for (int it = 0; it < 500; ++it) {
    kernels::matvec_t(qp.constraint, u, w);
    for (int j = 0; j < n; ++j) w[j] /= qp.a[j];
    kernels::matvec(qp.constraint, w, tmp);
    const double nrm = std::sqrt(kernels::dot(tmp, tmp));
    if (nrm == 0.0) break;
    for (int i = 0; i < m; ++i) u[i] = tmp[i] / nrm;
  }

  const auto step = [&](const Vector& theta) {
    const Vector g = dual_gradient(qp, theta);
    Vector out(m);
    for (int i = 0; i < m; ++i) out[i] = std::max(0.0, theta[i] + epsilon * g[i]);
    return out;
  };

  // Nonexpansiveness is certified only up to the accuracy of the spectral
  // bound itself; the slack below absorbs the power-iteration error.
  constexpr double kSlack = 1e-6;
  const double scales[] = {0.1, 1.0, 10.0, 100.0, 1000.0};
  Vector th1(m), th2(m);
  for (int t = 0; t < trials; ++t) {
    const double s = scales[t % 5];
    if (t % 8 == 7) {
      const double h = 1e-3 * scales[(t / 8) % 5];
      const double sign = ((t / 8) % 2 == 0) ? 1.0 : -1.0;
      for (int i = 0; i < m; ++i) {
        th1[i] = 0.0;
        th2[i] = std::max(0.0, sign * u[i]) * h;
      }
    } else if (t % 2 == 1) {
      for (int i = 0; i < m; ++i) {
        th1[i] = s * rng.uniform01();
        th2[i] = std::max(0.0, th1[i] + 1e-3 * s * rng.uniform_pm1());
      }
    } else {
      for (int i = 0; i < m; ++i) {
        th1[i] = s * rng.uniform01();
        th2[i] = s * rng.uniform01();
      }
    }
    const Vector f1 = step(th1), f2 = step(th2);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < m; ++i) {
      num += (f1[i] - f2[i]) * (f1[i] - f2[i]);
      den += (th1[i] - th2[i]) * (th1[i] - th2[i]);
    }
    if (den == 0.0) continue;
    if (num > den * (1.0 + kSlack)) return false;
  }
  return true;
}

}  // namespace gridincent

#include "gridincent/program.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridincent/errors.hpp"
#include "gridincent/kernels.hpp"

namespace gridincent {

void validate_limits(const OperationalLimits& limits, int n) {
  if (static_cast<int>(limits.v_min.size()) != n || static_cast<int>(limits.v_max.size()) != n)
    throw ValidationError("limits: voltage bounds must have one entry per bus");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(limits.v_min[i]) || !std::isfinite(limits.v_max[i]))
      throw ValidationError("limits: voltage bounds at bus " + std::to_string(i + 1) +
                            " must be finite");
    if (!(limits.v_min[i] < limits.v_max[i]))
      throw InfeasibleError("limits: empty voltage band at bus " + std::to_string(i + 1) +
                            " (v_min >= v_max)");
  }
  if (!std::isfinite(limits.p0_min) || !std::isfinite(limits.p0_max))
    throw ValidationError("limits: feeder power bounds must be finite");
  if (!(limits.p0_min <= limits.p0_max))
    throw InfeasibleError("limits: empty feeder power band (p0_min > p0_max)");
}

std::string row_name(const QpData& qp, int row) {
  const int n = qp.n();
  if (row >= 0 && row < n) return "voltage upper bound at bus " + std::to_string(row + 1);
  if (row < 2 * n) return "voltage lower bound at bus " + std::to_string(row - n + 1);
  if (row == 2 * n) return "feeder power upper bound";
  if (row == 2 * n + 1) return "feeder power lower bound";
  if (row < 3 * n + 2)
    return "demand nonnegativity at bus " + std::to_string(row - 2 * n - 1);
  return "unknown constraint row " + std::to_string(row);
}

QpData assemble_qp(const SensitivityModel& model, std::span<const Prosumer> prosumers,
                   const Tariff& tariff, const OperationalLimits& limits) {
  const int n = model.n();
  if (static_cast<int>(prosumers.size()) != n)
    throw ValidationError("assemble_qp: prosumer count does not match the feeder size");
  validate_prosumers(prosumers, tariff);
  validate_limits(limits, n);

  QpData qp;
  qp.a.resize(n);
  qp.b.resize(n);
  qp.d_hat.resize(n);
  Vector p_hat(n), q(n);
  for (int i = 0; i < n; ++i) {
    qp.a[i] = 1.0 / prosumers[i].alpha;
    qp.b[i] = -tariff.pi * qp.a[i];
    qp.d_hat[i] = nominal_demand(prosumers[i], tariff);
    p_hat[i] = prosumers[i].r - qp.d_hat[i];
    q[i] = prosumers[i].q;
  }
  qp.v_hat = voltages_of(model, p_hat, q);

  qp.c = 0.0;
  qp.c_prime = 0.0;
  for (int i = 0; i < n; ++i) {
    qp.c += tariff.pi * p_hat[i] - tariff.pi0;            // -sum of nem_charge(p_hat)
    qp.c_prime += tariff.pi * prosumers[i].r - tariff.pi0;
  }

  const double net_nominal = kernels::sum(qp.d_hat) - kernels::sum(generations(prosumers));
  qp.constraint = Matrix(3 * n + 2, n, 0.0);
  qp.offset.assign(3 * n + 2, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double ra = model.R(i, j) * qp.a[j];
      qp.constraint(i, j) = -ra;
      qp.constraint(n + i, j) = ra;
    }
    qp.offset[i] = qp.v_hat[i] - limits.v_max[i];
    qp.offset[n + i] = limits.v_min[i] - qp.v_hat[i];
  }
  for (int j = 0; j < n; ++j) {
    qp.constraint(2 * n, j) = qp.a[j];
    qp.constraint(2 * n + 1, j) = -qp.a[j];
  }
  qp.offset[2 * n] = net_nominal - limits.p0_max;
  qp.offset[2 * n + 1] = limits.p0_min - net_nominal;
  for (int i = 0; i < n; ++i) {
    qp.constraint(2 * n + 2 + i, i) = -1.0;
    qp.offset[2 * n + 2 + i] = tariff.pi - prosumers[i].beta;
  }
  return qp;
}

double so_cost(const QpData& qp, std::span<const double> xi) {
  const int n = qp.n();
  if (static_cast<int>(xi.size()) != n)
    throw ValidationError("so_cost: incentive vector has the wrong size");
  double quad = 0.0, lin = 0.0;
  for (int i = 0; i < n; ++i) {
    quad += qp.a[i] * xi[i] * xi[i];
    lin += qp.b[i] * xi[i];
  }
  return quad + lin + qp.c;
}

Vector constraint_values(const QpData& qp, std::span<const double> xi) {
  if (static_cast<int>(xi.size()) != qp.n())
    throw ValidationError("constraint_values: incentive vector has the wrong size");
  Vector g(qp.rows());
  kernels::matvec(qp.constraint, xi, g);
  kernels::axpy(1.0, qp.offset, g);
  return g;
}

double constraint_violation(const QpData& qp, std::span<const double> xi) {
  const Vector g = constraint_values(qp, xi);
  const double worst = kernels::max_val(g);
  return worst > 0.0 ? worst : 0.0;
}

Vector primal_of(const QpData& qp, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != qp.rows())
    throw ValidationError("primal_of: multiplier vector has the wrong size");
  Vector xi(qp.n());
  kernels::matvec_t(qp.constraint, theta, xi);
  for (int i = 0; i < qp.n(); ++i) xi[i] = -(qp.b[i] + xi[i]) / (2.0 * qp.a[i]);
  return xi;
}

double dual_function(const QpData& qp, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != qp.rows())
    throw ValidationError("dual_function: multiplier vector has the wrong size");
  const int n = qp.n();
  Vector u(n);
  kernels::matvec_t(qp.constraint, theta, u);  // Phi' theta
  double quad = 0.0, cross = 0.0, norm_b = 0.0;
  for (int i = 0; i < n; ++i) {
    quad += u[i] * u[i] / qp.a[i];
    cross += u[i] * qp.b[i] / qp.a[i];
    norm_b += qp.b[i] * qp.b[i] / qp.a[i];
  }
  return kernels::dot(theta, qp.offset) - cross / 2.0 - quad / 4.0 - norm_b / 4.0 + qp.c;
}

Vector dual_gradient(const QpData& qp, std::span<const double> theta) {
  return constraint_values(qp, primal_of(qp, theta));
}

double kkt_residual(const QpData& qp, std::span<const double> xi,
                    std::span<const double> theta) {
  const int n = qp.n();
  if (static_cast<int>(xi.size()) != n || static_cast<int>(theta.size()) != qp.rows())
    throw ValidationError("kkt_residual: vector sizes do not match the program");
  Vector s(n);
  kernels::matvec_t(qp.constraint, theta, s);
  for (int i = 0; i < n; ++i) s[i] += 2.0 * qp.a[i] * xi[i] + qp.b[i];
  double worst = kernels::max_abs(s);
  const Vector g = constraint_values(qp, xi);
  for (int i = 0; i < qp.rows(); ++i) {
    worst = std::max(worst, std::max(0.0, g[i]));
    worst = std::max(worst, std::abs(theta[i] * g[i]));
  }
  return worst;
}

double step_size_bound(const QpData& qp) {
  const int n = qp.n();
  Vector inv_sqrt_a(n);
  for (int i = 0; i < n; ++i) inv_sqrt_a[i] = 1.0 / std::sqrt(qp.a[i]);
  Vector t(n), w(qp.rows());
  // Power iteration on A^{-1/2} Phi' Phi A^{-1/2}, which shares its nonzero
  // spectrum with Phi A^{-1} Phi' but stays n-dimensional.
  const auto apply = [&](const Vector& x, Vector& y) {
    for (int i = 0; i < n; ++i) t[i] = inv_sqrt_a[i] * x[i];
    kernels::matvec(qp.constraint, t, w);
    kernels::matvec_t(qp.constraint, w, y);
    for (int i = 0; i < n; ++i) y[i] *= inv_sqrt_a[i];
  };
  const double lambda_max = kernels::power_iteration(static_cast<std::size_t>(n), apply, 1e-13);
  // The demand-nonnegativity block embeds -I in Phi, so lambda_max >= min 1/a.
  return 4.0 / lambda_max;
}

namespace {

std::string diagnose_divergence(const QpData& qp, const Vector& theta) {
  // When the feasible set is empty the multipliers grow along a certificate
  // ray; report the rows that dominate it.
  const double top = kernels::max_abs(theta);
  std::string msg = "constraints admit no incentive vector; multipliers diverge along:";
  int named = 0;
  for (int i = 0; i < qp.rows() && named < 6; ++i) {
    if (theta[i] > 0.01 * top) {
      msg += " [" + row_name(qp, i) + "]";
      ++named;
    }
  }
  return msg;
}

}  // namespace

OracleSolution oracle_solve(const QpData& qp, double tol) {
  const int m = qp.rows();
  const double bound = step_size_bound(qp);
  constexpr long kMaxIterations = 2000000;
  constexpr double kMultiplierGuard = 1e8;

  // Accelerated projected ascent on the dual with gradient restarts; the
  // projected point theta is certified against the KKT system directly, so
  // the momentum scheme only has to find the point, not prove it.
  Vector theta(m), y(m), theta_next(m);
  OracleSolution solution;
  enum { solved, tripped, stalled };
  const auto attempt = [&](double eps) {
    std::fill(theta.begin(), theta.end(), 0.0);
    std::fill(y.begin(), y.end(), 0.0);
    double momentum = 1.0;
    for (long it = 1; it <= kMaxIterations; ++it) {
      const Vector g = dual_gradient(qp, y);
      for (int i = 0; i < m; ++i) theta_next[i] = std::max(0.0, y[i] + eps * g[i]);

      double restart = 0.0;
      for (int i = 0; i < m; ++i) restart += g[i] * (theta_next[i] - theta[i]);
      double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      if (restart < 0.0) momentum = momentum_next = 1.0;
      const double weight = (momentum - 1.0) / momentum_next;
      for (int i = 0; i < m; ++i) y[i] = theta_next[i] + weight * (theta_next[i] - theta[i]);
      theta = theta_next;
      momentum = momentum_next;

      if (it % 64 == 0 || it == kMaxIterations) {
        const Vector xi = primal_of(qp, theta);
        if (kkt_residual(qp, xi, theta) <= tol) {
          solution = {xi, theta, it};
          return +solved;
        }
        if (kernels::max_abs(theta) > kMultiplierGuard) return +tripped;
      }
    }
    return +stalled;
  };

  // Momentum tolerates only half the plain-ascent step ceiling.  A tripped
  // guard is retried at a quarter step to separate a genuine certificate ray
  // from an acceleration artefact before infeasibility is declared.
  int status = attempt(0.475 * bound);
  if (status == tripped) status = attempt(0.11875 * bound);
  if (status == solved) return solution;
  if (status == tripped) throw InfeasibleError(diagnose_divergence(qp, theta));
  throw std::runtime_error(
      "reference solver stalled before certifying optimality on a seemingly "
      "feasible program");
}

}  // namespace gridincent

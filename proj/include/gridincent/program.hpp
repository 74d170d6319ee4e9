#pragma once

#include <span>
#include <string>
#include <utility>

#include "gridincent/dense.hpp"
#include "gridincent/feeder.hpp"
#include "gridincent/market.hpp"

namespace gridincent {

// Voltage band per bus and substation power band, all per-unit.
struct OperationalLimits {
  Vector v_min;
  Vector v_max;
  double p0_min = -1e30;
  double p0_max = 1e30;
};

// Throws ValidationError unless v_min < v_max entrywise, sizes match n, and
// p0_min <= p0_max.
void validate_limits(const OperationalLimits& limits, int n);

// The operator's program over incentives xi:
//
//   minimize  xi' A xi + b' xi + c   subject to   Phi xi + phi <= 0
//
// with A = diag(a), a_n = 1/alpha_n, b = -pi a, and the constant c the
// negated nominal payout sum. The constraint stack merges the voltage band,
// the substation power band, and demand nonnegativity:
//
//   rows [0, n)        -RA    v_hat - v_max        (voltage upper)
//   rows [n, 2n)        RA    v_min - v_hat        (voltage lower)
//   row  2n             a'    1'd_hat - 1'r - p0_max
//   row  2n+1          -a'    p0_min - 1'd_hat + 1'r
//   rows [2n+2, 3n+2)  -I     pi - beta            (demand nonnegativity)
//
// v_hat = R r - R d_hat + X q + omega is the voltage profile at zero
// incentive; c_prime = sum(pi r_n - pi0) is the measured-cost constant.
struct QpData {
  Vector a;
  Vector b;
  double c = 0.0;
  Matrix constraint;  // Phi, (3n+2) x n
  Vector offset;      // phi, 3n+2
  Vector d_hat;
  Vector v_hat;
  double c_prime = 0.0;

  int n() const { return static_cast<int>(a.size()); }
  int rows() const { return 3 * n() + 2; }
};

// Human-readable name of a constraint row, for diagnostics.
std::string row_name(const QpData& qp, int row);

// Builds the program from the feeder model, the prosumer population, the
// tariff, and the operating limits. Throws ValidationError on broken
// component invariants and InfeasibleError when the limit box is empty.
QpData assemble_qp(const SensitivityModel& model, std::span<const Prosumer> prosumers,
                   const Tariff& tariff, const OperationalLimits& limits);

// xi' A xi + b' xi + c
double so_cost(const QpData& qp, std::span<const double> xi);

// Phi xi + phi
Vector constraint_values(const QpData& qp, std::span<const double> xi);

// inf-norm of the positive part of Phi xi + phi (0 when feasible)
double constraint_violation(const QpData& qp, std::span<const double> xi);

// Minimizer of the Lagrangian at fixed duals: xi(theta) = -(A^-1/2)(b + Phi' theta)
Vector primal_of(const QpData& qp, std::span<const double> theta);

// Dual objective h(theta) = theta'(phi - Phi A^-1 b / 2)
//                          - theta'(Phi A^-1 Phi' / 4) theta - b' A^-1 b / 4 + c
double dual_function(const QpData& qp, std::span<const double> theta);

// grad h(theta) = Phi xi(theta) + phi
Vector dual_gradient(const QpData& qp, std::span<const double> theta);

// max of stationarity, primal feasibility, and complementary-slackness
// residuals in the inf-norm
double kkt_residual(const QpData& qp, std::span<const double> xi, std::span<const double> theta);

// 4 / lambda_max(Phi' A^-1 Phi), the admissible-step threshold of the
// projected dual ascent. Spectral norm by matrix-free power iteration.
double step_size_bound(const QpData& qp);

struct OracleSolution {
  Vector xi;
  Vector theta;
  long iterations = 0;
};

// Reference solver: projected gradient ascent on the dual with closed-form
// primal recovery, run to KKT residual <= tol. Diverging multipliers are
// reported as InfeasibleError naming the dominant constraint rows.
OracleSolution oracle_solve(const QpData& qp, double tol = 1e-10);

}  // namespace gridincent

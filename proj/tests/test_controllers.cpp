#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "gridincent/controllers.hpp"
#include "gridincent/errors.hpp"
#include "gridincent/feeder.hpp"
#include "gridincent/market.hpp"
#include "gridincent/program.hpp"
#include "gridincent/rng.hpp"

using namespace gridincent;

namespace {

const Tariff kTariff{1.0, 0.0};

struct Instance {
  Network net;
  std::vector<Prosumer> prosumers;
  OperationalLimits limits;
  SensitivityModel model;
  QpData qp;

  Measurement respond(const Vector& xi) const {
    const int n = net.buses;
    Measurement m;
    m.d.resize(n);
    Vector p(n), q(n), r(n);
    for (int i = 0; i < n; ++i) {
      m.d[i] = optimal_demand(prosumers[i], kTariff, xi[i]);
      r[i] = prosumers[i].r;
      q[i] = prosumers[i].q;
      p[i] = r[i] - m.d[i];
    }
    m.v = voltages_of(model, p, q);
    m.p0 = feeder_power_of(m.d, r);
    return m;
  }

  PlantFn plant() const {
    return [this](const Vector& xi) { return respond(xi); };
  }
};

// alpha = 2, beta = 3, branch r = 0.1: optimum pinned at xi* = 0.4 by the
// voltage floor (see the program tests for the hand derivation).
Instance hand_instance() {
  Instance inst;
  inst.net.buses = 1;
  inst.net.edges = {{0, 1, 0.1, 0.04}};
  Prosumer p;
  p.alpha = 2.0;
  p.beta = 3.0;
  inst.prosumers = {p};
  inst.limits.v_min = {0.88};
  inst.limits.v_max = {1.05};
  inst.limits.p0_min = -10.0;
  inst.limits.p0_max = 10.0;
  inst.model = build_sensitivities(inst.net);
  inst.qp = assemble_qp(inst.model, inst.prosumers, kTariff, inst.limits);
  return inst;
}

// Three-bus chain whose voltage floor binds at the optimum while every
// demand stays strictly positive (interior in the nu block).
Instance chain_instance() {
  Instance inst;
  inst.net.buses = 3;
  inst.net.edges = {{0, 1, 0.04, 0.02}, {1, 2, 0.03, 0.015}, {2, 3, 0.05, 0.02}};
  inst.prosumers.resize(3);
  inst.prosumers[0] = {2.0, 3.0, 0.5, -0.10};
  inst.prosumers[1] = {1.25, 2.0, 0.0, 0.05};
  inst.prosumers[2] = {4.0, 5.0, 0.2, 0.0};
  inst.limits.v_min = {0.90, 0.90, 0.90};
  inst.limits.v_max = {1.10, 1.10, 1.10};
  inst.limits.p0_min = -5.0;
  inst.limits.p0_max = 5.0;
  inst.model = build_sensitivities(inst.net);
  inst.qp = assemble_qp(inst.model, inst.prosumers, kTariff, inst.limits);
  return inst;
}

// grad_xi of the measured Lagrangian: 2 A xi + b - A R (l_up - l_lo)
// + a (mu_up - mu_lo) - A nu
Vector analytic_gradient(const Instance& inst, const MultiplierState& s) {
  const int n = inst.qp.n();
  Vector g(n);
  for (int i = 0; i < n; ++i) {
    double rterm = 0.0;
    for (int j = 0; j < n; ++j)
      rterm += inst.model.R(i, j) * (s.lambda_up[j] - s.lambda_lo[j]);
    g[i] = 2.0 * inst.qp.a[i] * s.xi[i] + inst.qp.b[i] +
           inst.qp.a[i] * (-rterm + (s.mu_up - s.mu_lo) - s.nu[i]);
  }
  return g;
}

MultiplierState random_state(const Instance& inst, Rng& rng) {
  MultiplierState s = MultiplierState::zeros(inst.qp.n());
  for (auto& x : s.xi) x = rng.uniform(-1.0, 1.0);
  for (auto& x : s.lambda_up) x = rng.uniform(0.0, 0.5);
  for (auto& x : s.lambda_lo) x = rng.uniform(0.0, 0.5);
  for (auto& x : s.nu) x = rng.uniform(0.0, 0.5);
  s.mu_up = rng.uniform(0.0, 0.5);
  s.mu_lo = rng.uniform(0.0, 0.5);
  return s;
}

}  // namespace

TEST_CASE("multiplier state round-trips through the stacked layout") {
  Rng rng(3);
  const Instance inst = chain_instance();
  const MultiplierState s = random_state(inst, rng);
  const Vector theta = s.stacked();
  const int n = 3;
  REQUIRE(static_cast<int>(theta.size()) == 3 * n + 2);
  for (int i = 0; i < n; ++i) {
    CHECK(theta[i] == s.lambda_up[i]);
    CHECK(theta[n + i] == s.lambda_lo[i]);
    CHECK(theta[2 * n + 2 + i] == s.nu[i]);
  }
  CHECK(theta[2 * n] == s.mu_up);
  CHECK(theta[2 * n + 1] == s.mu_lo);

  const MultiplierState back = MultiplierState::from_stacked(theta, s.xi, 42);
  CHECK(back.xi == s.xi);
  CHECK(back.lambda_up == s.lambda_up);
  CHECK(back.lambda_lo == s.lambda_lo);
  CHECK(back.mu_up == s.mu_up);
  CHECK(back.mu_lo == s.mu_lo);
  CHECK(back.nu == s.nu);
  CHECK(back.iteration == 42);
  CHECK_THROWS_AS(MultiplierState::from_stacked(Vector(7, 0.0), s.xi), ValidationError);
}

TEST_CASE("controller config validation") {
  ControllerConfig ok;
  CHECK_NOTHROW(validate_config(ok, false));
  CHECK_NOTHROW(validate_config(ok, true));

  ControllerConfig c = ok;
  c.epsilon = 0.0;
  CHECK_THROWS_AS(validate_config(c, false), ValidationError);
  c = ok;
  c.sigma = -0.1;
  CHECK_NOTHROW(validate_config(c, false));  // sigma only matters model-free
  CHECK_THROWS_AS(validate_config(c, true), ValidationError);
  c = ok;
  c.max_iterations = 0;
  CHECK_THROWS_AS(validate_config(c, false), ValidationError);
  c = ok;
  c.tolerance = -1e-9;
  CHECK_THROWS_AS(validate_config(c, false), ValidationError);
  c = ok;
  c.settle = 0;
  CHECK_THROWS_AS(validate_config(c, false), ValidationError);
  c = ok;
  c.divergence_guard = 0.0;
  CHECK_THROWS_AS(validate_config(c, false), ValidationError);
}

TEST_CASE("plant sensitivities and the incentive floor read off the program") {
  const Instance inst = chain_instance();
  const PlantSensitivities sens = exact_sensitivities(inst.qp, inst.model);
  const int n = 3;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      CHECK(sens.demand(i, j) == (i == j ? inst.qp.a[i] : 0.0));
      CHECK(sens.voltage(i, j) == doctest::Approx(-inst.qp.a[i] * inst.model.R(i, j)).epsilon(1e-15));
    }
  }
  CHECK(sens.feeder == inst.qp.a);

  CHECK(incentive_floor(inst.qp) == Vector{-2.0, -1.0, -4.0});  // pi - beta

  const Instance other = hand_instance();
  CHECK_THROWS_AS(exact_sensitivities(inst.qp, other.model), ValidationError);
}

TEST_CASE("measurement-only Lagrangian matches the hand value") {
  const Instance inst = hand_instance();
  MultiplierState s = MultiplierState::zeros(1);
  s.xi = {0.2};
  s.lambda_up = {0.1};
  const Measurement meas = inst.respond(s.xi);
  CHECK(meas.d[0] == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(meas.v[0] == doctest::Approx(0.89).epsilon(1e-15));
  CHECK(meas.p0 == doctest::Approx(1.1).epsilon(1e-15));

  // 0.2*0.1 - 1.1 + 0.1*(0.89 - 1.05) = -1.096
  const double L = lagrangian_implicit(s.xi, s, meas, kTariff, inst.qp.d_hat,
                                       inst.qp.c_prime, inst.limits);
  CHECK(L == doctest::Approx(-1.096).epsilon(1e-14));
}

TEST_CASE("model-based and measurement-only Lagrangians agree") {
  const Instance inst = chain_instance();
  Rng rng(11);
  for (int t = 0; t < 300; ++t) {
    const MultiplierState s = random_state(inst, rng);
    const Measurement meas = inst.respond(s.xi);

    // identical when the demand-floor dual is idle
    MultiplierState no_nu = s;
    no_nu.nu.assign(3, 0.0);
    const double exp0 = lagrangian_explicit(inst.qp, no_nu, meas, inst.limits);
    const double imp0 = lagrangian_implicit(no_nu.xi, no_nu, meas, kTariff, inst.qp.d_hat,
                                            inst.qp.c_prime, inst.limits);
    CHECK(exp0 == doctest::Approx(imp0).epsilon(1e-12));

    // the model-based form prices the floor through -alpha d, the metered
    // form through -d: scaling nu by alpha reconciles them exactly
    MultiplierState scaled = s;
    for (int i = 0; i < 3; ++i) scaled.nu[i] = s.nu[i] * inst.prosumers[i].alpha;
    const double expn = lagrangian_explicit(inst.qp, s, meas, inst.limits);
    const double impn = lagrangian_implicit(s.xi, scaled, meas, kTariff, inst.qp.d_hat,
                                            inst.qp.c_prime, inst.limits);
    CHECK(expn == doctest::Approx(impn).epsilon(1e-12));
  }
}

TEST_CASE("dual update ascends residuals, projects at zero, and leaves xi alone") {
  const Instance inst = chain_instance();
  Rng rng(23);
  const Vector floor = incentive_floor(inst.qp);
  for (int t = 0; t < 500; ++t) {
    const MultiplierState s = random_state(inst, rng);
    Measurement meas;
    meas.v = {rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2)};
    meas.d = {rng.uniform(-0.5, 2.0), rng.uniform(-0.5, 2.0), rng.uniform(-0.5, 2.0)};
    meas.p0 = rng.uniform(-6.0, 6.0);
    const double eps = rng.uniform(0.01, 2.0);
    const MultiplierState out = dual_update(s, meas, inst.limits, floor, eps);

    CHECK(out.xi == s.xi);
    CHECK(out.iteration == s.iteration);
    for (int i = 0; i < 3; ++i) {
      CHECK(out.lambda_up[i] ==
            std::max(0.0, s.lambda_up[i] + eps * (meas.v[i] - inst.limits.v_max[i])));
      CHECK(out.lambda_lo[i] ==
            std::max(0.0, s.lambda_lo[i] + eps * (inst.limits.v_min[i] - meas.v[i])));
      CHECK(out.nu[i] == std::max(0.0, s.nu[i] + eps * (floor[i] - s.xi[i])));
      CHECK(out.lambda_up[i] >= 0.0);
      CHECK(out.lambda_lo[i] >= 0.0);
      CHECK(out.nu[i] >= 0.0);
    }
    CHECK(out.mu_up == std::max(0.0, s.mu_up + eps * (meas.p0 - inst.limits.p0_max)));
    CHECK(out.mu_lo == std::max(0.0, s.mu_lo + eps * (inst.limits.p0_min - meas.p0)));
    CHECK(out.mu_up >= 0.0);
    CHECK(out.mu_lo >= 0.0);
  }
}

TEST_CASE("projected dual ascent is stationary at the certified optimum") {
  for (const Instance& inst : {hand_instance(), chain_instance()}) {
    const OracleSolution sol = oracle_solve(inst.qp);
    // interior in the nu block, otherwise the test premise is wrong
    for (int i = 0; i < inst.qp.n(); ++i)
      REQUIRE(sol.theta[2 * inst.qp.n() + 2 + i] <= 1e-9);

    const MultiplierState at = MultiplierState::from_stacked(sol.theta, sol.xi);
    const Measurement meas = inst.respond(sol.xi);
    const double eps = 0.9 * step_size_bound(inst.qp);
    const MultiplierState next = dual_ascent_step(at, inst.qp, meas, inst.limits, eps);

    CHECK(next.iteration == at.iteration + 1);
    for (int i = 0; i < inst.qp.n(); ++i)
      CHECK(std::abs(next.xi[i] - sol.xi[i]) <= 1e-8);
    const Vector ts = next.stacked();
    for (int i = 0; i < inst.qp.rows(); ++i) CHECK(std::abs(ts[i] - sol.theta[i]) <= 1e-8);
  }
}

TEST_CASE("measured-gradient saddle step is stationary at the certified optimum") {
  for (const Instance& inst : {hand_instance(), chain_instance()}) {
    const OracleSolution sol = oracle_solve(inst.qp);
    const MultiplierState at = MultiplierState::from_stacked(sol.theta, sol.xi);
    const Measurement meas = inst.respond(sol.xi);
    const PlantSensitivities sens = exact_sensitivities(inst.qp, inst.model);
    const MultiplierState next =
        first_order_step(at, meas, sens, kTariff, inst.qp.d_hat, incentive_floor(inst.qp),
                         inst.limits, 0.1);
    for (int i = 0; i < inst.qp.n(); ++i)
      CHECK(std::abs(next.xi[i] - sol.xi[i]) <= 1e-9);
  }
}

TEST_CASE("measured-gradient step equals the analytic Lagrangian gradient") {
  const Instance inst = chain_instance();
  const PlantSensitivities sens = exact_sensitivities(inst.qp, inst.model);
  Rng rng(41);
  for (int t = 0; t < 300; ++t) {
    const MultiplierState s = random_state(inst, rng);
    const Measurement meas = inst.respond(s.xi);
    const double eps = rng.uniform(0.01, 0.5);
    const MultiplierState next = first_order_step(s, meas, sens, kTariff, inst.qp.d_hat,
                                                  incentive_floor(inst.qp), inst.limits, eps);
    const Vector g = analytic_gradient(inst, s);
    for (int i = 0; i < 3; ++i)
      CHECK(next.xi[i] == doctest::Approx(s.xi[i] - eps * g[i]).epsilon(1e-12));
  }
}

TEST_CASE("two-point probe recovers the exact directional slope") {
  const Instance inst = chain_instance();
  Rng seed_rng(57);
  const Vector floor = incentive_floor(inst.qp);

  for (double sigma : {1e-3, 0.1, 1.0}) {
    ControllerConfig cfg;
    cfg.epsilon = 0.07;
    cfg.sigma = sigma;
    cfg.perturbation = Perturbation::uniform;
    cfg.dual_source = DualSource::probe;

    MultiplierState s = random_state(inst, seed_rng);
    s.iteration = 5;
    const Vector g = analytic_gradient(inst, s);

    // replay the direction draw with a copy of the generator
    Rng rng_known(1234), rng_used(1234);
    Vector zeta(3);
    for (auto& z : zeta) z = rng_known.uniform_pm1();

    const ZeroOrderResult out = zero_order_step(s, inst.plant(), cfg, kTariff, inst.qp.d_hat,
                                                inst.qp.c_prime, floor, inst.limits, rng_used);
    CHECK(out.probes == 3);
    CHECK(out.state.iteration == 6);

    // the metered Lagrangian is quadratic in xi, so the centered difference
    // equals zeta' grad L with no smoothing error at any sigma
    double along = 0.0;
    for (int i = 0; i < 3; ++i) along += zeta[i] * g[i];
    for (int i = 0; i < 3; ++i)
      CHECK(out.state.xi[i] ==
            doctest::Approx(s.xi[i] - cfg.epsilon * along * zeta[i]).epsilon(1e-10));
  }
}

TEST_CASE("coordinate probing walks the axes and recovers exact partials") {
  const Instance inst = chain_instance();
  Rng rng(77);
  ControllerConfig cfg;
  cfg.epsilon = 0.05;
  cfg.sigma = 0.02;
  cfg.perturbation = Perturbation::coordinate;

  MultiplierState s = random_state(inst, rng);
  const Vector g = analytic_gradient(inst, s);
  const Vector floor = incentive_floor(inst.qp);

  for (long it = 0; it < 6; ++it) {
    s.iteration = it;
    Rng step_rng(1);
    const ZeroOrderResult out = zero_order_step(s, inst.plant(), cfg, kTariff, inst.qp.d_hat,
                                                inst.qp.c_prime, floor, inst.limits, step_rng);
    const int j = static_cast<int>(it % 3);
    for (int i = 0; i < 3; ++i) {
      if (i == j)
        CHECK(out.state.xi[i] == doctest::Approx(s.xi[i] - cfg.epsilon * g[i]).epsilon(1e-9));
      else
        CHECK(out.state.xi[i] == s.xi[i]);
    }
  }
}

TEST_CASE("averaged probes replace the third plant evaluation") {
  const Instance inst = chain_instance();
  Rng rng(99);
  const MultiplierState s = random_state(inst, rng);
  ControllerConfig cfg;
  cfg.epsilon = 0.07;
  cfg.sigma = 0.05;
  cfg.dual_source = DualSource::average;

  Rng step_rng(5);
  const ZeroOrderResult out = zero_order_step(s, inst.plant(), cfg, kTariff, inst.qp.d_hat,
                                              inst.qp.c_prime, incentive_floor(inst.qp),
                                              inst.limits, step_rng);
  CHECK(out.probes == 2);
  // the plant maps are affine, so the probe average lands on the midpoint
  const Measurement mid = inst.respond(s.xi);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.at_current.v[i] == doctest::Approx(mid.v[i]).epsilon(1e-13));
    CHECK(out.at_current.d[i] == doctest::Approx(mid.d[i]).epsilon(1e-13));
  }
  CHECK(out.at_current.p0 == doctest::Approx(mid.p0).epsilon(1e-13));
}

TEST_CASE("uniform directions average to a third of the gradient") {
  const Instance inst = chain_instance();
  MultiplierState s = MultiplierState::zeros(3);
  s.xi = {0.3, -0.2, 0.5};
  s.lambda_up = {0.1, 0.0, 0.2};
  s.lambda_lo = {0.0, 0.3, 0.0};
  s.mu_up = 0.15;
  s.mu_lo = 0.05;
  s.nu = {0.2, 0.1, 0.0};
  const Vector g = analytic_gradient(inst, s);

  ControllerConfig cfg;
  cfg.epsilon = 0.01;
  cfg.sigma = 0.02;
  cfg.dual_source = DualSource::average;  // two probes per sample is enough here

  Rng rng(2468);
  const PlantFn plant = inst.plant();
  const Vector floor = incentive_floor(inst.qp);
  Vector mean(3, 0.0);
  const int samples = 100000;
  for (int t = 0; t < samples; ++t) {
    const ZeroOrderResult out =
        zero_order_step(s, plant, cfg, kTariff, inst.qp.d_hat, inst.qp.c_prime, floor,
                        inst.limits, rng);
    for (int i = 0; i < 3; ++i) mean[i] += (s.xi[i] - out.state.xi[i]) / cfg.epsilon;
  }
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) {
    mean[i] /= samples;
    scale = std::max(scale, std::abs(g[i]) / 3.0);
  }
  REQUIRE(scale > 0.05);  // the reference gradient must be informative
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mean[i] - g[i] / 3.0) <= 0.02 * scale);
}

TEST_CASE("closed loop of measured dual ascent lands on the oracle") {
  for (const Instance& inst : {hand_instance(), chain_instance()}) {
    const OracleSolution sol = oracle_solve(inst.qp);
    const double eps = 0.9 * step_size_bound(inst.qp);

    MultiplierState s = MultiplierState::zeros(inst.qp.n());
    s.xi = primal_of(inst.qp, s.stacked());
    double h_prev = dual_function(inst.qp, s.stacked());
    for (int it = 0; it < 20000; ++it) {
      s = dual_ascent_step(s, inst.qp, inst.respond(s.xi), inst.limits, eps);
      if (it < 500) {
        // admissible steps never lose dual value
        const double h_now = dual_function(inst.qp, s.stacked());
        CHECK(h_now >= h_prev - 1e-12);
        h_prev = h_now;
      }
    }
    for (int i = 0; i < inst.qp.n(); ++i) CHECK(std::abs(s.xi[i] - sol.xi[i]) <= 1e-6);
    CHECK(kkt_residual(inst.qp, s.xi, s.stacked()) <= 1e-5);
  }
}

TEST_CASE("measured-gradient loop agrees with the dual-ascent limit") {
  const Instance inst = chain_instance();
  const OracleSolution sol = oracle_solve(inst.qp);
  const PlantSensitivities sens = exact_sensitivities(inst.qp, inst.model);
  const Vector floor = incentive_floor(inst.qp);

  MultiplierState s = MultiplierState::zeros(3);
  for (int it = 0; it < 200000; ++it)
    s = first_order_step(s, inst.respond(s.xi), sens, kTariff, inst.qp.d_hat, floor,
                         inst.limits, 0.05);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s.xi[i] - sol.xi[i]) <= 1e-5);
}

TEST_CASE("empirical nonexpansiveness separates admissible from inadmissible steps") {
  for (const Instance& inst : {hand_instance(), chain_instance()}) {
    const double bound = step_size_bound(inst.qp);
    CHECK(contraction_check(inst.qp, bound, 10000));
    CHECK(contraction_check(inst.qp, 0.5 * bound, 10000));
    CHECK_FALSE(contraction_check(inst.qp, 100.0 * bound, 10000));
  }
}

TEST_CASE("steps reject broken measurements and nonpositive step sizes") {
  const Instance inst = hand_instance();
  MultiplierState s = MultiplierState::zeros(1);
  const Measurement good = inst.respond(s.xi);

  CHECK_THROWS_AS(dual_ascent_step(s, inst.qp, good, inst.limits, 0.0), ValidationError);

  Measurement short_v = good;
  short_v.v.clear();
  CHECK_THROWS_AS(dual_ascent_step(s, inst.qp, short_v, inst.limits, 0.1), ValidationError);

  Measurement nan_d = good;
  nan_d.d[0] = std::nan("");
  CHECK_THROWS_AS(dual_ascent_step(s, inst.qp, nan_d, inst.limits, 0.1), ValidationError);

  Measurement inf_p0 = good;
  inf_p0.p0 = std::numeric_limits<double>::infinity();
  const PlantSensitivities sens = exact_sensitivities(inst.qp, inst.model);
  CHECK_THROWS_AS(first_order_step(s, inf_p0, sens, kTariff, inst.qp.d_hat,
                                   incentive_floor(inst.qp), inst.limits, 0.1),
                  ValidationError);

  PlantSensitivities wrong = sens;
  wrong.feeder.push_back(0.0);
  CHECK_THROWS_AS(first_order_step(s, good, wrong, kTariff, inst.qp.d_hat,
                                   incentive_floor(inst.qp), inst.limits, 0.1),
                  ValidationError);
}

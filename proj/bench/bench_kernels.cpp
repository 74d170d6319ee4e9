// Times the OpenMP kernel path against the serial reference on synthetic
// feeders, and cross-checks that both produce bitwise-identical results.
//
// Rows: sensitivity-matrix construction, the dense products behind the dual
// iteration, blocked reductions, and a full projected dual-ascent sweep.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "gridincent/feeder.hpp"
#include "gridincent/kernels.hpp"
#include "gridincent/market.hpp"
#include "gridincent/program.hpp"
#include "gridincent/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gi = gridincent;
namespace gk = gi::kernels;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

gi::Network make_feeder(int n, std::uint64_t seed) {
  gi::Rng rng(seed);
  gi::Network net;
  net.buses = n;
  net.base_mva = 10.0;
  const double scale = 33.0 / n;  // keep path resistances in a sane range
  for (int child = 1; child <= n; ++child) {
    gi::Edge e;
    e.child = child;
    e.parent = child == 1 ? 0
               : rng.uniform01() < 0.6 ? child - 1
                                       : static_cast<int>(rng.uniform_int(0, child - 1));
    e.r = rng.uniform(0.01, 0.08) * scale;
    e.x = e.r * rng.uniform(0.5, 1.2);
    net.edges.push_back(e);
  }
  return net;
}

std::vector<gi::Prosumer> make_population(int n, std::uint64_t seed, const gi::Tariff& tariff) {
  gi::Rng rng(seed);
  std::vector<gi::Prosumer> pop(n);
  for (gi::Prosumer& p : pop) {
    p.alpha = rng.uniform(0.5, 2.5);
    const double d_hat = rng.uniform(0.01, 0.03);
    p.beta = tariff.pi + p.alpha * d_hat;
    p.q = -0.3 * d_hat;
  }
  return pop;
}

struct Timing {
  double serial_ms = 0.0;
  double openmp_ms = 0.0;
  bool match = true;
};

void report(const char* what, int n, const Timing& t) {
  std::printf("%-18s %6d %12.3f %12.3f %9.2fx   %s\n", what, n, t.serial_ms, t.openmp_ms,
              t.openmp_ms > 0 ? t.serial_ms / t.openmp_ms : 0.0, t.match ? "ok" : "MISMATCH");
}

template <class Fn>
double timed(int reps, const Fn& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < reps; ++k) fn();
  return ms_since(t0);
}

void bench_size(int n) {
  const gi::Network net = make_feeder(n, 11);
  const gi::Tariff tariff{1.0, 0.0};
  const auto pop = make_population(n, 12, tariff);

  Timing t_build;
  gi::SensitivityModel serial_model, omp_model;
  t_build.serial_ms = timed(1, [&] { serial_model = gi::build_sensitivities(net, gk::Backend::serial); });
  t_build.openmp_ms = timed(1, [&] { omp_model = gi::build_sensitivities(net, gk::Backend::openmp); });
  t_build.match = serial_model.R == omp_model.R && serial_model.X == omp_model.X;
  report("build_sens", n, t_build);

  gi::OperationalLimits limits;
  limits.v_min.assign(n, 0.0);
  limits.v_max.assign(n, 2.0);
  limits.p0_min = -1e3;
  limits.p0_max = 1e3;
  const gi::QpData qp = gi::assemble_qp(omp_model, pop, tariff, limits);

  gi::Rng rng(13);
  gi::Vector x(n);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  gi::Vector y_serial(qp.rows()), y_omp(qp.rows());
  const int reps = std::max(1, 200000 / n);

  Timing t_mv;
  t_mv.serial_ms = timed(reps, [&] { gk::matvec(qp.constraint, x, y_serial, gk::Backend::serial); });
  t_mv.openmp_ms = timed(reps, [&] { gk::matvec(qp.constraint, x, y_omp, gk::Backend::openmp); });
  t_mv.match = y_serial == y_omp;
  report("matvec", n, t_mv);

  gi::Vector z_serial(n), z_omp(n);
  Timing t_mvt;
  t_mvt.serial_ms =
      timed(reps, [&] { gk::matvec_t(qp.constraint, y_serial, z_serial, gk::Backend::serial); });
  t_mvt.openmp_ms =
      timed(reps, [&] { gk::matvec_t(qp.constraint, y_omp, z_omp, gk::Backend::openmp); });
  t_mvt.match = z_serial == z_omp;
  report("matvec_t", n, t_mvt);

  gi::Vector w(qp.rows());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
  double acc_serial = 0.0, acc_omp = 0.0;
  Timing t_dot;
  t_dot.serial_ms =
      timed(reps * 4, [&] { acc_serial += gk::dot(y_serial, w, gk::Backend::serial); });
  t_dot.openmp_ms = timed(reps * 4, [&] { acc_omp += gk::dot(y_omp, w, gk::Backend::openmp); });
  t_dot.match = acc_serial == acc_omp;
  report("dot", n, t_dot);

  // One projected dual-ascent sweep: gradient, clamp, step.
  const double eps = 0.9 * gi::step_size_bound(qp);
  const auto sweep = [&](gk::Backend backend, gi::Vector& theta) {
    gi::Vector xi(n), g(qp.rows());
    for (long it = 0; it < 200; ++it) {
      gk::matvec_t(qp.constraint, theta, xi, backend);
      for (int i = 0; i < n; ++i) xi[i] = -(qp.b[i] + xi[i]) / (2.0 * qp.a[i]);
      gk::matvec(qp.constraint, xi, g, backend);
      gk::axpy(1.0, qp.offset, g, backend);
      gk::axpy(eps, g, theta, backend);
      gk::clamp_nonneg(theta, backend);
    }
  };
  gi::Vector th_serial(qp.rows()), th_omp(qp.rows());
  Timing t_da;
  t_da.serial_ms = timed(1, [&] { sweep(gk::Backend::serial, th_serial); });
  t_da.openmp_ms = timed(1, [&] { sweep(gk::Backend::openmp, th_omp); });
  t_da.match = th_serial == th_omp;
  report("dual_sweep(200)", n, t_da);
}

}  // namespace

int main(int argc, char** argv) {
  int max_n = 2048;
  if (argc > 1) max_n = std::stoi(argv[1]);
#ifdef _OPENMP
  std::printf("# OpenMP, max threads %d\n", omp_get_max_threads());
#else
  std::printf("# built without OpenMP\n");
#endif
  std::printf("%-18s %6s %12s %12s %10s   %s\n", "kernel", "n", "serial_ms", "openmp_ms",
              "speedup", "check");
  for (int n : {256, 512, 1024, 2048})
    if (n <= max_n) bench_size(n);
  return 0;
}

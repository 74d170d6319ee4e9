// Command-line front end: solve a scenario directly, run one feedback
// controller against the simulated feeder, or race all three.
//
// Exit codes: 0 ok, 2 malformed/invalid input, 3 infeasible program,
// 4 the controller diverged (outputs are still written).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridincent/errors.hpp"
#include "gridincent/io.hpp"
#include "gridincent/kernels.hpp"
#include "gridincent/program.hpp"
#include "gridincent/sim.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gi = gridincent;

namespace {

struct Options {
  std::string network;
  std::string prosumers;
  std::string scenario;
  std::string out;
  std::string algo;  // empty: use the scenario file's choice
  std::string backend = "openmp";
  double epsilon = 0.0;
  double sigma = 0.0;
  double tolerance = 0.0;
  double feas_tol = 1e-4;
  long max_iterations = 0;
  std::uint64_t seed = 0;
  long stride = 0;
  int threads = 0;
};

// The run and compare subcommands register their own copies of the override
// flags; each callback must consult its own option objects, not the other
// subcommand's.
struct OverrideFlags {
  CLI::Option* epsilon = nullptr;
  CLI::Option* sigma = nullptr;
  CLI::Option* tolerance = nullptr;
  CLI::Option* max_iterations = nullptr;
  CLI::Option* seed = nullptr;
};

struct Inputs {
  gi::Network net;
  std::vector<gi::io::ProsumerRecord> records;
  gi::io::ScenarioDoc doc;
};

Inputs load(const Options& opt) {
#ifdef _OPENMP
  if (opt.threads > 0) omp_set_num_threads(opt.threads);
#endif
  gi::kernels::set_default_backend(opt.backend == "serial" ? gi::kernels::Backend::serial
                                                           : gi::kernels::Backend::openmp);
  Inputs in;
  in.net = gi::io::read_network(opt.network);
  in.records = gi::io::read_prosumers(opt.prosumers, in.net);
  in.doc = gi::io::read_scenario(opt.scenario, in.net);
  return in;
}

gi::Algorithm pick_algorithm(const Options& opt, const gi::io::ScenarioDoc& doc) {
  if (opt.algo.empty()) return doc.algorithm;
  if (opt.algo == "dual") return gi::Algorithm::dual_ascent;
  if (opt.algo == "first") return gi::Algorithm::first_order;
  return gi::Algorithm::zero_order;
}

void apply_overrides(gi::Scenario& sc, const Options& opt, const OverrideFlags& flags) {
  if (flags.epsilon->count()) sc.config.epsilon = opt.epsilon;
  if (flags.sigma->count()) sc.config.sigma = opt.sigma;
  if (flags.tolerance->count()) sc.config.tolerance = opt.tolerance;
  if (flags.max_iterations->count()) sc.config.max_iterations = opt.max_iterations;
  if (flags.seed->count()) sc.config.seed = opt.seed;
}

std::string out_path(const Options& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out);
  return (std::filesystem::path(opt.out) / name).string();
}

void print_run(const gi::RunResult& result, const gi::Summary& summary, const gi::Network& net,
               gi::Algorithm algorithm) {
  std::printf("algorithm %s\n", gi::io::algorithm_name(algorithm));
  std::printf("seed %llu\n", static_cast<unsigned long long>(result.seed));
  std::printf("status %s\n", summary.status == gi::RunStatus::converged       ? "converged"
                             : summary.status == gi::RunStatus::max_iterations ? "max_iterations"
                                                                               : "diverged");
  std::printf("iterations %ld\n", result.trace.empty() ? 0L : result.trace.back().iteration);
  std::printf("plant_probes %ld\n", result.plant_probes);
  std::printf("iterations_to_feasible %ld\n", summary.iterations_to_feasible);
  std::printf("final_cost %.10g\n", summary.final_cost);
  std::printf("final_min_voltage %.10g\n", summary.final_min_voltage);
  std::printf("final_p0_mw %.10g\n", gi::io::to_mw(summary.final_p0, net));
  std::printf("final_total_incentive %.10g\n", summary.final_total_incentive);
}

int cmd_solve(const Options& opt) {
  const Inputs in = load(opt);
  const gi::Scenario sc = gi::io::make_scenario(in.net, in.records, in.doc, in.doc.algorithm);
  const auto [prosumers, limits] = gi::apply_all_events(sc);
  const gi::SensitivityModel model = gi::build_sensitivities(sc.network);
  const gi::QpData qp = gi::assemble_qp(model, prosumers, sc.tariff, limits);
  const gi::OracleSolution sol = gi::oracle_solve(qp);
  const std::string path = out_path(opt, "solution.txt");
  gi::io::write_solution(path, qp, sol, sc.network, prosumers);
  std::printf("cost %.10g\n", gi::so_cost(qp, sol.xi));
  std::printf("kkt_residual %.3g\n", gi::kkt_residual(qp, sol.xi, sol.theta));
  std::printf("solver_iterations %ld\n", sol.iterations);
  std::printf("solution %s\n", path.c_str());
  return 0;
}

int cmd_run(const Options& opt, const OverrideFlags& flags) {
  const Inputs in = load(opt);
  const gi::Algorithm algorithm = pick_algorithm(opt, in.doc);
  gi::Scenario sc = gi::io::make_scenario(in.net, in.records, in.doc, algorithm);
  apply_overrides(sc, opt, flags);
  const gi::RunResult result = gi::run(sc);
  const gi::Summary summary = gi::summarize(result, opt.feas_tol);
  const std::string stem = gi::io::algorithm_name(algorithm);
  const std::string trace_path = out_path(opt, "trace_" + stem + ".txt");
  const std::string summary_path = out_path(opt, "summary_" + stem + ".txt");
  gi::io::write_trace(trace_path, result, sc.network, algorithm, opt.stride);
  gi::io::write_summary(summary_path, summary, result, sc.network, algorithm);
  print_run(result, summary, sc.network, algorithm);
  std::printf("trace %s\n", trace_path.c_str());
  std::printf("summary %s\n", summary_path.c_str());
  return result.status == gi::RunStatus::diverged ? 4 : 0;
}

int cmd_compare(const Options& opt, const OverrideFlags& flags) {
  const Inputs in = load(opt);
  int rc = 0;
  std::vector<gi::RunResult> results;
  const gi::Algorithm algos[] = {gi::Algorithm::dual_ascent, gi::Algorithm::first_order,
                                 gi::Algorithm::zero_order};
  gi::Network net;
  for (gi::Algorithm algorithm : algos) {
    gi::Scenario sc = gi::io::make_scenario(in.net, in.records, in.doc, algorithm);
    apply_overrides(sc, opt, flags);
    net = sc.network;
    gi::RunResult result = gi::run(sc);
    const gi::Summary summary = gi::summarize(result, opt.feas_tol);
    if (result.status == gi::RunStatus::diverged) rc = 4;
    const std::string stem = gi::io::algorithm_name(algorithm);
    gi::io::write_trace(out_path(opt, "trace_" + stem + ".txt"), result, sc.network, algorithm,
                        opt.stride);
    std::printf("%s status %s iterations %ld feasible_at %ld final_cost %.10g\n", stem.c_str(),
                result.status == gi::RunStatus::converged       ? "converged"
                : result.status == gi::RunStatus::max_iterations ? "max_iterations"
                                                                 : "diverged",
                result.trace.empty() ? 0L : result.trace.back().iteration,
                summary.iterations_to_feasible, summary.final_cost);
    results.push_back(std::move(result));
  }
  const std::string cmp_path = out_path(opt, "compare.txt");
  gi::io::write_compare(cmp_path, results[0], results[1], results[2], net, opt.stride);
  std::printf("compare %s\n", cmp_path.c_str());
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal incentive design for distribution-grid services"};
  app.require_subcommand(1);

  Options opt;
  const char* env_out = std::getenv("GRIDINCENT_OUT");
  opt.out = env_out ? env_out : ".";

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--network", opt.network, "feeder description file")->required();
    sub->add_option("--prosumers", opt.prosumers, "prosumer population file")->required();
    sub->add_option("--scenario", opt.scenario, "scenario file")->required();
    sub->add_option("--out", opt.out, "output directory (default: $GRIDINCENT_OUT or .)");
    sub->add_option("--threads", opt.threads, "OpenMP thread count (0 = runtime default)");
    sub->add_option("--backend", opt.backend, "kernel backend")
        ->check(CLI::IsMember({"serial", "openmp"}));
  };
  const auto add_run_opts = [&](CLI::App* sub) {
    OverrideFlags flags;
    flags.epsilon = sub->add_option("--epsilon", opt.epsilon, "step size override");
    flags.sigma = sub->add_option("--sigma", opt.sigma, "probe magnitude override");
    flags.tolerance = sub->add_option("--tol", opt.tolerance, "stopping tolerance override");
    flags.max_iterations =
        sub->add_option("--max-iters", opt.max_iterations, "iteration cap override");
    flags.seed = sub->add_option("--seed", opt.seed, "rng seed override");
    sub->add_option("--stride", opt.stride, "trace thinning stride (0 = auto)");
    sub->add_option("--feas-tol", opt.feas_tol,
                    "constraint-violation band for time-to-feasible reporting");
    return flags;
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the operator's program directly");
  add_common(solve);

  CLI::App* run = app.add_subcommand("run", "run one feedback controller in closed loop");
  add_common(run);
  const OverrideFlags run_flags = add_run_opts(run);
  run->add_option("--algo", opt.algo, "controller (default: scenario file)")
      ->check(CLI::IsMember({"dual", "first", "zero"}));

  CLI::App* compare = app.add_subcommand("compare", "run all three controllers, same scenario");
  add_common(compare);
  const OverrideFlags compare_flags = add_run_opts(compare);

  int rc = 0;
  solve->callback([&] { rc = cmd_solve(opt); });
  run->callback([&] { rc = cmd_run(opt, run_flags); });
  compare->callback([&] { rc = cmd_compare(opt, compare_flags); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const gi::InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 3;
  } catch (const gi::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const gi::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}

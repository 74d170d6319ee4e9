#include "gridincent/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gridincent/errors.hpp"
#include "gridincent/kernels.hpp"
#include "gridincent/rng.hpp"

namespace gridincent::io {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Row {
  long line = 0;
  std::vector<std::string> tokens;
};

// Reads a tagged file: line 1 must equal `tag`, `#` starts a comment, blank
// lines are skipped.
std::vector<Row> read_rows(const std::string& path, const std::string& tag) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::vector<Row> rows;
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (no == 1) {
      std::string head = line;
      while (!head.empty() && (head.back() == ' ' || head.back() == '\t')) head.pop_back();
      if (head != tag)
        throw ParseError(path, 1, "expected format tag '" + tag + "', got '" + head + "'");
      continue;
    }
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    Row row;
    row.line = no;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) row.tokens.push_back(tok);
    if (!row.tokens.empty()) rows.push_back(std::move(row));
  }
  if (no == 0) throw ParseError(path, 0, "empty file; expected format tag '" + tag + "'");
  return rows;
}

void want_args(const std::string& path, const Row& row, std::size_t n) {
  if (row.tokens.size() != n + 1)
    throw ParseError(path, row.line, "'" + row.tokens[0] + "' takes " + std::to_string(n) +
                                         " argument(s), got " +
                                         std::to_string(row.tokens.size() - 1));
}

double num_arg(const std::string& path, const Row& row, std::size_t idx) {
  const std::string& s = row.tokens[idx];
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || std::isnan(v))
    throw ParseError(path, row.line, "expected a number, got '" + s + "'");
  return v;
}

long long_arg(const std::string& path, const Row& row, std::size_t idx) {
  const std::string& s = row.tokens[idx];
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw ParseError(path, row.line, "expected an integer, got '" + s + "'");
  return v;
}

int int_arg(const std::string& path, const Row& row, std::size_t idx) {
  return static_cast<int>(long_arg(path, row, idx));
}

std::uint64_t u64_arg(const std::string& path, const Row& row, std::size_t idx) {
  const std::string& s = row.tokens[idx];
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE || s.find('-') != std::string::npos)
    throw ParseError(path, row.line, "expected a nonnegative integer, got '" + s + "'");
  return v;
}

[[noreturn]] void unknown(const std::string& path, const Row& row) {
  throw ParseError(path, row.line, "unknown directive '" + row.tokens[0] + "'");
}

// Write-to-temp-then-rename so readers never observe a half-written file.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path) : path_(std::move(path)), tmp_(path_ + ".tmp") {
    out_.open(tmp_, std::ios::trunc);
    if (!out_) throw ValidationError("cannot open '" + tmp_ + "' for writing");
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.close();
    if (!out_ || std::rename(tmp_.c_str(), path_.c_str()) != 0)
      throw ValidationError("cannot write '" + path_ + "'");
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
};

double base_of(const Network& net) {
  if (!(net.base_mva > 0.0)) throw ValidationError("network: base power must be positive");
  return net.base_mva;
}

}  // namespace

const char* algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::dual_ascent: return "dual_ascent";
    case Algorithm::first_order: return "first_order";
    case Algorithm::zero_order: return "zero_order";
  }
  return "unknown";
}

Network read_network(const std::string& path) {
  Network net;
  bool saw_buses = false;
  for (const Row& row : read_rows(path, "gridincent-network v1")) {
    const std::string& key = row.tokens[0];
    if (key == "base_mva") {
      want_args(path, row, 1);
      net.base_mva = num_arg(path, row, 1);
    } else if (key == "base_kv") {
      want_args(path, row, 1);
      net.base_kv = num_arg(path, row, 1);
    } else if (key == "buses") {
      want_args(path, row, 1);
      net.buses = int_arg(path, row, 1);
      saw_buses = true;
    } else if (key == "edge") {
      want_args(path, row, 4);
      Edge e;
      e.parent = int_arg(path, row, 1);
      e.child = int_arg(path, row, 2);
      e.r = num_arg(path, row, 3);
      e.x = num_arg(path, row, 4);
      net.edges.push_back(e);
    } else {
      unknown(path, row);
    }
  }
  if (!saw_buses) throw ParseError(path, 0, "missing 'buses' directive");
  validate(net);
  return net;
}

void write_network(const std::string& path, const Network& net) {
  AtomicFile file(path);
  auto& out = file.stream();
  out << "gridincent-network v1\n";
  out << "base_mva " << fmt(net.base_mva) << "\n";
  out << "base_kv " << fmt(net.base_kv) << "\n";
  out << "buses " << net.buses << "\n";
  out << "# edge <parent> <child> <r_pu> <x_pu>\n";
  for (const Edge& e : net.edges)
    out << "edge " << e.parent << " " << e.child << " " << fmt(e.r) << " " << fmt(e.x) << "\n";
  file.commit();
}

std::vector<ProsumerRecord> read_prosumers(const std::string& path, const Network& net) {
  std::vector<ProsumerRecord> by_bus(net.buses);
  std::vector<char> seen(net.buses + 1, 0);
  for (const Row& row : read_rows(path, "gridincent-prosumers v1")) {
    if (row.tokens[0] != "prosumer") unknown(path, row);
    want_args(path, row, 7);
    ProsumerRecord rec;
    rec.bus = int_arg(path, row, 1);
    if (rec.bus < 1 || rec.bus > net.buses)
      throw ParseError(path, row.line, "bus " + std::to_string(rec.bus) +
                                           " is outside the feeder (1.." +
                                           std::to_string(net.buses) + ")");
    if (seen[rec.bus])
      throw ParseError(path, row.line,
                       "duplicate record for bus " + std::to_string(rec.bus));
    seen[rec.bus] = 1;
    rec.alpha = num_arg(path, row, 2);
    rec.beta = num_arg(path, row, 3);
    rec.r_mw = num_arg(path, row, 4);
    rec.q_mvar = num_arg(path, row, 5);
    rec.d_min_mw = num_arg(path, row, 6);
    rec.d_max_mw = num_arg(path, row, 7);
    by_bus[rec.bus - 1] = rec;
  }
  for (int b = 1; b <= net.buses; ++b)
    if (!seen[b]) throw ParseError(path, 0, "missing record for bus " + std::to_string(b));
  return by_bus;
}

void write_prosumers(const std::string& path, std::span<const ProsumerRecord> records,
                     const Network& net) {
  AtomicFile file(path);
  auto& out = file.stream();
  out << "gridincent-prosumers v1\n";
  out << "# prosumer <bus> <alpha $/MW^2> <beta $/MW> <r_mw> <q_mvar> <d_min_mw> <d_max_mw>\n";
  (void)net;
  for (const ProsumerRecord& r : records)
    out << "prosumer " << r.bus << " " << fmt(r.alpha) << " " << fmt(r.beta) << " "
        << fmt(r.r_mw) << " " << fmt(r.q_mvar) << " " << fmt(r.d_min_mw) << " "
        << fmt(r.d_max_mw) << "\n";
  file.commit();
}

ScenarioDoc read_scenario(const std::string& path, const Network& net) {
  ScenarioDoc doc;
  bool saw_tariff = false, saw_vlim = false, saw_plim = false;
  for (const Row& row : read_rows(path, "gridincent-scenario v1")) {
    const std::string& key = row.tokens[0];
    if (key == "tariff") {
      want_args(path, row, 2);
      doc.pi = num_arg(path, row, 1);
      doc.pi0 = num_arg(path, row, 2);
      saw_tariff = true;
    } else if (key == "voltage_limits") {
      want_args(path, row, 2);
      doc.v_min_default = num_arg(path, row, 1);
      doc.v_max_default = num_arg(path, row, 2);
      saw_vlim = true;
    } else if (key == "voltage_limit_bus") {
      want_args(path, row, 3);
      const int bus = int_arg(path, row, 1);
      if (bus < 1 || bus > net.buses)
        throw ParseError(path, row.line, "bus " + std::to_string(bus) + " is outside the feeder");
      doc.v_overrides.push_back({bus, {num_arg(path, row, 2), num_arg(path, row, 3)}});
    } else if (key == "feeder_limits") {
      want_args(path, row, 2);
      doc.p0_min_mw = num_arg(path, row, 1);
      doc.p0_max_mw = num_arg(path, row, 2);
      saw_plim = true;
    } else if (key == "algorithm") {
      want_args(path, row, 1);
      const std::string& a = row.tokens[1];
      if (a == "dual") doc.algorithm = Algorithm::dual_ascent;
      else if (a == "first") doc.algorithm = Algorithm::first_order;
      else if (a == "zero") doc.algorithm = Algorithm::zero_order;
      else throw ParseError(path, row.line, "algorithm must be dual, first or zero");
    } else if (key == "epsilon_dual") {
      want_args(path, row, 1);
      doc.epsilon_dual = num_arg(path, row, 1);
    } else if (key == "epsilon_first") {
      want_args(path, row, 1);
      doc.epsilon_first = num_arg(path, row, 1);
    } else if (key == "epsilon_zero") {
      want_args(path, row, 1);
      doc.epsilon_zero = num_arg(path, row, 1);
    } else if (key == "sigma") {
      want_args(path, row, 1);
      doc.sigma = num_arg(path, row, 1);
    } else if (key == "seed") {
      want_args(path, row, 1);
      doc.seed = u64_arg(path, row, 1);
    } else if (key == "tolerance") {
      want_args(path, row, 1);
      doc.tolerance = num_arg(path, row, 1);
    } else if (key == "max_iterations") {
      want_args(path, row, 1);
      doc.max_iterations = long_arg(path, row, 1);
    } else if (key == "settle") {
      want_args(path, row, 1);
      doc.settle = int_arg(path, row, 1);
    } else if (key == "perturbation") {
      want_args(path, row, 1);
      const std::string& p = row.tokens[1];
      if (p == "uniform") doc.perturbation = Perturbation::uniform;
      else if (p == "coordinate") doc.perturbation = Perturbation::coordinate;
      else throw ParseError(path, row.line, "perturbation must be uniform or coordinate");
    } else if (key == "zero_order_dual_source") {
      want_args(path, row, 1);
      const std::string& s = row.tokens[1];
      if (s == "probe") doc.dual_source = DualSource::probe;
      else if (s == "average") doc.dual_source = DualSource::average;
      else throw ParseError(path, row.line, "zero_order_dual_source must be probe or average");
    } else if (key == "divergence_guard") {
      want_args(path, row, 1);
      doc.divergence_guard_per_mw = num_arg(path, row, 1);
    } else if (key == "clamp_demand") {
      want_args(path, row, 1);
      const std::string& s = row.tokens[1];
      if (s == "on") doc.clamp_demand = true;
      else if (s == "off") doc.clamp_demand = false;
      else throw ParseError(path, row.line, "clamp_demand must be on or off");
    } else if (key == "event") {
      if (row.tokens.size() < 3) throw ParseError(path, row.line, "incomplete event");
      EventRecord ev;
      ev.iteration = long_arg(path, row, 1);
      const std::string& kind = row.tokens[2];
      if (kind == "generator_off" || kind == "generator_on") {
        want_args(path, row, 4);
        ev.kind = kind == "generator_off" ? Event::Kind::generator_off : Event::Kind::generator_on;
        ev.bus = int_arg(path, row, 3);
        ev.capacity_mw = num_arg(path, row, 4);
      } else if (kind == "set_limits") {
        want_args(path, row, 6);
        ev.kind = Event::Kind::set_limits;
        ev.v_min = num_arg(path, row, 3);
        ev.v_max = num_arg(path, row, 4);
        ev.p0_min_mw = num_arg(path, row, 5);
        ev.p0_max_mw = num_arg(path, row, 6);
      } else {
        throw ParseError(path, row.line, "event kind must be generator_off, generator_on or "
                                         "set_limits");
      }
      doc.events.push_back(ev);
    } else {
      unknown(path, row);
    }
  }
  if (!saw_tariff) throw ParseError(path, 0, "missing 'tariff' directive");
  if (!saw_vlim) throw ParseError(path, 0, "missing 'voltage_limits' directive");
  if (!saw_plim) throw ParseError(path, 0, "missing 'feeder_limits' directive");
  return doc;
}

void write_scenario(const std::string& path, const ScenarioDoc& doc, const Network& net) {
  (void)net;
  AtomicFile file(path);
  auto& out = file.stream();
  out << "gridincent-scenario v1\n";
  out << "tariff " << fmt(doc.pi) << " " << fmt(doc.pi0) << "\n";
  out << "voltage_limits " << fmt(doc.v_min_default) << " " << fmt(doc.v_max_default) << "\n";
  for (const auto& [bus, band] : doc.v_overrides)
    out << "voltage_limit_bus " << bus << " " << fmt(band.first) << " " << fmt(band.second)
        << "\n";
  out << "feeder_limits " << fmt(doc.p0_min_mw) << " " << fmt(doc.p0_max_mw) << "\n";
  out << "algorithm "
      << (doc.algorithm == Algorithm::dual_ascent
              ? "dual"
              : doc.algorithm == Algorithm::first_order ? "first" : "zero")
      << "\n";
  out << "epsilon_dual " << fmt(doc.epsilon_dual) << "\n";
  out << "epsilon_first " << fmt(doc.epsilon_first) << "\n";
  out << "epsilon_zero " << fmt(doc.epsilon_zero) << "\n";
  out << "sigma " << fmt(doc.sigma) << "\n";
  out << "seed " << doc.seed << "\n";
  out << "tolerance " << fmt(doc.tolerance) << "\n";
  out << "max_iterations " << doc.max_iterations << "\n";
  out << "settle " << doc.settle << "\n";
  out << "perturbation "
      << (doc.perturbation == Perturbation::uniform ? "uniform" : "coordinate") << "\n";
  out << "zero_order_dual_source "
      << (doc.dual_source == DualSource::probe ? "probe" : "average") << "\n";
  out << "divergence_guard " << fmt(doc.divergence_guard_per_mw) << "\n";
  out << "clamp_demand " << (doc.clamp_demand ? "on" : "off") << "\n";
  for (const EventRecord& ev : doc.events) {
    out << "event " << ev.iteration << " ";
    switch (ev.kind) {
      case Event::Kind::generator_off:
        out << "generator_off " << ev.bus << " " << fmt(ev.capacity_mw);
        break;
      case Event::Kind::generator_on:
        out << "generator_on " << ev.bus << " " << fmt(ev.capacity_mw);
        break;
      case Event::Kind::set_limits:
        out << "set_limits " << fmt(ev.v_min) << " " << fmt(ev.v_max) << " "
            << fmt(ev.p0_min_mw) << " " << fmt(ev.p0_max_mw);
        break;
    }
    out << "\n";
  }
  file.commit();
}

Scenario make_scenario(const Network& net, std::span<const ProsumerRecord> records,
                       const ScenarioDoc& doc, Algorithm algorithm) {
  const double s = base_of(net);
  Scenario sc;
  sc.network = net;
  if (static_cast<int>(records.size()) != net.buses)
    throw ValidationError("scenario: got " + std::to_string(records.size()) +
                          " prosumer records for " + std::to_string(net.buses) + " buses");
  sc.prosumers.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ProsumerRecord& r = records[i];
    if (r.bus < 1 || r.bus > net.buses)
      throw ValidationError("scenario: prosumer record names unknown bus " +
                            std::to_string(r.bus));
    Prosumer& p = sc.prosumers[r.bus - 1];
    p.alpha = r.alpha * s * s;
    p.beta = r.beta * s;
    p.r = r.r_mw / s;
    p.q = r.q_mvar / s;
    p.d_min = r.d_min_mw / s;
    p.d_max = r.d_max_mw / s;
  }
  sc.tariff.pi = doc.pi * s;
  sc.tariff.pi0 = doc.pi0;
  sc.limits.v_min.assign(net.buses, doc.v_min_default);
  sc.limits.v_max.assign(net.buses, doc.v_max_default);
  for (const auto& [bus, band] : doc.v_overrides) {
    if (bus < 1 || bus > net.buses)
      throw ValidationError("scenario: voltage override references unknown bus " +
                            std::to_string(bus));
    sc.limits.v_min[bus - 1] = band.first;
    sc.limits.v_max[bus - 1] = band.second;
  }
  sc.limits.p0_min = doc.p0_min_mw / s;
  sc.limits.p0_max = doc.p0_max_mw / s;
  sc.algorithm = algorithm;
  sc.config.epsilon = algorithm == Algorithm::dual_ascent
                          ? doc.epsilon_dual
                          : algorithm == Algorithm::first_order ? doc.epsilon_first
                                                                : doc.epsilon_zero;
  sc.config.sigma = doc.sigma;
  sc.config.seed = doc.seed;
  sc.config.perturbation = doc.perturbation;
  sc.config.dual_source = doc.dual_source;
  sc.config.max_iterations = doc.max_iterations;
  sc.config.tolerance = doc.tolerance;
  sc.config.settle = doc.settle;
  sc.config.clamp_demand = doc.clamp_demand;
  sc.config.divergence_guard = doc.divergence_guard_per_mw * s;
  for (const EventRecord& er : doc.events) {
    Event ev;
    ev.iteration = er.iteration;
    ev.kind = er.kind;
    if (er.kind == Event::Kind::set_limits) {
      ev.limits.v_min.assign(net.buses, er.v_min);
      ev.limits.v_max.assign(net.buses, er.v_max);
      ev.limits.p0_min = er.p0_min_mw / s;
      ev.limits.p0_max = er.p0_max_mw / s;
    } else {
      ev.bus = er.bus;
      ev.capacity = er.capacity_mw / s;
    }
    sc.events.push_back(std::move(ev));
  }
  validate_scenario(sc);
  return sc;
}

double to_mw(double pu, const Network& net) { return pu * base_of(net); }

double incentive_per_mw(double xi_internal, const Network& net) {
  return xi_internal / base_of(net);
}

namespace {

long effective_stride(long stride, std::size_t records) {
  if (stride > 0) return stride;
  return std::max<long>(1, static_cast<long>(records) / 5000);
}

void trace_row(std::ofstream& out, const TraceRecord& rec, double s) {
  out << rec.iteration << " " << fmt(rec.total_incentive) << " " << fmt(rec.min_voltage) << " "
      << fmt(rec.p0 * s) << " " << fmt(rec.so_cost_value) << " "
      << fmt(rec.constraint_violation);
  for (double x : rec.xi) out << " " << fmt(x / s);
  for (double d : rec.d) out << " " << fmt(d * s);
  for (double v : rec.v) out << " " << fmt(v);
  out << "\n";
}

const char* status_name(RunStatus status) {
  switch (status) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iterations: return "max_iterations";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

}  // namespace

void write_trace(const std::string& path, const RunResult& result, const Network& net,
                 Algorithm algorithm, long stride) {
  const double s = base_of(net);
  const long step = effective_stride(stride, result.trace.size());
  AtomicFile file(path);
  auto& out = file.stream();
  out << "gridincent-trace v1\n";
  out << "# algorithm " << algorithm_name(algorithm) << "\n";
  out << "# rng " << Rng::name() << " seed " << result.seed << "\n";
  out << "# status " << status_name(result.status) << "\n";
  out << "# base_mva " << fmt(net.base_mva) << "\n";
  out << "# stride " << step << "\n";
  const int n = net.buses;
  out << "# columns: iteration total_incentive min_voltage p0_mw so_cost "
         "constraint_violation";
  for (int i = 1; i <= n; ++i) out << " xi_mw_" << i;
  for (int i = 1; i <= n; ++i) out << " d_mw_" << i;
  for (int i = 1; i <= n; ++i) out << " v_pu_" << i;
  out << "\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i)
    if (i % static_cast<std::size_t>(step) == 0 || i + 1 == result.trace.size())
      trace_row(out, result.trace[i], s);
  file.commit();
}

void write_summary(const std::string& path, const Summary& summary, const RunResult& result,
                   const Network& net, Algorithm algorithm) {
  const double s = base_of(net);
  AtomicFile file(path);
  auto& out = file.stream();
  out << "gridincent-summary v1\n";
  out << "algorithm " << algorithm_name(algorithm) << "\n";
  out << "seed " << result.seed << "\n";
  out << "status " << status_name(summary.status) << "\n";
  out << "iterations " << (result.trace.empty() ? 0 : result.trace.back().iteration) << "\n";
  out << "plant_probes " << result.plant_probes << "\n";
  out << "iterations_to_feasible " << summary.iterations_to_feasible << "\n";
  out << "final_cost " << fmt(summary.final_cost) << "\n";
  out << "final_min_voltage " << fmt(summary.final_min_voltage) << "\n";
  out << "final_p0_mw " << fmt(summary.final_p0 * s) << "\n";
  out << "final_total_incentive " << fmt(summary.final_total_incentive) << "\n";
  file.commit();
}

void write_solution(const std::string& path, const QpData& qp, const OracleSolution& sol,
                    const Network& net, std::span<const Prosumer> prosumers) {
  const double s = base_of(net);
  const int n = qp.n();
  Vector d(n);
  for (int i = 0; i < n; ++i) d[i] = qp.d_hat[i] + qp.a[i] * sol.xi[i];
  Vector v(n);
  {
    Vector phix(qp.rows());
    kernels::matvec(qp.constraint, sol.xi, phix);
    for (int i = 0; i < n; ++i) v[i] = qp.v_hat[i] + phix[i];  // upper rows carry -RA
  }
  const double p0 = feeder_power_of(d, generations(prosumers));
  const Vector g = constraint_values(qp, sol.xi);

  AtomicFile file(path);
  auto& out = file.stream();
  out << "gridincent-solution v1\n";
  out << "cost " << fmt(so_cost(qp, sol.xi)) << "\n";
  out << "kkt_residual " << fmt(kkt_residual(qp, sol.xi, sol.theta)) << "\n";
  out << "solver_iterations " << sol.iterations << "\n";
  out << "p0_mw " << fmt(p0 * s) << "\n";
  out << "min_voltage " << fmt(kernels::min_val(v)) << "\n";
  out << "total_incentive " << fmt([&] {
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += sol.xi[i] * (d[i] - qp.d_hat[i]);
    return t;
  }()) << "\n";
  for (int i = 0; i < qp.rows(); ++i)
    if (g[i] > -1e-6)
      out << "active \"" << row_name(qp, i) << "\" multiplier " << fmt(sol.theta[i]) << "\n";
  out << "# xi <bus> <$/MW>; d <bus> <MW>; v <bus> <p.u.>\n";
  for (int i = 0; i < n; ++i) out << "xi " << i + 1 << " " << fmt(sol.xi[i] / s) << "\n";
  for (int i = 0; i < n; ++i) out << "d " << i + 1 << " " << fmt(d[i] * s) << "\n";
  for (int i = 0; i < n; ++i) out << "v " << i + 1 << " " << fmt(v[i]) << "\n";
  file.commit();
}

void write_compare(const std::string& path, const RunResult& dual, const RunResult& first,
                   const RunResult& zero, const Network& net, long stride) {
  const double s = base_of(net);
  const std::size_t rows =
      std::max({dual.trace.size(), first.trace.size(), zero.trace.size()});
  const long step = effective_stride(stride, rows);
  const auto at = [](const RunResult& r, std::size_t i) -> const TraceRecord& {
    return i < r.trace.size() ? r.trace[i] : r.trace.back();
  };
  AtomicFile file(path);
  auto& out = file.stream();
  out << "gridincent-compare v1\n";
  out << "# columns: iteration"
         " dual_total_incentive dual_min_voltage dual_p0_mw"
         " first_total_incentive first_min_voltage first_p0_mw"
         " zero_total_incentive zero_min_voltage zero_p0_mw\n";
  for (std::size_t i = 0; i < rows; ++i) {
    if (i % static_cast<std::size_t>(step) != 0 && i + 1 != rows) continue;
    out << i;
    for (const RunResult* r : {&dual, &first, &zero}) {
      const TraceRecord& rec = at(*r, i);
      out << " " << fmt(rec.total_incentive) << " " << fmt(rec.min_voltage) << " "
          << fmt(rec.p0 * s);
    }
    out << "\n";
  }
  file.commit();
}

}  // namespace gridincent::io

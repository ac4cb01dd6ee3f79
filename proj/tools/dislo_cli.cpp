// Command-line driver: 1D simulations, flow-rule sweeps, macroscopic
// solves, convergence studies and 2D level-set runs.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <cstdio>
#include <thread>
#include <string>
#include <vector>

#include "dislo/core.hpp"
#include "dislo/flowrule.hpp"
#include "dislo/macro1d.hpp"
#include "dislo/manifest.hpp"
#include "dislo/micro1d.hpp"
#include "dislo/micro2d.hpp"

namespace fs = std::filesystem;
using namespace dislo;

namespace {

enum Exit { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  return out;
}

void write_manifest(const CLI::App& app, const fs::path& dir,
                    const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  auto out = open_out(dir / "manifest.ini");
  out << "# dislo " << kVersion << "\n";
  for (const auto& [k, v] : extra) out << "# " << k << "=" << v << "\n";
  out << app.config_to_str(true, false);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// --- simulate1d ------------------------------------------------------------

struct Sim1DConfig {
  std::size_t n = 1;
  double tau = 0.0;
  double amplitude = 3.0;
  double cell = 10.0;
  double period = 1.0;
  double dt = 0.01;
  double total = 1000.0;
  double burn_in = -1.0;
  std::size_t stride = 1;
  double perturb = 0.0;
  bool no_pin = false;
  double mu_bar = 1.0, B = 1.0, b = 1.0;
};

MaterialParams material_of(double mu_bar, double b, double B) {
  return MaterialParams::make(2.0 * std::numbers::pi * mu_bar, 0.0, b, B);
}

int run_simulate1d(const Sim1DConfig& c, const fs::path& dir, const CLI::App& app) {
  if (c.n == 0) throw InvalidArgument("N must be at least 1");
  const auto mat = material_of(c.mu_bar, c.b, c.B);
  auto state = micro1d::MicroState1D::equally_spaced(
      c.n, c.cell, c.amplitude, c.period, c.tau, micro1d::MicroState1D::potential_minimum(c.period));
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < c.n; ++i)
    state.positions[i] += c.perturb * std::sin(2.0 * pi * static_cast<double>(i) / static_cast<double>(c.n));
  micro1d::SimulationOptions opt;
  opt.dt = c.dt;
  opt.total_time = c.total;
  opt.burn_in = c.burn_in;
  opt.record_stride = c.stride;
  opt.detect_pinning = !c.no_pin;
  const auto res = micro1d::simulate(state, mat, opt);
  const double rho0 = c.b * static_cast<double>(c.n) / c.cell;
  double hull = std::numeric_limits<double>::quiet_NaN();
  if (res.velocity > 0.0 && res.trajectory.samples() > 4)
    hull = micro1d::hull_residual(res.trajectory, rho0, res.velocity, c.b, opt.effective_burn_in());

  fs::create_directories(dir);
  {
    auto out = open_out(dir / "trajectory.csv");
    micro1d::write_trajectory_csv(out, res.trajectory);
  }
  std::ostringstream summary;
  summary << "N=" << c.n << " tau=" << fmt(c.tau) << " v=" << fmt(res.velocity)
          << " noise=" << fmt(res.velocity_noise) << " pinned=" << (res.pinned ? 1 : 0)
          << " f=" << fmt(rho0 * c.B / c.mu_bar * res.velocity) << " hull_residual=" << fmt(hull)
          << " steps=" << res.steps;
  std::cout << summary.str() << "\n";
  open_out(dir / "summary.txt") << summary.str() << "\n";
  write_manifest(app, dir);
  return kOk;
}

// --- sweep -----------------------------------------------------------------

struct SweepConfig {
  bool desk = false, full = false, case_a = false;
  std::size_t n_min = 1, n_max = 0;
  double tau_max = 9.0;
  std::size_t tau_points = 0;
  double total = 0.0;
  double amplitude = 3.0;
  double cell = 10.0;
  double period = 1.0;
  double dt = 0.01;
  std::string resume;
  double sentinel = 0.0;
  bool use_sentinel = false;
};

int run_sweep(SweepConfig c, unsigned workers, const fs::path& dir, const CLI::App& app) {
  if (c.desk && c.full) throw InvalidArgument("--desk and --full are exclusive");
  if (!c.full) c.desk = true;
  if (c.n_max == 0) c.n_max = c.full ? 200 : 50;
  if (c.tau_points == 0) c.tau_points = c.full ? 201 : 50;
  if (c.total == 0.0) c.total = c.full ? 1000.0 : 200.0;
  if (c.case_a) c.amplitude = 0.0;
  if (c.n_min == 0 || c.n_max < c.n_min) throw InvalidArgument("need 1 <= n-min <= n-max");
  if (c.tau_points < 2) throw InvalidArgument("need at least 2 tau points");

  std::vector<std::size_t> ns;
  for (std::size_t n = c.n_min; n <= c.n_max; ++n) ns.push_back(n);
  std::vector<double> taus;
  for (std::size_t k = 0; k < c.tau_points; ++k)
    taus.push_back(c.tau_max * static_cast<double>(k) / static_cast<double>(c.tau_points - 1));

  flowrule::SweepParams p;
  p.cell_length = c.cell;
  p.amplitude = c.amplitude;
  p.period = c.period;
  p.sim.dt = c.dt;
  p.sim.total_time = c.total;
  p.workers = workers;

  std::unique_ptr<flowrule::FlowRuleTable> resume;
  if (!c.resume.empty()) {
    if (!fs::exists(c.resume)) throw IoError("resume table '" + c.resume + "' not found");
    resume = std::make_unique<flowrule::FlowRuleTable>(flowrule::load_table(c.resume));
  }
  auto progress = [](std::size_t done, std::size_t total) {
    if (done % 50 == 0 || done == total) std::cerr << "sweep " << done << "/" << total << "\n";
  };
  auto table = flowrule::sweep(ns, taus, p, resume.get(), progress);

  fs::create_directories(dir);
  flowrule::save_table((dir / "table.csv").string(), table);
  const auto odd = flowrule::extend_odd(table);
  flowrule::save_table((dir / "table_odd.csv").string(), odd);
  {
    auto out = open_out(dir / "matrix.csv");
    flowrule::write_matrix_csv(out, odd, c.use_sentinel ? &c.sentinel : nullptr);
  }
  const auto rep = flowrule::audit(odd);
  std::cout << "cells=" << table.rows() * table.cols() << " failed=" << table.failed_count()
            << " monotone=" << rep.monotone << " odd=" << rep.odd
            << " zero_column=" << rep.zero_column << " noise_floor=" << fmt(table.metadata.noise_floor)
            << "\n";
  for (std::size_t n : {std::size_t{1}, std::size_t{10}, std::size_t{20}})
    if (n >= c.n_min && n <= c.n_max)
      std::cout << "threshold N=" << n << " tau_c="
                << fmt(flowrule::threshold(table, flowrule::density_of(n, p), table.metadata.f_tol))
                << "\n";
  write_manifest(app, dir);
  return table.failed_count() == 0 ? kOk : kNumerical;
}

// --- macro / converge ------------------------------------------------------

struct MacroConfig {
  std::string table;
  bool case_a = false;
  double tau_ext = 1.0;
  double t_final = 0.25;
  std::size_t nodes = 256;
  double length = 1.0;
  double density = 1.0;
  double wiggle = 0.0;
  std::vector<double> snapshots;
  double mu_bar = 1.0;
  double cfl = 0.5;
};

StrainField1D initial_strain(const MacroConfig& c) {
  const double pi = std::numbers::pi;
  const double rho = c.density, a = c.wiggle, len = c.length;
  auto fn = [=](double x) { return -rho * x - a * len / (2.0 * pi) * std::sin(2.0 * pi * x / len); };
  auto g = StrainField1D::sample(fn, c.nodes, 0.0, len, -rho * len);
  density_from_strain(g);
  return g;
}

std::shared_ptr<const macro1d::FlowRule> flow_of(const MacroConfig& c,
                                                 std::vector<std::pair<std::string, std::string>>& extra,
                                                 flowrule::TableMetadata* meta = nullptr) {
  if (c.case_a == !c.table.empty())
    throw InvalidArgument("give exactly one of --case-a or --table");
  if (c.case_a) return std::make_shared<macro1d::CaseAFlowRule>(c.mu_bar);
  if (!fs::exists(c.table)) throw IoError("flow-rule table '" + c.table + "' not found");
  auto t = flowrule::load_table(c.table);
  extra.emplace_back("table_sha256", sha256_file(c.table));
  if (meta != nullptr) *meta = t.metadata;
  return std::make_shared<macro1d::TableFlowRule>(t, c.table);
}

int run_macro(const MacroConfig& c, const fs::path& dir, const CLI::App& app) {
  std::vector<std::pair<std::string, std::string>> extra;
  macro1d::MacroProblem p;
  p.flow = flow_of(c, extra);
  p.gamma0 = initial_strain(c);
  p.tau_ext = c.tau_ext;
  p.t_final = c.t_final;
  p.snapshot_times = c.snapshots;
  p.mu_bar = c.mu_bar;
  p.cfl = c.cfl;
  const auto sol = macro1d::solve_macro(p);
  fs::create_directories(dir);
  for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%03zu.csv", k);
    auto out = open_out(dir / name);
    out << "# t=" << fmt(sol.snapshots[k].time) << "\n";
    macro1d::write_snapshot_csv(out, sol.snapshots[k].field, c.mu_bar);
  }
  std::cout << "steps=" << sol.steps << " theta_max=" << fmt(sol.theta_max)
            << " dt_max=" << fmt(sol.dt_max) << " clamps=" << sol.clamps << "\n";
  if (sol.clamps > 0) warn("flow-rule lookups left the table and were clamped");
  write_manifest(app, dir, extra);
  return kOk;
}

struct ConvergeConfig {
  MacroConfig macro;
  std::vector<double> eps{0.04, 0.02, 0.01};
  double amplitude = -1.0;  // micro obstacle amplitude; -1 takes it from the table
  double micro_dt = 0.01;
};

int run_converge(const ConvergeConfig& c, unsigned workers, const fs::path& dir,
                 const CLI::App& app) {
  std::vector<double> eps = c.eps;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  if (std::adjacent_find(eps.begin(), eps.end()) != eps.end())
    throw InvalidArgument("duplicate epsilon values");
  std::vector<std::pair<std::string, std::string>> extra;
  flowrule::TableMetadata meta;
  macro1d::ConvergenceSetup s;
  s.flow = flow_of(c.macro, extra, &meta);
  s.gamma0 = initial_strain(c.macro);
  s.tau_ext = c.macro.tau_ext;
  s.t_final = c.macro.t_final;
  s.compare_times = c.macro.snapshots;
  s.material = material_of(c.macro.mu_bar, 1.0, 1.0);
  s.amplitude = c.amplitude >= 0.0 ? c.amplitude : (c.macro.case_a ? 0.0 : meta.amplitude);
  s.period = c.macro.case_a ? 1.0 : meta.period;
  s.micro_dt = c.micro_dt;
  s.cfl = c.macro.cfl;
  s.workers = workers;
  const auto res = macro1d::convergence_experiment(s, eps);
  fs::create_directories(dir);
  auto out = open_out(dir / "converge.csv");
  out.precision(17);
  out << "epsilon,dislocations,error,micro_change,micro_velocity\n";
  for (const auto& r : res.rows) {
    out << r.epsilon << ',' << r.dislocations << ',' << r.error << ',' << r.micro_change << ','
        << r.micro_velocity << '\n';
    std::cout << "eps=" << fmt(r.epsilon) << " N=" << r.dislocations << " error=" << fmt(r.error)
              << " micro_change=" << fmt(r.micro_change) << "\n";
  }
  std::cout << "macro_change=" << fmt(res.macro_change) << "\n";
  extra.emplace_back("macro_change", fmt(res.macro_change));
  write_manifest(app, dir, extra);
  return kOk;
}

// --- simulate2d ------------------------------------------------------------

struct Sim2DConfig {
  std::size_t n = 128;
  double length = 64.0;
  double r_bar = 2.0;
  double nu = 0.0;
  double mu_bar = 1.0;
  double B = 1.0;
  double amplitude = 0.0;
  double period = 8.0;
  double tau_ext = 0.5;
  std::string initial = "circle";
  double radius = 16.0;
  std::size_t steps = 200;
  double dt = 0.0;
  double cfl = 0.5;
  std::size_t every = 50;
};

int run_simulate2d(const Sim2DConfig& c, const fs::path& dir, const CLI::App& app) {
  const double pi = std::numbers::pi;
  const auto grid = micro2d::Grid2D::make(c.n, c.n, c.length, c.length);
  const auto mat = MaterialParams::make(2.0 * pi * (1.0 - c.nu) * c.mu_bar, c.nu, 1.0, c.B);
  const auto kernel = micro2d::Kernel2D::build(mat, c.r_bar, grid);
  auto obstacles = c.amplitude == 0.0
                       ? micro2d::ObstacleField2D::constant(grid, c.tau_ext)
                       : micro2d::ObstacleField2D::product_of_sines(grid, c.amplitude, c.period, c.tau_ext);
  const double half = 0.5 * c.length;
  micro2d::LevelSetField2D field;
  if (c.initial == "circle") {
    // Scaled signed distance; only level 0 is crossed.
    const double scale = 0.9 / (std::sqrt(2.0) * half);
    field = micro2d::LevelSetField2D::sample(grid, [&](double x, double y) {
      return scale * (c.radius - std::hypot(x - half, y - half));
    });
  } else if (c.initial == "line") {
    field = micro2d::LevelSetField2D::sample(grid, [&](double x, double) {
      return 0.9 * std::cos(2.0 * pi * x / c.length);
    });
  } else if (c.initial == "loops") {
    field = micro2d::LevelSetField2D::sample(grid, [&](double x, double y) {
      return 2.5 * std::sin(2.0 * pi * x / c.length) * std::sin(2.0 * pi * y / c.length);
    });
  } else {
    throw InvalidArgument("unknown initial field '" + c.initial + "' (circle, line, loops)");
  }

  micro2d::Evolver2D ev(kernel, obstacles, c.B);
  fs::create_directories(dir);
  auto dump = [&](std::size_t step, double t) {
    char name[64];
    std::snprintf(name, sizeof name, "field_%05zu.csv", step);
    auto f = open_out(dir / name);
    micro2d::write_field_csv(f, grid, field.values, t);
    std::snprintf(name, sizeof name, "contours_%05zu.csv", step);
    auto k = open_out(dir / name);
    micro2d::write_contours_csv(k, micro2d::extract_contours(field, 0.0));
  };
  double t = 0.0;
  dump(0, t);
  for (std::size_t s = 1; s <= c.steps; ++s) {
    auto v = ev.velocity(field);
    const double dt = c.dt > 0.0 ? c.dt : c.cfl * micro2d::max_stable_dt(grid, v);
    if (!std::isfinite(dt)) throw InvalidArgument("velocity vanishes; set --dt explicitly");
    field = micro2d::levelset_step(field, v, dt, static_cast<long>(s));
    t += dt;
    if (c.every > 0 && (s % c.every == 0 || s == c.steps)) dump(s, t);
  }
  const auto contours = micro2d::extract_contours(field, 0.0);
  double area = 0.0;
  for (const auto& l : contours)
    if (l.closed) area += std::abs(micro2d::polygon_area(l));
  std::cout << "t=" << fmt(t) << " contours=" << contours.size()
            << " enclosed_area=" << fmt(area) << "\n";
  write_manifest(app, dir);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dislocation dynamics and homogenization toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);
  std::string out_dir = "out";
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("-j,--workers", workers, "Worker threads for sweeps and studies")
      ->check(CLI::Range(1u, 1024u));

  Sim1DConfig s1;
  auto* sim1 = app.add_subcommand("simulate1d", "Periodic chain of straight dislocations");
  sim1->add_option("-N,--count", s1.n, "Dislocations per cell")->capture_default_str();
  sim1->add_option("--tau", s1.tau, "Applied stress")->capture_default_str();
  sim1->add_option("--A", s1.amplitude, "Obstacle force amplitude")->capture_default_str();
  sim1->add_option("--l", s1.cell, "Cell length")->capture_default_str();
  sim1->add_option("--lambda", s1.period, "Obstacle period")->capture_default_str();
  sim1->add_option("--dt", s1.dt, "Time step")->capture_default_str();
  sim1->add_option("--T", s1.total, "Simulated time")->capture_default_str();
  sim1->add_option("--burn-in", s1.burn_in, "Transient cutoff (negative: T/2)")->capture_default_str();
  sim1->add_option("--stride", s1.stride, "Record every k-th step")->capture_default_str();
  sim1->add_option("--perturb", s1.perturb, "Amplitude of a sin(2 pi i / N) shift of the start")
      ->capture_default_str();
  sim1->add_flag("--no-pin-detect", s1.no_pin, "Always run to T");
  sim1->add_option("--mu-bar", s1.mu_bar)->capture_default_str();
  sim1->add_option("--B", s1.B)->capture_default_str();
  sim1->add_option("--b", s1.b)->capture_default_str();

  SweepConfig sw;
  auto* sweep = app.add_subcommand("sweep", "Flow-rule table over (density, stress)");
  sweep->add_flag("--desk", sw.desk, "N = 1..50, 50 stresses in [0, 9], T = 200 (default)");
  sweep->add_flag("--full", sw.full, "N = 1..200, stress step 9/200, T = 1000");
  sweep->add_flag("--case-a", sw.case_a, "No obstacles (A = 0)");
  sweep->add_option("--n-min", sw.n_min)->capture_default_str();
  sweep->add_option("--n-max", sw.n_max, "Largest N (0: preset)")->capture_default_str();
  sweep->add_option("--tau-max", sw.tau_max)->capture_default_str();
  sweep->add_option("--tau-points", sw.tau_points, "Stress nodes (0: preset)")->capture_default_str();
  sweep->add_option("--T", sw.total, "Simulated time per cell (0: preset)")->capture_default_str();
  sweep->add_option("--A", sw.amplitude)->capture_default_str();
  sweep->add_option("--l", sw.cell)->capture_default_str();
  sweep->add_option("--lambda", sw.period)->capture_default_str();
  sweep->add_option("--dt", sw.dt)->capture_default_str();
  sweep->add_option("--resume", sw.resume, "Reuse finished cells of an earlier table.csv");
  auto* sentinel = sweep->add_option("--sentinel", sw.sentinel,
                                     "Write f == 0 cells of matrix.csv as this value");

  MacroConfig mc;
  auto add_macro_options = [](CLI::App* sub, MacroConfig& m) {
    sub->add_option("--table", m.table, "Flow-rule table.csv");
    sub->add_flag("--case-a", m.case_a, "Use f = rho tau / mu_bar");
    sub->add_option("--tau-ext", m.tau_ext)->capture_default_str();
    sub->add_option("--T", m.t_final, "Final macroscopic time")->capture_default_str();
    sub->add_option("--nodes", m.nodes)->capture_default_str();
    sub->add_option("--L", m.length, "Macroscopic cell length")->capture_default_str();
    sub->add_option("--density", m.density, "Mean density")->capture_default_str();
    sub->add_option("--wiggle", m.wiggle, "Relative sine modulation of the density")
        ->capture_default_str();
    sub->add_option("--snapshots", m.snapshots, "Snapshot times");
    sub->add_option("--mu-bar", m.mu_bar)->capture_default_str();
    sub->add_option("--cfl", m.cfl)->capture_default_str();
  };
  auto* macro = app.add_subcommand("macro", "Macroscopic nonlocal Hamilton-Jacobi solve");
  add_macro_options(macro, mc);

  ConvergeConfig cc;
  cc.macro.wiggle = 0.3;
  auto* conv = app.add_subcommand("converge", "Rescaled micro strain vs macro solution");
  add_macro_options(conv, cc.macro);
  conv->add_option("--eps", cc.eps, "Scale ratios")->capture_default_str();
  conv->add_option("--A", cc.amplitude, "Micro obstacle amplitude (default: table's)");
  conv->add_option("--micro-dt", cc.micro_dt)->capture_default_str();

  Sim2DConfig s2;
  auto* sim2 = app.add_subcommand("simulate2d", "Curved dislocations as level sets");
  sim2->add_option("--n", s2.n, "Grid nodes per direction")->capture_default_str();
  sim2->add_option("--L", s2.length, "Cell length")->capture_default_str();
  sim2->add_option("--R-bar", s2.r_bar, "Kernel cutoff in units of b")->capture_default_str();
  sim2->add_option("--nu", s2.nu)->capture_default_str();
  sim2->add_option("--mu-bar", s2.mu_bar)->capture_default_str();
  sim2->add_option("--B", s2.B)->capture_default_str();
  sim2->add_option("--A", s2.amplitude, "Obstacle amplitude")->capture_default_str();
  sim2->add_option("--lambda", s2.period, "Obstacle period")->capture_default_str();
  sim2->add_option("--tau-ext", s2.tau_ext)->capture_default_str();
  sim2->add_option("--initial", s2.initial, "circle, line or loops")->capture_default_str();
  sim2->add_option("--radius", s2.radius)->capture_default_str();
  sim2->add_option("--steps", s2.steps)->capture_default_str();
  sim2->add_option("--dt", s2.dt, "Fixed step (0: cfl times the stable step)")->capture_default_str();
  sim2->add_option("--cfl", s2.cfl)->capture_default_str();
  sim2->add_option("--every", s2.every, "Snapshot interval in steps")->capture_default_str();

  for (auto* sub : {sim1, sweep, macro, conv, sim2}) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const fs::path dir(out_dir);
  try {
    if (*sim1) return run_simulate1d(s1, dir, app);
    if (*sweep) {
      sw.use_sentinel = sentinel->count() > 0;
      return run_sweep(sw, workers, dir, app);
    }
    if (*macro) return run_macro(mc, dir, app);
    if (*conv) return run_converge(cc, workers, dir, app);
    if (*sim2) return run_simulate2d(s2, dir, app);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort at step " << e.step() << ": " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

#include "dislo/macro1d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>
#include <atomic>
#include <exception>
#include <limits>
#include <thread>

#include "dislo/micro1d.hpp"

namespace dislo::macro1d {

namespace {

void require_spectral_grid(const StrainField1D& field) {
  if (!field.periodic) throw InvalidArgument("self-consistent stress needs a periodic field");
  if (field.size() < 4 || field.size() % 2 != 0)
    throw InvalidArgument("self-consistent stress needs an even node count >= 4");
  if (!(field.length() > 0.0)) throw InvalidArgument("degenerate strain domain");
}

std::pair<double, double> range_of(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

}  // namespace

Lipschitz CaseAFlowRule::lipschitz(double rho_lo, double rho_hi, double tau_lo,
                                   double tau_hi) const {
  return {std::max(std::abs(tau_lo), std::abs(tau_hi)) / mu_bar_,
          std::max(std::abs(rho_lo), std::abs(rho_hi)) / mu_bar_};
}

TableFlowRule::TableFlowRule(const flowrule::FlowRuleTable& table, std::string source)
    : source_(std::move(source)) {
  if (table.failed_count() != 0) throw InvalidArgument("flow-rule table has failed cells");
  auto odd = flowrule::extend_odd(table);
  if (odd.rho_axis().front() > 0.0) {
    std::vector<double> rho{0.0};
    rho.insert(rho.end(), odd.rho_axis().begin(), odd.rho_axis().end());
    flowrule::FlowRuleTable anchored(rho, odd.tau_axis());
    anchored.metadata = odd.metadata;
    for (std::size_t r = 0; r < odd.rows(); ++r)
      for (std::size_t c = 0; c < odd.cols(); ++c) anchored.at(r + 1, c) = odd.at(r, c);
    table_ = std::move(anchored);
  } else {
    table_ = std::move(odd);
  }
}

double TableFlowRule::eval(double rho, double tau) const {
  return flowrule::interp(table_, rho, tau, &clamps_);
}

Lipschitz TableFlowRule::lipschitz(double rho_lo, double rho_hi, double tau_lo,
                                   double tau_hi) const {
  const auto& ra = table_.rho_axis();
  const auto& ta = table_.tau_axis();
  Lipschitz out;
  // Bilinear slopes inside a cell are bounded by the slopes along its edges.
  for (std::size_t r = 0; r < table_.rows(); ++r) {
    const double r0 = ra[r];
    const double r1 = r + 1 < ra.size() ? ra[r + 1] : r0;
    if (r1 < rho_lo || r0 > rho_hi) continue;
    for (std::size_t c = 0; c < table_.cols(); ++c) {
      const double t0 = ta[c];
      const double t1 = c + 1 < ta.size() ? ta[c + 1] : t0;
      if (t1 < tau_lo || t0 > tau_hi) continue;
      if (c + 1 < ta.size())
        out.tau = std::max(out.tau, std::abs(table_.at(r, c + 1) - table_.at(r, c)) / (t1 - t0));
      if (r + 1 < ra.size())
        out.rho = std::max(out.rho, std::abs(table_.at(r + 1, c) - table_.at(r, c)) / (r1 - r0));
    }
  }
  return out;
}

SelfStress1D::SelfStress1D(std::size_t nodes, double length, double mu_bar)
    : fft_(nodes), symbol_(nodes / 2 + 1), periodic_(nodes) {
  const double pi = std::numbers::pi;
  for (std::size_t m = 0; m < symbol_.size(); ++m)
    symbol_[m] = -mu_bar * pi * (2.0 * pi * static_cast<double>(m) / length);
  const double h = length / static_cast<double>(nodes);
  diagonal_ = pi * pi / (2.0 * h);
}

void SelfStress1D::compute(const StrainField1D& field, std::span<double> out) {
  require_spectral_grid(field);
  if (field.size() != fft_.size()) throw InvalidArgument("SelfStress1D grid size mismatch");
  const double n = static_cast<double>(field.size());
  for (std::size_t i = 0; i < field.size(); ++i)
    periodic_[i] = field.values[i] - field.cell_offset * static_cast<double>(i) / n;
  fft_.apply_symbol(periodic_, symbol_, out);
}

std::vector<double> tau_sc_1d(const StrainField1D& field, double mu_bar) {
  require_spectral_grid(field);
  SelfStress1D op(field.size(), field.length(), mu_bar);
  std::vector<double> out(field.size());
  op.compute(field, out);
  return out;
}

StepLimits step_limits(const FlowRule& flow, std::span<const double> rho,
                       std::span<const double> tau, double h, double mu_bar, double cfl) {
  const auto [rlo, rhi] = range_of(rho);
  const auto [tlo, thi] = range_of(tau);
  StepLimits lim;
  lim.slopes = flow.lipschitz(rlo, rhi, tlo, thi);
  lim.theta = lim.slopes.rho;
  const double pi = std::numbers::pi;
  const double rate = lim.theta + lim.slopes.tau * mu_bar * pi * pi / 2.0;
  lim.dt_max = rate > 0.0 ? cfl * h / rate : std::numeric_limits<double>::infinity();
  return lim;
}

void lax_friedrichs_update(const StrainField1D& gamma, std::span<const double> tau_sc,
                           const FlowRule& flow, double tau_ext, double dt, double theta,
                           StrainField1D& out) {
  const std::size_t n = gamma.size();
  const double h = gamma.spacing();
  out.x_min = gamma.x_min;
  out.x_max = gamma.x_max;
  out.periodic = gamma.periodic;
  out.cell_offset = gamma.cell_offset;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto li = static_cast<long>(i);
    const double left = gamma.at(li - 1);
    const double mid = gamma.values[i];
    const double right = gamma.at(li + 1);
    const double rho = -(right - left) / (2.0 * h);
    const double rate = flow.eval(rho, tau_ext + tau_sc[i]) +
                        theta * (right - 2.0 * mid + left) / (2.0 * h);
    out.values[i] = mid + dt * rate;
  }
}

StrainField1D hj_step(const StrainField1D& gamma, const FlowRule& flow, double tau_ext,
                      double mu_bar, double dt, double theta) {
  if (!(dt >= 0.0)) throw InvalidArgument("time step must be nonnegative");
  if (dt == 0.0) return gamma;
  auto tau = tau_sc_1d(gamma, mu_bar);
  for (double& t : tau) t += tau_ext;
  const auto rho = density_samples(gamma);
  const auto lim = step_limits(flow, rho, tau, gamma.spacing(), mu_bar);
  if (theta < lim.slopes.rho) {
    std::ostringstream os;
    os << "viscosity " << theta << " does not dominate |df/drho| <= " << lim.slopes.rho;
    throw NumericalAbort(os.str(), 0);
  }
  const double pi = std::numbers::pi;
  const double rate = theta + lim.slopes.tau * mu_bar * pi * pi / 2.0;
  if (rate > 0.0 && dt * rate > gamma.spacing() * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time step " << dt << " exceeds the monotone bound " << gamma.spacing() / rate;
    throw NumericalAbort(os.str(), 0);
  }
  for (double& t : tau) t -= tau_ext;
  StrainField1D out;
  lax_friedrichs_update(gamma, tau, flow, tau_ext, dt, theta, out);
  return out;
}

StrainField1D hj_step(const StrainField1D& gamma, const FlowRule& flow, double tau_ext,
                      double mu_bar, double dt) {
  auto tau = tau_sc_1d(gamma, mu_bar);
  for (double& t : tau) t += tau_ext;
  const auto lim = step_limits(flow, density_samples(gamma), tau, gamma.spacing(), mu_bar);
  return hj_step(gamma, flow, tau_ext, mu_bar, dt, lim.theta);
}

MacroSolution solve_macro(const MacroProblem& problem) {
  if (!problem.flow) throw InvalidArgument("macro problem has no flow rule");
  if (!(problem.t_final > 0.0)) throw InvalidArgument("final time must be positive");
  const StrainField1D& g0 = problem.gamma0;
  require_spectral_grid(g0);
  density_from_strain(g0);

  std::vector<double> times = problem.snapshot_times;
  times.push_back(problem.t_final);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.front() <= 0.0 || times.back() > problem.t_final)
    throw InvalidArgument("snapshot times must lie in (0, t_final]");

  MacroSolution sol;
  sol.snapshots.push_back({0.0, g0});
  SelfStress1D stress(g0.size(), g0.length(), problem.mu_bar);
  const double h = g0.spacing();
  StrainField1D cur = g0, next;
  std::vector<double> tau(g0.size()), total(g0.size());
  sol.dt_min = std::numeric_limits<double>::infinity();

  double t = 0.0;
  std::size_t target = 0;
  while (target < times.size()) {
    if (sol.steps >= problem.max_steps)
      throw NumericalAbort("macro solve exceeded the step budget", sol.steps);
    stress.compute(cur, tau);
    for (std::size_t i = 0; i < tau.size(); ++i) total[i] = problem.tau_ext + tau[i];
    const auto rho = density_samples(cur);
    const auto lim = step_limits(*problem.flow, rho, total, h, problem.mu_bar, problem.cfl);
    double dt = std::min(lim.dt_max, times[target] - t);
    const bool hits = dt >= times[target] - t;
    if (!(dt > 0.0) || !std::isfinite(dt)) throw NumericalAbort("invalid macro time step", sol.steps);
    lax_friedrichs_update(cur, tau, *problem.flow, problem.tau_ext, dt, lim.theta, next);
    for (double v : next.values)
      if (!std::isfinite(v)) throw NumericalAbort("macro solution became non-finite", sol.steps);
    std::swap(cur, next);
    t = hits ? times[target] : t + dt;
    ++sol.steps;
    sol.theta_max = std::max(sol.theta_max, lim.theta);
    sol.dt_max = std::max(sol.dt_max, dt);
    if (!hits) sol.dt_min = std::min(sol.dt_min, dt);
    if (hits) sol.snapshots.push_back({times[target++], cur});
  }
  if (!std::isfinite(sol.dt_min)) sol.dt_min = sol.dt_max;
  sol.clamps = problem.flow->clamp_count();
  return sol;
}

void write_snapshot_csv(std::ostream& out, const StrainField1D& field, double mu_bar) {
  const auto rho = density_samples(field);
  const auto tau = tau_sc_1d(field, mu_bar);
  out.precision(17);
  out << "x,gamma,rho,tau_sc\n";
  for (std::size_t i = 0; i < field.size(); ++i)
    out << field.node(i) << ',' << field.values[i] << ',' << rho[i] << ',' << tau[i] << '\n';
}

std::vector<double> positions_from_strain(const StrainField1D& gamma0, double epsilon, double b,
                                          Orientation orientation) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(b > 0.0)) throw InvalidArgument("b must be positive");
  if (!gamma0.periodic) throw InvalidArgument("positions_from_strain needs a periodic field");
  const std::size_t n = gamma0.size();
  const double sign = orientation == Orientation::kDecreasing ? 1.0 : -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto li = static_cast<long>(i);
    if (sign * (gamma0.at(li + 1) - gamma0.at(li)) > 0.0)
      throw InvalidArgument("initial strain is not monotone in the selected orientation");
  }
  const double per_cell = -sign * gamma0.cell_offset / epsilon;
  if (std::abs(per_cell - std::round(per_cell)) > 1e-9 * std::max(1.0, per_cell))
    throw InvalidArgument("cell must carry an integer number of dislocations (offset / eps)");

  const double h = gamma0.spacing();
  const double to_micro = b / epsilon;
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto li = static_cast<long>(i);
    const double g0 = gamma0.at(li);
    const double g1 = gamma0.at(li + 1);
    if (g0 == g1) continue;
    // Levels k eps crossed on [x_i, x_i+1): decreasing drops below k eps,
    // increasing reaches k eps.
    double k_lo, k_hi;
    if (orientation == Orientation::kDecreasing) {
      k_lo = std::floor(g1 / epsilon) + 1.0;  // k eps > g1
      k_hi = std::floor(g0 / epsilon);        // k eps <= g0
    } else {
      k_lo = std::floor(g0 / epsilon) + 1.0;  // k eps > g0
      k_hi = std::floor(g1 / epsilon);        // k eps <= g1
    }
    for (double k = k_lo; k <= k_hi; k += 1.0) {
      const double s = (k * epsilon - g0) / (g1 - g0);
      out.push_back((gamma0.node(i) + s * h) * to_micro);
    }
  }
  std::sort(out.begin(), out.end());
  if (out.size() != static_cast<std::size_t>(std::llround(per_cell)))
    throw InvalidArgument("quantization produced an inconsistent dislocation count");
  return out;
}

namespace {

// Rescaled strain eps (C - sum_i ceil((x - x_i) / l)) at macroscopic nodes.
std::vector<double> rescaled_strain(std::span<const double> x_micro, const StrainField1D& grid,
                                    double epsilon, double b, double cell_length, double constant) {
  std::vector<double> out(grid.size());
  const double to_micro = b / epsilon;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.node(k) * to_micro;
    double count = 0.0;
    for (double xi : x_micro) count += std::ceil((x - xi) / cell_length);
    out[k] = epsilon * (constant - count);
  }
  return out;
}

}  // namespace

ConvergenceResult convergence_experiment(const ConvergenceSetup& setup,
                                         std::span<const double> eps_list) {
  if (eps_list.empty()) throw InvalidArgument("empty epsilon list");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw InvalidArgument("epsilon list must be strictly decreasing");

  ConvergenceResult result;
  MacroProblem mp;
  mp.gamma0 = setup.gamma0;
  mp.tau_ext = setup.tau_ext;
  mp.flow = setup.flow;
  mp.t_final = setup.t_final;
  mp.snapshot_times = setup.compare_times;
  mp.mu_bar = setup.material.mu_bar;
  mp.cfl = setup.cfl;
  result.macro = solve_macro(mp);
  const auto& snaps = result.macro.snapshots;
  {
    double change = 0.0;
    const auto& a = snaps.front().field.values;
    const auto& z = snaps.back().field.values;
    for (std::size_t k = 0; k < a.size(); ++k) change = std::max(change, std::abs(z[k] - a[k]));
    result.macro_change = change;
  }

  result.rows.resize(eps_list.size());
  const auto& mat = setup.material;
  auto run_one = [&](std::size_t e) {
    const double eps = eps_list[e];
    const auto x0 = positions_from_strain(setup.gamma0, eps, mat.b);
    const double to_micro = mat.b / eps;
    const double cell = setup.gamma0.length() * to_micro;

    micro1d::MicroState1D state;
    state.positions = x0;
    state.cell_length = cell;
    state.amplitude = setup.amplitude;
    state.period = setup.period;
    state.tau_ext = setup.tau_ext;

    const double time_scale = mat.B * to_micro / mat.mu_bar;  // B Lambda / mu_bar
    micro1d::SimulationOptions opt;
    opt.dt = setup.micro_dt;
    opt.total_time = setup.t_final * time_scale;
    opt.burn_in = 0.0;
    opt.record_stride = 1;
    opt.detect_pinning = false;
    const auto run = micro1d::simulate(state, mat, opt);
    const auto& traj = run.trajectory;

    // Fix the additive constant so the t = 0 strain is eps floor(gamma0 / eps).
    const double q0 = eps * std::floor(setup.gamma0.values[0] / eps);
    const double x_ref = setup.gamma0.node(0) * to_micro;
    double count0 = 0.0;
    for (double xi : x0) count0 += std::ceil((x_ref - xi) / cell);
    const double constant = q0 / eps + count0;

    ConvergenceRow row;
    row.epsilon = eps;
    row.dislocations = x0.size();
    std::vector<double> first;
    for (const auto& snap : snaps) {
      const auto step = static_cast<std::size_t>(std::llround(snap.time * time_scale / opt.dt));
      const std::size_t s = std::min(step, traj.samples() - 1);
      std::span<const double> xs(traj.positions.data() + s * traj.count, traj.count);
      const auto micro = rescaled_strain(xs, setup.gamma0, eps, mat.b, cell, constant);
      if (first.empty()) first = micro;
      for (std::size_t k = 0; k < micro.size(); ++k) {
        row.error = std::max(row.error, std::abs(micro[k] - snap.field.values[k]));
        row.micro_change = std::max(row.micro_change, std::abs(micro[k] - first[k]));
      }
    }
    // Mean velocity over the last unit of micro time.
    const std::size_t last = traj.samples() - 1;
    const std::size_t back =
        std::min(last, static_cast<std::size_t>(std::llround(1.0 / opt.dt)));
    double moved = 0.0;
    for (std::size_t i = 0; i < traj.count; ++i)
      moved += traj.at(last, i) - traj.at(last - back, i);
    const double span = traj.times[last] - traj.times[last - back];
    row.micro_velocity = span > 0.0 ? moved / (static_cast<double>(traj.count) * span) : 0.0;
    result.rows[e] = row;
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(setup.workers, eps_list.size()));
  if (workers == 1) {
    for (std::size_t e = 0; e < eps_list.size(); ++e) run_one(e);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(eps_list.size());
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t e; (e = next.fetch_add(1)) < eps_list.size();) {
            try {
              run_one(e);
            } catch (...) {
              errors[e] = std::current_exception();
            }
          }
        });
    }
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  return result;
}

}  // namespace dislo::macro1d

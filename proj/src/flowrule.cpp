#include "dislo/flowrule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace dislo::flowrule {

double f_case_a(double rho0, double tau, double mu_bar) { return rho0 * tau / mu_bar; }

double density_of(std::size_t n, const SweepParams& params) {
  return params.material.b * static_cast<double>(n) / params.cell_length;
}

CellMeasurement f_measure_cell(std::size_t n, double tau, const SweepParams& params) {
  if (n == 0) throw InvalidArgument("f_measure needs at least one dislocation");
  if (tau < 0.0) {
    auto m = f_measure_cell(n, -tau, params);
    m.f = -m.f;
    return m;
  }
  auto state = micro1d::MicroState1D::equally_spaced(
      n, params.cell_length, params.amplitude, params.period, tau,
      micro1d::MicroState1D::potential_minimum(params.period));
  micro1d::SimulationOptions opts = params.sim;
  opts.record_stride = 0;
  micro1d::SimulationResult run;
  try {
    run = micro1d::simulate(state, params.material, opts);
  } catch (const NumericalAbort& e) {
    std::ostringstream os;
    os << "cell N=" << n << " tau=" << tau << ": " << e.what();
    throw NumericalAbort(os.str(), e.step());
  }
  const double scale = density_of(n, params) * params.material.B / params.material.mu_bar;
  return {scale * run.velocity, scale * run.velocity_noise, run.pinned};
}

double f_measure(std::size_t n, double tau, const SweepParams& params) {
  return f_measure_cell(n, tau, params).f;
}

FlowRuleTable::FlowRuleTable(std::vector<double> rho_axis, std::vector<double> tau_axis)
    : rho_(std::move(rho_axis)), tau_(std::move(tau_axis)) {
  if (rho_.empty() || tau_.empty()) throw InvalidArgument("flow-rule axes must be nonempty");
  if (!std::is_sorted(rho_.begin(), rho_.end()) ||
      std::adjacent_find(rho_.begin(), rho_.end()) != rho_.end())
    throw InvalidArgument("rho axis must be strictly ascending");
  if (!std::is_sorted(tau_.begin(), tau_.end()) ||
      std::adjacent_find(tau_.begin(), tau_.end()) != tau_.end())
    throw InvalidArgument("tau axis must be strictly ascending");
  f_.assign(rho_.size() * tau_.size(), 0.0);
  noise_.assign(f_.size(), 0.0);
  failed_.assign(f_.size(), 0);
}

std::size_t FlowRuleTable::failed_count() const {
  return static_cast<std::size_t>(std::count(failed_.begin(), failed_.end(), 1));
}

std::size_t FlowRuleTable::row_of(double rho0) const {
  for (std::size_t r = 0; r < rho_.size(); ++r)
    if (std::abs(rho_[r] - rho0) <= 1e-12 * std::max(1.0, std::abs(rho0))) return r;
  std::ostringstream os;
  os << "density " << rho0 << " is not on the table's rho axis";
  throw InvalidArgument(os.str());
}

FlowRuleTable sweep(std::span<const std::size_t> n_list, std::span<const double> tau_list,
                    const SweepParams& params, const FlowRuleTable* resume,
                    const ProgressFn& progress) {
  if (n_list.empty() || tau_list.empty()) throw InvalidArgument("sweep axes must be nonempty");
  if (tau_list.front() < 0.0)
    throw InvalidArgument("sweep tau axis must be nonnegative; use extend_odd for tau < 0");
  std::vector<double> rho;
  for (auto n : n_list) {
    if (n == 0) throw InvalidArgument("N must be at least 1");
    rho.push_back(density_of(n, params));
  }
  FlowRuleTable table(rho, {tau_list.begin(), tau_list.end()});

  auto& md = table.metadata;
  md.dt = params.sim.dt;
  md.total_time = params.sim.total_time;
  md.burn_in = params.sim.effective_burn_in();
  md.amplitude = params.amplitude;
  md.period = params.period;
  md.cell_length = params.cell_length;
  md.mu_bar = params.material.mu_bar;
  md.B = params.material.B;
  md.b = params.material.b;
  md.n_list.assign(n_list.begin(), n_list.end());

  const std::size_t rows = table.rows(), cols = table.cols();
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (table.tau_axis()[c] == 0.0) {
        table.at(r, c) = 0.0;
        continue;
      }
      if (resume != nullptr) {
        const auto& ra = resume->rho_axis();
        const auto& ta = resume->tau_axis();
        auto rr = std::find(ra.begin(), ra.end(), rho[r]);
        auto cc = std::find(ta.begin(), ta.end(), table.tau_axis()[c]);
        if (rr != ra.end() && cc != ta.end()) {
          const auto ri = static_cast<std::size_t>(rr - ra.begin());
          const auto ci = static_cast<std::size_t>(cc - ta.begin());
          if (!resume->failed(ri, ci) && std::isfinite(resume->at(ri, ci))) {
            table.at(r, c) = resume->at(ri, ci);
            table.set_noise(r, c, resume->noise(ri, ci));
            continue;
          }
        }
      }
      jobs.emplace_back(r, c);
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const auto [r, c] = jobs[k];
      // Each job writes only its own cell.
      try {
        const auto m = f_measure_cell(n_list[r], table.tau_axis()[c], params);
        table.at(r, c) = m.f;
        table.set_noise(r, c, m.noise);
      } catch (const std::exception& e) {
        table.at(r, c) = std::numeric_limits<double>::quiet_NaN();
        table.set_failed(r, c, true);
        warn(e.what());
      }
      const auto d = done.fetch_add(1) + 1;
      if (progress) progress(d, jobs.size());
    }
  };
  const unsigned workers = std::max(1u, params.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  double floor = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) floor = std::max(floor, table.noise(r, c));
  md.noise_floor = floor;
  return table;
}

FlowRuleTable extend_odd(const FlowRuleTable& table) {
  const auto& tau = table.tau_axis();
  if (tau.front() < 0.0) return table;
  std::vector<double> mirrored;
  for (auto it = tau.rbegin(); it != tau.rend(); ++it)
    if (*it > 0.0) mirrored.push_back(-*it);
  const std::size_t neg = mirrored.size();
  mirrored.insert(mirrored.end(), tau.begin(), tau.end());

  FlowRuleTable out(table.rho_axis(), mirrored);
  out.metadata = table.metadata;
  const std::size_t cols = table.cols();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t dst = neg + c;
      out.at(r, dst) = table.at(r, c);
      out.set_noise(r, dst, table.noise(r, c));
      out.set_failed(r, dst, table.failed(r, c));
      if (tau[c] > 0.0) {
        // tau[c] sits at position (neg - 1 - k) where k counts positives before it.
        const std::size_t k = c - (cols - neg);
        const std::size_t mirror = neg - 1 - k;
        out.at(r, mirror) = -table.at(r, c);
        out.set_noise(r, mirror, table.noise(r, c));
        out.set_failed(r, mirror, table.failed(r, c));
      }
    }
  }
  return out;
}

double threshold(const FlowRuleTable& table, double rho0, double f_tol) {
  const std::size_t r = table.row_of(rho0);
  const auto& tau = table.tau_axis();
  std::size_t prev = tau.size();
  bool first_positive = true;
  for (std::size_t c = 0; c < tau.size(); ++c) {
    if (tau[c] < 0.0) continue;
    if (table.failed(r, c)) throw InvalidArgument("threshold row contains failed cells");
    const double f = table.at(r, c);
    if (tau[c] > 0.0 && f > f_tol) {
      if (first_positive || prev == tau.size()) return 0.0;
      const double f0 = table.at(r, prev);
      return tau[prev] + (f_tol - f0) / (f - f0) * (tau[c] - tau[prev]);
    }
    if (tau[c] > 0.0) first_positive = false;
    prev = c;
  }
  return prev == tau.size() ? 0.0 : tau[prev];
}

namespace {

// Interval index and weight for a clamped coordinate on a sorted axis.
std::pair<std::size_t, double> locate(const std::vector<double>& axis, double& x, bool& clamped) {
  if (axis.size() == 1) {
    clamped = clamped || x != axis.front();
    return {0, 0.0};
  }
  if (x < axis.front()) {
    x = axis.front();
    clamped = true;
  } else if (x > axis.back()) {
    x = axis.back();
    clamped = true;
  }
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  auto hi = static_cast<std::size_t>(it - axis.begin());
  hi = std::clamp<std::size_t>(hi, 1, axis.size() - 1);
  const std::size_t lo = hi - 1;
  return {lo, (x - axis[lo]) / (axis[hi] - axis[lo])};
}

}  // namespace

double interp(const FlowRuleTable& table, double rho0, double tau, std::atomic<long>* clamp_count) {
  bool clamped = false;
  const auto [r, wr] = locate(table.rho_axis(), rho0, clamped);
  const auto [c, wc] = locate(table.tau_axis(), tau, clamped);
  if (clamped && clamp_count != nullptr) clamp_count->fetch_add(1, std::memory_order_relaxed);
  const std::size_t r1 = table.rows() > 1 ? r + 1 : r;
  const std::size_t c1 = table.cols() > 1 ? c + 1 : c;
  // Exact on nodes: zero weights never touch the neighbour.
  double lo = table.at(r, c);
  if (wc != 0.0) lo += wc * (table.at(r, c1) - table.at(r, c));
  if (wr == 0.0) return lo;
  double hi = table.at(r1, c);
  if (wc != 0.0) hi += wc * (table.at(r1, c1) - table.at(r1, c));
  return lo + wr * (hi - lo);
}

AuditReport audit(const FlowRuleTable& table, double tol) {
  AuditReport rep;
  const auto& tau = table.tau_axis();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c + 1 < table.cols(); ++c) {
      if (table.failed(r, c) || table.failed(r, c + 1)) continue;
      const double drop = table.at(r, c) - table.at(r, c + 1);
      const double allowed = tol + table.noise(r, c) + table.noise(r, c + 1);
      if (drop > allowed) {
        rep.monotone = false;
        ++rep.violations;
        rep.worst_decrease = std::max(rep.worst_decrease, drop);
      }
    }
    for (std::size_t c = 0; c < table.cols(); ++c) {
      if (tau[c] == 0.0 && table.at(r, c) != 0.0) rep.zero_column = false;
      if (tau[c] <= 0.0) continue;
      auto it = std::find(tau.begin(), tau.end(), -tau[c]);
      if (it == tau.end()) continue;
      const auto m = static_cast<std::size_t>(it - tau.begin());
      if (table.failed(r, c)) continue;
      if (table.at(r, m) != -table.at(r, c)) rep.odd = false;
    }
  }
  return rep;
}

}  // namespace dislo::flowrule

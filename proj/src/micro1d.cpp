#include "dislo/micro1d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dislo::micro1d {
namespace {

constexpr double kMinGapFraction = 1e-12;

// Index of the first ordering violation, or -1.
long ordering_violation(std::span<const double> x, double cell_length) {
  const double min_gap = kMinGapFraction * cell_length;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(x[i + 1] - x[i] > min_gap)) return static_cast<long>(i);
  if (n > 0 && !(x[0] + cell_length - x[n - 1] > min_gap)) return static_cast<long>(n - 1);
  return -1;
}

[[noreturn]] void abort_ordering(long step, long pair, double time) {
  std::ostringstream os;
  os << "dislocations " << pair << " and " << pair + 1
     << " crossed or collided at step " << step << " (t = " << time
     << "); reduce the time step";
  throw NumericalAbort(os.str(), step);
}

}  // namespace

double obstacle_force(double x, double amplitude, double period) {
  return -amplitude * std::cos(2.0 * std::numbers::pi * x / period);
}

double pair_force_periodized(double dx, double cell_length, double mu_bar, double b) {
  const double r = std::remainder(dx, cell_length);
  if (std::abs(r) < kMinGapFraction * cell_length)
    throw InvalidArgument("coincident dislocations: separation is a multiple of the cell length");
  const double pi = std::numbers::pi;
  return (mu_bar * b * pi / cell_length) / std::tan(pi * r / cell_length);
}

MicroState1D MicroState1D::equally_spaced(std::size_t n, double cell_length, double amplitude,
                                          double period, double tau_ext, double offset) {
  MicroState1D s;
  s.cell_length = cell_length;
  s.amplitude = amplitude;
  s.period = period;
  s.tau_ext = tau_ext;
  s.positions.resize(n);
  const double spacing = cell_length / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) s.positions[i] = offset + spacing * static_cast<double>(i);
  s.validate();
  return s;
}

void MicroState1D::validate() const {
  if (!(cell_length > 0.0)) throw InvalidArgument("cell length must be positive");
  if (!(period > 0.0)) throw InvalidArgument("obstacle period must be positive");
  const double ratio = cell_length / period;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw InvalidArgument("cell length must be an integer multiple of the obstacle period");
  for (double x : positions)
    if (!std::isfinite(x)) throw InvalidArgument("non-finite dislocation position");
  if (ordering_violation(positions, cell_length) >= 0)
    throw InvalidArgument("dislocations must be strictly ordered within one cell");
}

std::vector<double> MicroState1D::wrapped() const {
  std::vector<double> out(positions.size());
  std::transform(positions.begin(), positions.end(), out.begin(), [this](double x) {
    double r = std::fmod(x, cell_length);
    return r < 0.0 ? r + cell_length : r;
  });
  return out;
}

ForceEvaluator::ForceEvaluator(const MicroState1D& state, const MaterialParams& params)
    : cell_length_(state.cell_length),
      amplitude_(state.amplitude),
      period_(state.period),
      tau_ext_(state.tau_ext),
      pair_scale_(params.mu_bar * params.b * std::numbers::pi / state.cell_length),
      cos_(state.count()),
      sin_(state.count()) {}

void ForceEvaluator::evaluate(std::span<const double> x, std::span<double> forces) {
  const std::size_t n = x.size();
  const double two_pi = 2.0 * std::numbers::pi;
  const double wave = two_pi / period_;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = two_pi * std::fmod(x[i], cell_length_) / cell_length_;
    cos_[i] = std::cos(phase);
    sin_[i] = std::sin(phase);
    forces[i] = tau_ext_;
    if (amplitude_ != 0.0) forces[i] -= amplitude_ * std::cos(wave * std::fmod(x[i], period_));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double ci = cos_[i];
    const double si = sin_[i];
    double acc = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double wx = ci - cos_[j];
      const double wy = si - sin_[j];
      const double f = pair_scale_ * 2.0 * (si * cos_[j] - ci * sin_[j]) / (wx * wx + wy * wy);
      acc += f;
      forces[j] -= f;
    }
    forces[i] += acc;
  }
}

std::vector<double> total_forces(const MicroState1D& state, const MaterialParams& params) {
  if (ordering_violation(state.positions, state.cell_length) >= 0)
    throw InvalidArgument("coincident or unordered dislocations");
  std::vector<double> forces(state.count());
  ForceEvaluator(state, params).evaluate(state.positions, forces);
  return forces;
}

MicroState1D step_euler(const MicroState1D& state, const MaterialParams& params, double dt,
                        long step_index) {
  if (!(dt >= 0.0)) throw InvalidArgument("time step must be nonnegative");
  MicroState1D next = state;
  if (dt == 0.0) return next;
  const auto forces = total_forces(state, params);
  const double mobility = dt / params.B;
  for (std::size_t i = 0; i < next.count(); ++i) next.positions[i] += mobility * forces[i];
  next.time += dt;
  if (const long bad = ordering_violation(next.positions, next.cell_length); bad >= 0)
    abort_ordering(step_index, bad, next.time);
  return next;
}

double Trajectory1D::position(long i, double t) const {
  const auto n = static_cast<long>(count);
  const long wraps = (i >= 0) ? i / n : -((-i + n - 1) / n);
  const auto idx = static_cast<std::size_t>(i - wraps * n);
  const double shift = static_cast<double>(wraps) * cell_length;

  const std::size_t m = samples();
  if (m < 2) throw InvalidArgument("trajectory needs at least two samples");
  const double t0 = times.front();
  const double h = (times.back() - t0) / static_cast<double>(m - 1);
  if (t < t0 - 1e-9 * h || t > times.back() + 1e-9 * h)
    throw InvalidArgument("interpolation time outside the trajectory");
  const double u = (t - t0) / h;
  auto k = static_cast<long>(std::floor(u));
  k = std::clamp(k, 0L, static_cast<long>(m) - 2);
  const double s = u - static_cast<double>(k);
  auto x = [&](long j) { return at(static_cast<std::size_t>(j), idx); };
  if (k == 0 || k + 2 >= static_cast<long>(m))
    return shift + x(k) + s * (x(k + 1) - x(k));
  // Cubic Lagrange through samples k-1 .. k+2.
  const double a = -s * (s - 1.0) * (s - 2.0) / 6.0;
  const double b = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
  const double c = -(s + 1.0) * s * (s - 2.0) / 2.0;
  const double d = (s + 1.0) * s * (s - 1.0) / 6.0;
  return shift + a * x(k - 1) + b * x(k) + c * x(k + 1) + d * x(k + 2);
}

SimulationResult simulate(const MicroState1D& initial, const MaterialParams& params,
                          const SimulationOptions& options) {
  initial.validate();
  params.validate();
  if (!(options.dt > 0.0)) throw InvalidArgument("time step must be positive");
  const double burn_in = options.effective_burn_in();
  if (!(burn_in >= 0.0) || !(burn_in < options.total_time))
    throw InvalidArgument("burn-in must satisfy 0 <= burn_in < T");

  const long n_steps = std::lround(options.total_time / options.dt);
  const long burn_step = std::lround(burn_in / options.dt);
  const std::size_t n = initial.count();

  SimulationResult result;
  MicroState1D state = initial;
  auto& x = state.positions;
  std::vector<double> forces(n);
  ForceEvaluator evaluator(state, params);

  auto& traj = result.trajectory;
  traj.count = n;
  traj.cell_length = initial.cell_length;
  double cm0 = 0.0;
  for (double xi : x) cm0 += xi;
  cm0 /= static_cast<double>(n);
  auto centre = [&] {
    double s = 0.0;
    for (double xi : x) s += xi;
    return s / static_cast<double>(n);
  };
  auto record = [&](long step) {
    if (options.record_stride == 0 || step % static_cast<long>(options.record_stride) != 0) return;
    traj.times.push_back(state.time);
    traj.positions.insert(traj.positions.end(), x.begin(), x.end());
    traj.mean_displacement.push_back(centre() - cm0);
  };
  record(0);

  const bool probe = options.detect_pinning && initial.amplitude != 0.0;
  const double window_time =
      initial.period * params.B / std::max(std::abs(initial.tau_ext), 1.0);
  const long window = std::max(1L, std::lround(window_time / options.dt));
  std::vector<double> probe_start = x;

  std::vector<double> centre_series;
  centre_series.reserve(static_cast<std::size_t>(n_steps - burn_step + 1));
  if (burn_step == 0) centre_series.push_back(centre());

  const double mobility = options.dt / params.B;
  for (long step = 1; step <= n_steps; ++step) {
    evaluator.evaluate(x, forces);
    for (std::size_t i = 0; i < n; ++i) x[i] += mobility * forces[i];
    state.time = initial.time + static_cast<double>(step) * options.dt;
    if (const long bad = ordering_violation(x, state.cell_length); bad >= 0)
      abort_ordering(step, bad, state.time);
    record(step);
    if (step >= burn_step) centre_series.push_back(centre());

    if (probe && step % window == 0) {
      double moved = 0.0;
      for (std::size_t i = 0; i < n; ++i) moved = std::max(moved, std::abs(x[i] - probe_start[i]));
      if (moved < options.pin_tolerance) {
        result.pinned = true;
        result.steps = step;
        result.velocity = 0.0;
        result.final_state = state;
        return result;
      }
      probe_start = x;
    }
  }

  result.steps = n_steps;
  const double span = static_cast<double>(n_steps - burn_step) * options.dt;
  const double v = (centre_series.back() - centre_series.front()) / span;
  double lo = 0.0, hi = 0.0;
  for (std::size_t k = 0; k < centre_series.size(); ++k) {
    const double r = centre_series[k] - centre_series.front() -
                     v * static_cast<double>(k) * options.dt;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  result.velocity = v;
  result.velocity_noise = (hi - lo) / span;
  result.final_state = state;
  return result;
}

double hull_residual(const Trajectory1D& trajectory, double rho0, double velocity, double b,
                     double t_from) {
  if (velocity == 0.0) throw InvalidArgument("hull residual needs a nonzero mean velocity");
  if (!(rho0 > 0.0)) throw InvalidArgument("hull residual needs a positive density");
  const double shift = b / (rho0 * velocity);
  const double t_end = trajectory.times.back();
  const double t_lo = std::max(t_from, trajectory.times.front() + std::max(0.0, -shift));
  const double t_hi = t_end - std::max(0.0, shift);
  if (!(t_hi > t_lo)) throw InvalidArgument("trajectory too short for the hull shift");
  const auto n = static_cast<long>(trajectory.count);
  double worst = 0.0;
  for (std::size_t k = 0; k < trajectory.samples(); ++k) {
    const double t = trajectory.times[k];
    if (t < t_lo || t > t_hi) continue;
    for (long i = 0; i < n; ++i) {
      const double lhs = trajectory.position(i + 1, t);
      const double rhs = trajectory.position(i, t + shift);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  return worst;
}

void write_trajectory_csv(std::ostream& out, const Trajectory1D& trajectory, std::size_t stride) {
  if (stride == 0) stride = 1;
  out << "t,i,x_unwrapped\n";
  out.precision(17);
  for (std::size_t k = 0; k < trajectory.samples(); k += stride)
    for (std::size_t i = 0; i < trajectory.count; ++i)
      out << trajectory.times[k] << ',' << i << ',' << trajectory.at(k, i) << '\n';
}

}  // namespace dislo::micro1d

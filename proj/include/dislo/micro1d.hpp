#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "dislo/core.hpp"

namespace dislo::micro1d {

/// -dV/dx for V(x) = (A lambda_p / 2 pi) sin(2 pi x / lambda_p); the
/// amplitude A is the peak obstacle force, so a lone dislocation depins at
/// |tau_ext| = A.
double obstacle_force(double x, double amplitude, double period);

/// Force on a dislocation at separation dx from another one and from all of
/// its periodic images: sum_k mu_bar b / (dx - k l) = (mu_bar b pi / l) cot(pi dx / l).
double pair_force_periodized(double dx, double cell_length, double mu_bar, double b);

/// Straight dislocations on a periodic cell. Positions are unwrapped
/// (cumulative) coordinates with x_0 < x_1 < ... < x_{N-1} < x_0 + l.
struct MicroState1D {
  std::vector<double> positions;
  double cell_length = 10.0;
  double amplitude = 3.0;
  double period = 1.0;
  double tau_ext = 0.0;
  double time = 0.0;

  std::size_t count() const { return positions.size(); }

  /// N dislocations spaced l / N apart, the first one at offset.
  static MicroState1D equally_spaced(std::size_t n, double cell_length, double amplitude,
                                     double period, double tau_ext, double offset);
  /// Location of a potential minimum of the obstacle field.
  static double potential_minimum(double period) { return 0.75 * period; }

  /// Throws InvalidArgument on a broken ordering or a cell that is not a
  /// multiple of the obstacle period.
  void validate() const;
  /// Positions reduced to [0, l).
  std::vector<double> wrapped() const;
};

std::vector<double> total_forces(const MicroState1D& state, const MaterialParams& params);

/// Force evaluation with reusable scratch space. Pair sums use the phasor
/// form of the cotangent, cot((a - b) / 2) = (2 sin(a - b)) / |e^{ia} - e^{ib}|^2,
/// which needs one sincos per dislocation instead of one tan per pair.
class ForceEvaluator {
 public:
  ForceEvaluator(const MicroState1D& state, const MaterialParams& params);
  void evaluate(std::span<const double> positions, std::span<double> forces);

 private:
  double cell_length_, amplitude_, period_, tau_ext_;
  double pair_scale_;  // mu_bar b pi / l
  std::vector<double> cos_, sin_;
};

/// One explicit Euler step x_i += (dt / B) F_i applied to all dislocations
/// at once. Throws NumericalAbort (step = step_index) when the update
/// would break the ordering or bring two dislocations within 1e-12 l.
MicroState1D step_euler(const MicroState1D& state, const MaterialParams& params, double dt,
                        long step_index = 0);

/// Sampled unwrapped trajectories, row-major (sample, dislocation).
struct Trajectory1D {
  std::size_t count = 0;
  double cell_length = 0.0;
  std::vector<double> times;
  std::vector<double> positions;
  std::vector<double> mean_displacement;

  std::size_t samples() const { return times.size(); }
  double at(std::size_t sample, std::size_t i) const { return positions[sample * count + i]; }
  /// Unwrapped position of dislocation i at time t by cubic interpolation
  /// between samples (linear within the first and last intervals). Index i
  /// may run past the cell: x_{i+N}(t) = x_i(t) + l.
  double position(long i, double t) const;
};

struct SimulationOptions {
  double dt = 0.01;
  double total_time = 1000.0;
  /// Negative means total_time / 2.
  double burn_in = -1.0;
  /// Keep every k-th step in the trajectory; 0 records nothing.
  std::size_t record_stride = 0;
  /// Stop with v = 0 once a probe window shows no motion (ignored when A = 0).
  bool detect_pinning = true;
  double pin_tolerance = 1e-8;

  double effective_burn_in() const { return burn_in < 0.0 ? 0.5 * total_time : burn_in; }
};

struct SimulationResult {
  Trajectory1D trajectory;
  double velocity = 0.0;
  /// Detrended centre-of-mass oscillation range over the averaging window
  /// divided by its length; bounds the error of `velocity` once periodic.
  double velocity_noise = 0.0;
  bool pinned = false;
  long steps = 0;
  MicroState1D final_state;
};

SimulationResult simulate(const MicroState1D& initial, const MaterialParams& params,
                          const SimulationOptions& options);

/// max over t >= t_from and neighbouring pairs of |x_{i+1}(t) - x_i(t + shift)|
/// with shift = b / (rho0 v): the distance from an exact travelling wave
/// x_i(t) = b h(v t / b + i / rho0).
double hull_residual(const Trajectory1D& trajectory, double rho0, double velocity, double b,
                     double t_from = 0.0);

/// CSV with header `t,i,x_unwrapped`, every `stride`-th sample.
void write_trajectory_csv(std::ostream& out, const Trajectory1D& trajectory,
                          std::size_t stride = 1);

}  // namespace dislo::micro1d

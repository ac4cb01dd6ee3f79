#pragma once

#include <atomic>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dislo/core.hpp"
#include "dislo/fft.hpp"
#include "dislo/flowrule.hpp"

namespace dislo::macro1d {

struct Lipschitz {
  double rho = 0.0;  // bound on |df/drho|
  double tau = 0.0;  // bound on |df/dtau|
};

/// Effective flow rule f(rho0, tau) as seen by the macroscopic solver.
class FlowRule {
 public:
  virtual ~FlowRule() = default;
  virtual double eval(double rho, double tau) const = 0;
  /// Slope bounds valid on the box [rho_lo, rho_hi] x [tau_lo, tau_hi].
  virtual Lipschitz lipschitz(double rho_lo, double rho_hi, double tau_lo,
                              double tau_hi) const = 0;
  virtual std::string describe() const = 0;
  /// Number of evaluations that fell outside the rule's domain and were clamped.
  virtual long clamp_count() const { return 0; }
};

class CaseAFlowRule final : public FlowRule {
 public:
  explicit CaseAFlowRule(double mu_bar) : mu_bar_(mu_bar) {}
  double eval(double rho, double tau) const override { return rho * tau / mu_bar_; }
  Lipschitz lipschitz(double rho_lo, double rho_hi, double tau_lo, double tau_hi) const override;
  std::string describe() const override { return "case_a"; }

 private:
  double mu_bar_;
};

/// Bilinear lookup in a measured table. The table is extended to negative
/// stresses by oddness and, when it starts above rho = 0, anchored with an
/// all-zero row at rho = 0 (no dislocations, no flow).
class TableFlowRule final : public FlowRule {
 public:
  explicit TableFlowRule(const flowrule::FlowRuleTable& table, std::string source = "table");
  double eval(double rho, double tau) const override;
  Lipschitz lipschitz(double rho_lo, double rho_hi, double tau_lo, double tau_hi) const override;
  std::string describe() const override { return source_; }
  long clamp_count() const override { return clamps_.load(); }
  const flowrule::FlowRuleTable& table() const { return table_; }

 private:
  flowrule::FlowRuleTable table_;
  std::string source_;
  mutable std::atomic<long> clamps_{0};
};

/// Self-consistent stress -mu_bar PV int (d gamma/dx')/(x - x') dx' on the
/// periodic cell, i.e. -mu_bar pi H[d gamma/dx], evaluated spectrally as
/// the multiplier -mu_bar pi |k| on the periodic part of gamma. The Nyquist
/// mode is kept, which makes the discrete operator's off-diagonal weights
/// nonnegative. Output has zero mean.
class SelfStress1D {
 public:
  SelfStress1D(std::size_t nodes, double length, double mu_bar);
  void compute(const StrainField1D& field, std::span<double> out);
  /// Diagonal weight of the operator, pi^2 / (2 h) per unit mu_bar.
  double diagonal() const { return diagonal_; }

 private:
  RealFft1D fft_;
  std::vector<double> symbol_;
  std::vector<double> periodic_;
  double diagonal_;
};

std::vector<double> tau_sc_1d(const StrainField1D& field, double mu_bar);

struct StepLimits {
  double theta = 0.0;   // Lax-Friedrichs viscosity
  double dt_max = 0.0;  // monotone step bound
  Lipschitz slopes;
};

/// theta = |df/drho| bound on the current (rho, tau) range and the largest
/// step keeping the scheme monotone: dt <= cfl h / (theta + L_tau mu_bar pi^2 / 2).
StepLimits step_limits(const FlowRule& flow, std::span<const double> rho,
                       std::span<const double> tau, double h, double mu_bar, double cfl = 0.5);

/// One monotone Lax-Friedrichs step of d gamma/dt = f(rho, tau_ext + tau_sc)
/// with rho = -d gamma/dx (centred) and viscosity theta. Throws
/// NumericalAbort if theta is below the measured |df/drho| bound or dt
/// exceeds the monotone bound.
StrainField1D hj_step(const StrainField1D& gamma, const FlowRule& flow, double tau_ext,
                      double mu_bar, double dt, double theta);
/// Same with theta picked from step_limits.
StrainField1D hj_step(const StrainField1D& gamma, const FlowRule& flow, double tau_ext,
                      double mu_bar, double dt);

/// Lower-level step with caller-provided stress and no checks; used by the
/// solver and by coupled runs that share one (theta, dt) sequence.
void lax_friedrichs_update(const StrainField1D& gamma, std::span<const double> tau_sc,
                           const FlowRule& flow, double tau_ext, double dt, double theta,
                           StrainField1D& out);

struct MacroProblem {
  StrainField1D gamma0;
  double tau_ext = 0.0;
  std::shared_ptr<const FlowRule> flow;
  double t_final = 1.0;
  std::vector<double> snapshot_times;  // within (0, t_final]; t_final always included
  double mu_bar = 1.0;
  double cfl = 0.5;
  long max_steps = 50'000'000;
};

struct MacroSnapshot {
  double time = 0.0;
  StrainField1D field;
};

struct MacroSolution {
  std::vector<MacroSnapshot> snapshots;  // includes t = 0
  long steps = 0;
  double theta_max = 0.0;
  double dt_min = 0.0;
  double dt_max = 0.0;
  long clamps = 0;
};

MacroSolution solve_macro(const MacroProblem& problem);

/// `x,gamma,rho,tau_sc` for one snapshot.
void write_snapshot_csv(std::ostream& out, const StrainField1D& field, double mu_bar);

enum class Orientation {
  kDecreasing,  // gamma non-increasing, rho0 = -d gamma/dx >= 0 (default)
  kIncreasing,  // gamma non-decreasing
};

/// Jump locations of the floor-quantized strain eps floor(gamma0 / eps)
/// (gamma0 linearly interpolated between nodes), mapped to microscopic
/// coordinates x = x_bar b / eps. The cell must carry an integer number of
/// dislocations.
std::vector<double> positions_from_strain(const StrainField1D& gamma0, double epsilon, double b,
                                          Orientation orientation = Orientation::kDecreasing);

struct ConvergenceSetup {
  StrainField1D gamma0;
  std::shared_ptr<const FlowRule> flow;
  double tau_ext = 0.0;
  double t_final = 0.1;
  std::vector<double> compare_times;  // macroscopic; t_final is always compared
  MaterialParams material = MaterialParams::dimensionless();
  double amplitude = 0.0;  // micro obstacle amplitude, must match the flow rule
  double period = 1.0;
  double micro_dt = 0.01;
  double cfl = 0.5;
  unsigned workers = 1;
};

struct ConvergenceRow {
  double epsilon = 0.0;
  std::size_t dislocations = 0;
  double error = 0.0;           // sup over nodes and compare times
  double micro_change = 0.0;    // sup |gamma_eps(T) - gamma_eps(0)|
  double micro_velocity = 0.0;  // mean dislocation velocity over the last micro time unit
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  double macro_change = 0.0;  // sup |gamma0(T) - gamma0(0)|
  MacroSolution macro;
};

/// Rescaled microscopic strain sup-distance to the macroscopic solution for
/// each eps (strictly decreasing list).
ConvergenceResult convergence_experiment(const ConvergenceSetup& setup,
                                         std::span<const double> eps_list);

}  // namespace dislo::macro1d

#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dislo/core.hpp"
#include "dislo/micro1d.hpp"

namespace dislo::flowrule {

/// Orowan's law without obstacles: rho0 * tau / mu_bar.
double f_case_a(double rho0, double tau, double mu_bar);

/// Everything a single (N, tau) cell needs besides N and tau.
struct SweepParams {
  MaterialParams material = MaterialParams::dimensionless();
  double cell_length = 10.0;
  double amplitude = 3.0;
  double period = 1.0;
  micro1d::SimulationOptions sim{};
  unsigned workers = 1;
};

/// Normalized density b N / l.
double density_of(std::size_t n, const SweepParams& params);

struct CellMeasurement {
  double f = 0.0;
  double noise = 0.0;  // velocity_noise converted to strain rate
  bool pinned = false;
};

/// f = rho0 (B / mu_bar) v from one simulation of N equally spaced
/// dislocations (first one at a potential minimum). Requires tau >= 0.
CellMeasurement f_measure_cell(std::size_t n, double tau, const SweepParams& params);
double f_measure(std::size_t n, double tau, const SweepParams& params);

struct TableMetadata {
  double dt = 0.0;
  double total_time = 0.0;
  double burn_in = 0.0;
  double amplitude = 0.0;
  double period = 1.0;
  double cell_length = 0.0;
  double mu_bar = 1.0;
  double B = 1.0;
  double b = 1.0;
  double f_tol = 1e-6;
  double noise_floor = 0.0;
  std::vector<std::size_t> n_list;
  std::string code_version = kVersion;
};

/// Rectangular grid of f values, row-major [rho][tau].
class FlowRuleTable {
 public:
  FlowRuleTable() = default;
  FlowRuleTable(std::vector<double> rho_axis, std::vector<double> tau_axis);

  const std::vector<double>& rho_axis() const { return rho_; }
  const std::vector<double>& tau_axis() const { return tau_; }
  std::size_t rows() const { return rho_.size(); }
  std::size_t cols() const { return tau_.size(); }

  double& at(std::size_t r, std::size_t c) { return f_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return f_[r * cols() + c]; }
  bool failed(std::size_t r, std::size_t c) const { return failed_[r * cols() + c] != 0; }
  void set_failed(std::size_t r, std::size_t c, bool v) { failed_[r * cols() + c] = v ? 1 : 0; }
  double noise(std::size_t r, std::size_t c) const { return noise_[r * cols() + c]; }
  void set_noise(std::size_t r, std::size_t c, double v) { noise_[r * cols() + c] = v; }
  std::size_t failed_count() const;

  /// Row index of rho0 (exact axis match within 1e-12 relative), or throws.
  std::size_t row_of(double rho0) const;

  TableMetadata metadata;

 private:
  std::vector<double> rho_, tau_;
  std::vector<double> f_;
  std::vector<double> noise_;
  std::vector<char> failed_;
};

/// Optional progress hook, called once per finished cell (from workers).
using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Fills a table over (b N / l, tau) for every N in n_list and tau in
/// tau_list (both ascending, tau >= 0). Cells run independently on
/// `params.workers` threads; failed cells are flagged and left NaN. When
/// `resume` is given, its finished cells with matching axes are reused.
FlowRuleTable sweep(std::span<const std::size_t> n_list, std::span<const double> tau_list,
                    const SweepParams& params, const FlowRuleTable* resume = nullptr,
                    const ProgressFn& progress = {});

/// Mirrors a tau >= 0 table onto [-tau_max, tau_max] with f(rho, -tau) = -f(rho, tau).
/// A table that already has negative taus is returned unchanged.
FlowRuleTable extend_odd(const FlowRuleTable& table);

/// Largest tau with f(rho0, tau) <= f_tol, linearly refined between the
/// bracketing nodes. 0 when f > f_tol at the first positive tau.
double threshold(const FlowRuleTable& table, double rho0, double f_tol = 1e-6);

/// Bilinear interpolation; queries outside the box are clamped and counted.
double interp(const FlowRuleTable& table, double rho0, double tau,
              std::atomic<long>* clamp_count = nullptr);

struct AuditReport {
  bool monotone = true;
  bool odd = true;
  bool zero_column = true;
  double worst_decrease = 0.0;  // largest f[c] - f[c+1] beyond tolerance
  std::size_t violations = 0;
};

/// Nondecreasing in tau row by row within tol plus the recorded cell noise;
/// exact oddness for mirrored pairs; f(rho, 0) == 0.
AuditReport audit(const FlowRuleTable& table, double tol = 1e-8);

// --- files -----------------------------------------------------------------

/// `rho,tau,f` one row per cell; failed cells are written as nan.
void write_table_csv(std::ostream& out, const FlowRuleTable& table);
/// key=value sidecar: dt, T, burn_in, A, l, N_list, tau_list, f_tol, ...
void write_metadata(std::ostream& out, const FlowRuleTable& table);
/// Contour-plot matrix: first row `rho\tau,<tau...>`, then one row per rho.
/// With `zero_sentinel` set, cells with f == 0 are written as that value.
void write_matrix_csv(std::ostream& out, const FlowRuleTable& table,
                      const double* zero_sentinel = nullptr);

FlowRuleTable read_table_csv(std::istream& in);
void read_metadata(std::istream& in, FlowRuleTable& table);
/// Reads `<path>` and, when present, `<path>.meta`.
FlowRuleTable load_table(const std::string& path);
void save_table(const std::string& path, const FlowRuleTable& table);

}  // namespace dislo::flowrule

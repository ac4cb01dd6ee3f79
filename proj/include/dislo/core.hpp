#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dislo {

inline constexpr const char* kVersion = "0.3.0";

/// Thrown for inputs that violate a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a run has to stop for numerical reasons (ordering loss,
/// CFL violation, unstable step). `step()` is the offending step index.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Density samples went negative on a field that was required to be an
/// admissible plastic strain.
class InadmissibleField : public InvalidArgument {
 public:
  InadmissibleField(const std::string& what, std::size_t node, double value)
      : InvalidArgument(what), node_(node), value_(value) {}
  std::size_t node() const noexcept { return node_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t node_;
  double value_;
};

/// Prints a one-line warning to stderr. Thread safe.
void warn(const std::string& message);

/// mu / (2 pi (1 - nu)). Rejects mu <= 0 and nu outside (-1, 1/2);
/// warns above nu = 0.45.
double mu_bar_of(double mu, double nu);

struct MaterialParams {
  double mu = 0.0;      // shear modulus
  double nu = 0.0;      // Poisson ratio
  double b = 0.0;       // Burgers vector magnitude
  double B = 0.0;       // viscous drag
  double mu_bar = 0.0;  // derived, mu / (2 pi (1 - nu))

  static MaterialParams make(double mu, double nu, double b, double B);
  /// mu_bar = b = B = 1 with nu = 0, the units used for the flow-rule sweeps.
  static MaterialParams dimensionless();

  void validate() const;
};

/// Micro/macro scale separation. epsilon = b / Lambda, lambda_bar = lambda / b.
struct Scales {
  double Lambda = 0.0;
  double lambda = 0.0;
  double lambda_bar = 0.0;
  double epsilon = 0.0;

  static Scales make(double b, double Lambda, double lambda);

  double to_macro_length(double x) const { return x / Lambda; }
  double to_micro_length(double x_bar) const { return x_bar * Lambda; }
};

struct Normalization {
  double epsilon = 0.0;
  double time_scale = 0.0;  // B Lambda / mu_bar; t_bar = t / time_scale
};

Normalization normalize(double b, double Lambda, double B, double mu_bar);

/// -b * #{i : x_i < x}. The Heaviside step is 0 at the origin, so the
/// strain at a dislocation takes the value from its left.
double plastic_strain_1d(std::span<const double> positions, double b, double x);

/// Uniformly sampled macroscopic plastic strain.
///
/// Periodic fields are quasi-periodic: gamma(x + L) = gamma(x) + cell_offset,
/// L = x_max - x_min, with nodes at x_min + i L / n (x_max excluded). This
/// carries a nonzero mean density -cell_offset / L on a periodic cell.
/// Non-periodic fields have n nodes spanning [x_min, x_max] inclusive.
struct StrainField1D {
  std::vector<double> values;
  double x_min = 0.0;
  double x_max = 1.0;
  bool periodic = true;
  double cell_offset = 0.0;

  std::size_t size() const { return values.size(); }
  double length() const { return x_max - x_min; }
  double spacing() const;
  double node(std::size_t i) const { return x_min + spacing() * static_cast<double>(i); }

  /// Value at node i, i may be one step outside [0, n) on periodic fields.
  double at(long i) const;

  template <class Fn>
  static StrainField1D sample(Fn&& fn, std::size_t n, double x_min, double x_max,
                              double cell_offset) {
    StrainField1D f;
    f.values.resize(n);
    f.x_min = x_min;
    f.x_max = x_max;
    f.periodic = true;
    f.cell_offset = cell_offset;
    for (std::size_t i = 0; i < n; ++i) f.values[i] = fn(f.node(i));
    return f;
  }
};

/// -d(gamma)/dx by centered differences (periodic wrap, one-sided at the
/// ends of non-periodic fields). No admissibility check.
std::vector<double> density_samples(const StrainField1D& field);

/// Same as density_samples but throws InadmissibleField when a node is
/// below -tolerance.
std::vector<double> density_from_strain(const StrainField1D& field, double tolerance = 1e-9);

}  // namespace dislo

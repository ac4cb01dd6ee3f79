#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "dislo/core.hpp"
#include "dislo/fft.hpp"

namespace dislo::micro2d {

/// Uniform periodic grid on [0, lx) x [0, ly), row-major (j * nx + i).
struct Grid2D {
  std::size_t nx = 0, ny = 0;
  double lx = 0.0, ly = 0.0;

  static Grid2D make(std::size_t nx, std::size_t ny, double lx, double ly);
  std::size_t size() const { return nx * ny; }
  double dx() const { return lx / static_cast<double>(nx); }
  double dy() const { return ly / static_cast<double>(ny); }
  double cell_area() const { return dx() * dy(); }
  double x(std::size_t i) const { return dx() * static_cast<double>(i); }
  double y(std::size_t j) const { return dy() * static_cast<double>(j); }
  std::size_t index(std::size_t i, std::size_t j) const { return j * nx + i; }
};

/// Angular factor of the far-field kernel,
/// (mu b / 4 pi) (x^2 (2 beta - 1) + y^2 (2 - beta)) / (x^2 + y^2), beta = 1 / (1 - nu).
double kernel_g(double ux, double uy, const MaterialParams& params);

/// Interaction kernel J with cutoff radius R. Outside R it equals
/// J_inf(X) = g(X / |X|) / |X|^3; inside, each ray carries
/// g(theta) (c0 + c1 r^2) with value and slope matched at R. Grid samples
/// are periodized by summing lattice images |k_x|, |k_y| <= images.
class Kernel2D {
 public:
  static Kernel2D build(const MaterialParams& params, double r_bar, const Grid2D& grid,
                        int images = 4);

  double cutoff() const { return radius_; }
  const Grid2D& grid() const { return grid_; }
  const MaterialParams& params() const { return params_; }

  /// Unperiodized J and J_inf at a displacement (J_inf(0) is undefined).
  double j(double x, double y) const;
  double j_inf(double x, double y) const;

  /// Periodized samples indexed by displacement (i dx, j dy) mod the cell.
  const std::vector<double>& samples() const { return j_; }
  /// Periodized J_inf with the singular origin term excluded.
  const std::vector<double>& samples_inf() const { return j_inf_; }
  const std::vector<std::complex<double>>& spectrum() const { return spectrum_; }
  const std::vector<std::complex<double>>& spectrum_inf() const { return spectrum_inf_; }
  /// sum of samples times cell area.
  double mass() const { return mass_; }
  double mass_inf() const { return mass_inf_; }

 private:
  MaterialParams params_;
  Grid2D grid_;
  double radius_ = 0.0;
  double c0_ = 0.0, c1_ = 0.0;
  std::vector<double> j_, j_inf_;
  std::vector<std::complex<double>> spectrum_, spectrum_inf_;
  double mass_ = 0.0, mass_inf_ = 0.0;
};

/// Level function whose b-multiples are the dislocation curves.
struct LevelSetField2D {
  Grid2D grid;
  std::vector<double> values;

  template <class Fn>
  static LevelSetField2D sample(const Grid2D& grid, Fn&& fn) {
    LevelSetField2D f{grid, std::vector<double>(grid.size())};
    for (std::size_t j = 0; j < grid.ny; ++j)
      for (std::size_t i = 0; i < grid.nx; ++i) f.values[grid.index(i, j)] = fn(grid.x(i), grid.y(j));
    return f;
  }
  void validate() const;
};

/// Periodic obstacle stress on the grid, exterior stress included.
struct ObstacleField2D {
  Grid2D grid;
  std::vector<double> values;

  static ObstacleField2D constant(const Grid2D& grid, double tau);
  /// amplitude sin(2 pi x / period) sin(2 pi y / period) + tau_ext. The
  /// period must be a whole number of cells in both directions.
  static ObstacleField2D product_of_sines(const Grid2D& grid, double amplitude, double period,
                                          double tau_ext);
};

struct LevelRange {
  long lo = 0, hi = 0;  // inclusive
};

/// floor(min / b) - 1 .. ceil(max / b) + 1.
LevelRange default_levels(const LevelSetField2D& field, double b);

/// 1/2 sum_Z J(X - Z) sign(gamma~(Z) - j b) dA.
std::vector<double> force_of_curve(const LevelSetField2D& field, long j, const Kernel2D& kernel);

/// (tau_per + sum_{j in range} F_j) / B at every node. Warns when the field
/// crosses levels outside the range.
std::vector<double> normal_velocity(const LevelSetField2D& field, const ObstacleField2D& obstacles,
                                    const Kernel2D& kernel, LevelRange range, double B);

/// Godunov-upwind explicit step of gamma~_t = V |grad gamma~|. Positive V
/// moves levels toward decreasing gamma~. Throws NumericalAbort when
/// dt max|V| (1/dx + 1/dy) > 1.
LevelSetField2D levelset_step(const LevelSetField2D& field, std::span<const double> velocity,
                              double dt, long step_index = 0);

/// Largest stable step for the given velocity samples.
double max_stable_dt(const Grid2D& grid, std::span<const double> velocity);

/// b floor(gamma~ / b) pointwise.
std::vector<double> plastic_strain_2d(const LevelSetField2D& field, double b);

/// Self-consistent stress of a periodic strain field gamma0:
/// sum_{Z != X} J_inf(X - Z) (gamma0(Z) - gamma0(X)) dA, the principal
/// value with the zero mode removed. Constants map to 0; for fields
/// independent of y this is b times the 1D self-consistent stress.
std::vector<double> tau_sc_2d(const LevelSetField2D& gamma0, const Kernel2D& kernel);

/// Reusable velocity/step driver (keeps one FFT plan).
class Evolver2D {
 public:
  Evolver2D(const Kernel2D& kernel, ObstacleField2D obstacles, double B);
  /// Range defaults to default_levels of the field when unset.
  std::vector<double> velocity(const LevelSetField2D& field, const LevelRange* range = nullptr);
  /// One step with dt; returns the velocity used.
  std::vector<double> step(LevelSetField2D& field, double dt, long step_index,
                           const LevelRange* range = nullptr);

 private:
  const Kernel2D& kernel_;
  ObstacleField2D obstacles_;
  double B_;
  RealFft2D fft_;
  std::vector<double> sign_, conv_;
};

struct Point {
  double x = 0.0, y = 0.0;
};

struct Polyline {
  std::vector<Point> points;
  bool closed = false;
};

/// Marching-squares contour of `level`, segments chained into polylines.
/// Coordinates are unwrapped across the periodic boundary where needed.
std::vector<Polyline> extract_contours(const LevelSetField2D& field, double level);

/// Signed shoelace area of a closed polyline.
double polygon_area(const Polyline& line);

/// Header `nx,ny,dx,dy,time` then ny rows of nx values.
void write_field_csv(std::ostream& out, const Grid2D& grid, std::span<const double> values,
                     double time);
/// `contour,x,y`, one row per vertex; closed contours repeat their first vertex.
void write_contours_csv(std::ostream& out, const std::vector<Polyline>& contours);

}  // namespace dislo::micro2d

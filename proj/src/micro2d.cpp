#include "dislo/micro2d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dislo::micro2d {

Grid2D Grid2D::make(std::size_t nx, std::size_t ny, double lx, double ly) {
  if (nx < 4 || ny < 4) throw InvalidArgument("2D grid needs at least 4 nodes per direction");
  if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("2D cell lengths must be positive");
  return {nx, ny, lx, ly};
}

double kernel_g(double ux, double uy, const MaterialParams& params) {
  const double n2 = ux * ux + uy * uy;
  if (!(n2 > 0.0)) throw InvalidArgument("kernel direction must be nonzero");
  if (!(params.nu < 0.5) || !(params.nu > -1.0))
    throw InvalidArgument("Poisson ratio must lie in (-1, 1/2) so that beta <= 2");
  const double beta = 1.0 / (1.0 - params.nu);
  const double pi = std::numbers::pi;
  return params.mu * params.b / (4.0 * pi) *
         (ux * ux * (2.0 * beta - 1.0) + uy * uy * (2.0 - beta)) / n2;
}

double Kernel2D::j_inf(double x, double y) const {
  const double r2 = x * x + y * y;
  return kernel_g(x, y, params_) / (r2 * std::sqrt(r2));
}

double Kernel2D::j(double x, double y) const {
  const double r2 = x * x + y * y;
  if (r2 > radius_ * radius_) return j_inf(x, y);
  if (r2 == 0.0) {
    // Angular mean of g: (mu b / 4 pi) (beta + 1) / 2.
    const double beta = 1.0 / (1.0 - params_.nu);
    return params_.mu * params_.b / (4.0 * std::numbers::pi) * 0.5 * (beta + 1.0) * c0_;
  }
  return kernel_g(x, y, params_) * (c0_ + c1_ * r2);
}

namespace {

// Representatives of a periodic coordinate index: the minimum image, or
// both +L/2 and -L/2 at the Nyquist index so the image sum stays even.
std::vector<double> representatives(std::size_t i, std::size_t n, double spacing) {
  const double len = spacing * static_cast<double>(n);
  if (2 * i == n) return {0.5 * len, -0.5 * len};
  const double d = 2 * i < n ? spacing * static_cast<double>(i)
                             : -spacing * static_cast<double>(n - i);
  return {d};
}

}  // namespace

Kernel2D Kernel2D::build(const MaterialParams& params, double r_bar, const Grid2D& grid,
                         int images) {
  params.validate();
  if (!(r_bar > 1.0)) throw InvalidArgument("cutoff factor R_bar must exceed 1");
  if (images < 0) throw InvalidArgument("image count must be nonnegative");
  Kernel2D k;
  k.params_ = params;
  k.grid_ = grid;
  k.radius_ = r_bar * params.b;
  if (k.radius_ < 4.0 * std::max(grid.dx(), grid.dy()))
    throw InvalidArgument("grid too coarse: the cutoff radius needs at least 4 cells");
  if (2.0 * k.radius_ > std::min(grid.lx, grid.ly))
    throw InvalidArgument("cutoff radius must be below half the cell size");
  const double r = k.radius_;
  k.c0_ = 2.5 / (r * r * r);
  k.c1_ = -1.5 / (r * r * r * r * r);
  kernel_g(1.0, 0.0, params);  // validates nu

  const std::size_t n = grid.size();
  k.j_.assign(n, 0.0);
  k.j_inf_.assign(n, 0.0);
  for (std::size_t jy = 0; jy < grid.ny; ++jy) {
    const auto ry = representatives(jy, grid.ny, grid.dy());
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const auto rx = representatives(ix, grid.nx, grid.dx());
      double sum = 0.0, sum_inf = 0.0;
      for (double dx : rx)
        for (double dy : ry)
          for (int a = -images; a <= images; ++a)
            for (int c = -images; c <= images; ++c) {
              const double x = dx + a * grid.lx;
              const double y = dy + c * grid.ly;
              sum += k.j(x, y);
              if (x != 0.0 || y != 0.0) sum_inf += k.j_inf(x, y);
            }
      const double w = 1.0 / static_cast<double>(rx.size() * ry.size());
      k.j_[grid.index(ix, jy)] = sum * w;
      k.j_inf_[grid.index(ix, jy)] = sum_inf * w;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!(k.j_[i] >= 0.0)) throw NumericalAbort("kernel sample is negative", 0);

  const double da = grid.cell_area();
  for (double v : k.j_) k.mass_ += v * da;
  for (double v : k.j_inf_) k.mass_inf_ += v * da;
  RealFft2D fft(grid.nx, grid.ny);
  k.spectrum_ = fft.forward(k.j_);
  k.spectrum_inf_ = fft.forward(k.j_inf_);
  return k;
}

void LevelSetField2D::validate() const {
  if (values.size() != grid.size()) throw InvalidArgument("level-set values do not match the grid");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("level-set field has non-finite values");
}

ObstacleField2D ObstacleField2D::constant(const Grid2D& grid, double tau) {
  return {grid, std::vector<double>(grid.size(), tau)};
}

ObstacleField2D ObstacleField2D::product_of_sines(const Grid2D& grid, double amplitude,
                                                  double period, double tau_ext) {
  if (!(period > 0.0)) throw InvalidArgument("obstacle period must be positive");
  const double px = period / grid.dx(), py = period / grid.dy();
  const auto cx = static_cast<std::size_t>(std::llround(px));
  const auto cy = static_cast<std::size_t>(std::llround(py));
  if (cx == 0 || cy == 0 || std::abs(px - static_cast<double>(cx)) > 1e-9 * px ||
      std::abs(py - static_cast<double>(cy)) > 1e-9 * py || grid.nx % cx != 0 || grid.ny % cy != 0)
    throw InvalidArgument("obstacle period must be a whole number of grid cells dividing the cell");
  const double pi = std::numbers::pi;
  ObstacleField2D f{grid, std::vector<double>(grid.size())};
  for (std::size_t j = 0; j < grid.ny; ++j)
    for (std::size_t i = 0; i < grid.nx; ++i) {
      // Reduced indices keep the samples exactly periodic.
      const double sx = std::sin(2.0 * pi * static_cast<double>(i % cx) / static_cast<double>(cx));
      const double sy = std::sin(2.0 * pi * static_cast<double>(j % cy) / static_cast<double>(cy));
      f.values[grid.index(i, j)] = amplitude * sx * sy + tau_ext;
    }
  return f;
}

LevelRange default_levels(const LevelSetField2D& field, double b) {
  const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
  return {static_cast<long>(std::floor(*lo / b)) - 1, static_cast<long>(std::ceil(*hi / b)) + 1};
}

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_grid(const LevelSetField2D& field, const Grid2D& g) {
  field.validate();
  if (field.grid.nx != g.nx || field.grid.ny != g.ny || field.grid.lx != g.lx ||
      field.grid.ly != g.ly)
    throw InvalidArgument("field and kernel grids differ");
}

}  // namespace

std::vector<double> force_of_curve(const LevelSetField2D& field, long j, const Kernel2D& kernel) {
  check_grid(field, kernel.grid());
  const double b = kernel.params().b;
  std::vector<double> s(field.values.size()), out(field.values.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = sign_of(field.values[i] - static_cast<double>(j) * b);
  RealFft2D fft(field.grid.nx, field.grid.ny);
  fft.convolve(kernel.spectrum(), s, out);
  const double scale = 0.5 * field.grid.cell_area();
  for (double& v : out) v *= scale;
  return out;
}

Evolver2D::Evolver2D(const Kernel2D& kernel, ObstacleField2D obstacles, double B)
    : kernel_(kernel),
      obstacles_(std::move(obstacles)),
      B_(B),
      fft_(kernel.grid().nx, kernel.grid().ny),
      sign_(kernel.grid().size()),
      conv_(kernel.grid().size()) {
  if (!(B > 0.0)) throw InvalidArgument("drag coefficient B must be positive");
  if (obstacles_.values.size() != kernel.grid().size())
    throw InvalidArgument("obstacle field does not match the kernel grid");
}

std::vector<double> Evolver2D::velocity(const LevelSetField2D& field, const LevelRange* range) {
  check_grid(field, kernel_.grid());
  const double b = kernel_.params().b;
  const LevelRange lr = range != nullptr ? *range : default_levels(field, b);
  if (lr.hi < lr.lo) throw InvalidArgument("empty level range");
  const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
  if (std::floor(*lo / b) < static_cast<double>(lr.lo) ||
      std::ceil(*hi / b) > static_cast<double>(lr.hi)) {
    std::ostringstream os;
    os << "level field spans [" << *lo << ", " << *hi << "], beyond levels " << lr.lo << ".."
       << lr.hi;
    warn(os.str());
  }
  for (std::size_t i = 0; i < sign_.size(); ++i) {
    const double v = field.values[i];
    double s = 0.0;
    for (long j = lr.lo; j <= lr.hi; ++j) s += sign_of(v - static_cast<double>(j) * b);
    sign_[i] = s;
  }
  fft_.convolve(kernel_.spectrum(), sign_, conv_);
  const double scale = 0.5 * field.grid.cell_area();
  std::vector<double> v(sign_.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = (obstacles_.values[i] + scale * conv_[i]) / B_;
  return v;
}

std::vector<double> Evolver2D::step(LevelSetField2D& field, double dt, long step_index,
                                    const LevelRange* range) {
  auto v = velocity(field, range);
  field = levelset_step(field, v, dt, step_index);
  return v;
}

std::vector<double> normal_velocity(const LevelSetField2D& field, const ObstacleField2D& obstacles,
                                    const Kernel2D& kernel, LevelRange range, double B) {
  Evolver2D ev(kernel, obstacles, B);
  return ev.velocity(field, &range);
}

double max_stable_dt(const Grid2D& grid, std::span<const double> velocity) {
  double vmax = 0.0;
  for (double v : velocity) vmax = std::max(vmax, std::abs(v));
  const double rate = vmax * (1.0 / grid.dx() + 1.0 / grid.dy());
  return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

LevelSetField2D levelset_step(const LevelSetField2D& field, std::span<const double> velocity,
                              double dt, long step_index) {
  field.validate();
  const Grid2D& g = field.grid;
  if (velocity.size() != g.size()) throw InvalidArgument("velocity does not match the grid");
  if (!(dt >= 0.0)) throw InvalidArgument("time step must be nonnegative");
  if (dt == 0.0) return field;
  if (dt > max_stable_dt(g, velocity) * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "CFL violation: dt = " << dt << " exceeds " << max_stable_dt(g, velocity);
    throw NumericalAbort(os.str(), step_index);
  }
  const double hx = g.dx(), hy = g.dy();
  LevelSetField2D out = field;
  const auto& u = field.values;
  for (std::size_t j = 0; j < g.ny; ++j) {
    const std::size_t jm = (j + g.ny - 1) % g.ny, jp = (j + 1) % g.ny;
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t im = (i + g.nx - 1) % g.nx, ip = (i + 1) % g.nx;
      const double c = u[g.index(i, j)];
      const double dxm = (c - u[g.index(im, j)]) / hx, dxp = (u[g.index(ip, j)] - c) / hx;
      const double dym = (c - u[g.index(i, jm)]) / hy, dyp = (u[g.index(i, jp)] - c) / hy;
      const double v = velocity[g.index(i, j)];
      double grad2;
      if (v > 0.0) {
        const double a = std::min(dxm, 0.0), b = std::max(dxp, 0.0);
        const double e = std::min(dym, 0.0), f = std::max(dyp, 0.0);
        grad2 = std::max(a * a, b * b) + std::max(e * e, f * f);
      } else {
        const double a = std::max(dxm, 0.0), b = std::min(dxp, 0.0);
        const double e = std::max(dym, 0.0), f = std::min(dyp, 0.0);
        grad2 = std::max(a * a, b * b) + std::max(e * e, f * f);
      }
      out.values[g.index(i, j)] = c + dt * v * std::sqrt(grad2);
    }
  }
  return out;
}

std::vector<double> plastic_strain_2d(const LevelSetField2D& field, double b) {
  if (!(b > 0.0)) throw InvalidArgument("b must be positive");
  std::vector<double> out(field.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = b * std::floor(field.values[i] / b);
  return out;
}

std::vector<double> tau_sc_2d(const LevelSetField2D& gamma0, const Kernel2D& kernel) {
  check_grid(gamma0, kernel.grid());
  std::vector<double> out(gamma0.values.size());
  RealFft2D fft(gamma0.grid.nx, gamma0.grid.ny);
  fft.convolve(kernel.spectrum_inf(), gamma0.values, out);
  const double da = gamma0.grid.cell_area();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = out[i] * da - kernel.mass_inf() * gamma0.values[i];
  return out;
}

}  // namespace dislo::micro2d

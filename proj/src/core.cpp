#include "dislo/core.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

namespace dislo {

void warn(const std::string& message) {
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  std::cerr << "warning: " << message << '\n';
}

double mu_bar_of(double mu, double nu) {
  if (!(mu > 0.0)) throw InvalidArgument("shear modulus mu must be positive");
  if (!(nu < 0.5)) throw InvalidArgument("Poisson ratio nu must be below 1/2");
  if (!(nu > -1.0)) throw InvalidArgument("Poisson ratio nu must exceed -1");
  if (nu > 0.45) {
    std::ostringstream os;
    os << "Poisson ratio " << nu << " is close to the incompressible limit";
    warn(os.str());
  }
  return mu / (2.0 * std::numbers::pi * (1.0 - nu));
}

MaterialParams MaterialParams::make(double mu, double nu, double b, double B) {
  MaterialParams p;
  p.mu = mu;
  p.nu = nu;
  p.b = b;
  p.B = B;
  p.mu_bar = mu_bar_of(mu, nu);
  p.validate();
  return p;
}

MaterialParams MaterialParams::dimensionless() {
  return make(2.0 * std::numbers::pi, 0.0, 1.0, 1.0);
}

void MaterialParams::validate() const {
  if (!(b > 0.0)) throw InvalidArgument("Burgers magnitude b must be positive");
  if (!(B > 0.0)) throw InvalidArgument("drag coefficient B must be positive");
  const double expected = mu_bar_of(mu, nu);
  if (std::abs(expected - mu_bar) > 4.0 * std::numeric_limits<double>::epsilon() * expected)
    throw InvalidArgument("stored mu_bar is inconsistent with mu and nu");
}

Scales Scales::make(double b, double Lambda, double lambda) {
  if (!(b > 0.0) || !(Lambda > b))
    throw InvalidArgument("scales require 0 < b < Lambda");
  if (!(lambda > b)) throw InvalidArgument("obstacle period must exceed b");
  Scales s;
  s.Lambda = Lambda;
  s.lambda = lambda;
  s.lambda_bar = lambda / b;
  s.epsilon = b / Lambda;
  return s;
}

Normalization normalize(double b, double Lambda, double B, double mu_bar) {
  if (!(b > 0.0) || !(Lambda > b))
    throw InvalidArgument("normalize requires 0 < b < Lambda");
  if (!(B > 0.0) || !(mu_bar > 0.0))
    throw InvalidArgument("normalize requires positive B and mu_bar");
  return {b / Lambda, B * Lambda / mu_bar};
}

double plastic_strain_1d(std::span<const double> positions, double b, double x) {
  const auto count = std::count_if(positions.begin(), positions.end(),
                                   [x](double xi) { return x - xi > 0.0; });
  return -b * static_cast<double>(count);
}

double StrainField1D::spacing() const {
  const auto n = static_cast<double>(values.size());
  return periodic ? length() / n : length() / (n - 1.0);
}

double StrainField1D::at(long i) const {
  const auto n = static_cast<long>(values.size());
  if (i >= 0 && i < n) return values[static_cast<std::size_t>(i)];
  if (!periodic) throw std::out_of_range("StrainField1D::at outside a non-periodic field");
  // One wrap is all the stencils need.
  if (i < 0) return values[static_cast<std::size_t>(i + n)] - cell_offset;
  return values[static_cast<std::size_t>(i - n)] + cell_offset;
}

std::vector<double> density_samples(const StrainField1D& field) {
  const std::size_t n = field.size();
  if (n < 3) throw InvalidArgument("density needs at least 3 nodes");
  const double h = field.spacing();
  std::vector<double> rho(n);
  if (field.periodic) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto li = static_cast<long>(i);
      rho[i] = -(field.at(li + 1) - field.at(li - 1)) / (2.0 * h);
    }
  } else {
    const auto& g = field.values;
    rho[0] = -(-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
    rho[n - 1] = -(3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) rho[i] = -(g[i + 1] - g[i - 1]) / (2.0 * h);
  }
  return rho;
}

std::vector<double> density_from_strain(const StrainField1D& field, double tolerance) {
  auto rho = density_samples(field);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] < -tolerance) {
      std::ostringstream os;
      os << "negative dislocation density " << rho[i] << " at node " << i;
      throw InadmissibleField(os.str(), i, rho[i]);
    }
  }
  return rho;
}

}  // namespace dislo

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "dislo/macro1d.hpp"
#include "oracles.hpp"

using namespace dislo;
using namespace dislo::macro1d;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

StrainField1D wavy(std::size_t n, double a) {
  return StrainField1D::sample([a](double x) { return -x - a / (2.0 * kPi) * std::sin(2.0 * kPi * x); },
                               n, 0.0, 1.0, -1.0);
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Table with f = 0 for tau <= 2.5 and a ramp above, at three densities.
flowrule::FlowRuleTable pinned_table() {
  flowrule::FlowRuleTable t({0.9, 1.0, 1.1}, {0.0, 1.0, 2.0, 2.5, 3.0, 4.0});
  for (std::size_t r = 0; r < 3; ++r) {
    t.at(r, 4) = 0.5 * t.rho_axis()[r];
    t.at(r, 5) = 1.5 * t.rho_axis()[r];
  }
  return t;
}

}  // namespace

TEST_SUITE("macro1d") {

TEST_CASE("self-consistent stress against principal-value quadrature") {
  const std::size_t n = 512;
  // d gamma / dx = cos(x) on [0, 2 pi): gamma = sin(x).
  auto g = StrainField1D::sample([](double x) { return std::sin(x); }, n, 0.0, 2.0 * kPi, 0.0);
  const auto tau = tau_sc_1d(g, 1.0);
  double err = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = g.node(i);
    const double pv = oracle::periodic_pv([](double s) { return std::cos(s); }, x, 64);
    err = std::max(err, std::abs(tau[i] - (-pv)));
    CHECK(-pv == Approx(-kPi * std::sin(x)).scale(1.0).epsilon(1e-12));
    mean += tau[i];
  }
  CHECK(err < 1e-6);
  CHECK(std::abs(mean / n) < 1e-14);

  // gamma sampled from a trigonometric series with known derivative.
  auto series = [](double x) { return std::sin(x) + 0.3 * std::cos(3.0 * x) - 0.05 * std::sin(17.0 * x); };
  auto dseries = [](double x) { return std::cos(x) - 0.9 * std::sin(3.0 * x) - 0.85 * std::cos(17.0 * x); };
  auto rich = StrainField1D::sample(series, n, 0.0, 2.0 * kPi, 0.0);
  const auto tr = tau_sc_1d(rich, 2.0);
  double e2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    e2 = std::max(e2, std::abs(tr[i] + 2.0 * oracle::periodic_pv(dseries, rich.node(i), 64)));
  CHECK(e2 < 1e-6);
}

TEST_CASE("self-consistent stress basics") {
  auto c = StrainField1D::sample([](double) { return 0.4; }, 64, 0.0, 1.0, 0.0);
  for (double t : tau_sc_1d(c, 1.0)) CHECK(std::abs(t) < 1e-14);
  auto lin = StrainField1D::sample([](double x) { return -3.0 * x; }, 64, 0.0, 1.0, -3.0);
  for (double t : tau_sc_1d(lin, 1.0)) CHECK(std::abs(t) < 1e-12);

  auto a = wavy(64, 0.3), b = wavy(64, -0.1);
  StrainField1D combo = a;
  for (std::size_t i = 0; i < 64; ++i) combo.values[i] = 2.5 * a.values[i] + b.values[i];
  combo.cell_offset = 2.5 * a.cell_offset + b.cell_offset;
  const auto ta = tau_sc_1d(a, 1.0), tb = tau_sc_1d(b, 1.0), tc = tau_sc_1d(combo, 1.0);
  for (std::size_t i = 0; i < 64; ++i) CHECK(tc[i] == Approx(2.5 * ta[i] + tb[i]).scale(1.0).epsilon(1e-13));

  auto odd = StrainField1D::sample([](double) { return 0.0; }, 63, 0.0, 1.0, 0.0);
  CHECK_THROWS_AS(tau_sc_1d(odd, 1.0), InvalidArgument);
  auto open = c;
  open.periodic = false;
  CHECK_THROWS_AS(tau_sc_1d(open, 1.0), InvalidArgument);
}

TEST_CASE("discrete stress operator has nonnegative off-diagonal weights") {
  const std::size_t n = 32;
  SelfStress1D op(n, 1.0, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    StrainField1D e = StrainField1D::sample([](double) { return 0.0; }, n, 0.0, 1.0, 0.0);
    e.values[j] = 1.0;
    std::vector<double> col(n);
    op.compute(e, col);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j)
        CHECK(col[i] == Approx(-op.diagonal()).epsilon(1e-12));
      else
        CHECK(col[i] >= -1e-12);
    }
  }
}

TEST_CASE("flow rule adapters") {
  CaseAFlowRule a(2.0);
  CHECK(a.eval(0.5, 3.0) == Approx(0.75));
  const auto la = a.lipschitz(0.2, 1.0, -4.0, 3.0);
  CHECK(la.rho == Approx(2.0));
  CHECK(la.tau == Approx(0.5));

  TableFlowRule t(pinned_table());
  CHECK(t.table().rho_axis().front() == 0.0);
  CHECK(t.table().tau_axis().front() == -4.0);
  CHECK(t.eval(0.0, 3.5) == 0.0);
  CHECK(t.eval(1.0, 3.0) == Approx(0.5));
  CHECK(t.eval(1.0, -3.0) == Approx(-0.5));
  CHECK(t.eval(0.95, 2.0) == 0.0);
  CHECK(t.eval(1.05, 3.5) == Approx(0.5 * (0.5 + 1.5) * 1.05));
  const auto lt = t.lipschitz(0.95, 1.05, -2.0, 2.0);
  CHECK(lt.rho == 0.0);
  CHECK(lt.tau == 0.0);
  CHECK(t.lipschitz(0.95, 1.05, 0.0, 3.5).tau > 0.0);
  t.eval(2.0, 1.0);
  CHECK(t.clamp_count() == 1);

  auto broken = pinned_table();
  broken.set_failed(1, 2, true);
  CHECK_THROWS_AS(TableFlowRule{broken}, InvalidArgument);
}

TEST_CASE("single steps") {
  CaseAFlowRule f(1.0);
  auto g = StrainField1D::sample([](double x) { return -0.5 * x; }, 32, 0.0, 1.0, -0.5);
  const double dt = 0.002;
  const auto next = hj_step(g, f, 2.0, 1.0, dt);
  for (std::size_t i = 0; i < 32; ++i) CHECK(next.values[i] - g.values[i] == Approx(dt * 0.5 * 2.0).epsilon(1e-12));
  CHECK(hj_step(g, f, 2.0, 1.0, 0.0).values == g.values);

  TableFlowRule pinned(pinned_table());
  auto u = StrainField1D::sample([](double x) { return -x; }, 32, 0.0, 1.0, -1.0);
  const auto same = hj_step(u, pinned, 1.0, 1.0, 0.01);
  CHECK(sup_diff(same.values, u.values) == 0.0);

  auto w = wavy(64, 0.3);
  CHECK_THROWS_AS(hj_step(w, f, 1.0, 1.0, 1e-4, 0.0), NumericalAbort);
  CHECK_THROWS_AS(hj_step(w, f, 1.0, 1.0, 0.5), NumericalAbort);
}

TEST_CASE("uniform density moves at the Orowan rate") {
  MacroProblem p;
  const double rho = 0.25;  // one dislocation per four obstacle periods
  p.gamma0 = StrainField1D::sample([rho](double x) { return -rho * x; }, 64, 0.0, 4.0, -rho * 4.0);
  p.flow = std::make_shared<CaseAFlowRule>(1.0);
  p.tau_ext = 2.0;
  p.t_final = 1.0;
  p.snapshot_times = {0.25, 0.5};
  const auto sol = solve_macro(p);
  REQUIRE(sol.snapshots.size() == 4);
  CHECK(sol.snapshots[1].time == 0.25);
  CHECK(sol.snapshots.back().time == 1.0);
  for (std::size_t i = 0; i < 64; ++i)
    CHECK(sol.snapshots.back().field.values[i] - p.gamma0.values[i] == Approx(2.0 * rho).epsilon(1e-10));
}

TEST_CASE("pinned continuum stays put") {
  MacroProblem p;
  p.gamma0 = StrainField1D::sample([](double x) { return -x; }, 128, 0.0, 1.0, -1.0);
  p.flow = std::make_shared<TableFlowRule>(pinned_table());
  p.tau_ext = 2.0;  // below the table's threshold 2.5 at rho = 1
  p.t_final = 3.0;
  const auto sol = solve_macro(p);
  CHECK(sup_diff(sol.snapshots.back().field.values, p.gamma0.values) == 0.0);
}

TEST_CASE("mean density is conserved") {
  MacroProblem p;
  p.gamma0 = wavy(256, 0.4);
  p.flow = std::make_shared<CaseAFlowRule>(1.0);
  p.tau_ext = 1.0;
  p.t_final = 0.2;
  const auto sol = solve_macro(p);
  auto mean_rho = [](const StrainField1D& f) {
    double s = 0.0;
    for (double r : density_samples(f)) s += r;
    return s / static_cast<double>(f.size());
  };
  CHECK(std::abs(mean_rho(sol.snapshots.back().field) - mean_rho(p.gamma0)) < 1e-12);
  CHECK(sol.steps > 10);
  CHECK(sol.theta_max > 0.0);
  std::ostringstream os;
  write_snapshot_csv(os, sol.snapshots.back().field, 1.0);
  CHECK(os.str().rfind("x,gamma,rho,tau_sc\n", 0) == 0);
}

TEST_CASE("macro problem validation") {
  MacroProblem p;
  p.gamma0 = wavy(64, 0.2);
  CHECK_THROWS_AS(solve_macro(p), InvalidArgument);
  p.flow = std::make_shared<CaseAFlowRule>(1.0);
  p.snapshot_times = {2.0};
  CHECK_THROWS_AS(solve_macro(p), InvalidArgument);
  p.snapshot_times = {};
  p.t_final = 0.0;
  CHECK_THROWS_AS(solve_macro(p), InvalidArgument);
}

TEST_CASE("positions from strain") {
  auto lin = StrainField1D::sample([](double x) { return -x; }, 100, 0.0, 1.0, -1.0);
  const auto x = positions_from_strain(lin, 0.1, 1.0);
  REQUIRE(x.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(x[i] == Approx(static_cast<double>(i)).scale(1.0).epsilon(1e-9));

  auto flat = StrainField1D::sample([](double) { return 0.37; }, 16, 0.0, 1.0, 0.0);
  CHECK(positions_from_strain(flat, 0.1, 1.0).empty());

  // Floor quantization error bound on a curved profile.
  const double eps = 0.02;
  auto g = wavy(512, 0.5);
  const auto pos = positions_from_strain(g, eps, 1.0);
  CHECK(pos.size() == 50);
  for (int k = 0; k < 997; ++k) {
    const double xb = (k + 0.5) / 997.0;
    const double gx = -xb - 0.5 / (2.0 * kPi) * std::sin(2.0 * kPi * xb);
    double count = 0.0;
    for (double xi : pos) count += xi < xb / eps ? 1.0 : 0.0;
    CHECK(std::abs(-eps * count - gx) <= eps + 1e-12);
  }

  auto up = StrainField1D::sample([](double x) { return 2.0 * x; }, 64, 0.0, 1.0, 2.0);
  CHECK_THROWS_AS(positions_from_strain(up, 0.1, 1.0), InvalidArgument);
  CHECK(positions_from_strain(up, 0.1, 1.0, Orientation::kIncreasing).size() == 20);
  auto bumpy = wavy(64, 3.0);
  CHECK_THROWS_AS(positions_from_strain(bumpy, 0.1, 1.0), InvalidArgument);
  CHECK_THROWS_AS(positions_from_strain(lin, 0.3, 1.0), InvalidArgument);
  CHECK_THROWS_AS(positions_from_strain(lin, 0.0, 1.0), InvalidArgument);
}

TEST_CASE("small convergence study") {
  ConvergenceSetup s;
  s.gamma0 = wavy(256, 0.3);
  s.flow = std::make_shared<CaseAFlowRule>(1.0);
  s.tau_ext = 1.0;
  s.t_final = 0.1;
  s.compare_times = {0.05};
  const std::vector<double> eps{0.1, 0.05};
  const auto r = convergence_experiment(s, eps);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].dislocations == 10);
  CHECK(r.rows[1].dislocations == 20);
  CHECK(r.rows[0].error <= 2.0 * 0.1);
  CHECK(r.macro_change > 0.05);
  CHECK(r.rows[1].micro_velocity == Approx(1.0).epsilon(1e-9));

  const std::vector<double> again{0.05};
  s.workers = 2;
  CHECK(convergence_experiment(s, again).rows[0].error == r.rows[1].error);

  const std::vector<double> dup{0.05, 0.05};
  CHECK_THROWS_AS(convergence_experiment(s, dup), InvalidArgument);
  const std::vector<double> none;
  CHECK_THROWS_AS(convergence_experiment(s, none), InvalidArgument);
}

}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "msfv/rt0.hpp"
#include "oracles.hpp"

using namespace msfv;

namespace {

FineGrid grid(int nx, int ny, double lx = 1.0, double ly = 1.0) {
  return build_hierarchy(nx, ny, 1, 1, lx, ly).fine();
}

PermField random_k(int nx, int ny, std::uint64_t seed, double sigma = 1.0) {
  PermField k(nx, ny);
  k.values = oracle::white_lognormal(nx * ny, sigma, seed);
  return k;
}

// Discrete L2 error of the flux density against p = g(x) g(y) with
// g(x) = x^2 (1 - x)^2 on the unit square; g' vanishes at both ends so the
// normal flux is zero on the boundary.
double manufactured_flux_error(int n) {
  const FineGrid g = grid(n, n);
  const double h = 1.0 / n;
  auto dg = [](double x) { return 2 * x - 6 * x * x + 4 * x * x * x; };
  auto big_g = [](double x) { return x * x * x / 3 - x * x * x * x / 2 + std::pow(x, 5) / 5; };
  auto cell_int = [&](int i) { return big_g((i + 1) * h) - big_g(i * h); };
  auto jump = [&](int i) { return dg((i + 1) * h) - dg(i * h); };
  std::vector<double> f(g.n_cells());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      f[g.cell(i, j)] = -(jump(i) * cell_int(j) + cell_int(i) * jump(j)) / (h * h);
  const DarcySolution sol = solve_darcy(g, PermField(n, n), f, LinearSolverKind::direct);
  double err = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= n; ++i) {
      const double exact = -dg(i * h) * cell_int(j);
      err += std::pow((sol.velocity.fx(i, j) - exact) / h, 2) * h * h;
    }
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i < n; ++i) {
      const double exact = -dg(j * h) * cell_int(i);
      err += std::pow((sol.velocity.fy(i, j) - exact) / h, 2) * h * h;
    }
  return std::sqrt(err);
}

} // namespace

TEST(Darcy, ZeroSourceGivesZeroSolution) {
  const FineGrid g = grid(6, 5);
  const DarcySolution s = solve_darcy(g, PermField(6, 5), std::vector<double>(30, 0.0));
  for (double p : s.pressure) EXPECT_EQ(p, 0.0);
  for (double v : s.velocity.x_values()) EXPECT_EQ(v, 0.0);
  for (double v : s.velocity.y_values()) EXPECT_EQ(v, 0.0);
}

TEST(Darcy, ManufacturedSolutionConverges) {
  double prev = manufactured_flux_error(8);
  for (int n : {16, 32, 64}) {
    const double e = manufactured_flux_error(n);
    EXPECT_GE(prev / e, 1.8) << "n=" << n;
    prev = e;
  }
}

TEST(Darcy, FiveSpotFluxThroughSeparatingCurves) {
  const FineGrid g = grid(20, 20);
  const PermField k = random_k(20, 20, 5);
  const Wells w = Wells::quarter_five_spot(g, 1.0);
  const DarcySolution s = solve_darcy(g, k, w.source_density(g), LinearSolverKind::direct);
  const FineVelocity& v = s.velocity;
  for (int cut = 1; cut < 20; ++cut) {
    double vertical = 0.0, horizontal = 0.0;
    for (int t = 0; t < 20; ++t) {
      vertical += v.fx(cut, t);
      horizontal += v.fy(t, cut);
    }
    EXPECT_NEAR(vertical, 1.0, 1e-8);
    EXPECT_NEAR(horizontal, 1.0, 1e-8);
  }
  // Staircase: the cells with i + j < m.
  for (int m = 1; m < 39; ++m) {
    double out = 0.0;
    for (int j = 0; j < 20; ++j)
      for (int i = 0; i < 20; ++i) {
        if (i + j >= m) continue;
        if (i + 1 < 20 && i + 1 + j >= m) out += v.fx(i + 1, j);
        if (j + 1 < 20 && i + j + 1 >= m) out += v.fy(i, j + 1);
      }
    EXPECT_NEAR(out, 1.0, 1e-8) << "m=" << m;
  }
}

TEST(Darcy, HomogeneousFiveSpotIsDiagonallySymmetric) {
  const FineGrid g = grid(20, 20);
  const FineVelocity v = single_phase_global(g, PermField(20, 20), Wells::quarter_five_spot(g, 1.0));
  for (int j = 0; j < 20; ++j)
    for (int i = 0; i <= 20; ++i) EXPECT_NEAR(v.fx(i, j), v.fy(j, i), 1e-8);
}

TEST(Darcy, NoWellsGivesZeroField) {
  const FineGrid g = grid(8, 8);
  Wells w = Wells::quarter_five_spot(g, 0.0);
  const FineVelocity v = single_phase_global(g, PermField(8, 8), w);
  for (double x : v.x_values()) EXPECT_EQ(x, 0.0);
  for (double y : v.y_values()) EXPECT_EQ(y, 0.0);
}

TEST(Darcy, ChannelFluxConcentratesInTopDecile) {
  const FineGrid g = grid(60, 220, 60.0 / 220.0, 1.0);
  const PermField k = channelized_field(60, 220, 100.0, 2);
  const FineVelocity v = single_phase_global(g, k, Wells::quarter_five_spot(g, 1.0));
  std::vector<double> sorted = k.values;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() * 9 / 10, sorted.end());
  const double p90 = sorted[sorted.size() * 9 / 10];
  const int j = 110;
  double total = 0.0, top = 0.0;
  for (int i = 0; i < 60; ++i) {
    const double f = std::abs(v.fy(i, j));
    total += f;
    if (k(i, j - 1) >= p90 && k(i, j) >= p90) top += f;
  }
  EXPECT_GE(top / total, 0.6);
}

TEST(Darcy, EqualsFivePointFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const int nx = 12, ny = 9;
    const FineGrid g = grid(nx, ny, 1.5, 0.75);
    const PermField k = seed == 1 ? PermField(nx, ny, 3.0) : random_k(nx, ny, seed, 1.5);
    std::mt19937 rng(static_cast<unsigned>(seed));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> f(g.n_cells());
    for (double& x : f) x = u(rng);
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / f.size();
    for (double& x : f) x -= mean;
    std::vector<double> integrals(f);
    for (double& x : integrals) x *= g.cell_area();
    const DarcySolution s = solve_darcy(g, k, f, LinearSolverKind::direct);
    const std::vector<double> ref = oracle::five_point(nx, ny, g.hx, g.hy, k.values, integrals);
    for (int c = 0; c < g.n_cells(); ++c) EXPECT_NEAR(s.pressure[c], ref[c], 1e-9);
  }
}

TEST(Darcy, IterativeAndDirectAgree) {
  const FineGrid g = grid(30, 30);
  const PermField k = random_k(30, 30, 9);
  const Wells w = Wells::quarter_five_spot(g, 1.0);
  SolveOptions opt;
  opt.tol = 1e-12;
  const DarcySolution a = solve_darcy(g, k, w.source_density(g), LinearSolverKind::cg, opt);
  const DarcySolution b = solve_darcy(g, k, w.source_density(g), LinearSolverKind::direct);
  for (int c = 0; c < g.n_cells(); ++c) EXPECT_NEAR(a.pressure[c], b.pressure[c], 1e-8);
  EXPECT_LE(max_conservation_residual(g, b.velocity, w.source_density(g)), 1e-12);
  EXPECT_LE(max_conservation_residual(g, a.velocity, w.source_density(g)), 1e-8);
}

TEST(Darcy, RejectsIncompatibleSource) {
  const FineGrid g = grid(4, 4);
  std::vector<double> f(16, 0.0);
  f[3] = 1.0;
  EXPECT_THROW(solve_darcy(g, PermField(4, 4), f), CompatibilityError);
  EXPECT_THROW(solve_darcy(g, PermField(3, 4), std::vector<double>(16, 0.0)), ConfigError);
}

TEST(Neumann, UniformFlowIsExact) {
  const FineGrid g = grid(8, 5);
  const CellRect r = g.all();
  NeumannData bc = NeumannData::no_flow(r);
  std::fill(bc.left.begin(), bc.left.end(), 0.2);
  std::fill(bc.right.begin(), bc.right.end(), 0.2);
  const NeumannSolution s = solve_neumann(g, PermField(8, 5).values, r, bc, {});
  for (double v : s.velocity.x_values()) EXPECT_NEAR(v, 0.2, 1e-14);
  for (double v : s.velocity.y_values()) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(Neumann, CrossSectionsCarryTheInflow) {
  const FineGrid g = grid(16, 16);
  const PermField k = random_k(16, 16, 4, 2.0);
  const CellRect r{3, 13, 2, 10};
  NeumannData bc = NeumannData::no_flow(r);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double in = 0.0, out = 0.0;
  for (double& v : bc.left) in += v = u(rng);
  for (double& v : bc.right) out += v = u(rng);
  for (double& v : bc.left) v /= in;
  for (double& v : bc.right) v /= out;
  const NeumannSolution s = solve_neumann(g, k.values, r, bc, {});
  for (int i = r.x0; i <= r.x1; ++i) {
    double sum = 0.0;
    for (int j = r.y0; j < r.y1; ++j) sum += s.velocity.fx(i, j);
    EXPECT_NEAR(sum, 1.0, 1e-10);
  }
  EXPECT_LE(max_conservation_residual(g, s.velocity, {}), 1e-12);
}

TEST(Neumann, BoundaryFluxesReproducedExactly) {
  const FineGrid g = grid(12, 12);
  const PermField k = random_k(12, 12, 6);
  const CellRect r{4, 8, 4, 8};
  NeumannData bc = NeumannData::no_flow(r);
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto* side : {&bc.left, &bc.right, &bc.bottom, &bc.top})
    for (double& v : *side) v = u(rng);
  // A point source plus a uniform part balancing the boundary outflow.
  std::vector<double> f(r.size(), 0.0);
  f[5] = 3.0;
  const double gap = bc.net_outflow() - 3.0 * g.cell_area();
  for (double& x : f) x += gap / (r.size() * g.cell_area());
  const NeumannSolution s = solve_neumann(g, k.values, r, bc, f);
  for (int j = r.y0; j < r.y1; ++j) {
    EXPECT_EQ(s.velocity.fx(r.x0, j), bc.left[j - r.y0]);
    EXPECT_EQ(s.velocity.fx(r.x1, j), bc.right[j - r.y0]);
  }
  for (int i = r.x0; i < r.x1; ++i) {
    EXPECT_EQ(s.velocity.fy(i, r.y0), bc.bottom[i - r.x0]);
    EXPECT_EQ(s.velocity.fy(i, r.y1), bc.top[i - r.x0]);
  }
  std::vector<double> global_f(g.n_cells(), 0.0);
  for (int j = r.y0; j < r.y1; ++j)
    for (int i = r.x0; i < r.x1; ++i) global_f[g.cell(i, j)] = f[(j - r.y0) * 4 + (i - r.x0)];
  EXPECT_LE(max_conservation_residual(g, s.velocity, global_f), 1e-12);
}

TEST(Neumann, IncompatibleDataReportsResidual) {
  const FineGrid g = grid(4, 4);
  NeumannData bc = NeumannData::no_flow(g.all());
  bc.left[0] = 1.0;
  try {
    solve_neumann(g, PermField(4, 4).values, g.all(), bc, {});
    FAIL() << "expected CompatibilityError";
  } catch (const CompatibilityError& e) {
    EXPECT_NEAR(std::abs(e.residual()), 1.0, 1e-14);
  }
}

TEST(FineVelocity, FluxIsAntisymmetric) {
  FineVelocity v(CellRect{0, 3, 0, 3});
  v.fx(1, 1) = 2.5;
  v.fy(2, 2) = -1.5;
  EXPECT_EQ(v.flux_between(0, 1, 1, 1), 2.5);
  EXPECT_EQ(v.flux_between(1, 1, 0, 1), -2.5);
  EXPECT_EQ(v.flux_between(2, 1, 2, 2), -1.5);
  EXPECT_EQ(v.flux_between(2, 2, 2, 1), 1.5);
  EXPECT_THROW(v.flux_between(0, 0, 1, 1), ConfigError);
  EXPECT_EQ(v.fx_or_zero(7, 7), 0.0);
}

TEST(Wells, SourceDensityBalances) {
  const FineGrid g = grid(5, 4, 2.0, 1.0);
  const Wells w = Wells::quarter_five_spot(g, 3.0);
  const std::vector<double> f = w.source_density(g);
  EXPECT_EQ(w.injector, 0);
  EXPECT_EQ(w.producer, 19);
  EXPECT_DOUBLE_EQ(f[0] * g.cell_area(), 3.0);
  EXPECT_DOUBLE_EQ(std::accumulate(f.begin(), f.end(), 0.0), 0.0);
  EXPECT_THROW((Wells{2, 2, 1.0}.source_density(g)), ConfigError);
}

TEST(Transmissibility, HarmonicMean) {
  const FineGrid g = grid(2, 2, 2.0, 1.0); // hx = 1, hy = 0.5
  EXPECT_DOUBLE_EQ(x_transmissibility(g, 1.0, 3.0), 0.5 * 2.0 * 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(y_transmissibility(g, 2.0, 2.0), 1.0 / 0.5 * 2.0);
}

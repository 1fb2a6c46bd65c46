#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "msfv/transport.hpp"
#include "oracles.hpp"

using namespace msfv;

namespace {

FineGrid grid(int nx, int ny) { return build_hierarchy(nx, ny, 1, 1, 1.0, 1.0).fine(); }

// Uniform left-to-right flux q through a single row of cells.
FineVelocity row_flow(int n, double q) {
  FineVelocity v(n, 1);
  for (int i = 1; i < n; ++i) v.fx(i, 0) = q;
  return v;
}

double water_volume(const FineGrid& g, const std::vector<double>& s) {
  return std::accumulate(s.begin(), s.end(), 0.0) * g.cell_area();
}

struct FiveSpot {
  FineGrid g;
  PermField k;
  Wells wells;
  FineVelocity v;
};

FiveSpot five_spot(int n, std::uint64_t seed, double sigma = 1.0) {
  FiveSpot fs{grid(n, n), PermField(n, n), {}, {}};
  fs.k.values = oracle::white_lognormal(n * n, sigma, seed);
  fs.wells = Wells::quarter_five_spot(fs.g, 1.0);
  fs.v = solve_darcy(fs.g, fs.k, fs.wells.source_density(fs.g), LinearSolverKind::direct).velocity;
  return fs;
}

} // namespace

TEST(FractionalFlow, ValuesAndEndpoints) {
  const FluidModel fm{0.1, 1.0};
  EXPECT_NEAR(fractional_flow(0.5, fm).f, 10.0 / 11.0, 1e-15);
  EXPECT_EQ(fractional_flow(0.0, fm).f, 0.0);
  EXPECT_EQ(fractional_flow(1.0, fm).f, 1.0);
  EXPECT_EQ(fractional_flow(0.0, fm).df, 0.0);
  EXPECT_EQ(fractional_flow(1.0, fm).df, 0.0);
}

TEST(FractionalFlow, DerivativeMatchesFiniteDifference) {
  for (const FluidModel fm : {FluidModel{0.1, 1.0}, FluidModel{1.0, 1.0}, FluidModel{1.0, 0.2}}) {
    for (double s = 0.01; s < 1.0; s += 0.0137) {
      const double h = 1e-6;
      const double fd = (fractional_flow(s + h, fm).f - fractional_flow(s - h, fm).f) / (2 * h);
      EXPECT_NEAR(fractional_flow(s, fm).df, fd, 1e-6);
    }
  }
}

TEST(FractionalFlow, MonotoneAndBounded) {
  const FluidModel fm;
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double f = fractional_flow(i / 1000.0, fm).f;
    EXPECT_GE(f, prev);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    prev = f;
  }
  const auto [s_star, dmax] = max_fractional_derivative(fm);
  for (int i = 0; i <= 1000; ++i) EXPECT_LE(fractional_flow(i / 1000.0, fm).df, dmax * (1 + 1e-9));
  EXPECT_GT(s_star, 0.0);
  EXPECT_LT(s_star, 1.0);
}

TEST(ExplicitStep, InjectorCellFillsFirst) {
  const FineGrid g = grid(5, 1);
  const FineVelocity v = row_flow(5, 1.0);
  const Wells w{g.cell(0, 0), g.cell(4, 0), 1.0};
  const FluidModel fm;
  const double dt = 0.01;
  const SaturationState next = step_explicit(g, {std::vector<double>(5, 0.0), 0.0}, v, dt, fm, &w);
  EXPECT_NEAR(next.s[0], dt / g.cell_area(), 1e-15);
  for (int i = 1; i < 5; ++i) EXPECT_EQ(next.s[i], 0.0);
  EXPECT_DOUBLE_EQ(next.t, dt);
}

TEST(ExplicitStep, ConservesWater) {
  const FiveSpot fs = five_spot(12, 4);
  const FluidModel fm;
  const double dt = 0.5 * explicit_dt_limit(fs.g, fs.v, &fs.wells, fm);
  SaturationState st{std::vector<double>(fs.g.n_cells(), 0.0), 0.0};
  for (int n = 0; n < 50; ++n) {
    const double before = water_volume(fs.g, st.s);
    const double produced = dt * fractional_flow(st.s[fs.wells.producer], fm).f;
    st = step_explicit(fs.g, st, fs.v, dt, fm, &fs.wells);
    EXPECT_NEAR(water_volume(fs.g, st.s) - before, dt - produced, 1e-13);
    for (double s : st.s) {
      EXPECT_GE(s, -1e-14);
      EXPECT_LE(s, 1.0 + 1e-14);
    }
  }
}

TEST(ExplicitStep, CflViolationThrows) {
  const FineGrid g = grid(5, 1);
  const FineVelocity v = row_flow(5, 1.0);
  const FluidModel fm;
  const double limit = explicit_dt_limit(g, v, nullptr, fm);
  ASSERT_TRUE(std::isfinite(limit));
  try {
    step_explicit(g, {std::vector<double>(5, 0.2), 0.0}, v, 1.01 * limit, fm);
    FAIL() << "expected CflViolation";
  } catch (const CflViolation& e) {
    EXPECT_DOUBLE_EQ(e.dt_max(), limit);
  }
}

TEST(ImplicitStep, ZeroVelocityLeavesStateUnchanged) {
  const FineGrid g = grid(6, 4);
  std::vector<double> s(24);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (double& x : s) x = u(rng);
  StepReport rep;
  const SaturationState next = step_implicit(g, {s, 0.0}, FineVelocity(6, 4), 10.0, FluidModel{}, nullptr, {}, &rep);
  EXPECT_EQ(next.s, s);
  EXPECT_LE(rep.newton_iterations, 1);
  EXPECT_EQ(rep.halvings, 0);
}

// Backward Euler and forward Euler agree to first order: the gap shrinks
// like dt^2 per step.
TEST(ImplicitStep, AgreesWithExplicitForSmallSteps) {
  const FiveSpot fs = five_spot(10, 8);
  const FluidModel fm;
  std::vector<double> s0(fs.g.n_cells());
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (double& x : s0) x = u(rng);
  NewtonOptions opt;
  opt.tol = 1e-13;
  auto gap = [&](double dt) {
    const auto a = step_implicit(fs.g, {s0, 0.0}, fs.v, dt, fm, &fs.wells, opt);
    const auto b = step_explicit(fs.g, {s0, 0.0}, fs.v, dt, fm, &fs.wells);
    double m = 0.0;
    for (std::size_t i = 0; i < s0.size(); ++i) m = std::max(m, std::abs(a.s[i] - b.s[i]));
    return m;
  };
  const double dt = 0.2 * explicit_dt_limit(fs.g, fs.v, &fs.wells, fm);
  const double g1 = gap(dt), g2 = gap(0.5 * dt);
  EXPECT_GT(g1 / g2, 3.5);
  EXPECT_LT(g1 / g2, 4.5);
}

TEST(ImplicitStep, LargeStepsStayBoundedAndConservative) {
  const FiveSpot fs = five_spot(20, 3, 1.5);
  const FluidModel fm;
  const double dt = 5.0 * explicit_dt_limit(fs.g, fs.v, &fs.wells, fm);
  SaturationState st{std::vector<double>(fs.g.n_cells(), 0.0), 0.0};
  for (int n = 0; n < 40; ++n) {
    const double before = water_volume(fs.g, st.s);
    StepReport rep;
    st = step_implicit(fs.g, st, fs.v, dt, fm, &fs.wells, {}, &rep);
    EXPECT_NEAR(water_volume(fs.g, st.s) - before, rep.water_injected - rep.water_produced, 1e-10);
    EXPECT_NEAR(rep.water_injected, dt, 1e-15);
    for (double s : st.s) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
  EXPECT_GT(st.s[fs.wells.injector], 0.5);
}

TEST(ImplicitStep, ConvergedStepHasSmallResidual) {
  const FiveSpot fs = five_spot(15, 11);
  const FluidModel fm;
  const double dt = 3.0 * explicit_dt_limit(fs.g, fs.v, &fs.wells, fm);
  const std::vector<double> s0(fs.g.n_cells(), 0.0);
  const auto next = step_implicit(fs.g, {s0, 0.0}, fs.v, dt, fm, &fs.wells);
  const auto r = implicit_residual(fs.g, s0, next.s, fs.v, dt, fm, &fs.wells);
  double m = 0.0;
  for (double x : r) m = std::max(m, std::abs(x));
  EXPECT_LE(m, 1e-9);
}

TEST(ImplicitJacobian, MatchesFiniteDifference) {
  const FiveSpot fs = five_spot(5, 2);
  const FluidModel fm;
  std::vector<double> s(fs.g.n_cells());
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (double& x : s) x = u(rng);
  const std::vector<double> s_old(s.size(), 0.3);
  const double dt = 0.01;
  const Eigen::MatrixXd j = Eigen::MatrixXd(implicit_jacobian(fs.g, s, fs.v, dt, fm, &fs.wells));
  const double h = 1e-7;
  for (std::size_t c = 0; c < s.size(); ++c) {
    auto sp = s, sm = s;
    sp[c] += h;
    sm[c] -= h;
    const auto rp = implicit_residual(fs.g, s_old, sp, fs.v, dt, fm, &fs.wells);
    const auto rm = implicit_residual(fs.g, s_old, sm, fs.v, dt, fm, &fs.wells);
    for (std::size_t r = 0; r < s.size(); ++r)
      EXPECT_NEAR(j(r, c), (rp[r] - rm[r]) / (2 * h), 1e-6) << r << "," << c;
  }
}

TEST(ImplicitStep, MirrorSymmetricFieldGivesMirrorSaturation) {
  const int n = 12;
  const FineGrid g = grid(n, n);
  PermField k(n, n);
  const auto raw = oracle::white_lognormal(n * n, 1.0, 19);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) k.values[g.cell(i, j)] = raw[g.cell(std::min(i, j), std::max(i, j))];
  const Wells w = Wells::quarter_five_spot(g, 1.0);
  const FineVelocity v = solve_darcy(g, k, w.source_density(g), LinearSolverKind::direct).velocity;
  const FluidModel fm;
  SaturationState st{std::vector<double>(g.n_cells(), 0.0), 0.0};
  for (int s = 0; s < 10; ++s) st = step_implicit(g, st, v, 0.03, fm, &w);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) EXPECT_NEAR(st.s[g.cell(i, j)], st.s[g.cell(j, i)], 1e-10);
}

namespace {

// Divergence-free circulation around the centre of a 2x2 grid.
FineVelocity circulation(double q) {
  FineVelocity v(2, 2);
  v.fx(1, 0) = q;  // (0,0) -> (1,0)
  v.fy(1, 1) = q;  // (1,0) -> (1,1)
  v.fx(1, 1) = -q; // (1,1) -> (0,1)
  v.fy(0, 1) = -q; // (0,1) -> (0,0)
  return v;
}

} // namespace

TEST(UpwindGraph, CirculationFormsOneBlock) {
  const FineGrid g = grid(2, 2);
  const detail::UpwindGraph graph(g, circulation(1.0));
  const auto blocks = graph.blocks();
  ASSERT_EQ(blocks.size(), 1u);
  EXPECT_EQ(blocks[0].size(), 4u);
}

TEST(UpwindGraph, BlocksFollowTheirUpstream) {
  const FiveSpot fs = five_spot(10, 6);
  const detail::UpwindGraph graph(fs.g, fs.v);
  const auto blocks = graph.blocks();
  std::vector<int> position(fs.g.n_cells(), -1);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (int c : blocks[b]) position[c] = static_cast<int>(b);
  for (int c : position) EXPECT_GE(c, 0);
  for (int a = 0; a < graph.n; ++a)
    for (int k = 0; k < graph.count[a]; ++k)
      if (graph.flux[4 * a + k] > 0.0) {
        EXPECT_LE(position[a], position[graph.nb[4 * a + k]]);
      }
}

TEST(ImplicitStep, CirculationSolvedAsBlock) {
  const FineGrid g = grid(2, 2);
  const FineVelocity v = circulation(2.0);
  const FluidModel fm;
  const std::vector<double> s0 = {1.0, 0.0, 0.0, 0.0};
  StepReport rep;
  const auto next = step_implicit(g, {s0, 0.0}, v, 1.0, fm, nullptr, {}, &rep);
  EXPECT_NEAR(std::accumulate(next.s.begin(), next.s.end(), 0.0), 1.0, 1e-12);
  const auto r = implicit_residual(g, s0, next.s, v, 1.0, fm);
  for (double x : r) EXPECT_LE(std::abs(x), 1e-9);
  EXPECT_GT(rep.newton_iterations, 1);
}

TEST(ImplicitStep, ExhaustedBudgetHalvesThenFails) {
  const FineGrid g = grid(2, 2);
  const FineVelocity v = circulation(50.0);
  NewtonOptions opt;
  opt.max_iter = 1;
  Diagnostics diag;
  StepReport rep;
  EXPECT_THROW(step_implicit(g, {{1.0, 0.0, 0.0, 0.0}, 0.0}, v, 1.0, FluidModel{}, nullptr, opt, &rep, &diag),
               NumericalError);
  EXPECT_GE(rep.halvings, opt.max_halvings);
  ASSERT_GT(diag.size(), 0u);
  EXPECT_NE(diag.events().front().find("halving dt"), std::string::npos);
}

TEST(ImplicitStep, RejectsNonPositiveStep) {
  const FineGrid g = grid(2, 2);
  EXPECT_THROW(step_implicit(g, {{0, 0, 0, 0}, 0.0}, FineVelocity(2, 2), 0.0, FluidModel{}), ConfigError);
  EXPECT_THROW(step_implicit(g, {{0, 0, 0, 0}, 0.0}, FineVelocity(2, 2), 1.0, FluidModel{0.0, 1.0}), ConfigError);
}

TEST(ImplicitStep, NonFiniteVelocityIsNumericalFailure) {
  const FineGrid g = grid(3, 1);
  FineVelocity v = row_flow(3, 1.0);
  v.fx(2, 0) = std::nan("");
  Diagnostics diag;
  EXPECT_THROW(step_implicit(g, {{0.5, 0.5, 0.5}, 0.0}, v, 0.1, FluidModel{}, nullptr, {}, nullptr, &diag),
               NumericalError);
  ASSERT_GT(diag.size(), 0u);
  EXPECT_NE(diag.events().front().find("non-finite"), std::string::npos);
}

TEST(FluidModel, RejectsOverflowingMobility) {
  EXPECT_THROW((FluidModel{1e-320, 1.0}.validate()), ConfigError);
  EXPECT_THROW((FluidModel{0.1, -1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((FluidModel{1e-6, 1e6}.validate()));
}

#ifndef MSFV_RT0_HPP
#define MSFV_RT0_HPP

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "msfv/error.hpp"
#include "msfv/fields.hpp"
#include "msfv/grid.hpp"
#include "msfv/solvers.hpp"

namespace msfv {

/// Signed fluxes on the edges of a rectangle of fine cells, in global
/// indices. x-edge (i, j) separates cells (i-1, j) and (i, j) and carries
/// flux in +x; y-edge (i, j) separates (i, j-1) and (i, j) and carries flux
/// in +y. Edges on the rectangle boundary are stored too.
class FineVelocity {
public:
  FineVelocity() = default;
  explicit FineVelocity(CellRect rect)
      : rect_(rect),
        x_(static_cast<std::size_t>(rect.width() + 1) * rect.height(), 0.0),
        y_(static_cast<std::size_t>(rect.width()) * (rect.height() + 1), 0.0) {}
  FineVelocity(int nx, int ny) : FineVelocity(CellRect{0, nx, 0, ny}) {}

  const CellRect& rect() const noexcept { return rect_; }
  int nx() const noexcept { return rect_.width(); }
  int ny() const noexcept { return rect_.height(); }

  double& fx(int i, int j) { return x_[xi(i, j)]; }
  double fx(int i, int j) const { return x_[xi(i, j)]; }
  double& fy(int i, int j) { return y_[yi(i, j)]; }
  double fy(int i, int j) const { return y_[yi(i, j)]; }

  bool has_x_edge(int i, int j) const noexcept {
    return i >= rect_.x0 && i <= rect_.x1 && j >= rect_.y0 && j < rect_.y1;
  }
  bool has_y_edge(int i, int j) const noexcept {
    return i >= rect_.x0 && i < rect_.x1 && j >= rect_.y0 && j <= rect_.y1;
  }
  /// Zero outside the stored rectangle.
  double fx_or_zero(int i, int j) const { return has_x_edge(i, j) ? fx(i, j) : 0.0; }
  double fy_or_zero(int i, int j) const { return has_y_edge(i, j) ? fy(i, j) : 0.0; }

  std::vector<double>& x_values() noexcept { return x_; }
  const std::vector<double>& x_values() const noexcept { return x_; }
  std::vector<double>& y_values() noexcept { return y_; }
  const std::vector<double>& y_values() const noexcept { return y_; }

  /// Flux leaving cell (ia, ja) into the face-neighbour (ib, jb).
  double flux_between(int ia, int ja, int ib, int jb) const {
    if (ja == jb && ib == ia + 1) return fx(ib, ja);
    if (ja == jb && ib == ia - 1) return -fx(ia, ja);
    if (ia == ib && jb == ja + 1) return fy(ia, jb);
    if (ia == ib && jb == ja - 1) return -fy(ia, ja);
    throw ConfigError("flux_between: cells are not face neighbours");
  }

  /// Outward flux of cell (i, j): right + top - left - bottom.
  double net_outflow(int i, int j) const {
    return fx(i + 1, j) - fx(i, j) + fy(i, j + 1) - fy(i, j);
  }

  FineVelocity& operator+=(const FineVelocity& o) {
    for (std::size_t k = 0; k < x_.size(); ++k) x_[k] += o.x_[k];
    for (std::size_t k = 0; k < y_.size(); ++k) y_[k] += o.y_[k];
    return *this;
  }

private:
  std::size_t xi(int i, int j) const noexcept {
    return static_cast<std::size_t>(j - rect_.y0) * (rect_.width() + 1) + (i - rect_.x0);
  }
  std::size_t yi(int i, int j) const noexcept {
    return static_cast<std::size_t>(j - rect_.y0) * rect_.width() + (i - rect_.x0);
  }

  CellRect rect_;
  std::vector<double> x_, y_;
};

/// Two-point transmissibilities from harmonic averaging of the cell
/// coefficient. This is lowest-order Raviart-Thomas on rectangles with the
/// trapezoidal (lumped) mass matrix.
inline double x_transmissibility(const FineGrid& g, double c_left, double c_right) {
  return g.hy / (0.5 * g.hx / c_left + 0.5 * g.hx / c_right);
}
inline double y_transmissibility(const FineGrid& g, double c_below, double c_above) {
  return g.hx / (0.5 * g.hy / c_below + 0.5 * g.hy / c_above);
}

/// Prescribed fluxes on the four sides of a rectangle, each in the global
/// +x / +y direction (not outward). Sizes: left/right = height,
/// bottom/top = width.
struct NeumannData {
  std::vector<double> left, right, bottom, top;

  static NeumannData no_flow(const CellRect& r) {
    return {std::vector<double>(r.height(), 0.0), std::vector<double>(r.height(), 0.0),
            std::vector<double>(r.width(), 0.0), std::vector<double>(r.width(), 0.0)};
  }
  double net_outflow() const {
    auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    return sum(right) - sum(left) + sum(top) - sum(bottom);
  }
};

enum class LinearSolverKind { direct, cg };

struct NeumannOptions {
  LinearSolverKind solver = LinearSolverKind::direct;
  SolveOptions cg;
  /// Relative tolerance on |sum(source) - net boundary outflow|.
  double compat_tol = 1e-10;
  /// Shift the returned pressure to zero mean (else the pinned cell is 0).
  bool zero_mean = true;
};

struct NeumannSolution {
  std::vector<double> pressure; // rect-local, row-major
  FineVelocity velocity;
};

/// Mixed (two-point) solve of div(u) = f, u = -c grad p on a rectangle with
/// Neumann data. `coeff` is indexed by global fine cell, `source` holds
/// rect-local source densities (empty means zero). Boundary fluxes are
/// copied to the result unchanged; the first cell of the rectangle is pinned.
inline NeumannSolution solve_neumann(const FineGrid& g, std::span<const double> coeff,
                                     const CellRect& rect, const NeumannData& bc,
                                     std::span<const double> source,
                                     const NeumannOptions& opt = {}) {
  const int w = rect.width(), h = rect.height(), n = rect.size();
  if (n <= 0) throw ConfigError("solve_neumann: empty rectangle");
  if (static_cast<int>(coeff.size()) != g.n_cells())
    throw ConfigError("solve_neumann: coefficient size does not match the fine grid");
  if (static_cast<int>(bc.left.size()) != h || static_cast<int>(bc.right.size()) != h ||
      static_cast<int>(bc.bottom.size()) != w || static_cast<int>(bc.top.size()) != w)
    throw ConfigError("solve_neumann: boundary data size does not match the rectangle");
  if (!source.empty() && static_cast<int>(source.size()) != n)
    throw ConfigError("solve_neumann: source size does not match the rectangle");

  const double area = g.cell_area();
  double src_total = 0.0, scale = 0.0;
  for (double s : source) {
    src_total += s * area;
    scale += std::abs(s) * area;
  }
  for (const auto* side : {&bc.left, &bc.right, &bc.bottom, &bc.top})
    for (double v : *side) scale += std::abs(v);
  const double mismatch = src_total - bc.net_outflow();
  if (std::abs(mismatch) > opt.compat_tol * std::max(scale, 1e-300))
    throw CompatibilityError("incompatible Neumann data: source - boundary outflow = " +
                                 std::to_string(mismatch),
                             mismatch);

  auto local = [&](int i, int j) { return (j - rect.y0) * w + (i - rect.x0); };
  auto c_at = [&](int i, int j) { return coeff[static_cast<std::size_t>(g.cell(i, j))]; };

  // Unknowns: all cells except local 0, shifted down by one.
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(5) * n);
  Vector rhs = Vector::Zero(n - 1);
  auto couple = [&](int a, int b, double t) {
    if (a > 0) entries.emplace_back(a - 1, a - 1, t);
    if (b > 0) entries.emplace_back(b - 1, b - 1, t);
    if (a > 0 && b > 0) {
      entries.emplace_back(a - 1, b - 1, -t);
      entries.emplace_back(b - 1, a - 1, -t);
    }
  };
  for (int j = rect.y0; j < rect.y1; ++j)
    for (int i = rect.x0; i < rect.x1; ++i) {
      const int a = local(i, j);
      if (i + 1 < rect.x1) couple(a, local(i + 1, j), x_transmissibility(g, c_at(i, j), c_at(i + 1, j)));
      if (j + 1 < rect.y1) couple(a, local(i, j + 1), y_transmissibility(g, c_at(i, j), c_at(i, j + 1)));
      if (a == 0) continue;
      double b = source.empty() ? 0.0 : source[a] * area;
      if (i == rect.x0) b += bc.left[j - rect.y0];
      if (i == rect.x1 - 1) b -= bc.right[j - rect.y0];
      if (j == rect.y0) b += bc.bottom[i - rect.x0];
      if (j == rect.y1 - 1) b -= bc.top[i - rect.x0];
      rhs[a - 1] = b;
    }

  NeumannSolution sol;
  sol.pressure.assign(n, 0.0);
  if (n > 1) {
    const SparseMatrix a = make_sparse(n - 1, n - 1, entries);
    const Vector p = opt.solver == LinearSolverKind::direct ? solve_spd_direct(a, rhs)
                                                            : solve_spd(a, rhs, opt.cg);
    for (int k = 1; k < n; ++k) sol.pressure[k] = p[k - 1];
  }

  FineVelocity& v = sol.velocity = FineVelocity(rect);
  for (int j = rect.y0; j < rect.y1; ++j) {
    v.fx(rect.x0, j) = bc.left[j - rect.y0];
    v.fx(rect.x1, j) = bc.right[j - rect.y0];
    for (int i = rect.x0 + 1; i < rect.x1; ++i)
      v.fx(i, j) = x_transmissibility(g, c_at(i - 1, j), c_at(i, j)) *
                   (sol.pressure[local(i - 1, j)] - sol.pressure[local(i, j)]);
  }
  for (int i = rect.x0; i < rect.x1; ++i) {
    v.fy(i, rect.y0) = bc.bottom[i - rect.x0];
    v.fy(i, rect.y1) = bc.top[i - rect.x0];
    for (int j = rect.y0 + 1; j < rect.y1; ++j)
      v.fy(i, j) = y_transmissibility(g, c_at(i, j - 1), c_at(i, j)) *
                   (sol.pressure[local(i, j - 1)] - sol.pressure[local(i, j)]);
  }

  if (opt.zero_mean) {
    const double mean = std::accumulate(sol.pressure.begin(), sol.pressure.end(), 0.0) / n;
    for (double& p : sol.pressure) p -= mean;
  }
  return sol;
}

struct DarcySolution {
  std::vector<double> pressure; // zero mean
  FineVelocity velocity;
};

/// Global no-flow Darcy solve on the whole fine grid. `source` holds
/// per-cell source densities which must integrate to zero.
inline DarcySolution solve_darcy(const FineGrid& g, const PermField& coeff,
                                 std::span<const double> source,
                                 LinearSolverKind solver = LinearSolverKind::cg,
                                 SolveOptions cg = {}) {
  if (coeff.nx != g.nx || coeff.ny != g.ny)
    throw ConfigError("solve_darcy: coefficient dimensions do not match the grid");
  if (static_cast<int>(source.size()) != g.n_cells())
    throw ConfigError("solve_darcy: source size does not match the grid");
  NeumannOptions opt;
  opt.solver = solver;
  opt.cg = cg;
  opt.compat_tol = 1e-12;
  NeumannSolution s = solve_neumann(g, coeff.values, g.all(), NeumannData::no_flow(g.all()),
                                    source, opt);
  return {std::move(s.pressure), std::move(s.velocity)};
}

/// Quarter five-spot: injector in the left-bottom cell, producer in the
/// right-top cell, both at volumetric rate `rate`.
struct Wells {
  int injector = 0;
  int producer = 0;
  double rate = 1.0;

  static Wells quarter_five_spot(const FineGrid& g, double rate) {
    return {g.cell(0, 0), g.cell(g.nx - 1, g.ny - 1), rate};
  }
  /// Source densities (+rate at the injector, -rate at the producer).
  std::vector<double> source_density(const FineGrid& g) const {
    if (injector == producer) throw ConfigError("wells: injector and producer coincide");
    std::vector<double> f(g.n_cells(), 0.0);
    f[injector] += rate / g.cell_area();
    f[producer] -= rate / g.cell_area();
    return f;
  }
};

/// Single-phase velocity (unit mobility) driven by the wells; used once as
/// the global boundary profile for multiscale bases.
inline FineVelocity single_phase_global(const FineGrid& g, const PermField& k, const Wells& wells,
                                        LinearSolverKind solver = LinearSolverKind::direct) {
  const std::vector<double> f = wells.source_density(g);
  SolveOptions cg;
  cg.tol = 1e-12;
  return solve_darcy(g, k, f, solver, cg).velocity;
}

/// Largest |net outflow - source * area| over the cells of `v`.
inline double max_conservation_residual(const FineGrid& g, const FineVelocity& v,
                                        std::span<const double> source_density) {
  double worst = 0.0;
  const CellRect& r = v.rect();
  for (int j = r.y0; j < r.y1; ++j)
    for (int i = r.x0; i < r.x1; ++i) {
      const double s = source_density.empty() ? 0.0 : source_density[g.cell(i, j)];
      worst = std::max(worst, std::abs(v.net_outflow(i, j) - s * g.cell_area()));
    }
  return worst;
}

} // namespace msfv

#endif // MSFV_RT0_HPP

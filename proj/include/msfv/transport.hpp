#ifndef MSFV_TRANSPORT_HPP
#define MSFV_TRANSPORT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "msfv/diagnostics.hpp"
#include "msfv/error.hpp"
#include "msfv/grid.hpp"
#include "msfv/rt0.hpp"
#include "msfv/solvers.hpp"

namespace msfv {

/// Water/oil viscosities; relative permeabilities are S^2 and (1 - S)^2.
struct FluidModel {
  double mu_w = 0.1;
  double mu_o = 1.0;

  void validate() const {
    if (!(mu_w > 0.0) || !(mu_o > 0.0)) throw ConfigError("viscosities must be positive");
    if (!std::isfinite(1.0 / mu_w) || !std::isfinite(1.0 / mu_o))
      throw ConfigError("viscosities are too small: mobilities overflow");
  }
  double lambda_w(double s) const { return s * s / mu_w; }
  double lambda_o(double s) const { return (1.0 - s) * (1.0 - s) / mu_o; }
  double total_mobility(double s) const { return lambda_w(s) + lambda_o(s); }
};

struct FractionalFlow {
  double f;
  double df;
};

inline FractionalFlow fractional_flow(double s, const FluidModel& fm) {
  const double a = s * s / fm.mu_w;
  const double b = (1.0 - s) * (1.0 - s) / fm.mu_o;
  const double da = 2.0 * s / fm.mu_w;
  const double db = -2.0 * (1.0 - s) / fm.mu_o;
  const double sum = a + b;
  return {a / sum, (da * b - a * db) / (sum * sum)};
}

/// Location and value of max f'(S) on [0, 1]; the location is the
/// inflection point of the S-shaped fractional flow curve.
inline std::pair<double, double> max_fractional_derivative(const FluidModel& fm) {
  constexpr int samples = 4000;
  int best = 0;
  double best_val = -1.0;
  for (int k = 0; k <= samples; ++k) {
    const double d = fractional_flow(static_cast<double>(k) / samples, fm).df;
    if (d > best_val) {
      best_val = d;
      best = k;
    }
  }
  double lo = std::max(0.0, (best - 1.0) / samples), hi = std::min(1.0, (best + 1.0) / samples);
  for (int it = 0; it < 100; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (fractional_flow(m1, fm).df < fractional_flow(m2, fm).df) lo = m1;
    else hi = m2;
  }
  const double s = 0.5 * (lo + hi);
  return {s, std::max(best_val, fractional_flow(s, fm).df)};
}

struct SaturationState {
  std::vector<double> s;
  double t = 0.0;
};

namespace detail {

// Per-cell upwind net water outflow for the saturation field `s`, and
// optionally the Jacobian of that outflow. Boundary edges are no-flow.
struct UpwindOperator {
  const FineGrid& g;
  const FineVelocity& v;
  const Wells* wells;
  const FluidModel& fm;

  template <class Visit>
  void for_each_edge(Visit&& visit) const {
    for (int j = 0; j < g.ny; ++j)
      for (int i = 1; i < g.nx; ++i) visit(g.cell(i - 1, j), g.cell(i, j), v.fx(i, j));
    for (int j = 1; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) visit(g.cell(i, j - 1), g.cell(i, j), v.fy(i, j));
  }

  std::vector<double> outflow(const std::vector<double>& s) const {
    std::vector<double> out(s.size(), 0.0);
    for_each_edge([&](int a, int b, double flux) {
      const double fw = fractional_flow(s[flux >= 0.0 ? a : b], fm).f;
      out[a] += flux * fw;
      out[b] -= flux * fw;
    });
    if (wells) {
      out[wells->injector] -= wells->rate;
      out[wells->producer] += wells->rate * fractional_flow(s[wells->producer], fm).f;
    }
    return out;
  }

  // d(outflow_row)/d(s_col) entries, scaled by `scale`.
  void jacobian(const std::vector<double>& s, double scale, std::vector<Triplet>& t) const {
    for_each_edge([&](int a, int b, double flux) {
      const int up = flux >= 0.0 ? a : b;
      const double dfw = fractional_flow(s[up], fm).df;
      if (dfw == 0.0 || flux == 0.0) return;
      t.emplace_back(a, up, scale * flux * dfw);
      t.emplace_back(b, up, -scale * flux * dfw);
    });
    if (wells)
      t.emplace_back(wells->producer, wells->producer,
                     scale * wells->rate * fractional_flow(s[wells->producer], fm).df);
  }
};

} // namespace detail

/// Largest explicit step: min over cells of |K| / (total outflow * max f').
inline double explicit_dt_limit(const FineGrid& g, const FineVelocity& v, const Wells* wells,
                                const FluidModel& fm) {
  std::vector<double> out(g.n_cells(), 0.0);
  detail::UpwindOperator op{g, v, wells, fm};
  op.for_each_edge([&](int a, int b, double flux) {
    if (flux > 0.0) out[a] += flux;
    else out[b] -= flux;
  });
  if (wells) out[wells->producer] += wells->rate;
  const double dmax = max_fractional_derivative(fm).second;
  double limit = std::numeric_limits<double>::infinity();
  for (double o : out)
    if (o > 0.0) limit = std::min(limit, g.cell_area() / (o * dmax));
  return limit;
}

/// Forward-Euler upwind update. Throws CflViolation above the stability
/// bound.
inline SaturationState step_explicit(const FineGrid& g, const SaturationState& state,
                                     const FineVelocity& v, double dt, const FluidModel& fm,
                                     const Wells* wells = nullptr) {
  fm.validate();
  const double limit = explicit_dt_limit(g, v, wells, fm);
  if (dt > limit)
    throw CflViolation("explicit saturation step dt=" + std::to_string(dt) +
                           " exceeds the stability bound " + std::to_string(limit),
                       limit);
  detail::UpwindOperator op{g, v, wells, fm};
  const std::vector<double> out = op.outflow(state.s);
  SaturationState next{state.s, state.t + dt};
  const double c = dt / g.cell_area();
  for (std::size_t i = 0; i < next.s.size(); ++i) next.s[i] -= c * out[i];
  return next;
}

struct NewtonOptions {
  double tol = 1e-9;
  int max_iter = 25;
  int max_halvings = 5;
  /// Overshoot outside [0, 1] up to this size is clamped (and logged).
  double clamp_tol = 1e-8;
};

struct StepReport {
  /// Largest per-block Newton count (including the converged check),
  /// summed over halved sub-steps.
  int newton_iterations = 0;
  int halvings = 0;
  double residual = 0.0;
  /// Well volumes over the step, summed over any halved sub-steps.
  double water_injected = 0.0;
  double water_produced = 0.0;
};

/// Residual of the backward-Euler upwind scheme,
/// G(S) = S - S_old + dt / |K| * outflow(S).
inline std::vector<double> implicit_residual(const FineGrid& g, const std::vector<double>& s_old,
                                             const std::vector<double>& s, const FineVelocity& v,
                                             double dt, const FluidModel& fm,
                                             const Wells* wells = nullptr) {
  detail::UpwindOperator op{g, v, wells, fm};
  std::vector<double> r = op.outflow(s);
  const double c = dt / g.cell_area();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = s[i] - s_old[i] + c * r[i];
  return r;
}

/// G'(S) = I + dt / |K| * d(outflow)/dS with the upwind sparsity pattern.
inline SparseMatrix implicit_jacobian(const FineGrid& g, const std::vector<double>& s,
                                      const FineVelocity& v, double dt, const FluidModel& fm,
                                      const Wells* wells = nullptr) {
  detail::UpwindOperator op{g, v, wells, fm};
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(3) * s.size());
  for (int i = 0; i < static_cast<int>(s.size()); ++i) t.emplace_back(i, i, 1.0);
  op.jacobian(s, dt / g.cell_area(), t);
  SparseMatrix j(static_cast<int>(s.size()), static_cast<int>(s.size()));
  j.setFromTriplets(t.begin(), t.end());
  j.makeCompressed();
  return j;
}

namespace detail {

// NaN entries propagate (std::max would drop them).
inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    if (std::isnan(x)) return x;
    m = std::max(m, std::abs(x));
  }
  return m;
}

enum class NewtonOutcome { converged, diverged, budget, non_finite };

inline const char* describe(NewtonOutcome o) {
  switch (o) {
  case NewtonOutcome::converged: return "converged";
  case NewtonOutcome::diverged: return "residual grew for 3 consecutive iterations";
  case NewtonOutcome::budget: return "iteration budget exhausted";
  case NewtonOutcome::non_finite: return "non-finite residual";
  }
  return "unknown";
}

// Upwind couplings of each cell: up to four face neighbours with the flux
// leaving the cell across that face (negative when entering).
struct UpwindGraph {
  int n = 0;
  std::vector<int> nb;
  std::vector<double> flux;
  std::vector<int> count;

  UpwindGraph(const FineGrid& g, const FineVelocity& v)
      : n(g.n_cells()), nb(4 * static_cast<std::size_t>(n)), flux(4 * static_cast<std::size_t>(n)),
        count(n, 0) {
    auto add = [&](int a, int b, double f) {
      nb[4 * a + count[a]] = b;
      flux[4 * a + count[a]++] = f;
      nb[4 * b + count[b]] = a;
      flux[4 * b + count[b]++] = -f;
    };
    for (int j = 0; j < g.ny; ++j)
      for (int i = 1; i < g.nx; ++i) add(g.cell(i - 1, j), g.cell(i, j), v.fx(i, j));
    for (int j = 1; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) add(g.cell(i, j - 1), g.cell(i, j), v.fy(i, j));
  }

  // Strongly connected components of the "upwind of" relation, listed so
  // that every block follows all blocks upstream of it (Tarjan, iterative).
  std::vector<std::vector<int>> blocks() const {
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    std::vector<std::pair<int, int>> calls;
    std::vector<std::vector<int>> out;
    int counter = 0;
    for (int root = 0; root < n; ++root) {
      if (index[root] >= 0) continue;
      index[root] = low[root] = counter++;
      stack.push_back(root);
      on_stack[root] = 1;
      calls.emplace_back(root, 0);
      while (!calls.empty()) {
        auto& [v, k] = calls.back();
        if (k < count[v]) {
          const int e = 4 * v + k++;
          if (!(flux[e] > 0.0)) continue;
          const int w = nb[e];
          if (index[w] < 0) {
            index[w] = low[w] = counter++;
            stack.push_back(w);
            on_stack[w] = 1;
            calls.emplace_back(w, 0);
          } else if (on_stack[w]) {
            low[v] = std::min(low[v], index[w]);
          }
          continue;
        }
        const int done = v;
        calls.pop_back();
        if (!calls.empty()) low[calls.back().first] = std::min(low[calls.back().first], low[done]);
        if (low[done] == index[done]) {
          std::vector<int> block;
          int w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            block.push_back(w);
          } while (w != done);
          out.push_back(std::move(block));
        }
      }
    }
    std::reverse(out.begin(), out.end());
    return out;
  }
};

// Newton on one block of cells whose upstream cells are final. Single
// cells have a monotone scalar residual and use bracketed Newton; larger
// blocks (circulation in non-potential fields) use full Newton with the
// update chopped at the inflection point of f_w.
class BlockSolver {
public:
  BlockSolver(const FineGrid& g, const UpwindGraph& graph, const std::vector<double>& s_old,
              double dt, const FluidModel& fm, const Wells* wells, const NewtonOptions& opt,
              double inflection)
      : graph_(graph), s_old_(s_old), c_(dt / g.cell_area()), fm_(fm), wells_(wells), opt_(opt),
        inflection_(inflection), local_(graph.n, -1) {}

  double residual(const std::vector<double>& s, int i) const {
    double out = 0.0;
    for (int k = 0; k < graph_.count[i]; ++k) {
      const double f = graph_.flux[4 * i + k];
      if (f == 0.0) continue;
      out += f * fractional_flow(s[f > 0.0 ? i : graph_.nb[4 * i + k]], fm_).f;
    }
    if (wells_) {
      if (i == wells_->injector) out -= wells_->rate;
      if (i == wells_->producer) out += wells_->rate * fractional_flow(s[i], fm_).f;
    }
    return s[i] - s_old_[i] + c_ * out;
  }

  NewtonOutcome solve(std::vector<double>& s, const std::vector<int>& block, int& iterations) {
    return block.size() == 1 ? solve_cell(s, block[0], iterations) : solve_block(s, block, iterations);
  }

private:
  NewtonOutcome solve_cell(std::vector<double>& s, int i, int& iterations) {
    // G(x) = x + c A f(x) - (s_old + c B), increasing in x.
    double a = 0.0, b = 0.0;
    for (int k = 0; k < graph_.count[i]; ++k) {
      const double f = graph_.flux[4 * i + k];
      if (f > 0.0) a += f;
      else if (f < 0.0) b -= f * fractional_flow(s[graph_.nb[4 * i + k]], fm_).f;
    }
    if (wells_) {
      if (i == wells_->producer) a += wells_->rate;
      if (i == wells_->injector) b += wells_->rate;
    }
    const double rhs = s_old_[i] + c_ * b;
    auto eval = [&](double x) {
      const FractionalFlow ff = fractional_flow(x, fm_);
      return std::pair{x + c_ * a * ff.f - rhs, 1.0 + c_ * a * ff.df};
    };
    double lo = 0.0, hi = 1.0;
    if (eval(hi).first <= 0.0) {
      // Inflow exceeds what a full cell can pass on; only roundoff in a
      // conservative field gets here.
      s[i] = 1.0;
      iterations = std::max(iterations, 1);
      return NewtonOutcome::converged;
    }
    double x = std::clamp(s_old_[i], 0.0, 1.0);
    const double scale = std::max({1.0, std::abs(rhs), c_ * a});
    for (int it = 1; it <= 200; ++it) {
      const auto [gx, dg] = eval(x);
      if (std::abs(gx) <= 1e-14 * scale || hi - lo <= 1e-15) {
        s[i] = x;
        iterations = std::max(iterations, it);
        return NewtonOutcome::converged;
      }
      if (gx > 0.0) hi = x;
      else lo = x;
      double next = x - gx / dg;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (next == x) {
        s[i] = x;
        iterations = std::max(iterations, it);
        return NewtonOutcome::converged;
      }
      x = next;
    }
    s[i] = x;
    return NewtonOutcome::budget;
  }

  NewtonOutcome solve_block(std::vector<double>& s, const std::vector<int>& block, int& iterations) {
    const int m = static_cast<int>(block.size());
    for (int l = 0; l < m; ++l) local_[block[l]] = l;
    auto norm = [&]() {
      double r = 0.0;
      for (int i : block) {
        const double x = std::abs(residual(s, i));
        if (std::isnan(x)) return x;
        r = std::max(r, x);
      }
      return r;
    };
    auto release = [&](NewtonOutcome o) {
      for (int i : block) local_[i] = -1;
      return o;
    };
    double rnorm = norm();
    int growth = 0;
    for (int it = 1; it <= opt_.max_iter; ++it) {
      iterations = std::max(iterations, it);
      if (rnorm <= opt_.tol) return release(NewtonOutcome::converged);
      Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(m, m);
      Vector rhs(m);
      for (int l = 0; l < m; ++l) {
        const int i = block[l];
        rhs[l] = -residual(s, i);
        for (int k = 0; k < graph_.count[i]; ++k) {
          const double f = graph_.flux[4 * i + k];
          const int up = f > 0.0 ? i : graph_.nb[4 * i + k];
          if (f == 0.0 || local_[up] < 0) continue;
          jac(l, local_[up]) += c_ * f * fractional_flow(s[up], fm_).df;
        }
        if (wells_ && i == wells_->producer)
          jac(l, l) += c_ * wells_->rate * fractional_flow(s[i], fm_).df;
      }
      const Vector delta = jac.partialPivLu().solve(rhs);
      bool modified = false;
      double step = 0.0;
      for (int l = 0; l < m; ++l) {
        const double old = s[block[l]];
        double next = old + delta[l];
        if ((old - inflection_) * (next - inflection_) < 0.0) {
          next = inflection_;
          modified = true;
        }
        if (next < 0.0 || next > 1.0) {
          next = std::clamp(next, 0.0, 1.0);
          modified = true;
        }
        step = std::max(step, std::abs(next - old));
        s[block[l]] = next;
      }
      const double next_norm = norm();
      if (!std::isfinite(next_norm)) return release(NewtonOutcome::non_finite);
      growth = next_norm > rnorm ? growth + 1 : 0;
      rnorm = next_norm;
      if (growth >= 3) return release(NewtonOutcome::diverged);
      if (!modified && step <= opt_.tol) return release(NewtonOutcome::converged);
    }
    return release(rnorm <= opt_.tol ? NewtonOutcome::converged : NewtonOutcome::budget);
  }

  const UpwindGraph& graph_;
  const std::vector<double>& s_old_;
  double c_;
  const FluidModel& fm_;
  const Wells* wells_;
  const NewtonOptions& opt_;
  double inflection_;
  std::vector<int> local_;
};

// Solves G(S) = 0 at fixed dt. The upwind Jacobian is block triangular
// when cells are ordered along the flow, so Newton runs block by block in
// upstream order; `newton_iterations` records the largest block count.
inline NewtonOutcome newton_solve(const FineGrid& g, const std::vector<double>& s_old,
                                  std::vector<double>& s, const FineVelocity& v, double dt,
                                  const FluidModel& fm, const Wells* wells,
                                  const NewtonOptions& opt, double inflection, StepReport& report) {
  s = s_old;
  const UpwindGraph graph(g, v);
  BlockSolver solver(g, graph, s_old, dt, fm, wells, opt, inflection);
  int iterations = 0;
  NewtonOutcome outcome = NewtonOutcome::converged;
  for (const std::vector<int>& block : graph.blocks()) {
    outcome = solver.solve(s, block, iterations);
    if (outcome != NewtonOutcome::converged) break;
  }
  report.newton_iterations += iterations;
  report.residual = max_abs(implicit_residual(g, s_old, s, v, dt, fm, wells));
  if (outcome == NewtonOutcome::converged && !(report.residual <= opt.tol))
    outcome = std::isfinite(report.residual) ? NewtonOutcome::budget : NewtonOutcome::non_finite;
  return outcome;
}

inline void implicit_advance(const FineGrid& g, std::vector<double>& s, const FineVelocity& v,
                             double dt, const FluidModel& fm, const Wells* wells,
                             const NewtonOptions& opt, double inflection, int depth,
                             StepReport& report, Diagnostics* diag) {
  std::vector<double> next;
  const NewtonOutcome outcome = newton_solve(g, s, next, v, dt, fm, wells, opt, inflection, report);
  if (outcome == NewtonOutcome::converged) {
    for (double& x : next) {
      if (x < 0.0 || x > 1.0) {
        const double over = x < 0.0 ? -x : x - 1.0;
        if (over > opt.clamp_tol)
          throw NumericalError("implicit saturation left [0, 1] by " + std::to_string(over));
        note(diag, "clamped saturation overshoot " + std::to_string(over));
        x = std::clamp(x, 0.0, 1.0);
      }
    }
    if (wells) {
      report.water_injected += dt * wells->rate;
      report.water_produced += dt * wells->rate * fractional_flow(next[wells->producer], fm).f;
    }
    s = std::move(next);
    return;
  }
  if (depth >= opt.max_halvings)
    throw NumericalError("Newton iteration for the saturation step failed after " +
                         std::to_string(depth) + " time-step halvings");
  ++report.halvings;
  note(diag, std::string("Newton failed (") + describe(outcome) + "), halving dt to " +
                 std::to_string(0.5 * dt));
  implicit_advance(g, s, v, 0.5 * dt, fm, wells, opt, inflection, depth + 1, report, diag);
  implicit_advance(g, s, v, 0.5 * dt, fm, wells, opt, inflection, depth + 1, report, diag);
}

} // namespace detail

/// Backward-Euler upwind update solved by Newton-Raphson. On divergence
/// the step is retried as two half steps, recursively.
inline SaturationState step_implicit(const FineGrid& g, const SaturationState& state,
                                     const FineVelocity& v, double dt, const FluidModel& fm,
                                     const Wells* wells = nullptr, const NewtonOptions& opt = {},
                                     StepReport* report = nullptr, Diagnostics* diag = nullptr) {
  fm.validate();
  if (!(dt > 0.0)) throw ConfigError("saturation time step must be positive");
  StepReport local;
  SaturationState next{state.s, state.t + dt};
  detail::implicit_advance(g, next.s, v, dt, fm, wells, opt, max_fractional_derivative(fm).first,
                           0, report ? *report : local, diag);
  return next;
}

} // namespace msfv

#endif // MSFV_TRANSPORT_HPP

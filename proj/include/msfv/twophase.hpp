#ifndef MSFV_TWOPHASE_HPP
#define MSFV_TWOPHASE_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msfv/diagnostics.hpp"
#include "msfv/error.hpp"
#include "msfv/fields.hpp"
#include "msfv/grid.hpp"
#include "msfv/multiscale.hpp"
#include "msfv/rt0.hpp"
#include "msfv/transport.hpp"

namespace msfv {

enum class PressureMethod { fine_reference, msfv_local, msfv_global };

inline std::string to_string(PressureMethod m) {
  switch (m) {
  case PressureMethod::fine_reference: return "fine-reference";
  case PressureMethod::msfv_local: return "msfv-local";
  case PressureMethod::msfv_global: return "msfv-global";
  }
  return "unknown";
}

inline PressureMethod parse_method(std::string_view s) {
  if (s == "fine-reference" || s == "fine") return PressureMethod::fine_reference;
  if (s == "msfv-local") return PressureMethod::msfv_local;
  if (s == "msfv-global") return PressureMethod::msfv_global;
  throw ConfigError("unknown method '" + std::string(s) +
                    "' (expected fine-reference, msfv-local or msfv-global)");
}

/// Pressure steps of dt_pressure (in PVI), each split into n_substeps
/// implicit saturation steps.
struct Schedule {
  double dt_pressure = 0.1;
  int n_pressure = 10;
  int n_substeps = 10;

  void validate() const {
    if (!(dt_pressure > 0.0)) throw ConfigError("dt_pressure must be positive");
    if (n_pressure < 1) throw ConfigError("n_pressure must be >= 1");
    if (n_substeps < 1) throw ConfigError("n_substeps must be >= 1");
  }
};

/// Quarter five-spot with q_t equal to the pore volume (porosity 1) per
/// unit time, so simulation time is PVI.
inline Wells pvi_wells(const FineGrid& g) { return Wells::quarter_five_spot(g, g.lx() * g.ly()); }

struct SimulationResult {
  std::string method;
  int nx = 0, ny = 0;
  std::vector<double> watercut_pvi;
  std::vector<double> watercut;
  std::vector<double> snapshot_pvi;
  std::vector<std::vector<double>> snapshots;
  double water_injected = 0.0;
  double water_produced = 0.0;
  double water_stored = 0.0;
  std::vector<std::string> diagnostics;
};

inline double water_cut(std::span<const double> s, const Wells& wells, const FluidModel& fm) {
  return fractional_flow(s[wells.producer], fm).f;
}

struct ImpesOptions {
  NewtonOptions newton;
  /// Precomputed unit-mobility velocity for msfv-global; computed from the
  /// wells when absent.
  const FineVelocity* global_field = nullptr;
  /// Fine reference pressure solver. Sparse Cholesky is robust on
  /// high-contrast fields; CG uses `fine_tol`.
  LinearSolverKind fine_solver = LinearSolverKind::direct;
  double fine_tol = 1e-11;
};

namespace detail {

[[noreturn]] inline void rethrow_annotated(const Error& e, int p, int sub) {
  const std::string where = "pressure step " + std::to_string(p) +
                            (sub >= 0 ? ", substep " + std::to_string(sub) : std::string()) + ": ";
  if (e.category() == ErrorCategory::input) throw ConfigError(where + e.what());
  throw NumericalError(where + e.what());
}

} // namespace detail

/// IMPES: each pressure step solves div(lambda(S) k grad p) = f by the
/// chosen method, then advances saturation implicitly n_substeps times
/// with the resulting fine velocity.
inline SimulationResult run_impes(const GridHierarchy& h, const PermField& k, const FluidModel& fm,
                                  const Wells& wells, PressureMethod method,
                                  const Schedule& schedule, const ImpesOptions& opt = {},
                                  Diagnostics* diag = nullptr) {
  fm.validate();
  schedule.validate();
  const FineGrid& g = h.fine();
  if (k.nx != g.nx || k.ny != g.ny)
    throw ConfigError("permeability dimensions do not match the fine grid");

  Diagnostics local_diag;
  Diagnostics& log = diag ? *diag : local_diag;

  std::unique_ptr<MultiscaleSolver> ms;
  FineVelocity global;
  if (method == PressureMethod::msfv_local) {
    ms = std::make_unique<MultiscaleSolver>(h, k, BasisProfile::constant(), &log);
  } else if (method == PressureMethod::msfv_global) {
    const FineVelocity* gv = opt.global_field;
    if (!gv) {
      global = single_phase_global(g, k, wells, opt.fine_solver);
      gv = &global;
    }
    ms = std::make_unique<MultiscaleSolver>(h, k, BasisProfile::from_global(*gv), &log);
  }

  const std::vector<double> source = wells.source_density(g);
  SimulationResult res;
  res.method = to_string(method);
  res.nx = g.nx;
  res.ny = g.ny;
  SaturationState state{std::vector<double>(g.n_cells(), 0.0), 0.0};
  PermField coeff(g.nx, g.ny);
  const double dt_sat = schedule.dt_pressure / schedule.n_substeps;

  for (int p = 0; p < schedule.n_pressure; ++p) {
    for (int c = 0; c < g.n_cells(); ++c) coeff.values[c] = fm.total_mobility(state.s[c]) * k.values[c];
    FineVelocity velocity;
    try {
      if (ms) {
        velocity = ms->solve(coeff.values, source).fine.velocity;
      } else {
        SolveOptions cg;
        cg.tol = opt.fine_tol;
        velocity = solve_darcy(g, coeff, source, opt.fine_solver, cg).velocity;
      }
    } catch (const Error& e) {
      detail::rethrow_annotated(e, p, -1);
    }
    for (int sub = 0; sub < schedule.n_substeps; ++sub) {
      StepReport report;
      try {
        state = step_implicit(g, state, velocity, dt_sat, fm, &wells, opt.newton, &report, &log);
      } catch (const Error& e) {
        detail::rethrow_annotated(e, p, sub);
      }
      // Reset the clock to the schedule so PVI stays exact.
      state.t = (p * schedule.n_substeps + sub + 1) * dt_sat;
      res.water_injected += report.water_injected;
      res.water_produced += report.water_produced;
      res.watercut_pvi.push_back(state.t);
      res.watercut.push_back(water_cut(state.s, wells, fm));
    }
    res.snapshot_pvi.push_back(state.t);
    res.snapshots.push_back(state.s);
  }
  for (double s : state.s) res.water_stored += s * g.cell_area();
  res.diagnostics = log.events();
  return res;
}

struct Comparison {
  double avg_sat_error = 0.0;
  double watercut_error = 0.0;
  std::vector<double> sat_error_series;
};

/// Relative L1 saturation error per snapshot (and its mean) and the
/// relative discrete L2 water-cut error. When the reference water-cut is
/// zero to roundoff (every entry <= 1e-12, no breakthrough) the absolute
/// L2 difference is reported.
inline Comparison compare(const SimulationResult& result, const SimulationResult& reference) {
  if (result.nx != reference.nx || result.ny != reference.ny)
    throw InputError("compare: grid mismatch (" + std::to_string(result.nx) + "x" +
                     std::to_string(result.ny) + " vs " + std::to_string(reference.nx) + "x" +
                     std::to_string(reference.ny) + ")");
  if (result.snapshots.size() != reference.snapshots.size() ||
      result.watercut.size() != reference.watercut.size())
    throw InputError("compare: schedule mismatch");
  for (std::size_t i = 0; i < result.snapshot_pvi.size(); ++i)
    if (std::abs(result.snapshot_pvi[i] - reference.snapshot_pvi[i]) > 1e-9)
      throw InputError("compare: snapshot times differ");
  for (std::size_t i = 0; i < result.watercut_pvi.size(); ++i)
    if (std::abs(result.watercut_pvi[i] - reference.watercut_pvi[i]) > 1e-9)
      throw InputError("compare: water-cut times differ");

  Comparison c;
  for (std::size_t n = 0; n < result.snapshots.size(); ++n) {
    const auto& a = result.snapshots[n];
    const auto& b = reference.snapshots[n];
    if (a.size() != b.size()) throw InputError("compare: snapshot size mismatch");
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      diff += std::abs(a[i] - b[i]);
      norm += std::abs(b[i]);
    }
    c.sat_error_series.push_back(norm > 0.0 ? diff / norm : diff);
  }
  for (double e : c.sat_error_series) c.avg_sat_error += e;
  if (!c.sat_error_series.empty()) c.avg_sat_error /= static_cast<double>(c.sat_error_series.size());

  double diff = 0.0, norm = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < result.watercut.size(); ++i) {
    const double d = result.watercut[i] - reference.watercut[i];
    diff += d * d;
    norm += reference.watercut[i] * reference.watercut[i];
    peak = std::max(peak, std::abs(reference.watercut[i]));
  }
  c.watercut_error = peak > 1e-12 ? std::sqrt(diff / norm) : std::sqrt(diff);
  return c;
}

} // namespace msfv

#endif // MSFV_TWOPHASE_HPP

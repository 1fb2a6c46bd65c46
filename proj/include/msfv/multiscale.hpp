#ifndef MSFV_MULTISCALE_HPP
#define MSFV_MULTISCALE_HPP

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "msfv/diagnostics.hpp"
#include "msfv/error.hpp"
#include "msfv/fields.hpp"
#include "msfv/grid.hpp"
#include "msfv/parallel.hpp"
#include "msfv/rt0.hpp"
#include "msfv/solvers.hpp"

namespace msfv {

/// Multiscale velocity basis of one half-interface: fine fluxes on its
/// support, normalised to unit flux through the half-interface segment.
struct VelocityBasis {
  int half_interface = 0;
  FineVelocity flux;
  bool global_profile = false;

  /// Flux through the half-interface segment (1 by construction).
  double segment_flux(const HalfInterface& hi) const {
    double s = 0.0;
    for (int t = hi.seg_begin; t < hi.seg_end; ++t)
      s += hi.direction == FluxDirection::x ? flux.fx(hi.line, t) : flux.fy(t, hi.line);
    return s;
  }
};

/// Boundary data for the basis problems: uniform (local method) or the
/// normal trace of a precomputed fine velocity (global method).
struct BasisProfile {
  const FineVelocity* global = nullptr;

  static BasisProfile constant() { return {}; }
  static BasisProfile from_global(const FineVelocity& v) { return {&v}; }
};

namespace detail {

// Inflow or outflow cross-section values of `profile` along one side of the
// support, normalised to sum 1. Returns empty when the integral is
// degenerate.
inline std::vector<double> normalised_side(const FineVelocity& v, const HalfInterface& hi,
                                           bool outflow_side) {
  const CellRect& s = hi.support;
  std::vector<double> vals;
  if (hi.direction == FluxDirection::x) {
    const int i = outflow_side ? s.x1 : s.x0;
    for (int j = s.y0; j < s.y1; ++j) vals.push_back(v.fx(i, j));
  } else {
    const int j = outflow_side ? s.y1 : s.y0;
    for (int i = s.x0; i < s.x1; ++i) vals.push_back(v.fy(i, j));
  }
  double sum = 0.0, abs_sum = 0.0;
  for (double x : vals) {
    sum += x;
    abs_sum += std::abs(x);
  }
  if (!(abs_sum > 0.0) || std::abs(sum) < 1e-10 * abs_sum) return {};
  for (double& x : vals) x /= sum;
  return vals;
}

} // namespace detail

/// Solves the zero-source Neumann problem on the half-interface support
/// with unit inflow on one cross-section, unit outflow on the opposite one
/// and no flow on the remaining two sides. With a global profile each side
/// is normalised by its own integral; a degenerate side falls back to the
/// uniform profile and is logged.
inline VelocityBasis build_basis(const GridHierarchy& h, const HalfInterface& hi,
                                 const PermField& k, const BasisProfile& profile = {},
                                 Diagnostics* diag = nullptr) {
  const CellRect& s = hi.support;
  const bool along_x = hi.direction == FluxDirection::x;
  const int n_side = along_x ? s.height() : s.width();
  if (n_side <= 0 || s.empty())
    throw ConfigError("build_basis: empty support for half-interface " + std::to_string(hi.id));

  std::vector<double> in(n_side, 1.0 / n_side), out(n_side, 1.0 / n_side);
  bool used_global = false;
  if (profile.global) {
    auto a = detail::normalised_side(*profile.global, hi, false);
    auto b = detail::normalised_side(*profile.global, hi, true);
    if (a.empty() || b.empty()) {
      note(diag, "half-interface " + std::to_string(hi.id) +
                     ": degenerate global cross-section flux, using constant profile");
    } else {
      in = std::move(a);
      out = std::move(b);
      used_global = true;
    }
  }

  NeumannData bc = NeumannData::no_flow(s);
  if (along_x) {
    bc.left = in;
    bc.right = out;
  } else {
    bc.bottom = in;
    bc.top = out;
  }
  NeumannOptions opt;
  opt.zero_mean = false;
  NeumannSolution sol = solve_neumann(h.fine(), k.values, s, bc, {}, opt);
  return {hi.id, std::move(sol.velocity), used_global};
}

/// Bases for every half-interface, indexed by half-interface id.
inline std::vector<VelocityBasis> build_bases(const GridHierarchy& h, const DualLayout& layout,
                                              const PermField& k,
                                              const BasisProfile& profile = {},
                                              Diagnostics* diag = nullptr) {
  std::vector<VelocityBasis> bases(layout.half_interfaces.size());
  parallel_for(static_cast<int>(bases.size()), [&](int l) {
    bases[l] = build_basis(h, layout.half_interfaces[l], k, profile, diag);
  });
  return bases;
}

/// Gram block of one dual cell: entry (p, q) is the lumped fine mass form
/// sum_e w_e F_p(e) F_q(e) over the edges of the dual cell, with w_e the
/// half-cell resistances hn / (2 c hs) of the adjacent cells inside it.
/// `coeff` is the flow coefficient (k, or mobility times k) per fine cell.
inline DenseSmall gram_block(const GridHierarchy& h, const DualCell& d,
                             std::span<const VelocityBasis> bases,
                             std::span<const double> coeff) {
  const FineGrid& g = h.fine();
  const CellRect& r = d.region;
  const int m = static_cast<int>(d.half_interfaces.size());
  DenseSmall a(m);
  std::vector<const FineVelocity*> f(m);
  for (int p = 0; p < m; ++p) f[p] = &bases[d.half_interfaces[p]].flux;

  const double wx = 0.5 * g.hx / g.hy, wy = 0.5 * g.hy / g.hx;
  double vals[DenseSmall::capacity];
  auto accumulate = [&](double w) {
    for (int p = 0; p < m; ++p) {
      if (vals[p] == 0.0) continue;
      for (int q = p; q < m; ++q) a(p, q) += w * vals[p] * vals[q];
    }
  };
  for (int j = r.y0; j < r.y1; ++j)
    for (int i = r.x0; i <= r.x1; ++i) {
      double w = 0.0;
      if (i > r.x0) w += wx / coeff[g.cell(i - 1, j)];
      if (i < r.x1) w += wx / coeff[g.cell(i, j)];
      bool any = false;
      for (int p = 0; p < m; ++p) any |= (vals[p] = f[p]->fx_or_zero(i, j)) != 0.0;
      if (any) accumulate(w);
    }
  for (int j = r.y0; j <= r.y1; ++j)
    for (int i = r.x0; i < r.x1; ++i) {
      double w = 0.0;
      if (j > r.y0) w += wy / coeff[g.cell(i, j - 1)];
      if (j < r.y1) w += wy / coeff[g.cell(i, j)];
      bool any = false;
      for (int p = 0; p < m; ++p) any |= (vals[p] = f[p]->fy_or_zero(i, j)) != 0.0;
      if (any) accumulate(w);
    }
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < p; ++q) a(p, q) = a(q, p);
  return a;
}

/// Coarse mixed system A U = B P, C U = F with the flux eliminated:
/// D P = F, D = C A^-1 B.
///
/// Sign convention: (B P)_l = p_from - p_to, the pressure drop along the
/// positive direction of half-interface l; C maps half-fluxes to coarse
/// outflows. With these conventions B^T = C.
struct CoarseSystem {
  std::vector<DenseSmall> gram;     // one per dual cell
  std::vector<DenseSmall> gram_inv; // transmissibility blocks
  SparseMatrix b;                   // n_half x n_coarse
  SparseMatrix c;                   // n_coarse x n_half
  Vector f;                         // coarse source integrals
  SparseMatrix d;                   // n_coarse x n_coarse, unpinned
};

inline CoarseSystem assemble(const GridHierarchy& h, const DualLayout& layout,
                             std::span<const VelocityBasis> bases,
                             std::span<const double> coeff,
                             std::span<const double> source_density) {
  const FineGrid& g = h.fine();
  if (static_cast<int>(coeff.size()) != g.n_cells())
    throw ConfigError("assemble: coefficient size does not match the fine grid");
  if (!source_density.empty() && static_cast<int>(source_density.size()) != g.n_cells())
    throw ConfigError("assemble: source size does not match the fine grid");
  if (bases.size() != layout.half_interfaces.size())
    throw ConfigError("assemble: incomplete basis set");

  const int nc = h.n_coarse();
  const int nh = static_cast<int>(layout.half_interfaces.size());
  const int nd = static_cast<int>(layout.duals.size());

  CoarseSystem sys;
  sys.gram.resize(nd);
  sys.gram_inv.resize(nd);
  parallel_for(nd, [&](int k) {
    sys.gram[k] = gram_block(h, layout.duals[k], bases, coeff);
    sys.gram_inv[k] = invert_small(sys.gram[k], layout.duals[k].id);
  });

  std::vector<Triplet> bt, ct;
  for (const HalfInterface& hi : layout.half_interfaces) {
    bt.emplace_back(hi.id, hi.from_cell, 1.0);
    bt.emplace_back(hi.id, hi.to_cell, -1.0);
    ct.emplace_back(hi.from_cell, hi.id, 1.0);
    ct.emplace_back(hi.to_cell, hi.id, -1.0);
  }
  sys.b = make_sparse(nh, nc, bt);
  sys.c = make_sparse(nc, nh, ct);

  sys.f = Vector::Zero(nc);
  if (!source_density.empty())
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        sys.f[h.coarse_of_fine(i, j)] += source_density[g.cell(i, j)] * g.cell_area();

  std::vector<Triplet> dt;
  for (int k = 0; k < nd; ++k) {
    const auto& ids = layout.duals[k].half_interfaces;
    const DenseSmall& inv = sys.gram_inv[k];
    for (std::size_t p = 0; p < ids.size(); ++p)
      for (std::size_t q = 0; q < ids.size(); ++q) {
        const HalfInterface& hp = layout.half_interfaces[ids[p]];
        const HalfInterface& hq = layout.half_interfaces[ids[q]];
        const double t = inv(static_cast<int>(p), static_cast<int>(q));
        // C[:, p] * t * B[q, :]
        dt.emplace_back(hp.from_cell, hq.from_cell, t);
        dt.emplace_back(hp.from_cell, hq.to_cell, -t);
        dt.emplace_back(hp.to_cell, hq.from_cell, -t);
        dt.emplace_back(hp.to_cell, hq.to_cell, t);
      }
  }
  sys.d = make_sparse(nc, nc, dt);
  return sys;
}

/// Coarse cell replaced by the zero-sum constraint: the one whose centre
/// is closest to the domain centre, lowest index on ties.
inline int pinned_coarse_cell(const GridHierarchy& h) {
  const double hx = h.ratio_x() * h.hx(), hy = h.ratio_y() * h.hy();
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int cj = 0; cj < h.coarse_ny(); ++cj)
    for (int ci = 0; ci < h.coarse_nx(); ++ci) {
      const double dx = (ci + 0.5) * hx - 0.5 * h.lx();
      const double dy = (cj + 0.5) * hy - 0.5 * h.ly();
      const double dist = dx * dx + dy * dy;
      if (dist < best_dist * (1.0 - 1e-12)) {
        best_dist = dist;
        best = h.coarse_cell(ci, cj);
      }
    }
  return best;
}

struct CoarseSolution {
  Vector p; // per coarse cell, zero sum
  Vector u; // per half-interface
};

/// Solves D P = F with one row replaced by the all-ones row (zero
/// right-hand side), then recovers the half-fluxes dual cell by dual cell.
inline CoarseSolution solve_coarse(const GridHierarchy& h, const DualLayout& layout,
                                   const CoarseSystem& sys) {
  const int nc = h.n_coarse();
  const double f_scale = sys.f.cwiseAbs().sum();
  if (std::abs(sys.f.sum()) > 1e-10 * std::max(f_scale, 1e-300))
    throw CompatibilityError("coarse source does not sum to zero", sys.f.sum());

  const int pin = pinned_coarse_cell(h);
  std::vector<Triplet> entries;
  entries.reserve(sys.d.nonZeros() + nc);
  for (int r = 0; r < sys.d.outerSize(); ++r) {
    if (r == pin) continue;
    for (SparseMatrix::InnerIterator it(sys.d, r); it; ++it)
      entries.emplace_back(r, static_cast<int>(it.col()), it.value());
  }
  for (int c = 0; c < nc; ++c) entries.emplace_back(pin, c, 1.0);
  Vector rhs = sys.f;
  rhs[pin] = 0.0;

  CoarseSolution sol;
  sol.p = nc == 1 ? Vector::Zero(1) : solve_general(make_sparse(nc, nc, entries), rhs);

  const Vector drop = sys.b * sol.p;
  sol.u = Vector::Zero(static_cast<Eigen::Index>(layout.half_interfaces.size()));
  for (std::size_t k = 0; k < layout.duals.size(); ++k) {
    const auto& ids = layout.duals[k].half_interfaces;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      double s = 0.0;
      for (std::size_t q = 0; q < ids.size(); ++q)
        s += sys.gram_inv[k](static_cast<int>(p), static_cast<int>(q)) * drop[ids[q]];
      sol.u[ids[p]] = s;
    }
  }

  const double imbalance = (sys.c * sol.u - sys.f).cwiseAbs().maxCoeff();
  if (imbalance > 1e-8 * std::max(1.0, f_scale))
    throw NumericalError("coarse solution violates mass balance by " + std::to_string(imbalance));
  return sol;
}

/// Fine fluxes sum_l U_l psi_l, one piece per dual cell (its region). The
/// pieces may disagree on edges shared by neighbouring dual cells.
struct DownscaledVelocity {
  std::vector<FineVelocity> pieces;
};

inline DownscaledVelocity downscale(const DualLayout& layout, std::span<const VelocityBasis> bases,
                                    const Vector& u) {
  DownscaledVelocity out;
  out.pieces.reserve(layout.duals.size());
  for (const DualCell& d : layout.duals) {
    FineVelocity piece(d.region);
    for (int l : d.half_interfaces) {
      const FineVelocity& b = bases[l].flux;
      const CellRect& s = b.rect();
      const double ul = u[l];
      if (ul == 0.0) continue;
      for (int j = s.y0; j < s.y1; ++j)
        for (int i = s.x0; i <= s.x1; ++i) piece.fx(i, j) += ul * b.fx(i, j);
      for (int j = s.y0; j <= s.y1; ++j)
        for (int i = s.x0; i < s.x1; ++i) piece.fy(i, j) += ul * b.fy(i, j);
    }
    out.pieces.push_back(std::move(piece));
  }
  return out;
}

/// Fine fluxes on the edges of coarse interfaces (zero elsewhere). Each such
/// edge lies inside exactly one dual cell, so the value is single-valued.
inline FineVelocity coarse_trace(const GridHierarchy& h, const DualLayout& layout,
                                 const DownscaledVelocity& ds) {
  FineVelocity t(h.fine_nx(), h.fine_ny());
  for (const HalfInterface& hi : layout.half_interfaces) {
    const FineVelocity& piece = ds.pieces[hi.owner];
    for (int s = hi.seg_begin; s < hi.seg_end; ++s) {
      if (hi.direction == FluxDirection::x)
        t.fx(hi.line, s) = piece.fx(hi.line, s);
      else
        t.fy(s, hi.line) = piece.fy(s, hi.line);
    }
  }
  return t;
}

struct MergedVelocity {
  FineVelocity velocity; // shared edges hold the average of both sides
  double max_jump = 0.0; // largest disagreement on a shared edge
};

/// Glues the dual-cell pieces into one fine field for export and
/// diagnostics.
inline MergedVelocity merge(const GridHierarchy& h, const DownscaledVelocity& ds) {
  MergedVelocity m{FineVelocity(h.fine_nx(), h.fine_ny()), 0.0};
  FineVelocity count(h.fine_nx(), h.fine_ny());
  FineVelocity first(h.fine_nx(), h.fine_ny());
  for (const FineVelocity& p : ds.pieces) {
    const CellRect& r = p.rect();
    for (int j = r.y0; j < r.y1; ++j)
      for (int i = r.x0; i <= r.x1; ++i) {
        if (count.fx(i, j) > 0.0) m.max_jump = std::max(m.max_jump, std::abs(first.fx(i, j) - p.fx(i, j)));
        else first.fx(i, j) = p.fx(i, j);
        m.velocity.fx(i, j) += p.fx(i, j);
        count.fx(i, j) += 1.0;
      }
    for (int j = r.y0; j <= r.y1; ++j)
      for (int i = r.x0; i < r.x1; ++i) {
        if (count.fy(i, j) > 0.0) m.max_jump = std::max(m.max_jump, std::abs(first.fy(i, j) - p.fy(i, j)));
        else first.fy(i, j) = p.fy(i, j);
        m.velocity.fy(i, j) += p.fy(i, j);
        count.fy(i, j) += 1.0;
      }
  }
  auto& mx = m.velocity.x_values();
  auto& my = m.velocity.y_values();
  for (std::size_t k = 0; k < mx.size(); ++k)
    if (count.x_values()[k] > 1.0) mx[k] /= count.x_values()[k];
  for (std::size_t k = 0; k < my.size(); ++k)
    if (count.y_values()[k] > 1.0) my[k] /= count.y_values()[k];
  return m;
}

struct Reconstruction {
  FineVelocity velocity;
  /// Largest |boundary outflow - source integral| over coarse cells before
  /// the source correction.
  double max_disparity = 0.0;
};

/// Conservative fine velocity: on each coarse cell, a Neumann solve with the
/// downscaled coarse-interface fluxes as boundary data. The source keeps its
/// fine distribution plus a uniform correction that makes it integrate to
/// the boundary outflow exactly.
inline Reconstruction reconstruct(const GridHierarchy& h, const DualLayout& layout,
                                  std::span<const VelocityBasis> bases, const CoarseSolution& sol,
                                  std::span<const double> coeff,
                                  std::span<const double> source_density) {
  const FineGrid& g = h.fine();
  const FineVelocity trace = coarse_trace(h, layout, downscale(layout, bases, sol.u));
  Reconstruction out{FineVelocity(g.nx, g.ny), 0.0};
  std::vector<double> disparity(h.n_coarse(), 0.0);

  parallel_for(h.n_coarse(), [&](int kc) {
    const CellRect r = h.coarse_rect(kc);
    NeumannData bc = NeumannData::no_flow(r);
    for (int j = r.y0; j < r.y1; ++j) {
      bc.left[j - r.y0] = trace.fx(r.x0, j);
      bc.right[j - r.y0] = trace.fx(r.x1, j);
    }
    for (int i = r.x0; i < r.x1; ++i) {
      bc.bottom[i - r.x0] = trace.fy(i, r.y0);
      bc.top[i - r.x0] = trace.fy(i, r.y1);
    }
    std::vector<double> src(r.size(), 0.0);
    double total = 0.0;
    for (int j = r.y0; j < r.y1; ++j)
      for (int i = r.x0; i < r.x1; ++i) {
        const double s = source_density.empty() ? 0.0 : source_density[g.cell(i, j)];
        src[(j - r.y0) * r.width() + (i - r.x0)] = s;
        total += s * g.cell_area();
      }
    const double gap = bc.net_outflow() - total;
    disparity[kc] = std::abs(gap);
    const double correction = gap / (r.size() * g.cell_area());
    for (double& s : src) s += correction;

    NeumannOptions opt;
    opt.compat_tol = 1e-8;
    opt.zero_mean = false;
    const NeumannSolution local = solve_neumann(g, coeff, r, bc, src, opt);
    // Coarse cells are disjoint; shared boundary edges receive the same
    // trace value from both sides.
    for (int j = r.y0; j < r.y1; ++j)
      for (int i = r.x0; i <= r.x1; ++i) out.velocity.fx(i, j) = local.velocity.fx(i, j);
    for (int j = r.y0; j <= r.y1; ++j)
      for (int i = r.x0; i < r.x1; ++i) out.velocity.fy(i, j) = local.velocity.fy(i, j);
  });
  for (double d : disparity) out.max_disparity = std::max(out.max_disparity, d);
  return out;
}

/// Bases built once from the permeability; every solve reassembles the Gram
/// blocks with the current flow coefficient.
class MultiscaleSolver {
public:
  struct Result {
    CoarseSystem system;
    CoarseSolution coarse;
    Reconstruction fine;
  };

  MultiscaleSolver(const GridHierarchy& h, const PermField& k, const BasisProfile& profile = {},
                   Diagnostics* diag = nullptr)
      : h_(h) {
    if (h.ratio_x() < 2 || h.ratio_y() < 2)
      throw ConfigError("multiscale solver needs coarsening ratios >= 2 on both axes");
    if (k.nx != h.fine_nx() || k.ny != h.fine_ny())
      throw ConfigError("permeability dimensions do not match the fine grid");
    layout_ = enumerate_duals(h);
    bases_ = build_bases(h, layout_, k, profile, diag);
  }

  const GridHierarchy& hierarchy() const noexcept { return h_; }
  const DualLayout& layout() const noexcept { return layout_; }
  const std::vector<VelocityBasis>& bases() const noexcept { return bases_; }

  Result solve(std::span<const double> coeff, std::span<const double> source_density) const {
    Result r;
    r.system = assemble(h_, layout_, bases_, coeff, source_density);
    r.coarse = solve_coarse(h_, layout_, r.system);
    r.fine = reconstruct(h_, layout_, bases_, r.coarse, coeff, source_density);
    return r;
  }

private:
  GridHierarchy h_;
  DualLayout layout_;
  std::vector<VelocityBasis> bases_;
};

} // namespace msfv

#endif // MSFV_MULTISCALE_HPP

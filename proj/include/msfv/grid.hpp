#ifndef MSFV_GRID_HPP
#define MSFV_GRID_HPP

#include <array>
#include <string>
#include <vector>

#include "msfv/error.hpp"

namespace msfv {

/// Half-open rectangle of fine cells, [x0, x1) x [y0, y1).
struct CellRect {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  int size() const noexcept { return width() * height(); }
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
  bool contains(int i, int j) const noexcept {
    return i >= x0 && i < x1 && j >= y0 && j < y1;
  }
  friend bool operator==(const CellRect&, const CellRect&) = default;
};

/// Uniform Cartesian fine grid. Cell (i, j) has index j * nx + i.
struct FineGrid {
  int nx = 0, ny = 0;
  double hx = 1.0, hy = 1.0;

  int n_cells() const noexcept { return nx * ny; }
  int cell(int i, int j) const noexcept { return j * nx + i; }
  double cell_area() const noexcept { return hx * hy; }
  double lx() const noexcept { return nx * hx; }
  double ly() const noexcept { return ny * hy; }
  CellRect all() const noexcept { return {0, nx, 0, ny}; }
  friend bool operator==(const FineGrid&, const FineGrid&) = default;
};

enum class FluxDirection { x, y };

/// Half of a coarse interface, carrying one flux unknown.
///
/// For an x-directed flux the segment is the run of fine x-edges at index
/// `line` with rows [seg_begin, seg_end); the support rectangle is bounded
/// left/right by the inflow/outflow cross-sections through the neighbouring
/// coarse-cell centres and above/below by no-flow sides. The y case is the
/// transpose. Positive flux runs from `from_cell` to `to_cell`.
struct HalfInterface {
  int id = 0;
  FluxDirection direction = FluxDirection::x;
  int owner = 0;
  int from_cell = 0;
  int to_cell = 0;
  int line = 0;
  int seg_begin = 0;
  int seg_end = 0;
  CellRect support;

  int segment_length() const noexcept { return seg_end - seg_begin; }
};

/// Coarse dual cell centred at a coarse vertex, truncated at the boundary.
struct DualCell {
  int id = 0;
  int vertex_i = 0;
  int vertex_j = 0;
  CellRect region;
  /// Local order follows (ij, ik, jl, kl): bottom vertical, left horizontal,
  /// right horizontal, top vertical, skipping those that do not exist.
  std::vector<int> half_interfaces;
  std::vector<CellRect> quarter_cells;
};

class GridHierarchy {
public:
  GridHierarchy() = default;

  const FineGrid& fine() const noexcept { return fine_; }
  int fine_nx() const noexcept { return fine_.nx; }
  int fine_ny() const noexcept { return fine_.ny; }
  double hx() const noexcept { return fine_.hx; }
  double hy() const noexcept { return fine_.hy; }
  int coarse_nx() const noexcept { return coarse_nx_; }
  int coarse_ny() const noexcept { return coarse_ny_; }
  int ratio_x() const noexcept { return ratio_x_; }
  int ratio_y() const noexcept { return ratio_y_; }
  double lx() const noexcept { return fine_.lx(); }
  double ly() const noexcept { return fine_.ly(); }

  int n_coarse() const noexcept { return coarse_nx_ * coarse_ny_; }
  int coarse_cell(int ci, int cj) const noexcept { return cj * coarse_nx_ + ci; }
  int coarse_of_fine(int i, int j) const noexcept {
    return coarse_cell(i / ratio_x_, j / ratio_y_);
  }
  CellRect coarse_rect(int ci, int cj) const noexcept {
    return {ci * ratio_x_, (ci + 1) * ratio_x_, cj * ratio_y_, (cj + 1) * ratio_y_};
  }
  CellRect coarse_rect(int coarse) const noexcept {
    return coarse_rect(coarse % coarse_nx_, coarse / coarse_nx_);
  }
  double coarse_area() const noexcept {
    return ratio_x_ * fine_.hx * ratio_y_ * fine_.hy;
  }
  int n_full_interfaces() const noexcept {
    return (coarse_nx_ - 1) * coarse_ny_ + coarse_nx_ * (coarse_ny_ - 1);
  }

  // Offset (in fine cells) of the dual-grid line inside a coarse cell.
  int split_x() const noexcept { return ratio_x_ / 2; }
  int split_y() const noexcept { return ratio_y_ / 2; }

  friend GridHierarchy build_hierarchy(int, int, int, int, double, double);

private:
  FineGrid fine_;
  int coarse_nx_ = 0, coarse_ny_ = 0;
  int ratio_x_ = 0, ratio_y_ = 0;
};

/// Fine grid of fine_nx x fine_ny cells on [0, lx] x [0, ly] with a coarse
/// partition of coarse_nx x coarse_ny blocks.
inline GridHierarchy build_hierarchy(int fine_nx, int fine_ny, int coarse_nx,
                                     int coarse_ny, double lx, double ly) {
  if (fine_nx <= 0 || fine_ny <= 0 || coarse_nx <= 0 || coarse_ny <= 0)
    throw ConfigError("grid sizes must be positive");
  if (!(lx > 0.0) || !(ly > 0.0))
    throw ConfigError("domain lengths must be positive");
  if (fine_nx % coarse_nx != 0)
    throw ConfigError("x axis: fine_nx=" + std::to_string(fine_nx) +
                      " is not divisible by coarse_nx=" + std::to_string(coarse_nx));
  if (fine_ny % coarse_ny != 0)
    throw ConfigError("y axis: fine_ny=" + std::to_string(fine_ny) +
                      " is not divisible by coarse_ny=" + std::to_string(coarse_ny));
  GridHierarchy h;
  h.fine_ = FineGrid{fine_nx, fine_ny, lx / fine_nx, ly / fine_ny};
  h.coarse_nx_ = coarse_nx;
  h.coarse_ny_ = coarse_ny;
  h.ratio_x_ = fine_nx / coarse_nx;
  h.ratio_y_ = fine_ny / coarse_ny;
  return h;
}

struct DualLayout {
  std::vector<DualCell> duals;
  std::vector<HalfInterface> half_interfaces;
};

/// Dual cells at every coarse vertex owning at least one half-interface,
/// with their half-interfaces numbered in dual-cell order.
inline DualLayout enumerate_duals(const GridHierarchy& h) {
  const int cnx = h.coarse_nx(), cny = h.coarse_ny();
  const int rx = h.ratio_x(), ry = h.ratio_y();
  const int sx = h.split_x(), sy = h.split_y();
  const int nx = h.fine_nx(), ny = h.fine_ny();

  DualLayout out;
  for (int vj = 0; vj <= cny; ++vj) {
    for (int vi = 0; vi <= cnx; ++vi) {
      const int xv = vi * rx, yv = vj * ry;
      // Dual lines run through the coarse-cell centres on either side.
      const int xl = vi > 0 ? (vi - 1) * rx + sx : 0;
      const int xr = vi < cnx ? vi * rx + sx : nx;
      const int yb = vj > 0 ? (vj - 1) * ry + sy : 0;
      const int yt = vj < cny ? vj * ry + sy : ny;

      const CellRect bl{xl, xv, yb, yv}, br{xv, xr, yb, yv};
      const CellRect tl{xl, xv, yv, yt}, tr{xv, xr, yv, yt};
      const bool interior_x = vi > 0 && vi < cnx;
      const bool interior_y = vj > 0 && vj < cny;

      DualCell d;
      d.id = static_cast<int>(out.duals.size());
      d.vertex_i = vi;
      d.vertex_j = vj;
      d.region = CellRect{xl, xr, yb, yt};
      for (const CellRect& q : {bl, br, tl, tr})
        if (!q.empty()) d.quarter_cells.push_back(q);

      auto add = [&](FluxDirection dir, int from, int to, int line, int b, int e,
                     CellRect support) {
        HalfInterface hi;
        hi.id = static_cast<int>(out.half_interfaces.size());
        hi.direction = dir;
        hi.owner = d.id;
        hi.from_cell = from;
        hi.to_cell = to;
        hi.line = line;
        hi.seg_begin = b;
        hi.seg_end = e;
        hi.support = support;
        d.half_interfaces.push_back(hi.id);
        out.half_interfaces.push_back(hi);
      };

      // ij: vertical coarse line below the vertex (x-directed flux).
      if (interior_x && vj > 0)
        add(FluxDirection::x, h.coarse_cell(vi - 1, vj - 1), h.coarse_cell(vi, vj - 1),
            xv, yb, yv, CellRect{xl, xr, yb, yv});
      // ik: horizontal coarse line left of the vertex (y-directed flux).
      if (interior_y && vi > 0)
        add(FluxDirection::y, h.coarse_cell(vi - 1, vj - 1), h.coarse_cell(vi - 1, vj),
            yv, xl, xv, CellRect{xl, xv, yb, yt});
      // jl: horizontal coarse line right of the vertex.
      if (interior_y && vi < cnx)
        add(FluxDirection::y, h.coarse_cell(vi, vj - 1), h.coarse_cell(vi, vj),
            yv, xv, xr, CellRect{xv, xr, yb, yt});
      // kl: vertical coarse line above the vertex.
      if (interior_x && vj < cny)
        add(FluxDirection::x, h.coarse_cell(vi - 1, vj), h.coarse_cell(vi, vj),
            xv, yv, yt, CellRect{xl, xr, yv, yt});

      if (!d.half_interfaces.empty()) out.duals.push_back(std::move(d));
    }
  }
  return out;
}

} // namespace msfv

#endif // MSFV_GRID_HPP

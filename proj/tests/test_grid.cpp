#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <tuple>

#include "msfv/grid.hpp"

using namespace msfv;

TEST(Hierarchy, RatiosOfChannelGrid) {
  const GridHierarchy h = build_hierarchy(60, 220, 3, 5, 60.0, 220.0);
  EXPECT_EQ(h.ratio_x(), 20);
  EXPECT_EQ(h.ratio_y(), 44);
  EXPECT_DOUBLE_EQ(h.hx(), 1.0);
  EXPECT_DOUBLE_EQ(h.hy(), 1.0);
}

TEST(Hierarchy, LengthsAreCellMultiples) {
  const GridHierarchy h = build_hierarchy(12, 8, 3, 2, 3.0, 0.5);
  EXPECT_DOUBLE_EQ(h.fine_nx() * h.hx(), 3.0);
  EXPECT_DOUBLE_EQ(h.fine_ny() * h.hy(), 0.5);
  EXPECT_DOUBLE_EQ(h.coarse_area(), 0.25);
}

TEST(Hierarchy, NonDivisibleRatioNamesAxis) {
  try {
    build_hierarchy(10, 9, 3, 3, 1, 1);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x axis"), std::string::npos);
  }
  try {
    build_hierarchy(9, 10, 3, 3, 1, 1);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("y axis"), std::string::npos);
  }
  EXPECT_THROW(build_hierarchy(0, 4, 1, 1, 1, 1), ConfigError);
  EXPECT_THROW(build_hierarchy(4, 4, 1, 1, -1, 1), ConfigError);
}

TEST(Duals, SingleCoarseCellHasNoUnknowns) {
  const GridHierarchy h = build_hierarchy(4, 4, 1, 1, 1, 1);
  const DualLayout d = enumerate_duals(h);
  EXPECT_EQ(h.n_full_interfaces(), 0);
  EXPECT_TRUE(d.half_interfaces.empty());
  EXPECT_TRUE(d.duals.empty());
}

TEST(Duals, ThreeByThreeCounts) {
  const GridHierarchy h = build_hierarchy(9, 9, 3, 3, 1, 1);
  EXPECT_EQ(h.n_full_interfaces(), 12);
  EXPECT_EQ(enumerate_duals(h).half_interfaces.size(), 24u);
}

namespace {

std::map<std::size_t, int> unknowns_histogram(const DualLayout& d) {
  std::map<std::size_t, int> hist;
  for (const DualCell& c : d.duals) ++hist[c.half_interfaces.size()];
  return hist;
}

} // namespace

TEST(Duals, ThreeByFiveCounts) {
  const GridHierarchy h = build_hierarchy(60, 220, 3, 5, 60, 220);
  const DualLayout d = enumerate_duals(h);
  EXPECT_EQ(h.n_full_interfaces(), 22);
  EXPECT_EQ(d.half_interfaces.size(), 44u);
  const auto hist = unknowns_histogram(d);
  EXPECT_EQ(hist.at(4), 8);
  EXPECT_EQ(hist.at(1), 12);
  EXPECT_EQ(hist.size(), 2u);
}

TEST(Duals, TwoByTwoCounts) {
  const GridHierarchy h = build_hierarchy(8, 8, 2, 2, 1, 1);
  const DualLayout d = enumerate_duals(h);
  EXPECT_EQ(h.n_full_interfaces(), 4);
  EXPECT_EQ(d.half_interfaces.size(), 8u);
  const auto hist = unknowns_histogram(d);
  EXPECT_EQ(hist.at(4), 1);
  EXPECT_EQ(hist.at(1), 4);
}

TEST(Duals, OneByTwoCounts) {
  const GridHierarchy h = build_hierarchy(4, 8, 1, 2, 1, 1);
  const DualLayout d = enumerate_duals(h);
  EXPECT_EQ(h.n_full_interfaces(), 1);
  EXPECT_EQ(d.half_interfaces.size(), 2u);
  EXPECT_EQ(d.duals.size(), 2u);
  for (const DualCell& c : d.duals) EXPECT_EQ(c.half_interfaces.size(), 1u);
}

TEST(Duals, BoundaryVertexSupportsAndQuarterCells) {
  const GridHierarchy h = build_hierarchy(12, 12, 3, 3, 1, 1);
  for (const DualCell& d : enumerate_duals(h).duals) {
    const bool ix = d.vertex_i > 0 && d.vertex_i < h.coarse_nx();
    const bool iy = d.vertex_j > 0 && d.vertex_j < h.coarse_ny();
    if (ix && iy) {
      EXPECT_EQ(d.half_interfaces.size(), 4u);
      EXPECT_EQ(d.quarter_cells.size(), 4u);
    } else {
      EXPECT_EQ(d.half_interfaces.size(), 1u);
      EXPECT_EQ(d.quarter_cells.size(), 2u);
    }
  }
}

// Geometric invariants over random hierarchies.
TEST(DualsProperty, RandomHierarchies) {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> cdist(1, 6), rdist(2, 7);
  for (int trial = 0; trial < 60; ++trial) {
    const int cnx = cdist(rng), cny = cdist(rng), rx = rdist(rng), ry = rdist(rng);
    const GridHierarchy h = build_hierarchy(cnx * rx, cny * ry, cnx, cny, 1.0, 2.0);
    const DualLayout d = enumerate_duals(h);
    SCOPED_TRACE(testing::Message() << cnx << "x" << cny << " ratio " << rx << "x" << ry);

    // Counting identity.
    const int expected = 2 * ((cnx - 1) * cny + cnx * (cny - 1));
    ASSERT_EQ(static_cast<int>(d.half_interfaces.size()), expected);
    int from_duals = 0;
    for (const DualCell& c : d.duals) from_duals += static_cast<int>(c.half_interfaces.size());
    EXPECT_EQ(from_duals, expected);

    // Each coarse interface is split into two halves that together cover
    // it exactly; each fine edge belongs to at most one segment.
    std::map<std::tuple<int, int, int>, int> edge_owner; // (dir, line, t)
    std::map<std::tuple<int, int, int>, int> covered;    // (dir, from, to) -> edges
    for (const HalfInterface& hi : d.half_interfaces) {
      EXPECT_GT(hi.segment_length(), 0);
      for (int t = hi.seg_begin; t < hi.seg_end; ++t)
        EXPECT_EQ((edge_owner[{static_cast<int>(hi.direction), hi.line, t}]++), 0);
      covered[{static_cast<int>(hi.direction), hi.from_cell, hi.to_cell}] += hi.segment_length();

      const DualCell& owner = d.duals[hi.owner];
      const CellRect& r = owner.region;
      const CellRect& s = hi.support;
      EXPECT_TRUE(s.x0 >= r.x0 && s.x1 <= r.x1 && s.y0 >= r.y0 && s.y1 <= r.y1);
      if (hi.direction == FluxDirection::x) {
        EXPECT_EQ(s.y0, hi.seg_begin);
        EXPECT_EQ(s.y1, hi.seg_end);
        EXPECT_TRUE(hi.line > s.x0 && hi.line < s.x1);
      } else {
        EXPECT_EQ(s.x0, hi.seg_begin);
        EXPECT_EQ(s.x1, hi.seg_end);
        EXPECT_TRUE(hi.line > s.y0 && hi.line < s.y1);
      }
    }
    EXPECT_EQ(static_cast<int>(covered.size()), h.n_full_interfaces());
    for (const auto& [key, len] : covered)
      EXPECT_EQ(len, std::get<0>(key) == static_cast<int>(FluxDirection::x) ? ry : rx);

    for (const DualCell& c : d.duals) {
      // Quarter cells tile the dual cell without overlap.
      std::map<std::pair<int, int>, int> hits;
      for (const CellRect& q : c.quarter_cells)
        for (int j = q.y0; j < q.y1; ++j)
          for (int i = q.x0; i < q.x1; ++i) ++hits[{i, j}];
      EXPECT_EQ(static_cast<int>(hits.size()), c.region.size());
      for (const auto& [cell, n] : hits) EXPECT_EQ(n, 1);

      // Interior dual cells: the supports cover every cell exactly twice.
      if (c.half_interfaces.size() == 4) {
        std::map<std::pair<int, int>, int> cover;
        for (int l : c.half_interfaces) {
          const CellRect& s = d.half_interfaces[l].support;
          for (int j = s.y0; j < s.y1; ++j)
            for (int i = s.x0; i < s.x1; ++i) ++cover[{i, j}];
        }
        EXPECT_EQ(static_cast<int>(cover.size()), c.region.size());
        for (const auto& [cell, n] : cover) EXPECT_EQ(n, 2);
      }
    }
  }
}

TEST(DualsProperty, EvenRatioSegmentsAreHalfInterfaces) {
  const GridHierarchy h = build_hierarchy(24, 16, 3, 2, 1, 1);
  for (const HalfInterface& hi : enumerate_duals(h).half_interfaces) {
    const int full = hi.direction == FluxDirection::x ? h.ratio_y() : h.ratio_x();
    EXPECT_EQ(2 * hi.segment_length(), full);
  }
}

// test_lattice.cpp
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "qdlab/errors.hpp"
#include "qdlab/lattice.hpp"

using namespace qdlab;

TEST(Lattice, Counts) {
  TorusLattice L(3);
  EXPECT_EQ(L.num_edges(), 18);
  EXPECT_EQ(L.num_vertices(), 9);
  EXPECT_EQ(L.num_plaquettes(), 9);
  EXPECT_THROW(TorusLattice(1), GeometryError);
  for (int e = 0; e < L.num_edges(); ++e) EXPECT_EQ(L.edge_index(L.edge(e)), e);
}

TEST(Lattice, StarOrientation) {
  TorusLattice L(2);
  // the left-pointing horizontal edge based at (0,0)
  int e = L.edge_index({Orient::H, 0, 0});
  EXPECT_EQ(L.tail(e), L.vertex_index(1, 0));
  EXPECT_EQ(L.head(e), L.vertex_index(0, 0));
  for (auto leg : L.star(L.vertex_index(1, 0)))
    if (leg.edge == e) EXPECT_TRUE(leg.away);
  for (auto leg : L.star(L.vertex_index(0, 0)))
    if (leg.edge == e) EXPECT_FALSE(leg.away);
  TorusLattice L3(3);
  std::map<int, int> count;
  for (int v = 0; v < L3.num_vertices(); ++v) {
    auto s = L3.star(v);
    EXPECT_EQ(s.size(), 4u);
    for (auto leg : s) {
      ++count[leg.edge];
      EXPECT_EQ(leg.away, L3.tail(leg.edge) == v);
      EXPECT_EQ(!leg.away, L3.head(leg.edge) == v);
    }
  }
  for (auto [edge, c] : count) EXPECT_EQ(c, 2);
  EXPECT_EQ(count.size(), 18u);
}

TEST(Lattice, PlaquetteSigns) {
  TorusLattice L(3);
  std::map<int, int> count;
  for (int p = 0; p < L.num_plaquettes(); ++p) {
    auto r = L.plaquette(p);
    EXPECT_EQ(r[0].sign, 1);
    EXPECT_EQ(r[1].sign, 1);
    EXPECT_EQ(r[2].sign, -1);
    EXPECT_EQ(r[3].sign, -1);
    for (auto leg : r) ++count[leg.edge];
    // faces_of_edge agrees with the ring signs
    for (auto leg : r) {
      auto f = L.faces_of_edge(leg.edge);
      EXPECT_EQ(f[leg.sign > 0 ? 1 : 0], p);
    }
  }
  for (auto [edge, c] : count) EXPECT_EQ(c, 2);
  // incidence double counting
  EXPECT_EQ(4 * L.num_vertices(), 2 * L.num_edges());
  EXPECT_EQ(4 * L.num_plaquettes(), 2 * L.num_edges());
}

TEST(Lattice, PlaquetteCycleInvariance) {
  // rotating the start edge keeps g1 g2 g3^-1 g4^-1 = 1 equivalent on Z3
  TorusLattice L(3);
  auto r = L.plaquette(4);
  int vals[4] = {1, 2, 0, 1};
  auto holonomy = [&](int start) {
    int s = 0;
    for (int i = 0; i < 4; ++i) {
      int j = (start + i) % 4;
      s += r[j].sign * vals[j];
    }
    return ((s % 3) + 3) % 3;
  };
  for (int st = 1; st < 4; ++st) EXPECT_EQ(holonomy(st) == 0, holonomy(0) == 0);
}

TEST(Lattice, Classification) {
  TorusLattice L(4);
  auto c1 = classify_region(L, Region::rect(1, 1, 1, 1));
  EXPECT_EQ(c1.edges.size(), 4u);
  EXPECT_EQ(c1.inner_edges.size(), 0u);
  EXPECT_EQ(c1.inner_vertices.size(), 0u);
  EXPECT_EQ(c1.n_plaquettes, 1);
  auto c2 = classify_region(L, Region::rect(0, 0, 2, 2));
  EXPECT_EQ(c2.edges.size(), 12u);
  EXPECT_EQ(c2.boundary_edges.size(), 8u);
  EXPECT_EQ(c2.inner_edges.size(), 4u);
  EXPECT_EQ(c2.inner_vertices.size(), 1u);
  EXPECT_EQ(c2.boundary_vertices.size(), 8u);
  EXPECT_EQ(c2.n_plaquettes, 4);
  auto ct = classify_region(L, parse_region("torus", L));
  EXPECT_TRUE(ct.boundary_edges.empty());
  EXPECT_EQ(ct.inner_edges.size(), 32u);
  EXPECT_EQ(ct.inner_vertices.size(), 16u);
  // 2x3: |E| = 17, |E_d| = 10, inner vertices 2
  auto c23 = classify_region(L, Region::rect(0, 0, 3, 2));
  EXPECT_EQ(c23.edges.size(), 17u);
  EXPECT_EQ(c23.boundary_edges.size(), 10u);
  EXPECT_EQ(c23.inner_vertices.size(), 2u);
  // cylinder of height 1 on N=2: four edges on each of the two circles, none inside
  TorusLattice L2(2);
  auto cc = classify_region(L2, parse_region("cyl:h,0,1", L2));
  EXPECT_EQ(cc.edges.size(), 6u);
  EXPECT_EQ(cc.boundary_edges.size(), 4u);
  EXPECT_EQ(cc.inner_edges.size(), 2u);
  EXPECT_EQ(cc.inner_vertices.size(), 0u);
}

TEST(Lattice, ParseRegion) {
  TorusLattice L(4);
  Region r = parse_region("rect:3,3,2,1", L);
  EXPECT_EQ(r.kind, RegionKind::Rect);
  EXPECT_EQ(region_plaquettes(L, r), (std::vector<int>{12, 15}));
  EXPECT_THROW(parse_region("rect:0,0,4,1", L), GeometryError);
  EXPECT_THROW(parse_region("disk:1", L), GeometryError);
  EXPECT_EQ(parse_region("cyl:v,1,2", L).kind, RegionKind::CylV);
}

TEST(Lattice, Families) {
  TorusLattice L(4);
  EXPECT_EQ(enumerate_family(L, FamilyKind::Torus, 2).size(), 1u);
  auto rects = enumerate_family(L, FamilyKind::Rectangles, 2);
  EXPECT_EQ(rects.size(), 16u);
  std::set<std::vector<int>> uniq;
  for (auto& R : rects) uniq.insert(region_plaquettes(L, R));
  EXPECT_EQ(uniq.size(), rects.size());
  auto cyl = enumerate_family(L, FamilyKind::Cylinders, 3);
  bool h = false, v = false;
  for (auto& R : cyl) {
    h = h || R.kind == RegionKind::CylH;
    v = v || R.kind == RegionKind::CylV;
  }
  EXPECT_TRUE(h && v);
  EXPECT_EQ(enumerate_family(L, FamilyKind::Rectangles, 3, 1).size(), 9u * 16u);
  EXPECT_THROW(enumerate_family(L, FamilyKind::Rectangles, 1), GeometryError);
}

TEST(Lattice, Splits) {
  TorusLattice L(5);
  Region R = Region::rect(0, 0, 3, 1);
  Split s = split_region(L, R, SplitPattern::Cols, {1, 1});
  EXPECT_EQ(s.AB.a, 2);
  EXPECT_EQ(s.BC.a, 2);
  EXPECT_EQ(s.B.a, 1);
  EXPECT_EQ(s.B.b, 1);
  // recombination: E_AB u E_BC = E_ABC
  auto eab = classify_region(L, s.AB).edges, ebc = classify_region(L, s.BC).edges;
  std::set<int> u(eab.begin(), eab.end());
  u.insert(ebc.begin(), ebc.end());
  auto eabc = classify_region(L, R).edges;
  EXPECT_EQ(std::vector<int>(u.begin(), u.end()), eabc);
  EXPECT_THROW(split_region(L, R, SplitPattern::Cols, {1, 2}), GeometryError);
  EXPECT_THROW(split_region(L, R, SplitPattern::Cols, {0, 3}), GeometryError);

  TorusLattice L6(6);
  Split t = split_region(L6, parse_region("torus", L6), SplitPattern::Torus, {1, 2, 1});
  EXPECT_EQ(t.B.kind, RegionKind::CylV);
  EXPECT_EQ(t.B.a, 2);
  EXPECT_EQ(t.Bp.kind, RegionKind::CylV);
  EXPECT_EQ(t.Bp.a, 2);
  EXPECT_EQ(t.AB.a, 5);
  EXPECT_EQ(t.BC.a, 5);
  EXPECT_THROW(split_region(L6, parse_region("torus", L6), SplitPattern::Torus, {2, 2, 2}), GeometryError);
}

TEST(Lattice, Patches) {
  TorusLattice L(2);
  Patch full = full_patch(L);
  EXPECT_EQ(full.stars.size(), 4u);
  EXPECT_EQ(full.plaquettes.size(), 4u);
  Patch three = make_patch(L, {0, 1, 4});
  EXPECT_TRUE(three.stars.empty());
  EXPECT_TRUE(three.plaquettes.empty());
  auto ring = L.plaquette(0);
  Patch plaq = make_patch(L, {ring[0].edge, ring[1].edge, ring[2].edge, ring[3].edge});
  EXPECT_EQ(plaq.plaquettes, std::vector<int>{0});
  EXPECT_TRUE(plaq.stars.empty());
  EXPECT_EQ(plaq.local(ring[2].edge), 0);
}

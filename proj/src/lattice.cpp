// lattice.cpp
#include "qdlab/lattice.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "qdlab/errors.hpp"

namespace qdlab {

TorusLattice::TorusLattice(int N) : N_(N) {
  if (N < 2) throw GeometryError("torus: N must be at least 2, got " + std::to_string(N));
}

int TorusLattice::edge_index(const Edge& e) const {
  int base = wrap(e.y) * N_ + wrap(e.x);
  return e.o == Orient::H ? base : N_ * N_ + base;
}

Edge TorusLattice::edge(int id) const {
  if (id < 0 || id >= num_edges()) throw GeometryError("edge id " + std::to_string(id) + " out of range");
  Orient o = id < N_ * N_ ? Orient::H : Orient::V;
  int r = id % (N_ * N_);
  return {o, r % N_, r / N_};
}

int TorusLattice::tail(int e) const {
  Edge d = edge(e);
  return d.o == Orient::H ? vertex_index(d.x + 1, d.y) : vertex_index(d.x, d.y + 1);
}

int TorusLattice::head(int e) const {
  Edge d = edge(e);
  return vertex_index(d.x, d.y);
}

std::array<StarLeg, 4> TorusLattice::star(int v) const {
  auto [x, y] = vertex_coords(v);
  return {{{edge_index({Orient::H, x, y}), false},
           {edge_index({Orient::V, x, y}), false},
           {edge_index({Orient::H, x - 1, y}), true},
           {edge_index({Orient::V, x, y - 1}), true}}};
}

std::array<PlaqLeg, 4> TorusLattice::plaquette(int p) const {
  auto [x, y] = plaquette_coords(p);
  return {{{edge_index({Orient::H, x, y + 1}), +1},
           {edge_index({Orient::V, x, y}), +1},
           {edge_index({Orient::H, x, y}), -1},
           {edge_index({Orient::V, x + 1, y}), -1}}};
}

std::array<int, 2> TorusLattice::faces_of_edge(int e) const {
  Edge d = edge(e);
  if (d.o == Orient::H) return {plaquette_index(d.x, d.y), plaquette_index(d.x, d.y - 1)};
  return {plaquette_index(d.x - 1, d.y), plaquette_index(d.x, d.y)};
}

std::string Region::str() const {
  std::ostringstream os;
  switch (kind) {
    case RegionKind::Rect: os << "rect:" << x0 << "," << y0 << "," << a << "," << b; break;
    case RegionKind::CylH: os << "cyl:h," << y0 << "," << b; break;
    case RegionKind::CylV: os << "cyl:v," << x0 << "," << a; break;
    case RegionKind::Torus: os << "torus"; break;
  }
  return os.str();
}

namespace {

std::vector<int> parse_ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stoi(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw GeometryError("bad integer '" + tok + "' in " + what);
    }
  }
  return out;
}

}  // namespace

Region parse_region(const std::string& s, const TorusLattice& L) {
  const int N = L.N();
  Region R{RegionKind::Torus, 0, 0, N, N};
  if (s == "torus") {
  } else if (s.rfind("rect:", 0) == 0) {
    auto v = parse_ints(s.substr(5), s);
    if (v.size() != 4) throw GeometryError("rect needs x0,y0,a,b: " + s);
    R = Region::rect(v[0], v[1], v[2], v[3]);
  } else if (s.rfind("cyl:h,", 0) == 0 || s.rfind("cyl:v,", 0) == 0) {
    auto v = parse_ints(s.substr(6), s);
    if (v.size() != 2) throw GeometryError("cylinder needs start,width: " + s);
    if (s[4] == 'h') R = {RegionKind::CylH, 0, v[0], N, v[1]};
    else R = {RegionKind::CylV, v[0], 0, v[1], N};
  } else {
    throw GeometryError("unknown region '" + s + "'");
  }
  validate_region(L, R);
  return R;
}

void validate_region(const TorusLattice& L, const Region& R) {
  const int N = L.N();
  auto bad = [&](const std::string& m) { throw GeometryError("region " + R.str() + ": " + m); };
  switch (R.kind) {
    case RegionKind::Rect:
      if (R.a < 1 || R.b < 1) bad("sides must be positive");
      if (R.a >= N || R.b >= N) bad("a proper rectangle needs sides below N=" + std::to_string(N));
      break;
    case RegionKind::CylH:
      if (R.a != N || R.b < 1 || R.b >= N) bad("cylinder width must lie in [1, N-1]");
      break;
    case RegionKind::CylV:
      if (R.b != N || R.a < 1 || R.a >= N) bad("cylinder width must lie in [1, N-1]");
      break;
    case RegionKind::Torus:
      if (R.a != N || R.b != N) bad("torus must cover the lattice");
      break;
  }
}

std::vector<int> region_plaquettes(const TorusLattice& L, const Region& R) {
  validate_region(L, R);
  std::vector<int> out;
  for (int j = 0; j < R.b; ++j)
    for (int i = 0; i < R.a; ++i) out.push_back(L.plaquette_index(R.x0 + i, R.y0 + j));
  std::sort(out.begin(), out.end());
  return out;
}

RegionClassification classify_plaquettes(const TorusLattice& L, std::vector<int> plaquettes) {
  std::sort(plaquettes.begin(), plaquettes.end());
  plaquettes.erase(std::unique(plaquettes.begin(), plaquettes.end()), plaquettes.end());
  RegionClassification c;
  c.plaquettes = plaquettes;
  c.n_plaquettes = static_cast<int>(plaquettes.size());
  std::vector<int> count(L.num_edges(), 0);
  for (int p : plaquettes)
    for (auto leg : L.plaquette(p)) ++count[leg.edge];
  std::vector<char> in_edge(L.num_edges(), 0);
  for (int e = 0; e < L.num_edges(); ++e) {
    if (!count[e]) continue;
    in_edge[e] = 1;
    c.edges.push_back(e);
    (count[e] == 1 ? c.boundary_edges : c.inner_edges).push_back(e);
  }
  std::set<int> verts;
  for (int e : c.edges) {
    verts.insert(L.tail(e));
    verts.insert(L.head(e));
  }
  for (int v : verts) {
    c.vertices.push_back(v);
    bool inner = true;
    for (auto leg : L.star(v)) inner = inner && in_edge[leg.edge];
    (inner ? c.inner_vertices : c.boundary_vertices).push_back(v);
  }
  return c;
}

RegionClassification classify_region(const TorusLattice& L, const Region& R) {
  return classify_plaquettes(L, region_plaquettes(L, R));
}

std::vector<Region> enumerate_family(const TorusLattice& L, FamilyKind kind, int r, int min_side) {
  if (r < 2) throw GeometryError("family: r must be at least 2, got " + std::to_string(r));
  if (min_side < 1) throw GeometryError("family: min_side must be positive");
  const int N = L.N();
  std::vector<Region> out;
  switch (kind) {
    case FamilyKind::Torus:
      out.push_back({RegionKind::Torus, 0, 0, N, N});
      break;
    case FamilyKind::Cylinders:
      for (int w = min_side; w <= std::min(r, N - 1); ++w)
        for (int s = 0; s < N; ++s) {
          out.push_back({RegionKind::CylH, 0, s, N, w});
          out.push_back({RegionKind::CylV, s, 0, w, N});
        }
      break;
    case FamilyKind::Rectangles:
      for (int a = min_side; a <= std::min(r, N - 1); ++a)
        for (int b = min_side; b <= std::min(r, N - 1); ++b)
          for (int y = 0; y < N; ++y)
            for (int x = 0; x < N; ++x) out.push_back(Region::rect(x, y, a, b));
      break;
  }
  return out;
}

SplitPattern parse_split_pattern(const std::string& s) {
  if (s == "cols") return SplitPattern::Cols;
  if (s == "rows") return SplitPattern::Rows;
  if (s == "cyl") return SplitPattern::Cylinder;
  if (s == "torus") return SplitPattern::Torus;
  throw GeometryError("unknown split pattern '" + s + "'");
}

namespace {

// Sub-interval of R along one axis, keeping the other axis of R.
Region slab(const TorusLattice& L, const Region& R, bool along_x, int start, int width) {
  const int N = L.N();
  Region s = R;
  if (along_x) {
    s.x0 = L.wrap(start);
    s.a = width;
  } else {
    s.y0 = L.wrap(start);
    s.b = width;
  }
  bool wx = s.a == N, wy = s.b == N;
  s.kind = wx && wy ? RegionKind::Torus : wx ? RegionKind::CylH : wy ? RegionKind::CylV : RegionKind::Rect;
  if (s.kind == RegionKind::CylH) s.x0 = 0;
  if (s.kind == RegionKind::CylV) s.y0 = 0;
  validate_region(L, s);
  return s;
}

}  // namespace

Split split_region(const TorusLattice& L, const Region& R, SplitPattern p, const std::vector<int>& w) {
  validate_region(L, R);
  Split s;
  auto need = [&](bool ok, const std::string& m) {
    if (!ok) throw GeometryError("split of " + R.str() + ": " + m);
  };
  if (p == SplitPattern::Cols || p == SplitPattern::Rows) {
    bool along_x = p == SplitPattern::Cols;
    need(w.size() == 2, "expected two widths |A|,|B|");
    int total = along_x ? R.a : R.b;
    need(!(along_x ? R.kind == RegionKind::CylH || R.kind == RegionKind::Torus
                   : R.kind == RegionKind::CylV || R.kind == RegionKind::Torus),
         "the split direction wraps; use the cylinder or torus pattern");
    need(w[0] >= 1, "|A| = " + std::to_string(w[0]) + " must be positive");
    need(w[1] >= 1, "overlap width " + std::to_string(w[1]) + " must be positive");
    int wc = total - w[0] - w[1];
    need(wc >= 1, "|C| = " + std::to_string(wc) + " must be positive (overlap " + std::to_string(w[1]) +
                      " too wide for width " + std::to_string(total) + ")");
    int o = along_x ? R.x0 : R.y0;
    s.A = slab(L, R, along_x, o, w[0]);
    s.B = slab(L, R, along_x, o + w[0], w[1]);
    s.C = slab(L, R, along_x, o + w[0] + w[1], wc);
    s.AB = slab(L, R, along_x, o, w[0] + w[1]);
    s.BC = slab(L, R, along_x, o + w[0], w[1] + wc);
    s.overlap = w[1];
    return s;
  }
  need(w.size() == 3, "expected three widths |A|,|B|,|C|");
  bool along_x;
  if (p == SplitPattern::Cylinder) {
    need(R.kind == RegionKind::CylH || R.kind == RegionKind::CylV, "cylinder pattern needs a cylinder");
    along_x = R.kind == RegionKind::CylH;
  } else {
    need(R.kind == RegionKind::Torus, "torus pattern needs the torus");
    along_x = true;
  }
  const int N = L.N();
  for (int i = 0; i < 3; ++i) need(w[i] >= 1, "width " + std::to_string(w[i]) + " must be positive");
  int wbp = N - w[0] - w[1] - w[2];
  need(wbp >= 1, "|B'| = " + std::to_string(wbp) + " must be positive");
  int o = along_x ? R.x0 : R.y0;
  s.four_parts = true;
  s.A = slab(L, R, along_x, o, w[0]);
  s.B = slab(L, R, along_x, o + w[0], w[1]);
  s.C = slab(L, R, along_x, o + w[0] + w[1], w[2]);
  s.Bp = slab(L, R, along_x, o - wbp, wbp);
  s.AB = slab(L, R, along_x, o - wbp, wbp + w[0] + w[1]);
  s.BC = slab(L, R, along_x, o + w[0], w[1] + w[2] + wbp);
  s.overlap = std::min(w[1], wbp);
  return s;
}

int Patch::local(int g) const {
  auto it = std::lower_bound(edges.begin(), edges.end(), g);
  return it != edges.end() && *it == g ? static_cast<int>(it - edges.begin()) : -1;
}

Patch make_patch(const TorusLattice& L, std::vector<int> edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (int e : edges)
    if (e < 0 || e >= L.num_edges()) throw GeometryError("patch edge " + std::to_string(e) + " out of range");
  Patch P;
  P.edges = edges;
  for (int v = 0; v < L.num_vertices(); ++v) {
    bool in = true;
    for (auto leg : L.star(v)) in = in && P.local(leg.edge) >= 0;
    if (in) P.stars.push_back(v);
  }
  for (int p = 0; p < L.num_plaquettes(); ++p) {
    bool in = true;
    for (auto leg : L.plaquette(p)) in = in && P.local(leg.edge) >= 0;
    if (in) P.plaquettes.push_back(p);
  }
  return P;
}

Patch full_patch(const TorusLattice& L) {
  std::vector<int> all(L.num_edges());
  for (int e = 0; e < L.num_edges(); ++e) all[e] = e;
  return make_patch(L, all);
}

}  // namespace qdlab

// lattice.hpp
// Square-lattice torus geometry: edges, stars, plaquettes, regions and splits.
//
// Coordinates: x grows to the right, y grows upward, both mod N.
//   H(x,y) joins (x,y) and (x+1,y) and points left:  tail (x+1,y), head (x,y).
//   V(x,y) joins (x,y) and (x,y+1) and points down:  tail (x,y+1), head (x,y).
//   p(x,y) is the face with lower-left corner (x,y).
// Global edge order: horizontals row-major, then verticals row-major.
#pragma once

#include <array>
#include <string>
#include <vector>

namespace qdlab {

enum class Orient { H, V };

struct Edge {
  Orient o;
  int x, y;
  bool operator==(const Edge&) const = default;
};

// One leg of a star ring. `away` is true when the edge points away from v.
struct StarLeg {
  int edge;
  bool away;
};

// One leg of a plaquette ring. sign = +1 when the edge orientation agrees
// with the counterclockwise traversal.
struct PlaqLeg {
  int edge;
  int sign;
};

class TorusLattice {
 public:
  explicit TorusLattice(int N);

  int N() const { return N_; }
  int num_edges() const { return 2 * N_ * N_; }
  int num_vertices() const { return N_ * N_; }
  int num_plaquettes() const { return N_ * N_; }

  int wrap(int c) const { return ((c % N_) + N_) % N_; }
  int edge_index(const Edge& e) const;
  Edge edge(int id) const;
  int vertex_index(int x, int y) const { return wrap(y) * N_ + wrap(x); }
  int plaquette_index(int x, int y) const { return wrap(y) * N_ + wrap(x); }
  std::array<int, 2> vertex_coords(int v) const { return {v % N_, v / N_}; }
  std::array<int, 2> plaquette_coords(int p) const { return {p % N_, p / N_}; }

  int tail(int e) const;
  int head(int e) const;
  // Ring order E, N, W, S. E = H(x,y) and N = V(x,y) point toward v.
  std::array<StarLeg, 4> star(int v) const;
  // Counterclockwise from the top edge: H(x,y+1), V(x,y), H(x,y), V(x+1,y).
  std::array<PlaqLeg, 4> plaquette(int p) const;
  // The two faces adjacent to an edge: [0] is above (H) or left (V) of it and
  // sees it as a negatively signed leg, [1] is below or right, sign +1.
  std::array<int, 2> faces_of_edge(int e) const;

 private:
  int N_;
};

enum class RegionKind { Rect, CylH, CylV, Torus };

// Plaquettes (x0+i, y0+j) for 0 <= i < a, 0 <= j < b. CylH wraps in x (a = N),
// CylV wraps in y (b = N), Torus has a = b = N.
struct Region {
  RegionKind kind;
  int x0 = 0, y0 = 0, a = 1, b = 1;

  static Region rect(int x0, int y0, int a, int b) { return {RegionKind::Rect, x0, y0, a, b}; }
  std::string str() const;
};

// "rect:x0,y0,a,b", "cyl:h,y0,b", "cyl:v,x0,a", "torus".
Region parse_region(const std::string& s, const TorusLattice& L);
void validate_region(const TorusLattice& L, const Region& R);
std::vector<int> region_plaquettes(const TorusLattice& L, const Region& R);

struct RegionClassification {
  std::vector<int> plaquettes;
  std::vector<int> edges;           // E_R
  std::vector<int> boundary_edges;  // E_dR: exactly one adjacent face in R
  std::vector<int> inner_edges;     // interior of E_R
  std::vector<int> vertices;        // V_R
  std::vector<int> boundary_vertices;
  std::vector<int> inner_vertices;  // all four star edges in E_R
  int n_plaquettes = 0;
};

RegionClassification classify_region(const TorusLattice& L, const Region& R);
RegionClassification classify_plaquettes(const TorusLattice& L, std::vector<int> plaquettes);

enum class FamilyKind { Torus, Cylinders, Rectangles };

// Exhaustive family of regions. Rectangles have min_side <= a,b <= r and
// a,b < N; cylinders have min_side <= width <= r (clipped to N-1) in both
// wrap directions. The torus family has one element.
std::vector<Region> enumerate_family(const TorusLattice& L, FamilyKind kind, int r, int min_side = 2);

enum class SplitPattern { Rows, Cols, Cylinder, Torus };

struct Split {
  Region A, B, C, Bp;  // Bp only for cylinder and torus patterns
  Region AB, BC;       // for the four-part patterns AB = B'AB and BC = BCB'
  bool four_parts = false;
  int overlap = 0;     // width of B (and of B')
};

// Cols/Rows: widths (|A|, |B|), C takes the rest. Cylinder/Torus: widths
// (|A|, |B|, |C|), B' takes the rest. Cuts run across the direction that the
// pattern splits: Cols splits along x, Rows along y; a horizontal cylinder is
// split along x, a torus along x.
Split split_region(const TorusLattice& L, const Region& R, SplitPattern p, const std::vector<int>& widths);
SplitPattern parse_split_pattern(const std::string& s);

// Open sub-lattice given by an edge set, with only the stars and plaquettes
// whose four edges all lie inside.
struct Patch {
  std::vector<int> edges;  // sorted global ids
  std::vector<int> stars;
  std::vector<int> plaquettes;
  int local(int global_edge) const;  // position in `edges`, -1 if absent
};

Patch make_patch(const TorusLattice& L, std::vector<int> edges);
Patch full_patch(const TorusLattice& L);

}  // namespace qdlab

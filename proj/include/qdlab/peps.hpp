// peps.hpp
// Weights, edge tensors, region contraction and the thermofield double state.
//
// Edge tensor legs (see EdgeSlot): ket and copy are the physical pair; the
// upper/left face gets <L^{g^-1}| on (row, col), the lower/right face <L^g|,
// the tail star |hh> and the head star |kk>, with ket = h g k^-1, copy = g.
// Ring bonds join the col (or second star) leg of one edge to the row (or
// first star) leg of the next edge in ring order.
#pragma once

#include <array>
#include <vector>

#include "qdlab/groups.hpp"
#include "qdlab/lattice.hpp"
#include "qdlab/linalg.hpp"
#include "qdlab/quantum_double.hpp"

namespace qdlab {

enum class Variant { Slim, Full };

struct WeightOperator {
  enum Kind { Star, Plaquette } kind;
  double beta;
  MatR op;  // operator form on l2(G)
};

// diag((1+gamma_{b/2})^{1/8} at 1, gamma_{b/2}^{1/8} elsewhere)
WeightOperator weight_star(const FiniteGroup& G, double beta);
// (1+gamma_{b/2})^{1/8} P_1 + gamma_{b/2}^{1/8} P_0
WeightOperator weight_plaq(const FiniteGroup& G, double beta);

enum EdgeSlot { Ket = 0, Copy, UpRow, UpCol, LoRow, LoCol, TailIn, TailOut, HeadIn, HeadOut, NumSlots };

// Sparse edge tensor with labels 0..9 in EdgeSlot order.
SparseTensor edge_tensor(const FiniteGroup& G, double beta, Variant v);
// Dense version, FeasibilityError above 2^22 entries.
LabeledTensor edge_tensor_dense(const FiniteGroup& G, double beta, Variant v);

// The four quarter tensors of the slim edge tensor, plaquette quarters first.
// Internal legs carry labels >= 100.
std::vector<SparseTensor> edge_quarters(const FiniteGroup& G);
// Contracts the quarters: upper face, lower face, tail star, head star.
SparseTensor contract_quarters(const FiniteGroup& G);

// ---------------------------------------------------------------- networks

// A star or plaquette ring restricted to an edge set. Closed objects have all
// four ring edges inside; open chains are maximal cyclic runs.
struct RingObject {
  bool star;
  int id;                  // vertex or plaquette
  bool closed;
  std::vector<int> edges;  // global ids in ring order
  std::vector<int> signs;  // plaquette signs, or star away flags (1/0)
};

struct NetworkLayout {
  std::vector<int> edges;  // sorted global ids
  std::vector<RingObject> objects;
  std::vector<int> chains;  // indices of open objects in boundary order
  // per local edge: object index of the upper, lower, tail and head slots
  std::vector<std::array<int, 4>> slot_object;
  int num_psi_chains() const;
  int num_phi_chains() const;
  int num_chains() const { return static_cast<int>(chains.size()); }
};

NetworkLayout network_layout(const TorusLattice& L, std::vector<int> edges);

// Reduced boundary coordinates: one group element per open chain. A
// plaquette chain with value x stands for |L^x>/sqrt|G| on its two end legs,
// a star chain with value h for |hh>. Column index is mixed radix over
// `chains`, first most significant.
//
// V_X with rows ket(e...) copy(e...) (sorted edges, first most significant).
// Slim drops the weights of open chains; closed rings keep theirs.
SpMatR region_map(const FiniteGroup& G, double beta, const NetworkLayout& lay, Variant v,
                  long max_rows = 1L << 22);

// Boundary weight G_dX in reduced coordinates: one |G| x |G| factor per chain.
std::vector<MatR> boundary_weight_factors(const FiniteGroup& G, double beta, const NetworkLayout& lay);
MatR boundary_weight(const FiniteGroup& G, double beta, const NetworkLayout& lay);

// Isometry from reduced coordinates into the open-leg space. Open legs are
// ordered chain by chain, each chain contributing (first leg, last leg).
SpMatR reduced_embedding(const FiniteGroup& G, const NetworkLayout& lay);

// Literal contraction of the edge tensors over the ring bonds inside the edge
// set. Labels of the result: ket(e) = 2*i, copy(e) = 2*i+1 for local edge i
// are listed first, then the open legs in reduced_embedding order.
SparseTensor contract_network(const FiniteGroup& G, double beta, const NetworkLayout& lay, Variant v);
// The same as a matrix, physical rows and open-leg columns.
SpMatR contract_network_matrix(const FiniteGroup& G, double beta, const NetworkLayout& lay, Variant v);

// Unit vector proportional to vectorize(rho_beta^{1/2}) on the torus.
VecC thermofield_state(const QuantumDoubleModel& m, double beta, long max_dim = 4096);

}  // namespace qdlab

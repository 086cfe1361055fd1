// quantum_double.hpp
// Star and plaquette projectors of the quantum double model, the Hamiltonian
// on a torus or an open patch, and its Gibbs state.
#pragma once

#include <array>
#include <vector>

#include "qdlab/groups.hpp"
#include "qdlab/lattice.hpp"
#include "qdlab/linalg.hpp"

namespace qdlab {

// gamma_beta = (e^beta - 1) / |G|
double gamma_beta(double beta, int order);

// T^g(v,e): h -> gh when e points away from v, h -> h g^-1 when it points toward v.
MatC t_operator(const FiniteGroup& G, bool away, Elem g);
MatC t_operator(const FiniteGroup& G, const TorusLattice& L, int v, int e, Elem g);

// A(v) = (1/|G|) sum_g (x)_legs T^g on the four legs of a star, in ring order.
MatC star_operator(const FiniteGroup& G, const std::array<bool, 4>& away);
// B(p), diagonal: (1/|G|) chi_reg(prod_j sigma_j(g_j)) on the four ring legs.
MatC plaquette_operator(const FiniteGroup& G, const std::array<int, 4>& signs);

struct LocalTerm {
  enum Kind { Star, Plaquette } kind;
  int id;                  // vertex or plaquette index
  std::array<int, 4> edges;  // global edge ids in ring order
  MatC op;                 // |G|^4 dense projector, legs in ring order
};

class QuantumDoubleModel {
 public:
  QuantumDoubleModel(FiniteGroup G, TorusLattice L, Patch P);
  // the whole torus
  QuantumDoubleModel(FiniteGroup G, TorusLattice L);

  const FiniteGroup& group() const { return G_; }
  const TorusLattice& lattice() const { return L_; }
  const Patch& patch() const { return P_; }
  int d() const { return G_.order(); }
  int num_edges() const { return static_cast<int>(P_.edges.size()); }
  double dim() const;  // |G|^{#edges}, as a double for feasibility checks
  const std::vector<LocalTerm>& terms() const { return terms_; }
  // Terms whose support contains a given global edge.
  std::vector<int> terms_containing(int edge) const;

 private:
  FiniteGroup G_;
  TorusLattice L_;
  Patch P_;
  std::vector<LocalTerm> terms_;
};

// Embeds a local operator acting on `op_edges` (global ids, in op order) into
// the product space of `space_edges` (sorted global ids, first most significant).
SpMatC embed_operator(const MatC& op, int d, const std::vector<int>& op_edges, const std::vector<int>& space_edges);

struct HamiltonianAssembly {
  std::vector<SpMatC> terms;  // each on the full patch space
  SpMatC H;                   // -sum of terms
  int num_terms() const { return static_cast<int>(terms.size()); }
};

// Throws FeasibilityError when the patch space exceeds max_dim.
HamiltonianAssembly full_hamiltonian(const QuantumDoubleModel& m, long max_dim = 1L << 16);
MatC gibbs_state(const QuantumDoubleModel& m, double beta, long max_dim = 4096);
// e^{beta P / 2} = 1 + (e^{beta/2} - 1) P for a projector P.
MatC exp_projector_term(const MatC& P, double beta);

}  // namespace qdlab

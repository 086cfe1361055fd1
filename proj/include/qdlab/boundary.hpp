// boundary.hpp
// Boundary states of edges and regions, the plaquette and vertex constants,
// the leading-term projector and the factorization certificates.
#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qdlab/peps.hpp"

namespace qdlab {

// ---------------------------------------------------------------- local pieces

// phi_a = sum_h |ha,ha><h,h|, weighted by (d_{h,1}+g)^{m/4} (d_{ha,1}+g)^{m/4}
// with g = gamma_{beta/2} in the Full variant.
MatR phi_operator(const FiniteGroup& G, Elem a, int m, double beta, Variant v);
// psi_g = |L^g><L^g|, or |W^2 L^g><W^2 L^g| in the Full variant.
MatR psi_operator(const FiniteGroup& G, Elem g, double beta, Variant v);
// (1/|G|) sum_g psi_g (slim)
MatR delta_projector(const FiniteGroup& G);

// d_{a,1} + gamma_beta, and the explicit h-sum it collapses from.
double vertex_contraction_scalar(const FiniteGroup& G, Elem a, double beta);
double vertex_contraction_sum(const FiniteGroup& G, Elem a, double beta);
// 1 + gamma_beta chi(g1 g2 g3^-1 g4^-1), and the trace sum over the P_1/P_0
// decomposition of the two weighted loops.
double plaquette_loop_scalar(const FiniteGroup& G, const std::array<Elem, 4>& g, double beta);
double plaquette_loop_trace(const FiniteGroup& G, const std::array<Elem, 4>& g, double beta);

struct GatheringValues {
  cplx brute, closed;
};
// sum over G^m of (a0 + b0 chit(u g1..gm)) (a1 + b1 chit((g1..gm)^-1 v)), with
// chit = chi_reg - 1, against |G|^m (a0 a1 + b0 b1 chit(uv)).
GatheringValues gathering_check(const FiniteGroup& G, Elem u, Elem v, cplx a0, cplx b0, cplx a1, cplx b1, int m);

// Boundary edges of a proper rectangle, counterclockwise, with the sign of
// each edge in its face inside R.
std::vector<PlaqLeg> boundary_loop(const TorusLattice& L, const Region& R);
// Sum over interior assignments of prod_p (1 + gamma_beta chi(g|_p)).
// fhat maps each boundary edge to its group element.
double interior_sum_brute(const FiniteGroup& G, const TorusLattice& L, const Region& R,
                          const std::map<int, Elem>& fhat, double beta);
double interior_sum_closed_form(const FiniteGroup& G, const TorusLattice& L, const Region& R,
                                const std::map<int, Elem>& fhat, double beta);

// ---------------------------------------------------------------- edge boundary

// Column `col` of the edge boundary state in leg coordinates (UpRow, UpCol,
// LoRow, LoCol, TailIn, TailOut, HeadIn, HeadOut), from the closed formula
// sum_{g,a} psi_{g^-1} (x) psi_g (x) phi_a (x) phi_{g^-1 a g}.
void edge_boundary_column(const FiniteGroup& G, double beta, Variant v, long col,
                          std::vector<std::pair<long, double>>& out);
// Columns that can be nonzero: both star pairs diagonal.
std::vector<long> edge_boundary_support(const FiniteGroup& G);
SpMatR boundary_state_edge(const FiniteGroup& G, double beta, Variant v, long max_nnz = 1L << 26);

// max_ij |(V^T V)_ij - F_ij| over the listed columns and every nonzero column
// of V, with F given column by column.
double gram_max_deviation(const SpMatR& V, std::vector<long> cols,
                          const std::function<void(long, std::vector<std::pair<long, double>>&)>& formula);
// Formula route against V_e^T V_e from the literal edge tensor.
double edge_boundary_deviation(const FiniteGroup& G, double beta, Variant v);

// ---------------------------------------------------------------- regions

struct KappaEpsilon {
  double kappa, epsilon;
};
KappaEpsilon kappa_epsilon(const RegionClassification& c, double beta, int order);

// Slim boundary state in reduced coordinates. It is block diagonal over the
// plaquette-chain values fhat; each block is sum_A coef_A (x)_c R(A_c) over
// the star chains, with R(a) : |s> -> |s a>.
struct StructuredBoundary {
  NetworkLayout lay;
  double beta = 0;
  int order = 1;
  FiniteGroup group = make_cyclic(1);
  std::vector<int> psi_pos, phi_pos;  // positions in lay.chains
  std::vector<std::map<std::vector<int>, double>> blocks;
  long num_blocks() const { return static_cast<long>(blocks.size()); }
  long block_dim() const;
  long dim() const { return num_blocks() * block_dim(); }
  MatR block_matrix(long b) const;
  LinearMap block_map(long b) const;
  // reduced-coordinate index of (block, position in block)
  long reduced_index(long b, long s) const;
  MatR dense() const;  // slim, reduced coordinates
};

StructuredBoundary boundary_state_region(const FiniteGroup& G, const NetworkLayout& lay, double beta);
// Full state G rho~ G in reduced coordinates.
MatR boundary_state_full_dense(const FiniteGroup& G, const StructuredBoundary& sb);

// Leading term in leg coordinates: Delta~ on each plaquette chain and phi~_1
// on each star chain. In reduced coordinates it is the identity.
SpMatR leading_term_legs(const FiniteGroup& G, const NetworkLayout& lay);

struct FactorizationCertificate {
  std::string region;
  double beta = 0;
  double kappa = 0, epsilon = 0;
  double measured = 0;
  double bound = 0;
  bool pass = false;
  bool vacuous = false;  // no inner vertex, epsilon >= 1
  bool exact = false;    // measured <= 1e-12
  std::string method;
  long distinct_blocks = 0;
};

// max over blocks of || block / kappa - 1 ||.
double leading_term_deviation(const StructuredBoundary& sb, double kappa, long* distinct = nullptr);
FactorizationCertificate verify_leading_term(const FiniteGroup& G, const TorusLattice& L, const Region& R, double beta);

struct SupportReport {
  int rank_rho = 0, rank_leading = 0;
  double angle = 0;          // between supp rho and the range of S~
  double norm_sigma_inv = 0;  // || rho^1/2 sigma^-1 rho^1/2 - J ||
  double norm_sigma = 0;      // || rho^-1/2 sigma rho^-1/2 - J ||
  double epsilon = 0;
  bool hypothesis = false;   // epsilon < 1
  std::string method;
};
// Dense route for regions with at most 4096 reduced coordinates, block route
// through the slim Gram matrix of the physical map beyond that.
SupportReport support_and_sigma(const FiniteGroup& G, const TorusLattice& L, const Region& R, double beta);

}  // namespace qdlab

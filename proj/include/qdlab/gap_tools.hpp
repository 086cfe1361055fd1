// gap_tools.hpp
// Projector overlaps, region projectors, martingale measurements, parent
// Hamiltonians and the gap recursion constants.
#pragma once

#include <string>
#include <vector>

#include "qdlab/boundary.hpp"

namespace qdlab {

// ---------------------------------------------------------------- overlap lemma

struct OverlapReport {
  double c = 0;          // || P_U P_V - P_W ||
  double c_aux = 0;      // || P_W^perp P_U P_V P_W^perp ||
  double lemma_min = 0;  // lambda_min(P_U^perp + P_V^perp - (1 - c) P_W^perp)
  int dim_u = 0, dim_v = 0, dim_w = 0;
  bool lemma_pass = false;
};
// Dense projectors with W inside U and V; ContractError otherwise.
OverlapReport overlap_constant(const MatC& PU, const MatC& PV, const MatC& PW);

// ---------------------------------------------------------------- projectors

// V (V^dag V)^+ V^dag through the Gram route, and through an SVD.
MatC ground_projector(const MatC& V, double rel_cut = 1e-10);
MatC ground_projector_svd(const MatC& V, double rel_cut = 1e-10);

// Projector onto the column space of a sparse real map, applied matrix-free.
// Columns are grouped by shared rows; each group keeps its Gram pseudo-inverse.
class ColumnSpaceProjector {
 public:
  explicit ColumnSpaceProjector(const SpMatR& V, double rel_cut = 1e-10);
  long dim() const { return V_.rows(); }
  long rank() const { return rank_; }
  // y += scale * P x
  void apply_add(const VecC& x, VecC& y, double scale = 1.0) const;
  VecC apply(const VecC& x) const;
  // P applied to every column
  MatC apply_columns(const MatC& X) const;

 private:
  SpMatC V_, Vt_;
  std::vector<std::vector<int>> blocks_;
  std::vector<MatR> pinv_;
  long rank_ = 0;
};

// P_X for the edge set of a region: slim map for beta > 0 (same column space),
// full map at beta = 0.
ColumnSpaceProjector region_projector(const FiniteGroup& G, const TorusLattice& L, const std::vector<int>& edges,
                                      double beta);

// A region projector placed inside a larger edge set. Physical factors are
// ket(e...) then copy(e...) over the sorted edges of the outer set.
class EmbeddedProjector {
 public:
  EmbeddedProjector(const FiniteGroup& G, const TorusLattice& L, const std::vector<int>& region_edges,
                    const std::vector<int>& space_edges, double beta);
  long dim() const { return map_.dim(); }
  long rank() const;  // rank of P (x) 1
  void apply_add(const VecC& x, VecC& y, double scale = 1.0) const;
  VecC apply(const VecC& x) const;
  const std::vector<int>& edges() const { return edges_; }

 private:
  std::vector<int> edges_;
  ColumnSpaceProjector P_;
  FactorMap map_;
};

// ---------------------------------------------------------------- martingale

struct MartingaleReport {
  std::string region, split;
  double beta = 0;
  long dim = 0;
  double measured = 0;     // || P_AB P_BC - P_ABC ||
  double eps_b = 0;        // epsilon of the overlap B
  double bound = 0;        // 16 eps_B, or 48 eps_BB' for the four-part splits
  bool bound_applies = false;  // eps < 1/2
  bool pass_unit = false;      // measured <= 1
  bool pass_bound = false;     // measured <= bound, true when the bound does not apply
  double lemma_min = 0;        // overlap lemma eigenvalue on the complement of Im P_ABC
  bool lemma_pass = false;
  long rank_ab = 0, rank_bc = 0, rank_abc = 0;
  std::string method;
};

MartingaleReport martingale_measurement(const FiniteGroup& G, const TorusLattice& L, const Region& R, const Split& s,
                                        double beta, const EigOptions& opt = {});

// ---------------------------------------------------------------- recursion

// delta(l) = min{1, 144 |G|^2 (gamma/(1+gamma))^{l-1}}
double delta_function(double ell, double beta, int order);
// ceil of 4 (1 + (1 + gamma_beta) log(288 |G|^2))
int n_beta(double beta, int order);

struct RecursionBound {
  int r = 0, terms = 0;
  std::vector<double> delta, s;
  std::vector<double> partial;  // partial products up to k
  double product = 0;           // truncated product
  double tail_exponent = 0;     // sum over k >= terms of 2 delta_k + 1/s_k, bounded
  double tail = 0;              // product - (infinite product) <= product * tail_exponent
  double constant = 0;          // product / 16
};

// prod_k (1 - delta_k)/(1 + 1/s_k) with delta_k = delta(floor((r/4) (9/8)^{k/2}))
// and s_k = floor((4/3)^{k/2}). ConvergenceError when some delta_k >= 1 or the
// tail is not summable.
RecursionBound recursion_bound(int r, const std::function<double(double)>& delta, int terms = 200);

// ---------------------------------------------------------------- parent Hamiltonian

struct ParentHamiltonian {
  std::vector<int> edges;        // sorted edges of R
  std::vector<Region> family;    // interaction regions inside R
  std::vector<EmbeddedProjector> terms;
  int min_side = 1;
  long dim() const;
  // y = sum_X (1 - P_X) x
  void apply(const VecC& x, VecC& y) const;
  LinearMap map() const;
};

// Rectangles X inside R with min_side <= a, b <= n (the torus and cylinders
// when R is the torus and they fit). min_side = 1 follows the parent family
// display; min_side = 2 the region families.
ParentHamiltonian parent_hamiltonian(const FiniteGroup& G, const TorusLattice& L, const Region& R, double beta, int n,
                                     int min_side = 1);

struct ParentGapReport {
  long dim = 0;
  long rank_p = 0;           // rank of P_R
  double gap = 0;            // lambda_min(H_R + mu P_R)
  double kernel_residual = 0;  // max over probes || H_R P_R x || / || P_R x ||
  double angle_bound = 0;    // kernel_residual / gap
  double mu = 0;
  long matvecs = 0;
  std::string method;
};

// Gap of H_R and the comparison ker H_R = Im P_R. The shift mu exceeds ||H_R||,
// so the lowest eigenvalue of H_R + mu P_R is the gap exactly when the kernel
// lies inside Im P_R.
ParentGapReport parent_gap(const FiniteGroup& G, const TorusLattice& L, const ParentHamiltonian& H, const Region& R,
                           double beta, const EigOptions& opt = {});

}  // namespace qdlab

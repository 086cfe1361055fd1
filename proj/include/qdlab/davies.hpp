// davies.hpp
// Davies generators of the quantum double model: couplings, Fourier jump
// components, KMS rates, the Lindbladian in the GNS geometry, the vectorized
// Hamiltonian H~ and the chain of gap inequalities down to the parent
// Hamiltonian.
#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qdlab/gap_tools.hpp"
#include "qdlab/quantum_double.hpp"

namespace qdlab {

// Bohr frequencies -4..4
constexpr int kOmegaMax = 4;
constexpr int kNumOmega = 2 * kOmegaMax + 1;

// ---------------------------------------------------------------- couplings

struct CouplingSet {
  std::string id;
  std::vector<MatC> ops;  // single-site Hermitian operators, the same on every edge
  bool translation_invariant = true;
};

// {E_gg} u {E_gh + E_hg} u {i (E_gh - E_hg)}, g < h.
CouplingSet default_coupling(int d);
// Dimension of {X : [X, S] = 0 for all S}.
int commutant_dimension(const std::vector<MatC>& ops, double tol = 1e-10);
// ContractError for non-Hermitian operators or a commutant larger than C 1.
void validate_coupling(const CouplingSet& c);

// ---------------------------------------------------------------- rates

struct RateFunction {
  double beta = 0;
  std::string form;
  std::array<double, kNumOmega> values{};  // index omega + 4
  double operator()(int omega) const { return values[omega + kOmegaMax]; }
  double g_min() const;
};

// ghat(w) = e^{beta w / 2}
RateFunction kms_rates(double beta);
// Custom table over all of -4..4. DomainError for non-positive rates or when
// ghat(-w) / (e^{-beta w} ghat(w)) deviates from 1 by more than tol.
RateFunction kms_rates_table(double beta, const std::map<int, double>& table, double tol = 1e-12);
// Two columns "omega rate" per line; '#' starts a comment. ConfigError with the
// line number on malformed input.
RateFunction load_rate_table(double beta, std::istream& in, double tol = 1e-12);

// ---------------------------------------------------------------- jumps

struct JumpDecomposition {
  int edge = -1;   // global edge id
  int alpha = 0;
  std::array<SpMatC, kNumOmega> parts;  // S(omega) on the model space, index omega + 4
  std::vector<int> support;             // global edges where some S(omega) acts nontrivially
  const SpMatC& at(int omega) const { return parts[omega + kOmegaMax]; }
  bool nonzero(int omega) const { return at(omega).nonZeros() > 0; }
};

// S(w) = sum over E' - E = -w of Pi_E' S Pi_E for the single-site operator S on
// `edge`, with energies of the terms that contain the edge (H = -sum of terms).
// Then e^{itH} S e^{-itH} = sum_w e^{-iwt} S(w).
JumpDecomposition fourier_components(const QuantumDoubleModel& m, int edge, const MatC& S, int alpha = 0);

// Global edges on which a dense operator acts nontrivially.
std::vector<int> operator_support(const MatC& M, int d, const std::vector<int>& space_edges, double tol = 1e-10);

// ---------------------------------------------------------------- generator

class DaviesGenerator {
 public:
  DaviesGenerator(const QuantumDoubleModel& m, double beta, CouplingSet c, RateFunction r, long max_dim = 4096);

  const QuantumDoubleModel& model() const { return m_; }
  double beta() const { return beta_; }
  const CouplingSet& coupling() const { return c_; }
  const RateFunction& rates() const { return r_; }
  long dim() const { return D_; }  // dimension of the model space; H~ lives on dim()^2
  const std::vector<JumpDecomposition>& jumps() const { return jumps_; }
  const MatC& rho() const { return rho_; }
  const MatC& rho_sqrt() const { return rho_sqrt_; }
  const MatC& rho_isqrt() const { return rho_isqrt_; }
  const SpMatC& hamiltonian() const { return H_; }

  // L(Q), or the partial sum over the given edges (global ids)
  MatC apply(const MatC& Q) const;
  MatC apply(const MatC& Q, const std::vector<int>& edges) const;
  // a single e, alpha and the pair {w, -w} (w >= 0)
  MatC apply_term(const MatC& Q, int jump, int omega) const;
  // [H, Q]
  MatC derivation(const MatC& Q) const;

  // y += H~_X x with H~_X iota(Q) = -iota(L_X(Q))
  void h_tilde_add(const VecC& x, VecC& y, const std::vector<int>& edges) const;
  LinearMap h_tilde() const;
  LinearMap h_tilde(const std::vector<int>& edges) const;

 private:
  MatC apply_impl(const MatC& Q, const std::vector<char>& use) const;
  std::vector<char> edge_mask(const std::vector<int>& edges) const;

  QuantumDoubleModel m_;
  double beta_;
  CouplingSet c_;
  RateFunction r_;
  long D_;
  SpMatC H_;
  MatC rho_, rho_sqrt_, rho_isqrt_;
  std::vector<JumpDecomposition> jumps_;
  std::vector<std::array<SpMatC, kNumOmega>> adj_;  // S(w)^dag
  std::vector<MatC> K_;  // per jump: sum_w ghat(w) S(w)^dag S(w)
};

// Tr(rho A^dag B)
cplx gns_inner(const MatC& A, const MatC& B, const MatC& rho);
// vectorize(Q rho^{1/2}) and back
VecC iota(const MatC& Q, const MatC& rho_sqrt);
MatC iota_inverse(const VecC& v, const MatC& rho_isqrt);

// Dense -L_X in a GNS-orthonormal basis, built column by column from L and the
// Gram matrix 1 (x) rho^T. Hermitian when L satisfies detailed balance.
MatC gns_symmetrized_generator(const DaviesGenerator& g, const std::vector<int>& edges);
// Dense matrix of the superoperator Q -> L(Q) (plus i[H,Q] if `full`) in the
// vectorize basis.
MatC superoperator_matrix(const DaviesGenerator& g, bool full = false);

// Projector onto { iota(Q) : Q acts on the edges outside X }. With the thermofield
// double T read as a matrix over (ket X, copy) x (ket rest), it is
// 1_{ket rest} (x) (projector onto the column span).
class GnsOutsideProjector {
 public:
  GnsOutsideProjector(const DaviesGenerator& g, const std::vector<int>& X);
  long dim() const { return map_.dim(); }
  long rank() const { return rank_; }
  void apply_add(const VecC& x, VecC& y, double scale = 1.0) const;
  VecC apply(const VecC& x) const;
  // orthonormal basis; FeasibilityError above max_cols columns
  MatC basis(long max_cols = 4096) const;

 private:
  FactorMap map_;
  MatC U_;
  long rank_ = 0;
};

// ---------------------------------------------------------------- checks

struct KernelReport {
  std::vector<int> edges;
  long predicted = 0;  // |G|^{2 |E \ X|}
  long measured = 0;
  double angle = 0;    // largest principal angle to iota(B_{E\X}), pi/2 when dims differ
  double threshold = 0;
  std::string method;
  bool pass = false;
};

// Dense kernel of H~_X for dim^2 <= dense_max, otherwise the lowest
// predicted + 1 eigenvalues of the matrix-free map (predicted <= 4).
KernelReport kernel_check(const DaviesGenerator& g, const std::vector<int>& X, const EigOptions& opt = {},
                          long dense_max = 4096);

struct LocalGapReport {
  int edge = -1;
  std::vector<int> support;   // edges of the terms that contain e
  double c1 = 0;              // || sum of the terms containing e ||
  double c2 = 0;              // lambda_min of the commutator form on traceless single-site operators
  double g_min = 0;
  int omega_count = kNumOmega;
  double bound = 0;           // (C2 / |Omega|) g_min e^{-C1 beta}
  double lambda_min = 0;      // lambda_min(H~_e - bound Pi_e^perp)
  double kernel_leak = 0;     // max over probes || H~_e Pi_e x || / || Pi_e x ||
  bool pass = false;
};

// C2 for a coupling set on C^d
double commutator_constant(const CouplingSet& c);
LocalGapReport local_gap_constants(const DaviesGenerator& g, int edge, const EigOptions& opt = {});

struct DaviesGapReport {
  long dim = 0;
  double gap = 0;
  double residual = 0;
  double ground_residual = 0;  // || H~ iota(1) ||
  long matvecs = 0;
  std::string method;
};

// Smallest eigenvalue of H~ on the complement of iota(1).
DaviesGapReport davies_gap(const DaviesGenerator& g, const EigOptions& opt = {});

// ---------------------------------------------------------------- chain

struct ChainInequality {
  std::string name;
  double lhs = 0, rhs = 0;  // holds when lhs >= rhs - tol
  double tol = 0;
  bool pass = false;
  std::string note;
};

struct GapChainReport {
  std::string model, coupling, rates;
  double beta = 0;
  int n = 0;
  long dim = 0;
  double gap_l = 0;           // gap(H~) = gap(L)
  double gap_pi = 0;          // gap(sum_e Pi_e^perp)
  double gap_parent = 0;      // gap(H_E)
  double c1 = 0, c2 = 0, g_min = 0;
  int omega_count = kNumOmega;
  int n_beta = 0;
  int m = 0;                  // max_e #{X in the family : e in X}
  long m_estimate = 0;        // n^4
  double local_bound = 0;     // (C2 / |Omega|) g_min e^{-C1 beta}
  double final_bound = 0;     // local_bound gap_parent / m
  std::vector<Region> family;
  std::vector<ChainInequality> inequalities;
  std::vector<LocalGapReport> local;
  bool partial = false;
  bool pass = false;
};

// The torus of side L.N() with the parent family of regions of side at most n.
GapChainReport gap_chain(const FiniteGroup& G, const TorusLattice& L, double beta, int n,
                         const CouplingSet& c, const RateFunction& r, const EigOptions& opt = {});

}  // namespace qdlab

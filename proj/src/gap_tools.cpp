// gap_tools.cpp
#include "qdlab/gap_tools.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "qdlab/errors.hpp"

namespace qdlab {

namespace {

double lambda_min_dense(const MatC& M) {
  Eigen::SelfAdjointEigenSolver<MatC> es((M + M.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

// ---------------------------------------------------------------- overlap lemma

OverlapReport overlap_constant(const MatC& PU, const MatC& PV, const MatC& PW) {
  const long d = PU.rows();
  if (PV.rows() != d || PW.rows() != d || PU.cols() != d || PV.cols() != d || PW.cols() != d)
    throw ContractError("overlap_constant: shape mismatch");
  for (const MatC* P : {&PU, &PV, &PW})
    if ((*P * *P - *P).cwiseAbs().maxCoeff() > 1e-9 || !is_hermitian(*P, 1e-10))
      throw ContractError("overlap_constant: input is not an orthogonal projector");
  if ((PW * PU - PW).cwiseAbs().maxCoeff() > 1e-10 || (PW * PV - PW).cwiseAbs().maxCoeff() > 1e-10)
    throw ContractError("overlap_constant: W is not contained in U and V");
  const MatC I = MatC::Identity(d, d);
  OverlapReport r;
  r.c = operator_norm(PU * PV - PW);
  r.c_aux = operator_norm((I - PW) * PU * PV * (I - PW));
  r.lemma_min = lambda_min_dense((I - PU) + (I - PV) - (1 - r.c) * (I - PW));
  r.dim_u = static_cast<int>(std::llround(PU.trace().real()));
  r.dim_v = static_cast<int>(std::llround(PV.trace().real()));
  r.dim_w = static_cast<int>(std::llround(PW.trace().real()));
  r.lemma_pass = r.lemma_min >= -1e-10;
  return r;
}

// ---------------------------------------------------------------- projectors

MatC ground_projector(const MatC& V, double rel_cut) {
  MatC gram = V.adjoint() * V;
  Eigen::SelfAdjointEigenSolver<MatC> es((gram + gram.adjoint()) / 2.0);
  const VecR& lam = es.eigenvalues();
  const double lmax = lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0;
  VecR inv = VecR::Zero(lam.size());
  for (int i = 0; i < lam.size(); ++i)
    if (lam(i) > rel_cut * lmax) inv(i) = 1 / lam(i);
  MatC pinv = es.eigenvectors() * inv.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  return V * pinv * V.adjoint();
}

MatC ground_projector_svd(const MatC& V, double rel_cut) {
  MatC U = column_basis(V, rel_cut);
  return U * U.adjoint();
}

ColumnSpaceProjector::ColumnSpaceProjector(const SpMatR& V, double rel_cut) {
  V_ = V.cast<cplx>();
  Vt_ = SpMatC(V_.adjoint());
  blocks_ = column_blocks(V);
  Eigen::SparseMatrix<double, Eigen::ColMajor> Vc(V);
  std::vector<VecR> lams;
  std::vector<MatR> vecs;
  double lmax = 0;
  for (const auto& blk : blocks_) {
    const int k = static_cast<int>(blk.size());
    // (row, local column, value), grouped by row
    std::vector<std::tuple<long, int, double>> ent;
    for (int j = 0; j < k; ++j)
      for (Eigen::SparseMatrix<double, Eigen::ColMajor>::InnerIterator it(Vc, blk[j]); it; ++it)
        ent.emplace_back(it.row(), j, it.value());
    std::sort(ent.begin(), ent.end());
    MatR gram = MatR::Zero(k, k);
    for (size_t a = 0; a < ent.size();) {
      size_t b = a;
      while (b < ent.size() && std::get<0>(ent[b]) == std::get<0>(ent[a])) ++b;
      for (size_t i = a; i < b; ++i)
        for (size_t j = a; j < b; ++j)
          gram(std::get<1>(ent[i]), std::get<1>(ent[j])) += std::get<2>(ent[i]) * std::get<2>(ent[j]);
      a = b;
    }
    Eigen::SelfAdjointEigenSolver<MatR> es(gram);
    lams.push_back(es.eigenvalues());
    vecs.push_back(es.eigenvectors());
    lmax = std::max(lmax, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  for (size_t b = 0; b < blocks_.size(); ++b) {
    VecR inv = VecR::Zero(lams[b].size());
    for (int i = 0; i < lams[b].size(); ++i)
      if (lams[b](i) > rel_cut * lmax) {
        inv(i) = 1 / lams[b](i);
        ++rank_;
      }
    pinv_.push_back(vecs[b] * inv.asDiagonal() * vecs[b].transpose());
  }
}

void ColumnSpaceProjector::apply_add(const VecC& x, VecC& y, double scale) const {
  VecC z = Vt_ * x;
  VecC w = VecC::Zero(z.size());
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    VecC zb(blk.size());
    for (size_t i = 0; i < blk.size(); ++i) zb(i) = z(blk[i]);
    VecC wb = pinv_[b].cast<cplx>() * zb;
    for (size_t i = 0; i < blk.size(); ++i) w(blk[i]) = wb(i);
  }
  y += scale * (V_ * w);
}

VecC ColumnSpaceProjector::apply(const VecC& x) const {
  VecC y = VecC::Zero(dim());
  apply_add(x, y);
  return y;
}

MatC ColumnSpaceProjector::apply_columns(const MatC& X) const {
  MatC Z = Vt_ * X;
  MatC W = MatC::Zero(Z.rows(), Z.cols());
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    MatC Zb(blk.size(), Z.cols());
    for (size_t i = 0; i < blk.size(); ++i) Zb.row(i) = Z.row(blk[i]);
    MatC Wb = pinv_[b].cast<cplx>() * Zb;
    for (size_t i = 0; i < blk.size(); ++i) W.row(blk[i]) = Wb.row(i);
  }
  return V_ * W;
}

ColumnSpaceProjector region_projector(const FiniteGroup& G, const TorusLattice& L, const std::vector<int>& edges,
                                      double beta) {
  auto lay = network_layout(L, edges);
  const Variant v = beta > 0 ? Variant::Slim : Variant::Full;
  return ColumnSpaceProjector(region_map(G, beta, lay, v, 1L << 24));
}

namespace {

FactorMap embedded_factor_map(int n, const std::vector<int>& region, const std::vector<int>& space) {
  const int E = static_cast<int>(space.size());
  std::vector<int> local;
  std::vector<int> pos;
  for (int e : region) {
    auto it = std::lower_bound(space.begin(), space.end(), e);
    if (it == space.end() || *it != e) throw GeometryError("embedded projector: edge outside the space");
    pos.push_back(static_cast<int>(it - space.begin()));
  }
  for (int p : pos) local.push_back(p);
  for (int p : pos) local.push_back(E + p);
  return FactorMap(std::vector<int>(2 * E, n), local);
}

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

EmbeddedProjector::EmbeddedProjector(const FiniteGroup& G, const TorusLattice& L,
                                     const std::vector<int>& region_edges, const std::vector<int>& space_edges,
                                     double beta)
    : edges_(sorted_unique(region_edges)),
      P_(region_projector(G, L, edges_, beta)),
      map_(embedded_factor_map(G.order(), edges_, sorted_unique(space_edges))) {}

long EmbeddedProjector::rank() const { return P_.rank() * map_.spectator_count(); }

void EmbeddedProjector::apply_add(const VecC& x, VecC& y, double scale) const {
  if (map_.spectator_count() == 1) {
    P_.apply_add(x, y, scale);
    return;
  }
  map_.scatter_add(P_.apply_columns(map_.gather(x)), y, scale);
}

VecC EmbeddedProjector::apply(const VecC& x) const {
  VecC y = VecC::Zero(dim());
  apply_add(x, y);
  return y;
}

// ---------------------------------------------------------------- martingale

MartingaleReport martingale_measurement(const FiniteGroup& G, const TorusLattice& L, const Region& R, const Split& s,
                                        double beta, const EigOptions& opt) {
  auto cls = classify_region(L, R);
  const auto& space = cls.edges;
  const double dim = std::pow(double(G.order()), 2.0 * space.size());
  if (dim > 1 << 22) throw FeasibilityError("martingale_measurement: physical dimension " + std::to_string(dim), dim * 16.0 * 60);
  EmbeddedProjector PAB(G, L, classify_region(L, s.AB).edges, space, beta);
  EmbeddedProjector PBC(G, L, classify_region(L, s.BC).edges, space, beta);
  EmbeddedProjector PABC(G, L, space, space, beta);

  MartingaleReport rep;
  rep.region = R.str();
  rep.beta = beta;
  rep.dim = static_cast<long>(dim);
  rep.rank_ab = PAB.rank();
  rep.rank_bc = PBC.rank();
  rep.rank_abc = PABC.rank();
  if (s.four_parts) {
    auto bb = region_plaquettes(L, s.B);
    auto bp = region_plaquettes(L, s.Bp);
    bb.insert(bb.end(), bp.begin(), bp.end());
    rep.eps_b = kappa_epsilon(classify_plaquettes(L, bb), beta, G.order()).epsilon;
    rep.bound = 48 * rep.eps_b;
    rep.split = "four-part:" + s.A.str() + "|" + s.B.str() + "|" + s.C.str() + "|" + s.Bp.str();
  } else {
    rep.eps_b = kappa_epsilon(classify_region(L, s.B), beta, G.order()).epsilon;
    rep.bound = 16 * rep.eps_b;
    rep.split = s.A.str() + "|" + s.B.str() + "|" + s.C.str();
  }
  rep.bound_applies = rep.eps_b < 0.5;

  // With P_ABC below both factors, (P_AB P_BC - P_ABC)^dag (P_AB P_BC - P_ABC)
  // = P_BC P_AB P_BC - P_ABC.
  const long D = rep.dim;
  LinearMap M{D, [&](const VecC& x, VecC& y) {
                VecC t = PBC.apply(x);
                VecC u = PAB.apply(t);
                PBC.apply_add(u, y);
                PABC.apply_add(x, y, -1.0);
              }};
  EigResult top = highest_eigs(M, opt);
  rep.measured = std::sqrt(std::max(0.0, top.values[0]));
  rep.pass_unit = rep.measured <= 1 + 1e-10;
  rep.pass_bound = !rep.bound_applies || rep.measured <= rep.bound;

  // overlap lemma with c = measured, restricted to the complement of Im P_ABC
  // (the operator is block diagonal there; the shift lifts Im P_ABC to 3)
  const double c = rep.measured;
  LinearMap Lm{D, [&](const VecC& x, VecC& y) {
                 y += (1.0 + c) * x;
                 PAB.apply_add(x, y, -1.0);
                 PBC.apply_add(x, y, -1.0);
                 PABC.apply_add(x, y, 3.0 + (1.0 - c));
               }};
  EigResult low = lowest_eigs(Lm, opt);
  rep.lemma_min = low.values[0];
  rep.lemma_pass = rep.lemma_min >= -1e-10;
  rep.method = top.method + "/" + low.method;
  return rep;
}

// ---------------------------------------------------------------- recursion

double delta_function(double ell, double beta, int order) {
  if (!(ell > 0)) throw std::invalid_argument("delta_function: l must be positive");
  if (beta < 0) throw DomainError("beta must be non-negative");
  const double g = gamma_beta(beta, order);
  if (g == 0) return ell <= 1 ? 1.0 : 0.0;
  return std::min(1.0, 144.0 * order * order * std::pow(g / (1 + g), ell - 1));
}

int n_beta(double beta, int order) {
  if (beta < 0) throw DomainError("beta must be non-negative");
  const double g = gamma_beta(beta, order);
  return static_cast<int>(std::ceil(4 * (1 + (1 + g) * std::log(288.0 * order * order))));
}

RecursionBound recursion_bound(int r, const std::function<double(double)>& delta, int terms) {
  if (r < 16) throw std::invalid_argument("recursion_bound: r must be at least 16");
  if (terms < 1) throw std::invalid_argument("recursion_bound: need at least one term");
  const double qs = std::sqrt(4.0 / 3.0), qd = std::sqrt(9.0 / 8.0);
  auto s_of = [&](int k) { return std::floor(std::pow(qs, k)); };
  auto d_of = [&](int k) {
    double ell = std::floor(r / 4.0 * std::pow(qd, k));
    return delta(std::max(ell, 1.0));
  };
  RecursionBound rb;
  rb.r = r;
  rb.terms = terms;
  double p = 1;
  for (int k = 0; k < terms; ++k) {
    double dk = d_of(k), sk = s_of(k);
    if (dk >= 1) throw ConvergenceError("recursion_bound: delta_" + std::to_string(k) + " >= 1", dk);
    rb.delta.push_back(dk);
    rb.s.push_back(sk);
    p *= (1 - dk) / (1 + 1 / sk);
    rb.partial.push_back(p);
  }
  // tail: log(1 - d) >= -2d for d <= 1/2 and log(1 + 1/s) <= 1/s
  double dsum = 0;
  for (int k = terms; k < terms + 100000; ++k) {
    double dk = d_of(k);
    if (dk > 0.5) throw ConvergenceError("recursion_bound: delta_k > 1/2 in the tail", dk);
    dsum += dk;
    if (dk < 1e-300 || (k > terms + 1000 && dk < 1e-30 * dsum)) break;
  }
  if (dsum > 1e6 || !std::isfinite(dsum)) throw ConvergenceError("recursion_bound: tail of delta does not converge", dsum);
  // s_k >= q^k - 1, so sum_{k >= K} 1/s_k <= q^-K / ((1 - 1/q)(1 - q^-K))
  const double qk = std::pow(qs, -terms);
  const double ssum = qk / ((1 - 1 / qs) * (1 - qk));
  rb.product = p;
  rb.tail_exponent = 2 * dsum + ssum;
  rb.tail = p * -std::expm1(-rb.tail_exponent);
  rb.constant = p / 16;
  return rb;
}

// ---------------------------------------------------------------- parent Hamiltonian

long ParentHamiltonian::dim() const { return terms.empty() ? 0 : terms.front().dim(); }

void ParentHamiltonian::apply(const VecC& x, VecC& y) const {
  y += static_cast<double>(terms.size()) * x;
  for (const auto& t : terms) t.apply_add(x, y, -1.0);
}

LinearMap ParentHamiltonian::map() const {
  return {dim(), [this](const VecC& x, VecC& y) { apply(x, y); }};
}

ParentHamiltonian parent_hamiltonian(const FiniteGroup& G, const TorusLattice& L, const Region& R, double beta, int n,
                                     int min_side) {
  if (n < 1) throw std::invalid_argument("parent_hamiltonian: n must be positive");
  if (min_side < 1 || min_side > 2) throw std::invalid_argument("parent_hamiltonian: min_side must be 1 or 2");
  auto cls = classify_region(L, R);
  const double dim = std::pow(double(G.order()), 2.0 * cls.edges.size());
  if (dim > 1 << 22) throw FeasibilityError("parent_hamiltonian: physical dimension " + std::to_string(dim), dim * 16.0 * 60);
  ParentHamiltonian H;
  H.edges = cls.edges;
  H.min_side = min_side;
  std::set<int> inside(cls.plaquettes.begin(), cls.plaquettes.end());
  auto contained = [&](const Region& X) {
    for (int p : region_plaquettes(L, X))
      if (!inside.count(p)) return false;
    return true;
  };
  std::vector<Region> cands = enumerate_family(L, FamilyKind::Rectangles, n, min_side);
  if (R.kind != RegionKind::Rect) {
    for (auto& c : enumerate_family(L, FamilyKind::Cylinders, n, min_side)) cands.push_back(c);
    if (R.kind == RegionKind::Torus) cands.push_back({RegionKind::Torus, 0, 0, L.N(), L.N()});
  }
  std::set<std::vector<int>> seen;
  for (const auto& X : cands) {
    if (!contained(X)) continue;
    auto e = classify_region(L, X).edges;
    if (!seen.insert(e).second) continue;
    H.family.push_back(X);
    H.terms.emplace_back(G, L, e, cls.edges, beta);
  }
  if (H.terms.empty()) throw GeometryError("parent_hamiltonian: no interaction region fits inside " + R.str());
  return H;
}

ParentGapReport parent_gap(const FiniteGroup& G, const TorusLattice& L, const ParentHamiltonian& H, const Region& R,
                           double beta, const EigOptions& opt) {
  EmbeddedProjector PR(G, L, classify_region(L, R).edges, H.edges, beta);
  ParentGapReport rep;
  rep.dim = H.dim();
  rep.rank_p = PR.rank();
  rep.mu = static_cast<double>(H.terms.size()) + 1;
  const double mu = rep.mu;
  LinearMap M{rep.dim, [&](const VecC& x, VecC& y) {
                H.apply(x, y);
                PR.apply_add(x, y, mu);
              }};
  EigResult low = lowest_eigs(M, opt);
  rep.gap = low.values[0];
  rep.matvecs = low.matvecs;
  rep.method = low.method;
  Rng rng(opt.seed + 17);
  for (int t = 0; t < 3; ++t) {
    VecC x = PR.apply(random_vector(static_cast<int>(rep.dim), rng));
    VecC y = VecC::Zero(rep.dim);
    H.apply(x, y);
    rep.kernel_residual = std::max(rep.kernel_residual, y.norm() / x.norm());
  }
  rep.angle_bound = rep.gap > 0 ? rep.kernel_residual / rep.gap : 1.0;
  return rep;
}

}  // namespace qdlab

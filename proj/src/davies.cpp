// davies.cpp
#include "qdlab/davies.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qdlab/errors.hpp"

namespace qdlab {

namespace {

MatC commutator_matrix(const MatC& S) {
  const long d = S.rows();
  MatC I = MatC::Identity(d, d);
  return kron(I, MatC(S.transpose())) - kron(S, I);
}

// Joint eigenbasis of the terms containing an edge; label = number of terms at 1.
struct EnergyBasis {
  MatR V;
  std::vector<int> level;
};

EnergyBasis energy_basis(const QuantumDoubleModel& m, int edge) {
  const auto ids = m.terms_containing(edge);
  const long D = static_cast<long>(std::llround(m.dim()));
  EnergyBasis eb;
  if (ids.empty()) {
    eb.V = MatR::Identity(D, D);
    eb.level.assign(D, 0);
    return eb;
  }
  if (ids.size() > 20) throw ContractError("energy_basis: too many terms on one edge");
  MatR M = MatR::Zero(D, D);
  for (size_t i = 0; i < ids.size(); ++i) {
    const auto& t = m.terms()[ids[i]];
    std::vector<int> e(t.edges.begin(), t.edges.end());
    SpMatC P = embed_operator(t.op, m.d(), e, m.patch().edges);
    M += double(1L << i) * MatC(P).real();
  }
  Eigen::SelfAdjointEigenSolver<MatR> es(M);
  eb.V = es.eigenvectors();
  for (long i = 0; i < D; ++i) {
    const double x = es.eigenvalues()(i);
    const long k = std::lround(x);
    if (std::abs(x - k) > 1e-8 || k < 0) throw ContractError("energy_basis: local terms do not commute");
    eb.level.push_back(std::popcount(static_cast<unsigned long>(k)));
  }
  return eb;
}

// Dense S(w) for w in -4..4 from a real part and an imaginary part.
std::array<MatC, kNumOmega> split_by_frequency(const EnergyBasis& eb, const SpMatC& S) {
  const long D = eb.V.rows();
  std::array<MatC, kNumOmega> out;
  for (auto& o : out) o = MatC::Zero(D, D);
  const SpMatR re = S.real(), im = S.imag();
  for (int part = 0; part < 2; ++part) {
    const SpMatR& P = part ? im : re;
    if (P.nonZeros() == 0 || P.cwiseAbs().sum() == 0.0) continue;
    const cplx unit = part ? cplx(0, 1) : cplx(1, 0);
    MatR W = eb.V.transpose() * (P * eb.V);
    for (int w = -kOmegaMax; w <= kOmegaMax; ++w) {
      MatR Wm = MatR::Zero(D, D);
      bool any = false;
      for (long j = 0; j < D; ++j)
        for (long i = 0; i < D; ++i)
          if (eb.level[i] - eb.level[j] == w && W(i, j) != 0.0) {
            Wm(i, j) = W(i, j);
            any = true;
          }
      if (!any || Wm.cwiseAbs().maxCoeff() < 1e-14) continue;
      MatR A = eb.V * Wm * eb.V.transpose();
      out[w + kOmegaMax] += unit * A.cast<cplx>();
    }
  }
  return out;
}

JumpDecomposition decompose(const QuantumDoubleModel& m, const EnergyBasis& eb, int edge, const MatC& S, int alpha) {
  if (m.patch().local(edge) < 0) throw GeometryError("fourier_components: edge " + std::to_string(edge) + " is outside the model");
  SpMatC Sf = embed_operator(S, m.d(), {edge}, m.patch().edges);
  auto dense = split_by_frequency(eb, Sf);
  JumpDecomposition j;
  j.edge = edge;
  j.alpha = alpha;
  std::set<int> supp;
  for (int k = 0; k < kNumOmega; ++k) {
    j.parts[k] = dense[k].sparseView(1.0, 1e-13);
    j.parts[k].makeCompressed();
    if (j.parts[k].nonZeros() == 0) continue;
    for (int e : operator_support(dense[k], m.d(), m.patch().edges)) supp.insert(e);
  }
  j.support.assign(supp.begin(), supp.end());
  return j;
}

VecC thermofield(const MatC& rho_sqrt) { return vectorize(rho_sqrt); }

}  // namespace

// ---------------------------------------------------------------- couplings

CouplingSet default_coupling(int d) {
  if (d < 1) throw std::invalid_argument("default_coupling: dimension must be positive");
  CouplingSet c;
  c.id = "matrix-units";
  for (int g = 0; g < d; ++g) {
    MatC E = MatC::Zero(d, d);
    E(g, g) = 1;
    c.ops.push_back(E);
  }
  for (int g = 0; g < d; ++g)
    for (int h = g + 1; h < d; ++h) {
      MatC X = MatC::Zero(d, d), Y = MatC::Zero(d, d);
      X(g, h) = X(h, g) = 1;
      Y(g, h) = cplx(0, 1);
      Y(h, g) = cplx(0, -1);
      c.ops.push_back(X);
      c.ops.push_back(Y);
    }
  return c;
}

int commutant_dimension(const std::vector<MatC>& ops, double tol) {
  if (ops.empty()) throw std::invalid_argument("commutant_dimension: empty operator list");
  const long d = ops[0].rows();
  MatC A(d * d * static_cast<long>(ops.size()), d * d);
  for (size_t a = 0; a < ops.size(); ++a) {
    if (ops[a].rows() != d || ops[a].cols() != d) throw ContractError("commutant_dimension: operator shapes differ");
    A.middleRows(static_cast<long>(a) * d * d, d * d) = commutator_matrix(ops[a]);
  }
  Eigen::JacobiSVD<MatC> svd(A);
  const VecR& s = svd.singularValues();
  const double smax = std::max(1.0, s.size() ? s(0) : 0.0);
  int nul = static_cast<int>(d * d);
  for (long i = 0; i < s.size(); ++i)
    if (s(i) > tol * smax) --nul;
  return nul;
}

void validate_coupling(const CouplingSet& c) {
  if (c.ops.empty()) throw ContractError("coupling: no operators");
  const long d = c.ops[0].rows();
  for (size_t a = 0; a < c.ops.size(); ++a) {
    if (c.ops[a].rows() != d || c.ops[a].cols() != d) throw ContractError("coupling: operator shapes differ");
    if (!is_hermitian(c.ops[a], 1e-12)) throw ContractError("coupling: operator " + std::to_string(a) + " is not Hermitian");
  }
  const int k = commutant_dimension(c.ops);
  if (k != 1) throw ContractError("coupling: commutant has dimension " + std::to_string(k) + ", expected 1");
}

// ---------------------------------------------------------------- rates

double RateFunction::g_min() const { return *std::min_element(values.begin(), values.end()); }

RateFunction kms_rates(double beta) {
  if (!std::isfinite(beta) || beta < 0) throw DomainError("kms_rates: beta must be finite and non-negative");
  RateFunction r;
  r.beta = beta;
  r.form = "exponential-half";
  for (int w = -kOmegaMax; w <= kOmegaMax; ++w) r.values[w + kOmegaMax] = std::exp(beta * w / 2);
  return r;
}

RateFunction kms_rates_table(double beta, const std::map<int, double>& table, double tol) {
  if (!std::isfinite(beta) || beta < 0) throw DomainError("kms_rates_table: beta must be finite and non-negative");
  RateFunction r;
  r.beta = beta;
  r.form = "custom";
  for (int w = -kOmegaMax; w <= kOmegaMax; ++w) {
    auto it = table.find(w);
    if (it == table.end()) throw DomainError("kms_rates_table: no rate for omega = " + std::to_string(w));
    if (!(it->second > 0) || !std::isfinite(it->second))
      throw DomainError("kms_rates_table: rate for omega = " + std::to_string(w) + " must be positive");
    r.values[w + kOmegaMax] = it->second;
  }
  for (const auto& kv : table)
    if (kv.first < -kOmegaMax || kv.first > kOmegaMax)
      throw DomainError("kms_rates_table: omega = " + std::to_string(kv.first) + " is not a Bohr frequency");
  double worst = 1, dev = 0;
  for (int w = 1; w <= kOmegaMax; ++w) {
    const double ratio = r(-w) / (std::exp(-beta * w) * r(w));
    if (std::abs(ratio - 1) > dev) {
      dev = std::abs(ratio - 1);
      worst = ratio;
    }
  }
  if (dev > tol) {
    std::ostringstream os;
    os << "kms_rates_table: KMS condition violated, worst ratio ghat(-w) / (e^{-beta w} ghat(w)) = " << worst;
    throw DomainError(os.str());
  }
  return r;
}

RateFunction load_rate_table(double beta, std::istream& in, double tol) {
  std::map<int, double> table;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream is(line);
    std::string a, b, extra;
    if (!(is >> a)) continue;
    if (!(is >> b) || (is >> extra)) throw ConfigError("rate table line " + std::to_string(ln) + ": expected two columns");
    try {
      size_t p1 = 0, p2 = 0;
      const int w = std::stoi(a, &p1);
      const double g = std::stod(b, &p2);
      if (p1 != a.size() || p2 != b.size()) throw std::invalid_argument("trailing characters");
      if (table.count(w)) throw ConfigError("rate table line " + std::to_string(ln) + ": duplicate omega");
      table[w] = g;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("rate table line " + std::to_string(ln) + ": cannot parse '" + line + "'");
    }
  }
  return kms_rates_table(beta, table, tol);
}

// ---------------------------------------------------------------- jumps

std::vector<int> operator_support(const MatC& M, int d, const std::vector<int>& space, double tol) {
  const int n = static_cast<int>(space.size());
  std::vector<int> dims(n, d), out;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  for (int p = 0; p < n; ++p) {
    std::vector<int> keep, keep_edges;
    for (int q = 0; q < n; ++q)
      if (q != p) {
        keep.push_back(q);
        keep_edges.push_back(space[q]);
      }
    MatC T = partial_trace(M, dims, keep) / double(d);
    MatC E = MatC(embed_operator(T, d, keep_edges, space));
    if ((M - E).cwiseAbs().maxCoeff() > tol * scale) out.push_back(space[p]);
  }
  return out;
}

JumpDecomposition fourier_components(const QuantumDoubleModel& m, int edge, const MatC& S, int alpha) {
  if (S.rows() != m.d() || S.cols() != m.d()) throw ContractError("fourier_components: S must act on one edge");
  return decompose(m, energy_basis(m, edge), edge, S, alpha);
}

// ---------------------------------------------------------------- generator

DaviesGenerator::DaviesGenerator(const QuantumDoubleModel& m, double beta, CouplingSet c, RateFunction r, long max_dim)
    : m_(m), beta_(beta), c_(std::move(c)), r_(std::move(r)) {
  validate_coupling(c_);
  if (c_.ops[0].rows() != m_.d()) throw ContractError("DaviesGenerator: coupling dimension differs from |G|");
  if (std::abs(r_.beta - beta) > 1e-15) throw DomainError("DaviesGenerator: rates are for a different beta");
  if (m_.dim() > static_cast<double>(max_dim))
    throw FeasibilityError("DaviesGenerator: dimension " + std::to_string(m_.dim()) + " exceeds " + std::to_string(max_dim),
                           m_.dim() * m_.dim() * 16.0 * 40);
  D_ = static_cast<long>(std::llround(m_.dim()));
  H_ = full_hamiltonian(m_, max_dim).H;
  // Gibbs state and its square roots from one spectral decomposition
  Spectrum sp = hermitian_spectrum(MatC(H_));
  const double e0 = sp.values.size() ? sp.values(0) : 0.0;
  VecR w(D_);
  for (long i = 0; i < D_; ++i) w(i) = std::exp(-beta * (sp.values(i) - e0));
  w /= w.sum();
  if (w.minCoeff() < 1e-280) throw DomainError("DaviesGenerator: Gibbs state is numerically singular");
  const MatC& V = sp.vectors;
  rho_ = V * w.cast<cplx>().asDiagonal() * V.adjoint();
  rho_sqrt_ = V * w.cwiseSqrt().cast<cplx>().asDiagonal() * V.adjoint();
  rho_isqrt_ = V * w.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() * V.adjoint();

  const auto& edges = m_.patch().edges;
  K_.assign(edges.size(), MatC::Zero(D_, D_));
  for (size_t p = 0; p < edges.size(); ++p) {
    EnergyBasis eb = energy_basis(m_, edges[p]);
    for (size_t a = 0; a < c_.ops.size(); ++a) {
      jumps_.push_back(decompose(m_, eb, edges[p], c_.ops[a], static_cast<int>(a)));
      std::array<SpMatC, kNumOmega> adj;
      for (int k = 0; k < kNumOmega; ++k) {
        const SpMatC& S = jumps_.back().parts[k];
        adj[k] = SpMatC(S.adjoint());
        if (S.nonZeros()) K_[p] += r_(k - kOmegaMax) * MatC(adj[k] * S);
      }
      adj_.push_back(std::move(adj));
    }
  }
}

std::vector<char> DaviesGenerator::edge_mask(const std::vector<int>& edges) const {
  std::vector<char> use(m_.patch().edges.size(), 0);
  for (int e : edges) {
    const int p = m_.patch().local(e);
    if (p < 0) throw GeometryError("DaviesGenerator: edge " + std::to_string(e) + " is outside the model");
    use[p] = 1;
  }
  return use;
}

MatC DaviesGenerator::apply_impl(const MatC& Q, const std::vector<char>& use) const {
  if (Q.rows() != D_ || Q.cols() != D_) throw ContractError("DaviesGenerator: operator shape mismatch");
  MatC out = MatC::Zero(D_, D_);
  MatC K = MatC::Zero(D_, D_);
  for (size_t p = 0; p < use.size(); ++p)
    if (use[p]) K += K_[p];
  for (size_t j = 0; j < jumps_.size(); ++j) {
    if (!use[m_.patch().local(jumps_[j].edge)]) continue;
    for (int k = 0; k < kNumOmega; ++k) {
      const SpMatC& S = jumps_[j].parts[k];
      if (!S.nonZeros()) continue;
      MatC QS = Q * S;
      out += r_(k - kOmegaMax) * (adj_[j][k] * QS);
    }
  }
  out -= 0.5 * (K * Q + Q * K);
  return out;
}

MatC DaviesGenerator::apply(const MatC& Q) const { return apply_impl(Q, std::vector<char>(m_.patch().edges.size(), 1)); }

MatC DaviesGenerator::apply(const MatC& Q, const std::vector<int>& edges) const { return apply_impl(Q, edge_mask(edges)); }

MatC DaviesGenerator::apply_term(const MatC& Q, int jump, int omega) const {
  if (jump < 0 || jump >= static_cast<int>(jumps_.size())) throw std::out_of_range("apply_term: jump index");
  if (omega < 0 || omega > kOmegaMax) throw std::invalid_argument("apply_term: omega must lie in 0..4");
  MatC out = MatC::Zero(D_, D_);
  for (int w : {omega, -omega}) {
    const SpMatC& S = jumps_[jump].at(w);
    if (S.nonZeros()) {
      const SpMatC& Sd = adj_[jump][w + kOmegaMax];
      MatC SdS = MatC(Sd * S);
      out += r_(w) * (Sd * MatC(Q * S) - 0.5 * (SdS * Q + Q * SdS));
    }
    if (omega == 0) break;
  }
  return out;
}

MatC DaviesGenerator::derivation(const MatC& Q) const { return H_ * Q - Q * H_; }

void DaviesGenerator::h_tilde_add(const VecC& x, VecC& y, const std::vector<int>& edges) const {
  const auto use = edge_mask(edges);
  MatC Y = devectorize(x, static_cast<int>(D_));
  MatC K = MatC::Zero(D_, D_);
  for (size_t p = 0; p < use.size(); ++p)
    if (use[p]) K += K_[p];
  MatC R = 0.5 * (K * Y + Y * K);
  for (size_t j = 0; j < jumps_.size(); ++j) {
    if (!use[m_.patch().local(jumps_[j].edge)]) continue;
    for (int k = 0; k < kNumOmega; ++k) {
      const SpMatC& S = jumps_[j].parts[k];
      if (!S.nonZeros()) continue;
      const int w = k - kOmegaMax;
      const double cw = r_(w) * std::exp(-beta_ * w / 2);
      MatC YS = Y * S;
      R -= cw * (adj_[j][k] * YS);
    }
  }
  y += vectorize(R);
}

LinearMap DaviesGenerator::h_tilde() const { return h_tilde(m_.patch().edges); }

LinearMap DaviesGenerator::h_tilde(const std::vector<int>& edges) const {
  edge_mask(edges);
  return LinearMap{D_ * D_, [this, edges](const VecC& x, VecC& y) { h_tilde_add(x, y, edges); }};
}

cplx gns_inner(const MatC& A, const MatC& B, const MatC& rho) {
  if (A.rows() != B.rows() || A.cols() != B.cols() || rho.rows() != A.rows())
    throw ContractError("gns_inner: shape mismatch");
  return (rho * A.adjoint() * B).trace();
}

VecC iota(const MatC& Q, const MatC& rho_sqrt) {
  if (Q.rows() != rho_sqrt.rows() || Q.cols() != rho_sqrt.cols()) throw ContractError("iota: shape mismatch");
  return vectorize(Q * rho_sqrt);
}

MatC iota_inverse(const VecC& v, const MatC& rho_isqrt) {
  return devectorize(v, static_cast<int>(rho_isqrt.rows())) * rho_isqrt;
}

MatC superoperator_matrix(const DaviesGenerator& g, bool full) {
  const long D = g.dim();
  if (D * D > 4096) throw FeasibilityError("superoperator_matrix: dimension above 4096", double(D * D) * D * D * 16.0);
  MatC M(D * D, D * D);
  for (long i = 0; i < D; ++i)
    for (long j = 0; j < D; ++j) {
      MatC E = MatC::Zero(D, D);
      E(i, j) = 1;
      MatC out = g.apply(E);
      if (full) out += cplx(0, 1) * g.derivation(E);
      M.col(i * D + j) = vectorize(out);
    }
  return M;
}

MatC gns_symmetrized_generator(const DaviesGenerator& g, const std::vector<int>& edges) {
  const long D = g.dim();
  if (D * D > 4096) throw FeasibilityError("gns_symmetrized_generator: dimension above 4096", double(D * D) * D * D * 16.0);
  MatC L(D * D, D * D);
  for (long i = 0; i < D; ++i)
    for (long j = 0; j < D; ++j) {
      MatC E = MatC::Zero(D, D);
      E(i, j) = 1;
      L.col(i * D + j) = vectorize(g.apply(E, edges));
    }
  MatC I = MatC::Identity(D, D);
  MatC Gh = kron(I, MatC(g.rho_sqrt().transpose()));
  MatC Gih = kron(I, MatC(g.rho_isqrt().transpose()));
  return -(Gh * L * Gih);
}

// ---------------------------------------------------------------- outside projector

namespace {

FactorMap outside_map(const DaviesGenerator& g, const std::vector<int>& X) {
  const auto& P = g.model().patch();
  const int n = static_cast<int>(P.edges.size());
  std::vector<int> local;
  std::set<int> seen;
  for (int e : X) {
    const int p = P.local(e);
    if (p < 0) throw GeometryError("GnsOutsideProjector: edge " + std::to_string(e) + " is outside the model");
    if (seen.insert(p).second) local.push_back(p);
  }
  std::sort(local.begin(), local.end());
  for (int q = 0; q < n; ++q) local.push_back(n + q);
  return FactorMap(std::vector<int>(2 * n, g.model().d()), local);
}

}  // namespace

GnsOutsideProjector::GnsOutsideProjector(const DaviesGenerator& g, const std::vector<int>& X) : map_(outside_map(g, X)) {
  MatC M = map_.gather(thermofield(g.rho_sqrt()));
  U_ = column_basis(M, 1e-12);
  rank_ = U_.cols() * map_.spectator_count();
}

void GnsOutsideProjector::apply_add(const VecC& x, VecC& y, double scale) const {
  MatC Xm = map_.gather(x);
  MatC Y = U_ * (U_.adjoint() * Xm);
  map_.scatter_add(Y, y, scale);
}

VecC GnsOutsideProjector::apply(const VecC& x) const {
  VecC y = VecC::Zero(dim());
  apply_add(x, y);
  return y;
}

MatC GnsOutsideProjector::basis(long max_cols) const {
  if (rank_ > max_cols) throw FeasibilityError("GnsOutsideProjector: basis too large", double(rank_) * dim() * 16.0);
  MatC B = MatC::Zero(dim(), rank_);
  const long s = map_.spectator_count();
  long col = 0;
  for (long b = 0; b < s; ++b)
    for (long u = 0; u < U_.cols(); ++u, ++col)
      for (long l = 0; l < U_.rows(); ++l) B(map_.base()[b] + map_.offset()[l], col) = U_(l, u);
  return B;
}

// ---------------------------------------------------------------- checks

KernelReport kernel_check(const DaviesGenerator& g, const std::vector<int>& X, const EigOptions& opt, long dense_max) {
  KernelReport rep;
  std::set<int> xs(X.begin(), X.end());
  rep.edges.assign(xs.begin(), xs.end());
  const int d = g.model().d();
  const int outside = g.model().num_edges() - static_cast<int>(rep.edges.size());
  rep.predicted = 1;
  for (int i = 0; i < 2 * outside; ++i) rep.predicted *= d;
  const long n = g.dim() * g.dim();
  GnsOutsideProjector Pi(g, rep.edges);
  MatC kernel;
  if (n <= dense_max) {
    rep.method = "dense";
    MatC H = materialize(g.h_tilde(rep.edges));
    H = 0.5 * (H + H.adjoint());
    Spectrum sp = hermitian_spectrum(H);
    const double scale = std::max(1.0, sp.values.cwiseAbs().maxCoeff());
    rep.threshold = 1e-9 * scale;
    for (long i = 0; i < sp.values.size(); ++i)
      if (sp.values(i) <= rep.threshold) ++rep.measured;
    kernel = sp.vectors.leftCols(rep.measured);
  } else {
    if (rep.predicted > 4) throw FeasibilityError("kernel_check: predicted kernel too large for the matrix-free route", double(n) * 16.0 * rep.predicted);
    rep.method = "matrix-free";
    EigOptions o = opt;
    o.k = static_cast<int>(std::min<long>(rep.predicted + 1, n));
    o.want_vectors = true;
    EigResult r = lowest_eigs(g.h_tilde(rep.edges), o);
    rep.threshold = std::max(1e-8, 10 * opt.tol);
    for (double v : r.values)
      if (v <= rep.threshold) ++rep.measured;
    kernel = r.vectors.leftCols(rep.measured);
  }
  rep.angle = std::numbers::pi / 2;
  if (rep.measured == rep.predicted) {
    if (rep.measured == n) {
      rep.angle = 0;
    } else {
      MatC B = Pi.basis(std::max<long>(rep.predicted, 4096));
      rep.angle = largest_principal_angle(kernel, B);
    }
  }
  rep.pass = rep.measured == rep.predicted && rep.angle <= 1e-8;
  return rep;
}

double commutator_constant(const CouplingSet& c) {
  if (c.ops.empty()) throw ContractError("commutator_constant: no operators");
  const long d = c.ops[0].rows();
  if (d == 1) return 0;
  MatC F = MatC::Zero(d * d, d * d);
  for (const auto& S : c.ops) {
    MatC C = commutator_matrix(S);
    F += C.adjoint() * C;
  }
  // orthonormal basis of the traceless operators
  VecC one = vectorize(MatC::Identity(d, d)) / std::sqrt(double(d));
  MatC P = MatC::Identity(d * d, d * d) - one * one.adjoint();
  MatC B = column_basis(P);
  MatC M = B.adjoint() * F * B;
  return hermitian_spectrum(0.5 * (M + M.adjoint())).values(0);
}

LocalGapReport local_gap_constants(const DaviesGenerator& g, int edge, const EigOptions& opt) {
  const auto& m = g.model();
  if (m.patch().local(edge) < 0) throw GeometryError("local_gap_constants: edge outside the model");
  LocalGapReport rep;
  rep.edge = edge;
  const long D = g.dim();
  std::set<int> supp;
  SpMatC T(D, D);
  for (int id : m.terms_containing(edge)) {
    const auto& t = m.terms()[id];
    std::vector<int> e(t.edges.begin(), t.edges.end());
    supp.insert(e.begin(), e.end());
    T += embed_operator(t.op, m.d(), e, m.patch().edges);
  }
  if (supp.empty()) supp.insert(edge);
  rep.support.assign(supp.begin(), supp.end());
  rep.c1 = T.nonZeros() ? hermitian_spectrum(MatC(T)).values.cwiseAbs().maxCoeff() : 0.0;
  rep.c2 = commutator_constant(g.coupling());
  rep.g_min = g.rates().g_min();
  rep.bound = rep.c2 / rep.omega_count * rep.g_min * std::exp(-rep.c1 * g.beta());

  GnsOutsideProjector Pi(g, {edge});
  const LinearMap He = g.h_tilde({edge});
  const double b = rep.bound;
  LinearMap M{He.dim, [&](const VecC& x, VecC& y) {
                He.apply(x, y);
                Pi.apply_add(x, y, b);
                y -= b * x;
              }};
  EigOptions o = opt;
  o.k = 1;
  rep.lambda_min = lowest_eigs(M, o).values[0];
  Rng rng(opt.seed + 17);
  for (int p = 0; p < 3; ++p) {
    VecC v = Pi.apply(random_vector(static_cast<int>(He.dim), rng));
    rep.kernel_leak = std::max(rep.kernel_leak, He(v).norm() / v.norm());
  }
  rep.pass = rep.lambda_min >= -1e-9;
  return rep;
}

DaviesGapReport davies_gap(const DaviesGenerator& g, const EigOptions& opt) {
  DaviesGapReport rep;
  const LinearMap H = g.h_tilde();
  rep.dim = H.dim;
  VecC t = thermofield(g.rho_sqrt());
  t /= t.norm();
  rep.ground_residual = H(t).norm();
  EigOptions o = opt;
  o.k = 1;
  o.deflate = MatC(t);
  EigResult r = lowest_eigs(H, o);
  rep.gap = r.values[0];
  rep.residual = r.residuals.empty() ? 0.0 : r.residuals[0];
  rep.matvecs = r.matvecs;
  rep.method = r.method;
  return rep;
}

// ---------------------------------------------------------------- chain

namespace {

ChainInequality inequality(std::string name, double lhs, double rhs, double tol, std::string note = {}) {
  ChainInequality c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.tol = tol;
  c.pass = lhs >= rhs - tol;
  c.note = std::move(note);
  return c;
}

}  // namespace

GapChainReport gap_chain(const FiniteGroup& G, const TorusLattice& L, double beta, int n, const CouplingSet& c,
                         const RateFunction& r, const EigOptions& opt) {
  GapChainReport rep;
  rep.model = G.label() + " torus:" + std::to_string(L.N());
  rep.coupling = c.id;
  rep.rates = r.form;
  rep.beta = beta;
  rep.n = n;
  rep.n_beta = n_beta(beta, G.order());
  rep.m_estimate = static_cast<long>(n) * n * n * n;

  QuantumDoubleModel model(G, L);
  DaviesGenerator gen(model, beta, c, r);
  const auto& edges = model.patch().edges;
  rep.dim = gen.dim() * gen.dim();
  const long N2 = rep.dim;
  const Region torus{RegionKind::Torus, 0, 0, L.N(), L.N()};
  VecC tfd = vectorize(gen.rho_sqrt());
  tfd /= tfd.norm();

  // gap(L) = gap(H~)
  rep.gap_l = davies_gap(gen, opt).gap;

  // local constants
  rep.local_bound = std::numeric_limits<double>::infinity();
  double worst_local = std::numeric_limits<double>::infinity();
  for (int e : edges) {
    rep.local.push_back(local_gap_constants(gen, e, opt));
    const auto& lg = rep.local.back();
    rep.c1 = std::max(rep.c1, lg.c1);
    rep.c2 = lg.c2;
    rep.g_min = lg.g_min;
    rep.local_bound = std::min(rep.local_bound, lg.bound);
    worst_local = std::min(worst_local, lg.lambda_min);
  }
  rep.inequalities.push_back(inequality("lambda_min(H~_e - b Pi_e^perp) >= 0, worst edge", worst_local, 0, 1e-9));

  // sum_e Pi_e^perp
  std::vector<GnsOutsideProjector> pis;
  for (int e : edges) pis.emplace_back(gen, std::vector<int>{e});
  LinearMap sum_pi{N2, [&](const VecC& x, VecC& y) {
                     y += static_cast<double>(pis.size()) * x;
                     for (const auto& P : pis) P.apply_add(x, y, -1.0);
                   }};
  EigOptions od = opt;
  od.k = 1;
  od.deflate = MatC(tfd);
  rep.gap_pi = lowest_eigs(sum_pi, od).values[0];
  rep.inequalities.push_back(inequality("gap(H~) >= b gap(sum_e Pi_e^perp)", rep.gap_l, rep.local_bound * rep.gap_pi, 1e-8));

  // parent Hamiltonian and the family
  ParentHamiltonian H = parent_hamiltonian(G, L, torus, beta, n, 1);
  rep.family = H.family;
  std::vector<int> count(L.num_edges(), 0);
  for (size_t k = 0; k < H.family.size(); ++k) {
    const auto xe = classify_region(L, H.family[k]).edges;
    for (int e : xe) ++count[e];
    GnsOutsideProjector PX(gen, xe);
    std::vector<int> pos;
    for (int e : xe) pos.push_back(model.patch().local(e));
    LinearMap diff{N2, [&](const VecC& x, VecC& y) {
                     y += static_cast<double>(pos.size()) * x;
                     for (int p : pos) pis[p].apply_add(x, y, -1.0);
                     y -= x;
                     PX.apply_add(x, y, 1.0);
                   }};
    EigOptions o1 = opt;
    o1.k = 1;
    const double lm = lowest_eigs(diff, o1).values[0];
    rep.inequalities.push_back(inequality("sum_{e in X} Pi_e^perp - Pi_X^perp >= 0, X = " + H.family[k].str(), lm, 0, 1e-9));
    const EmbeddedProjector& PXp = H.terms[k];
    LinearMap cont{N2, [&](const VecC& x, VecC& y) {
                     PXp.apply_add(x, y, 1.0);
                     PX.apply_add(x, y, -1.0);
                   }};
    const double lc = lowest_eigs(cont, o1).values[0];
    rep.inequalities.push_back(inequality("P_X - Pi_X >= 0, X = " + H.family[k].str(), lc, 0, 1e-9));
  }
  rep.m = *std::max_element(count.begin(), count.end());
  rep.inequalities.push_back(inequality("m(X) <= n^4", double(rep.m_estimate), double(rep.m), 0));

  // sum_e Pi_e^perp >= H_E / m as operators, then for the gaps
  const double m = rep.m;
  LinearMap op{N2, [&](const VecC& x, VecC& y) {
                 sum_pi.apply(x, y);
                 VecC h = VecC::Zero(N2);
                 H.apply(x, h);
                 y -= h / m;
               }};
  EigOptions o2 = opt;
  o2.k = 1;
  const double lo = lowest_eigs(op, o2).values[0];
  rep.inequalities.push_back(inequality("sum_e Pi_e^perp - H_E / m >= 0", lo, 0, 1e-9));

  auto pg = parent_gap(G, L, H, torus, beta, opt);
  rep.gap_parent = pg.gap;
  rep.inequalities.push_back(inequality("gap(sum_e Pi_e^perp) >= gap(H_E) / m", rep.gap_pi, rep.gap_parent / m, 1e-8));

  rep.final_bound = rep.local_bound * rep.gap_parent / m;
  rep.inequalities.push_back(inequality("gap(L) >= b gap(H_E) / m", rep.gap_l, rep.final_bound, 1e-8));
  rep.inequalities.push_back(inequality("final bound > 0", rep.final_bound, 0, 0, "strict"));
  rep.inequalities.back().pass = rep.final_bound > 0;
  rep.pass = true;
  for (const auto& q : rep.inequalities) rep.pass = rep.pass && q.pass;
  return rep;
}

}  // namespace qdlab

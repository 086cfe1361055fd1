// quantum_double.cpp
#include "qdlab/quantum_double.hpp"

#include <cmath>

#include "qdlab/errors.hpp"

namespace qdlab {

double gamma_beta(double beta, int order) { return std::expm1(beta) / order; }

MatC t_operator(const FiniteGroup& G, bool away, Elem g) {
  G.check_index(g);
  const int n = G.order();
  MatC T = MatC::Zero(n, n);
  for (int h = 0; h < n; ++h) T(away ? G.mul(g, h) : G.mul(h, G.inv(g)), h) = 1.0;
  return T;
}

MatC t_operator(const FiniteGroup& G, const TorusLattice& L, int v, int e, Elem g) {
  for (auto leg : L.star(v))
    if (leg.edge == e) return t_operator(G, leg.away, g);
  throw GeometryError("t_operator: edge " + std::to_string(e) + " is not incident to vertex " + std::to_string(v));
}

MatC star_operator(const FiniteGroup& G, const std::array<bool, 4>& away) {
  const int n = G.order();
  const long D = static_cast<long>(n) * n * n * n;
  MatC A = MatC::Zero(D, D);
  for (int g = 0; g < n; ++g) {
    MatC T = t_operator(G, away[0], g);
    for (int i = 1; i < 4; ++i) T = kron(T, t_operator(G, away[i], g));
    A += T;
  }
  return A / static_cast<double>(n);
}

MatC plaquette_operator(const FiniteGroup& G, const std::array<int, 4>& signs) {
  const int n = G.order();
  const long D = static_cast<long>(n) * n * n * n;
  MatC B = MatC::Zero(D, D);
  for (long s = 0; s < D; ++s) {
    int g[4] = {static_cast<int>(s / (n * n * n)), static_cast<int>((s / (n * n)) % n),
                static_cast<int>((s / n) % n), static_cast<int>(s % n)};
    Elem prod = G.identity();
    for (int i = 0; i < 4; ++i) prod = G.mul(prod, signs[i] > 0 ? g[i] : G.inv(g[i]));
    B(s, s) = regular_character(G, prod) / n;
  }
  return B;
}

QuantumDoubleModel::QuantumDoubleModel(FiniteGroup G, TorusLattice L, Patch P)
    : G_(std::move(G)), L_(std::move(L)), P_(std::move(P)) {
  for (int v : P_.stars) {
    auto s = L_.star(v);
    LocalTerm t{LocalTerm::Star, v, {}, {}};
    std::array<bool, 4> away{};
    for (int i = 0; i < 4; ++i) {
      t.edges[i] = s[i].edge;
      away[i] = s[i].away;
    }
    t.op = star_operator(G_, away);
    terms_.push_back(std::move(t));
  }
  for (int p : P_.plaquettes) {
    auto r = L_.plaquette(p);
    LocalTerm t{LocalTerm::Plaquette, p, {}, {}};
    std::array<int, 4> signs{};
    for (int i = 0; i < 4; ++i) {
      t.edges[i] = r[i].edge;
      signs[i] = r[i].sign;
    }
    t.op = plaquette_operator(G_, signs);
    terms_.push_back(std::move(t));
  }
}

QuantumDoubleModel::QuantumDoubleModel(FiniteGroup G, TorusLattice L)
    : QuantumDoubleModel(G, L, full_patch(L)) {}

double QuantumDoubleModel::dim() const { return std::pow(static_cast<double>(d()), num_edges()); }

std::vector<int> QuantumDoubleModel::terms_containing(int edge) const {
  std::vector<int> out;
  for (size_t i = 0; i < terms_.size(); ++i)
    for (int e : terms_[i].edges)
      if (e == edge) {
        out.push_back(static_cast<int>(i));
        break;
      }
  return out;
}

SpMatC embed_operator(const MatC& op, int d, const std::vector<int>& op_edges, const std::vector<int>& space_edges) {
  std::vector<int> pos;
  for (int e : op_edges) {
    auto it = std::lower_bound(space_edges.begin(), space_edges.end(), e);
    if (it == space_edges.end() || *it != e)
      throw GeometryError("embed_operator: edge " + std::to_string(e) + " is outside the space");
    pos.push_back(static_cast<int>(it - space_edges.begin()));
  }
  FactorMap fm(std::vector<int>(space_edges.size(), d), pos);
  if (op.rows() != fm.local_dim() || op.cols() != fm.local_dim())
    throw ContractError("embed_operator: operator size does not match its edges");
  std::vector<Eigen::Triplet<cplx>> trip;
  for (long r = 0; r < op.rows(); ++r)
    for (long c = 0; c < op.cols(); ++c) {
      cplx v = op(r, c);
      if (v == cplx(0.0)) continue;
      for (long b : fm.base()) trip.emplace_back(static_cast<int>(b + fm.offset()[r]), static_cast<int>(b + fm.offset()[c]), v);
    }
  SpMatC M(fm.dim(), fm.dim());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

HamiltonianAssembly full_hamiltonian(const QuantumDoubleModel& m, long max_dim) {
  if (m.dim() > static_cast<double>(max_dim))
    throw FeasibilityError("full_hamiltonian: dimension " + std::to_string(m.dim()) + " exceeds " +
                               std::to_string(max_dim),
                           m.dim() * 16.0 * (m.terms().size() + 1) * m.d());
  HamiltonianAssembly h;
  const long D = static_cast<long>(std::llround(m.dim()));
  h.H = SpMatC(D, D);
  for (const auto& t : m.terms()) {
    std::vector<int> e(t.edges.begin(), t.edges.end());
    h.terms.push_back(embed_operator(t.op, m.d(), e, m.patch().edges));
    h.H -= h.terms.back();
  }
  return h;
}

MatC gibbs_state(const QuantumDoubleModel& m, double beta, long max_dim) {
  if (beta < 0) throw DomainError("gibbs_state: beta must be non-negative");
  if (m.dim() > static_cast<double>(max_dim))
    throw FeasibilityError("gibbs_state: dense dimension " + std::to_string(m.dim()) + " exceeds " +
                               std::to_string(max_dim),
                           m.dim() * m.dim() * 16.0);
  auto h = full_hamiltonian(m, max_dim);
  MatC H = MatC(h.H);
  // shift by the ground energy for stable exponentials
  MatC E = matrix_exp_hermitian(H + static_cast<double>(h.num_terms()) * MatC::Identity(H.rows(), H.cols()), -beta);
  return E / E.trace().real();
}

MatC exp_projector_term(const MatC& P, double beta) {
  if (!is_hermitian(P, 1e-10) || (P * P - P).cwiseAbs().maxCoeff() > 1e-10)
    throw ContractError("exp_projector_term: input is not a projector");
  return MatC::Identity(P.rows(), P.cols()) + std::expm1(beta / 2) * P;
}

}  // namespace qdlab

// test_davies.cpp
#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "qdlab/davies.hpp"
#include "qdlab/errors.hpp"

using namespace qdlab;

namespace {

const FiniteGroup& z2() {
  static const FiniteGroup G = make_cyclic(2);
  return G;
}

// three edges with no complete star or plaquette: H = 0
QuantumDoubleModel three_edge_patch() {
  TorusLattice L(3);
  std::vector<int> e{L.edge_index({Orient::H, 0, 0}), L.edge_index({Orient::H, 1, 0}), L.edge_index({Orient::V, 1, 0})};
  return QuantumDoubleModel(z2(), L, make_patch(L, e));
}

QuantumDoubleModel plaquette_patch() {
  TorusLattice L(3);
  std::vector<int> e;
  for (auto leg : L.plaquette(0)) e.push_back(leg.edge);
  return QuantumDoubleModel(z2(), L, make_patch(L, e));
}

QuantumDoubleModel star_patch() {
  TorusLattice L(3);
  std::vector<int> e;
  for (auto leg : L.star(4)) e.push_back(leg.edge);
  return QuantumDoubleModel(z2(), L, make_patch(L, e));
}

DaviesGenerator generator(const QuantumDoubleModel& m, double beta) {
  return DaviesGenerator(m, beta, default_coupling(m.d()), kms_rates(beta));
}

double hs_norm2(const MatC& A, const MatC& rho) { return gns_inner(A, A, rho).real(); }

}  // namespace

TEST(Davies, DefaultCoupling) {
  for (int d : {2, 3, 6}) {
    auto c = default_coupling(d);
    EXPECT_EQ(static_cast<int>(c.ops.size()), d * d);
    for (const auto& S : c.ops) EXPECT_TRUE(is_hermitian(S, 0));
    EXPECT_EQ(commutant_dimension(c.ops), 1);
    EXPECT_NO_THROW(validate_coupling(c));
  }
  // diagonal units only: the commutant is the diagonal algebra
  auto c = default_coupling(3);
  c.ops.resize(3);
  EXPECT_EQ(commutant_dimension(c.ops), 3);
  EXPECT_THROW(validate_coupling(c), ContractError);
  CouplingSet bad{"bad", {MatC::Identity(2, 2) * cplx(0, 1)}, true};
  EXPECT_THROW(validate_coupling(bad), ContractError);
}

TEST(Davies, Rates) {
  auto r0 = kms_rates(0);
  for (double v : r0.values) EXPECT_EQ(v, 1.0);
  for (double beta : {0.5, 1.0, 3.0}) {
    auto r = kms_rates(beta);
    for (int w = -4; w <= 4; ++w) EXPECT_NEAR(r(-w) / r(w), std::exp(-beta * w), 1e-12 * std::exp(-beta * w));
  }
  EXPECT_NEAR(kms_rates(1.0).g_min(), std::exp(-2.0), 1e-16);
  std::map<int, double> table;
  for (int w = -4; w <= 4; ++w) table[w] = 2.0 * std::exp(0.7 * w);  // KMS at beta = 1.4
  EXPECT_NO_THROW(kms_rates_table(1.4, table));
  EXPECT_THROW(kms_rates_table(1.0, table), DomainError);
  try {
    kms_rates_table(1.0, table);
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("worst ratio"), std::string::npos);
  }
  table.erase(3);
  EXPECT_THROW(kms_rates_table(1.4, table), DomainError);

  std::ostringstream os;
  os.precision(17);
  os << "# omega rate\n";
  for (int w = -4; w <= 4; ++w) os << w << " " << std::exp(0.25 * w) << "\n";
  std::istringstream in(os.str());
  auto r = load_rate_table(0.5, in);
  EXPECT_EQ(r.form, "custom");
  EXPECT_NEAR(r(2), std::exp(0.5), 1e-15);
  std::istringstream broken("0 1\n1 x\n");
  try {
    load_rate_table(0.0, broken);
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Davies, FourierComponentsOnTorus) {
  TorusLattice L(2);
  QuantumDoubleModel m(z2(), L);
  const int e = L.edge_index({Orient::H, 0, 0});
  auto id = fourier_components(m, e, MatC::Identity(2, 2));
  for (int w = -4; w <= 4; ++w)
    if (w != 0) EXPECT_FALSE(id.nonzero(w));
  const long D = static_cast<long>(m.dim());
  EXPECT_LT((MatC(id.at(0)) - MatC::Identity(D, D)).cwiseAbs().maxCoeff(), 1e-13);

  auto h = full_hamiltonian(m);
  MatC H = MatC(h.H);
  const double t = 0.37;
  auto c = default_coupling(2);
  for (size_t a = 0; a < c.ops.size(); ++a) {
    auto j = fourier_components(m, e, c.ops[a], static_cast<int>(a));
    MatC S = MatC(embed_operator(c.ops[a], 2, {e}, m.patch().edges));
    MatC sum = MatC::Zero(D, D), evolved = MatC::Zero(D, D);
    for (int w = -4; w <= 4; ++w) {
      MatC Sw = MatC(j.at(w));
      sum += Sw;
      evolved += std::exp(cplx(0, -w * t)) * Sw;
      EXPECT_LT((Sw.adjoint() - MatC(j.at(-w))).cwiseAbs().maxCoeff(), 1e-13) << a << " " << w;
      // [H, S(w)] = -w S(w)
      EXPECT_LT((H * Sw - Sw * H + double(w) * Sw).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_LT((sum - S).cwiseAbs().maxCoeff(), 1e-12);
    // e^{itH} S e^{-itH} with the dense exponential
    Spectrum sp = hermitian_spectrum(H);
    VecC ph = (cplx(0, t) * sp.values.cast<cplx>()).array().exp();
    MatC Ut = sp.vectors * ph.asDiagonal() * sp.vectors.adjoint();
    EXPECT_LT((Ut * S * Ut.adjoint() - evolved).cwiseAbs().maxCoeff(), 1e-10);
    // support inside the two stars and two plaquettes of e
    std::set<int> allowed;
    for (int id2 : m.terms_containing(e))
      for (int f : m.terms()[id2].edges) allowed.insert(f);
    for (int f : j.support) EXPECT_TRUE(allowed.count(f)) << f;
  }
}

TEST(Davies, GnsProductAndIota) {
  Rng rng(5);
  for (double beta : {0.0, 1.0}) {
    DaviesGenerator g = generator(plaquette_patch(), beta);
    const long D = g.dim();
    MatC I = MatC::Identity(D, D);
    EXPECT_NEAR(gns_inner(I, I, g.rho()).real(), 1.0, 1e-13);
    MatC A = random_matrix(D, D, rng), B = random_matrix(D, D, rng);
    if (beta == 0) EXPECT_NEAR(std::abs(gns_inner(A, B, g.rho()) - (A.adjoint() * B).trace() / double(D)), 0, 1e-12);
    VecC ia = iota(A, g.rho_sqrt()), ib = iota(B, g.rho_sqrt());
    EXPECT_NEAR(std::abs(ia.dot(ib) - gns_inner(A, B, g.rho())), 0, 1e-12);
    EXPECT_NEAR(ia.squaredNorm(), hs_norm2(A, g.rho()), 1e-12);
    VecC v = random_vector(static_cast<int>(D * D), rng);
    EXPECT_LT((iota(iota_inverse(v, g.rho_isqrt()), g.rho_sqrt()) - v).norm(), 1e-10);
    // iota(1) is the normalized thermofield double
    EXPECT_NEAR(iota(I, g.rho_sqrt()).norm(), 1.0, 1e-13);
  }
}

TEST(Davies, LindbladianStructure) {
  Rng rng(11);
  for (auto model : {plaquette_patch(), star_patch(), three_edge_patch()}) {
    for (double beta : {0.0, 0.8}) {
      DaviesGenerator g = generator(model, beta);
      const long D = g.dim();
      EXPECT_LT(g.apply(MatC::Identity(D, D)).cwiseAbs().maxCoeff(), 1e-12);
      MatC Q = random_matrix(D, D, rng), A = random_matrix(D, D, rng), B = random_matrix(D, D, rng);
      EXPECT_LT(std::abs((g.rho() * g.apply(Q)).trace()), 1e-12);
      // detailed balance in the GNS product
      EXPECT_LT(std::abs(gns_inner(A, g.apply(B), g.rho()) - gns_inner(g.apply(A), B, g.rho())), 1e-11);
      // commutes with the Hamiltonian derivation
      EXPECT_LT((g.apply(g.derivation(Q)) - g.derivation(g.apply(Q))).cwiseAbs().maxCoeff(), 1e-9);
      // pair terms: -<A, L_{e,a,w}(A)> = (1/2)(ghat(w) ||[A,S(w)]||^2 + ghat(-w) ||[A,S(w)^dag]||^2)
      for (int j = 0; j < static_cast<int>(g.jumps().size()); ++j)
        for (int w = 0; w <= 4; ++w) {
          const double lhs = -gns_inner(A, g.apply_term(A, j, w), g.rho()).real();
          MatC S = MatC(g.jumps()[j].at(w));
          double rhs = 0.5 * g.rates()(w) * hs_norm2(A * S - S * A, g.rho());
          if (w > 0) {
            MatC Sd = S.adjoint();
            rhs += 0.5 * g.rates()(-w) * hs_norm2(A * Sd - Sd * A, g.rho());
          }
          EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, rhs));
          EXPECT_GE(lhs, -1e-12);
          // each pair satisfies detailed balance on its own
          EXPECT_LT(std::abs(gns_inner(A, g.apply_term(B, j, w), g.rho()) - gns_inner(g.apply_term(A, j, w), B, g.rho())),
                    1e-11);
        }
    }
  }
}

TEST(Davies, HTildeMatchesDenseGenerator) {
  Rng rng(3);
  for (auto model : {three_edge_patch(), plaquette_patch(), star_patch()})
    for (double beta : {0.0, 1.0, 2.5}) {
      DaviesGenerator g = generator(model, beta);
      const long D = g.dim();
      MatC Hm = materialize(g.h_tilde());
      MatC Hd = gns_symmetrized_generator(g, model.patch().edges);
      EXPECT_LT((Hm - Hd).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_TRUE(is_hermitian(Hm, 1e-12));
      MatC Q = random_matrix(D, D, rng);
      VecC lhs = g.h_tilde()(iota(Q, g.rho_sqrt()));
      EXPECT_LT((lhs + iota(g.apply(Q), g.rho_sqrt())).norm(), 1e-11);
      VecC t = iota(MatC::Identity(D, D), g.rho_sqrt());
      EXPECT_LT(g.h_tilde()(t).norm(), 1e-12);
      double worst = 0;
      for (int p = 0; p < 1000; ++p) {
        VecC x = random_vector(static_cast<int>(D * D), rng);
        worst = std::min(worst, x.dot(Hm * x).real() / x.squaredNorm());
      }
      EXPECT_GE(worst, -1e-12);
    }
}

TEST(Davies, SingleEdgeDissipatorAtZeroBeta) {
  TorusLattice L(3);
  QuantumDoubleModel m(z2(), L, make_patch(L, {0}));
  DaviesGenerator g = generator(m, 0.0);
  auto c = default_coupling(2);
  MatC K = MatC::Zero(4, 4);
  for (const auto& S : c.ops) {
    MatC X = kron(MatC::Identity(2, 2), MatC(S.transpose())) - kron(S, MatC::Identity(2, 2));
    K += X.adjoint() * X;
  }
  // H~ carries the factor 1/2 in front of sum_a |1 (x) S^T - S (x) 1|^2
  MatC Hm = materialize(g.h_tilde());
  EXPECT_LT((Hm - 0.5 * K).cwiseAbs().maxCoeff(), 1e-13);
  Spectrum sp = hermitian_spectrum(0.5 * K);
  double dense_gap = 0;
  for (long i = 0; i < sp.values.size(); ++i)
    if (sp.values(i) > 1e-9) {
      dense_gap = sp.values(i);
      break;
    }
  auto rep = davies_gap(g);
  EXPECT_NEAR(rep.gap, dense_gap, 1e-10);
  EXPECT_NEAR(rep.gap, 3.0, 1e-10);  // half of the smallest traceless eigenvalue 6
}

TEST(Davies, KernelOnThreeEdgePatch) {
  auto m = three_edge_patch();
  DaviesGenerator g = generator(m, 1.0);
  const auto& E = m.patch().edges;
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<int> X;
    for (int i = 0; i < 3; ++i)
      if (mask >> i & 1) X.push_back(E[i]);
    auto k = kernel_check(g, X);
    EXPECT_TRUE(k.pass) << mask << " " << k.measured << " " << k.predicted << " " << k.angle;
    EXPECT_EQ(k.predicted, 1L << (2 * (3 - X.size())));
  }
}

TEST(Davies, PartialKernelIsSmallerWithTerms) {
  // With a plaquette term the jump components of one edge carry projectors on
  // the other edges, so the kernel of L_e is a proper subset of 1_e (x) B(rest).
  for (auto model : {plaquette_patch(), star_patch()}) {
    DaviesGenerator g = generator(model, 1.0);
    const int e = model.patch().edges[0];
    auto k = kernel_check(g, {e});
    EXPECT_EQ(k.predicted, 64);
    EXPECT_EQ(k.measured, 32);
    EXPECT_FALSE(k.pass);
    // the kernel still lies inside iota(B(rest))
    MatC H = materialize(g.h_tilde({e}));
    Spectrum sp = hermitian_spectrum(0.5 * (H + H.adjoint()));
    MatC Kb = sp.vectors.leftCols(k.measured);
    GnsOutsideProjector Pi(g, {e});
    double leak = 0;
    for (long c = 0; c < Kb.cols(); ++c) leak = std::max(leak, (Pi.apply(Kb.col(c)) - Kb.col(c)).norm());
    EXPECT_LT(leak, 1e-9);
    // the full sum is primitive
    EXPECT_TRUE(kernel_check(g, model.patch().edges).pass);
  }
}

TEST(Davies, FullGeneratorHasTheSameGap) {
  for (auto model : {plaquette_patch(), star_patch()}) {
    DaviesGenerator g = generator(model, 1.0);
    MatC full = superoperator_matrix(g, true);
    Eigen::ComplexEigenSolver<MatC> es(full);
    double gap_full = 1e300;
    for (long i = 0; i < es.eigenvalues().size(); ++i) {
      const double re = -es.eigenvalues()(i).real();
      if (re > 1e-9) gap_full = std::min(gap_full, re);
    }
    Spectrum sp = hermitian_spectrum(gns_symmetrized_generator(g, model.patch().edges));
    EXPECT_NEAR(gap_full, sp.values(1), 1e-8);
    EXPECT_LT(std::abs(sp.values(0)), 1e-10);
  }
}

TEST(Davies, CommutatorConstant) {
  // Z2 matrix units: the traceless form is diag(8, 6, 6) in the Pauli basis
  EXPECT_NEAR(commutator_constant(default_coupling(2)), 6.0, 1e-12);
  EXPECT_GT(commutator_constant(default_coupling(3)), 0);
}

TEST(Davies, LocalGapOnPatches) {
  for (auto model : {plaquette_patch(), star_patch(), three_edge_patch()})
    for (double beta : {0.0, 0.5, 1.0}) {
      DaviesGenerator g = generator(model, beta);
      for (int e : model.patch().edges) {
        auto rep = local_gap_constants(g, e);
        EXPECT_TRUE(rep.pass) << beta << " " << rep.lambda_min;
        EXPECT_NEAR(rep.c1, model.terms_containing(e).empty() ? 0.0 : 1.0, 1e-12);
        EXPECT_NEAR(rep.bound, 6.0 / 9 * std::exp(-2 * beta) * std::exp(-rep.c1 * beta), 1e-14);
      }
    }
}

TEST(Davies, TorusGapAndLocalConstant) {
  TorusLattice L(2);
  QuantumDoubleModel m(z2(), L);
  DaviesGenerator g = generator(m, 1.0);
  EXPECT_EQ(g.dim() * g.dim(), 65536);
  EigOptions opt;
  auto rep = davies_gap(g, opt);
  EXPECT_GT(rep.gap, 1e-3);
  EXPECT_LT(rep.ground_residual, 1e-10);
  auto k = kernel_check(g, m.patch().edges, opt);
  EXPECT_EQ(k.method, "matrix-free");
  EXPECT_TRUE(k.pass) << k.measured;
  auto lg = local_gap_constants(g, L.edge_index({Orient::V, 1, 0}), opt);
  EXPECT_NEAR(lg.c1, 4.0, 1e-12);
  EXPECT_EQ(lg.support.size(), 7u);
  EXPECT_TRUE(lg.pass) << lg.lambda_min;
}

TEST(Davies, GapChainAtZeroBeta) {
  auto r = gap_chain(z2(), TorusLattice(2), 0.0, 2, default_coupling(2), kms_rates(0.0));
  EXPECT_EQ(r.family.size(), 9u);  // four plaquettes, four cylinders, the torus
  EXPECT_EQ(r.m, 6);
  EXPECT_EQ(r.m_estimate, 16);
  EXPECT_NEAR(r.local_bound, 6.0 / 9, 1e-14);
  EXPECT_NEAR(r.gap_l, 6.0, 1e-8);
  EXPECT_NEAR(r.gap_pi, 1.0, 1e-8);
  for (const auto& q : r.inequalities) EXPECT_TRUE(q.pass) << q.name << " " << q.lhs << " " << q.rhs;
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.final_bound, 0);
  EXPECT_LE(r.final_bound, r.gap_l);
}

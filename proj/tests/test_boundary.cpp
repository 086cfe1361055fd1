// test_boundary.cpp
#include <gtest/gtest.h>

#include <random>

#include "qdlab/boundary.hpp"
#include "qdlab/errors.hpp"

using namespace qdlab;

namespace {

MatR gram(const SpMatR& V) { return MatR(SpMatR(V.transpose()) * V); }

std::map<int, Elem> random_fhat(const FiniteGroup& G, const RegionClassification& c, Rng& rng) {
  std::uniform_int_distribution<int> d(0, G.order() - 1);
  std::map<int, Elem> f;
  for (int e : c.boundary_edges) f[e] = d(rng);
  return f;
}

// Every block of the structured state against the Gram matrix of the slim map.
void expect_blocks_match(const FiniteGroup& G, const TorusLattice& L, const Region& R, double beta) {
  auto cls = classify_region(L, R);
  auto lay = network_layout(L, cls.edges);
  SpMatR V = region_map(G, beta, lay, Variant::Slim);
  SpMatR rho = SpMatR(V.transpose()) * V;
  auto sb = boundary_state_region(G, lay, beta);
  ASSERT_EQ(sb.dim(), rho.rows());
  double in_blocks = 0;
  for (long b = 0; b < sb.num_blocks(); ++b) {
    MatR B = sb.block_matrix(b);
    for (long i = 0; i < B.rows(); ++i)
      for (long j = 0; j < B.cols(); ++j) {
        double r = rho.coeff(sb.reduced_index(b, i), sb.reduced_index(b, j));
        EXPECT_NEAR(B(i, j), r, 1e-9 * std::max(1.0, std::abs(r))) << R.str() << " block " << b;
        in_blocks += r * r;
      }
  }
  const double total = rho.squaredNorm();
  EXPECT_NEAR(in_blocks, total, 1e-9 * total);
}

}  // namespace

TEST(Boundary, PhiAndPsiAlgebra) {
  FiniteGroup G = make_symmetric(3);
  const int n = 6;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      MatR lhs = phi_operator(G, b, 4, 0.7, Variant::Slim) * phi_operator(G, a, 4, 0.7, Variant::Slim);
      EXPECT_LT((lhs - phi_operator(G, G.mul(a, b), 4, 0.7, Variant::Slim)).norm(), 1e-12);
    }
  MatR D = delta_projector(G);
  EXPECT_LT((D * D - D).norm(), 1e-12);
  EXPECT_NEAR(D.trace(), n, 1e-12);
  for (int g = 0; g < n; ++g) {
    MatR pg = psi_operator(G, g, 0.0, Variant::Slim);
    EXPECT_LT((D * pg - pg).norm(), 1e-12);
    for (int h = 0; h < n; ++h) {
      MatR prod = pg * psi_operator(G, h, 0.0, Variant::Slim);
      EXPECT_LT((prod - (g == h ? n : 0) * pg).norm(), 1e-12);
    }
  }
  // full weights: phi_1 picks up (d+g)^{1/2}
  const double gh = gamma_beta(0.45, n);
  MatR p1 = phi_operator(G, 0, 2, 0.9, Variant::Full);
  EXPECT_NEAR(p1(0, 0), 1 + gh, 1e-12);
  EXPECT_NEAR(p1(7, 7), gh, 1e-12);
  EXPECT_THROW(phi_operator(G, 0, 5, 1.0, Variant::Slim), std::invalid_argument);
  EXPECT_THROW(phi_operator(G, 0, 1, -1.0, Variant::Full), DomainError);
}

TEST(Boundary, VertexAndPlaquetteScalars) {
  Rng rng(11);
  for (auto G : {make_cyclic(2), make_cyclic(3), make_symmetric(3)}) {
    std::uniform_int_distribution<int> d(0, G.order() - 1);
    for (double beta : {0.0, 0.4, 1.7})
      for (int a = 0; a < G.order(); ++a)
        EXPECT_NEAR(vertex_contraction_scalar(G, a, beta), vertex_contraction_sum(G, a, beta), 1e-12);
    for (int t = 0; t < 40; ++t) {
      std::array<Elem, 4> g{d(rng), d(rng), d(rng), d(rng)};
      double beta = 0.3 * (t % 7);
      double s = plaquette_loop_scalar(G, g, beta);
      EXPECT_NEAR(s, plaquette_loop_trace(G, g, beta), 1e-10 * std::max(1.0, s));
    }
  }
}

TEST(Boundary, Gathering) {
  FiniteGroup G = make_symmetric(3);
  Rng rng(5);
  std::uniform_int_distribution<int> d(0, 5), dm(1, 3);
  std::normal_distribution<double> z;
  for (int t = 0; t < 100; ++t) {
    auto c = [&] { return cplx(z(rng), z(rng)); };
    auto r = gathering_check(G, d(rng), d(rng), c(), c(), c(), c(), dm(rng));
    EXPECT_LT(std::abs(r.brute - r.closed), 1e-9 * std::max(1.0, std::abs(r.closed)));
  }
}

TEST(Boundary, InteriorSums) {
  TorusLattice L(3);
  FiniteGroup Z2 = make_cyclic(2);
  for (auto [a, b] : {std::pair{1, 1}, {1, 2}, {2, 2}}) {
    Region R = Region::rect(0, 0, a, b);
    auto cls = classify_region(L, R);
    EXPECT_EQ(boundary_loop(L, R).size(), static_cast<size_t>(2 * (a + b)));
    const int m = static_cast<int>(cls.boundary_edges.size());
    for (long bits = 0; bits < (1L << m); ++bits) {
      std::map<int, Elem> f;
      for (int i = 0; i < m; ++i) f[cls.boundary_edges[i]] = (bits >> i) & 1;
      double brute = interior_sum_brute(Z2, L, R, f, 0.8);
      EXPECT_NEAR(brute, interior_sum_closed_form(Z2, L, R, f, 0.8), 1e-9 * brute);
    }
  }
  Rng rng(3);
  for (auto G : {make_cyclic(3), make_symmetric(3)}) {
    for (auto R : {Region::rect(1, 0, 1, 1), Region::rect(0, 1, 2, 1), Region::rect(0, 0, 1, 2)}) {
      auto cls = classify_region(L, R);
      for (int t = 0; t < 10; ++t) {
        auto f = random_fhat(G, cls, rng);
        double brute = interior_sum_brute(G, L, R, f, 1.1);
        EXPECT_NEAR(brute, interior_sum_closed_form(G, L, R, f, 1.1), 1e-9 * brute) << R.str();
      }
    }
  }
  auto f = random_fhat(make_cyclic(3), classify_region(L, Region::rect(0, 0, 2, 2)), rng);
  double brute = interior_sum_brute(make_cyclic(3), L, Region::rect(0, 0, 2, 2), f, 0.6);
  EXPECT_NEAR(brute, interior_sum_closed_form(make_cyclic(3), L, Region::rect(0, 0, 2, 2), f, 0.6), 1e-9 * brute);
}

TEST(Boundary, EdgeFormulaMatchesContraction) {
  for (auto G : {make_cyclic(2), make_cyclic(3)})
    for (double beta : {0.0, 0.9})
      for (auto v : {Variant::Slim, Variant::Full})
        EXPECT_LT(edge_boundary_deviation(G, beta, v), 1e-10) << G.label() << " " << beta;
  // the explicit sparse state agrees with the dense Gram matrix
  FiniteGroup G = make_cyclic(2);
  TorusLattice L(3);
  SpMatR V = contract_network_matrix(G, 0.9, network_layout(L, {0}), Variant::Full);
  MatR diff = gram(V) - MatR(boundary_state_edge(G, 0.9, Variant::Full));
  EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Boundary, StructuredStateMatchesGram) {
  TorusLattice L(3);
  expect_blocks_match(make_cyclic(2), L, Region::rect(0, 0, 1, 1), 0.8);
  expect_blocks_match(make_cyclic(2), L, Region::rect(1, 1, 2, 1), 1.3);
  expect_blocks_match(make_cyclic(3), L, Region::rect(0, 0, 1, 1), 0.5);
}

TEST(Boundary, FullStateIsWeightedSlimState) {
  TorusLattice L(3);
  FiniteGroup G = make_cyclic(2);
  auto lay = network_layout(L, classify_region(L, Region::rect(0, 0, 1, 1)).edges);
  auto sb = boundary_state_region(G, lay, 1.2);
  MatR rho = gram(region_map(G, 1.2, lay, Variant::Full));
  EXPECT_LT((boundary_state_full_dense(G, sb) - rho).cwiseAbs().maxCoeff(), 1e-9 * rho.cwiseAbs().maxCoeff());
}

TEST(Boundary, KappaEpsilonOracle) {
  TorusLattice L(4);
  auto cls = classify_region(L, Region::rect(0, 0, 2, 2));
  auto ke = kappa_epsilon(cls, std::log(3.0), 2);
  EXPECT_NEAR(ke.kappa, std::pow(2.0, 5) * std::pow(2.0, 12), 1e-6);
  EXPECT_NEAR(ke.epsilon, 6.0, 1e-12);
  auto k0 = kappa_epsilon(cls, 0.0, 6);
  EXPECT_NEAR(k0.kappa, std::pow(6.0, 12), 1e-3);
  EXPECT_EQ(k0.epsilon, 0.0);
}

TEST(Boundary, LeadingTermAtZeroBeta) {
  TorusLattice L(3);
  // an inner vertex ties all star chains together: exact
  for (auto G : {make_cyclic(2), make_cyclic(3)}) {
    auto c = verify_leading_term(G, L, Region::rect(0, 0, 2, 2), 0.0);
    EXPECT_TRUE(c.exact) << c.measured;
    EXPECT_TRUE(c.pass);
  }
  // a single plaquette keeps the sum over a common star shift: |G| - 1
  for (auto G : {make_cyclic(2), make_cyclic(3), make_symmetric(3)}) {
    auto c = verify_leading_term(G, L, Region::rect(0, 0, 1, 1), 0.0);
    EXPECT_NEAR(c.measured, G.order() - 1.0, 1e-10);
    EXPECT_TRUE(c.vacuous);
    EXPECT_TRUE(c.pass);
  }
}

TEST(Boundary, CosetReductionMatchesDenseSpectrum) {
  TorusLattice L(3);
  for (auto [G, beta] : {std::pair{make_cyclic(2), 0.3}, {make_cyclic(3), 1.4}, {make_symmetric(3), 0.9}}) {
    auto cls = classify_region(L, Region::rect(0, 0, 1, 1));
    auto sb = boundary_state_region(G, network_layout(L, cls.edges), beta);
    const double kappa = kappa_epsilon(cls, beta, G.order()).kappa;
    double dense = 0;
    for (long b = 0; b < sb.num_blocks(); b += G.order() == 6 ? 97 : 1) {
      MatR M = sb.block_matrix(b) / kappa - MatR::Identity(sb.block_dim(), sb.block_dim());
      Eigen::SelfAdjointEigenSolver<MatR> es(M, Eigen::EigenvaluesOnly);
      dense = std::max(dense, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    double reduced = leading_term_deviation(sb, kappa);
    if (G.order() == 6) EXPECT_LE(dense, reduced + 1e-9);
    else EXPECT_NEAR(reduced, dense, 1e-9);
  }
}

TEST(Boundary, LeadingTermCertificates) {
  TorusLattice L(3);
  for (double beta : {0.5, 1.0, 2.0}) {
    auto c = verify_leading_term(make_cyclic(2), L, Region::rect(0, 0, 2, 2), beta);
    EXPECT_TRUE(c.pass) << beta << " " << c.measured << " " << c.bound;
    EXPECT_GT(c.measured, 0.0);
    EXPECT_GE(c.distinct_blocks, 1);
  }
  auto c = verify_leading_term(make_symmetric(3), L, Region::rect(0, 0, 1, 1), 1.0);
  EXPECT_TRUE(c.pass);
  EXPECT_TRUE(c.vacuous);
}

TEST(Boundary, LeadingTermLegs) {
  TorusLattice L(3);
  FiniteGroup G = make_cyclic(2);
  auto lay = network_layout(L, {0});
  MatR S = MatR(leading_term_legs(G, lay));
  EXPECT_LT((S * S - S).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(S.trace(), 16.0, 1e-12);
  // one edge: Delta (x) Delta (x) phi_1 (x) phi_1
  MatR D = delta_projector(G), P = phi_operator(G, 0, 4, 0.0, Variant::Slim);
  EXPECT_LT((S - kron(kron(D, D), kron(P, P))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Boundary, SupportAndSigma) {
  TorusLattice L(3);
  FiniteGroup G = make_cyclic(2);
  const Region R = Region::rect(0, 0, 1, 1);
  auto rep = support_and_sigma(G, L, R, 1.0);
  EXPECT_EQ(rep.method, "dense");
  // rho~ = |G|^4 (I + X^{(x)4}) on each block: half rank
  EXPECT_EQ(rep.rank_rho, 128);
  EXPECT_EQ(rep.rank_leading, 256);
  EXPECT_LT(rep.angle, 1e-6);
  auto cert = verify_leading_term(G, L, R, 1.0);
  EXPECT_NEAR(rep.norm_sigma_inv, cert.measured, 1e-8);
  EXPECT_THROW(support_and_sigma(G, L, R, 0.0), DomainError);

  const Region R2 = Region::rect(0, 0, 2, 2);
  auto rb = support_and_sigma(G, L, R2, 1.0);
  EXPECT_EQ(rb.method, "blocks");
  EXPECT_EQ(rb.rank_rho, 1 << 16);
  auto c2 = verify_leading_term(G, L, R2, 1.0);
  EXPECT_NEAR(rb.norm_sigma_inv, c2.measured, 1e-8);
  EXPECT_TRUE(rb.hypothesis == (c2.epsilon < 1));
}

TEST(Boundary, LeadingTermAbsorbsState) {
  TorusLattice L(3);
  FiniteGroup G = make_cyclic(2);
  auto lay = network_layout(L, classify_region(L, Region::rect(0, 0, 1, 1)).edges);
  SpMatR J = reduced_embedding(G, lay);
  SpMatR Vl = region_map(G, 1.0, lay, Variant::Slim) * SpMatR(J.transpose());
  SpMatR S = leading_term_legs(G, lay);
  SpMatR diff = SpMatR(Vl * S) - Vl;
  double m = 0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMatR::InnerIterator it(diff, k); it; ++it) m = std::max(m, std::abs(it.value()));
  EXPECT_LT(m, 1e-10);
}

TEST(Boundary, StarValuesShareAConjugacyClass) {
  TorusLattice L(3);
  FiniteGroup G = make_symmetric(3);
  auto classes = G.conjugacy_classes();
  std::vector<int> cls_of(6);
  for (size_t c = 0; c < classes.size(); ++c)
    for (int g : classes[c]) cls_of[g] = static_cast<int>(c);
  auto sb = boundary_state_region(G, network_layout(L, classify_region(L, Region::rect(0, 0, 1, 1)).edges), 0.7);
  long terms = 0;
  for (const auto& blk : sb.blocks)
    for (const auto& [A, w] : blk) {
      for (int a : A) EXPECT_EQ(cls_of[a], cls_of[A[0]]);
      ++terms;
    }
  EXPECT_GT(terms, 0);
}

// acceptance.cpp
// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdlab/davies.hpp"
#include "qdlab/errors.hpp"

using namespace qdlab;

namespace {

using clk = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

const FiniteGroup& z2() {
  static const FiniteGroup G = make_cyclic(2);
  return G;
}

DaviesGenerator generator(const QuantumDoubleModel& m, double beta) {
  return DaviesGenerator(m, beta, default_coupling(m.d()), kms_rates(beta));
}

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

// ---------------------------------------------------------------- 1

Outcome criterion1() {
  Outcome o;
  const auto t0 = clk::now();
  TorusLattice L(2);
  QuantumDoubleModel m(z2(), L);
  auto lay = network_layout(L, m.patch().edges);
  const MatC H = MatC(full_hamiltonian(m).H);
  for (double beta : {0.5, 1.0, 2.0}) {
    SparseTensor T = contract_network(z2(), beta, lay, Variant::Full);
    VecC v = VecC::Zero(1 << 16);
    for (size_t t = 0; t < T.nnz(); ++t) v(static_cast<long>(T.keys[t])) = T.vals[t];
    const MatC ref = matrix_exp_hermitian(H, -beta / 2);
    const double rel = operator_norm(devectorize(v, 256) - ref) / operator_norm(ref);
    o.check(rel <= 1e-10, fmt("beta %.1f: ||contract - e^{-beta H/2}|| / ||e^{-beta H/2}|| = %.3e <= 1e-10", beta, rel));
  }
  const double s = seconds_since(t0);
  o.check(s <= 60, fmt("runtime %.1f s <= 60 s", s));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome criterion2() {
  Outcome o;
  for (auto G : {make_cyclic(2), make_cyclic(3), make_symmetric(3)})
    for (double beta : {0.0, 1.0, 3.0})
      for (auto v : {Variant::Slim, Variant::Full}) {
        const double d = edge_boundary_deviation(G, beta, v);
        o.check(d <= 1e-12, G.label() + fmt(" beta %.0f ", beta) + (v == Variant::Full ? "full" : "slim") +
                                fmt(": max entry deviation %.3e <= 1e-12", d));
      }
  return o;
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  Outcome o;
  TorusLattice L(3);
  std::mt19937_64 rng(2024);
  const double beta = 0.8;
  for (auto [a, b] : {std::pair{1, 1}, {1, 2}, {2, 2}}) {
    const Region R = Region::rect(0, 0, a, b);
    auto cls = classify_region(L, R);
    const int m = static_cast<int>(cls.boundary_edges.size());
    double worst = 0;
    for (long bits = 0; bits < (1L << m); ++bits) {
      std::map<int, Elem> f;
      for (int i = 0; i < m; ++i) f[cls.boundary_edges[i]] = (bits >> i) & 1;
      const double brute = interior_sum_brute(z2(), L, R, f, beta);
      const double closed = interior_sum_closed_form(z2(), L, R, f, beta);
      worst = std::max(worst, std::abs(brute - closed) / std::abs(closed));
    }
    o.check(worst <= 1e-10, "Z2 " + R.str() + fmt(", all %.0f assignments: relative error %.3e <= 1e-10", double(1L << m), worst));
    FiniteGroup Z3 = make_cyclic(3);
    std::uniform_int_distribution<int> d(0, 2);
    worst = 0;
    for (int t = 0; t < 200; ++t) {
      std::map<int, Elem> f;
      for (int e : cls.boundary_edges) f[e] = d(rng);
      const double brute = interior_sum_brute(Z3, L, R, f, beta);
      const double closed = interior_sum_closed_form(Z3, L, R, f, beta);
      worst = std::max(worst, std::abs(brute - closed) / std::abs(closed));
    }
    o.check(worst <= 1e-10, "Z3 " + R.str() + fmt(", 200 random assignments: relative error %.3e <= 1e-10", worst));
  }
  for (auto G : {make_cyclic(2), make_cyclic(3), make_symmetric(3)}) {
    std::uniform_int_distribution<int> d(0, G.order() - 1), dm(1, 3);
    std::normal_distribution<double> z;
    auto c = [&] { return cplx(z(rng), z(rng)); };
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
      auto r = gathering_check(G, d(rng), d(rng), c(), c(), c(), c(), dm(rng));
      worst = std::max(worst, std::abs(r.brute - r.closed) / std::max(1.0, std::abs(r.closed)));
    }
    o.check(worst <= 1e-10, G.label() + fmt(" gathering, 100 random tuples: relative error %.3e <= 1e-10", worst));
  }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  Outcome o;
  const auto t0 = clk::now();
  TorusLattice L(4);
  for (const Region& R : {Region::rect(0, 0, 2, 2), Region::rect(0, 0, 2, 3)}) {
    for (double beta : {1.0, 2.0, 4.0}) {
      auto c = verify_leading_term(z2(), L, R, beta);
      o.check(c.measured <= c.epsilon,
              R.str() + fmt(" beta %.0f: ||rho/kappa - S|| = %.4e <= eps_R = %.4e", beta, c.measured, c.epsilon));
    }
    auto c0 = verify_leading_term(z2(), L, R, 0.0);
    o.check(c0.measured <= 1e-12, R.str() + fmt(" beta 0: ||rho/kappa - S|| = %.3e <= 1e-12", c0.measured));
  }
  const double s = seconds_since(t0);
  o.check(s <= 300, fmt("runtime %.1f s <= 300 s", s));
  return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  Outcome o;
  TorusLattice L(3);
  for (const Region& R : {Region::rect(0, 0, 1, 1), Region::rect(0, 0, 2, 2)}) {
    auto s = support_and_sigma(z2(), L, R, 4.0);
    o.check(s.rank_rho == s.rank_leading,
            R.str() + fmt(": rank rho = %.0f, rank S = %.0f", s.rank_rho, s.rank_leading) + " (" + s.method + ")");
    o.check(s.norm_sigma_inv < s.epsilon,
            R.str() + fmt(": ||rho^1/2 sigma^-1 rho^1/2 - J|| = %.4e < eps_R = %.4e", s.norm_sigma_inv, s.epsilon));
  }
  return o;
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
  Outcome o;
  TorusLattice L(4);
  const Region R = Region::rect(0, 0, 3, 1);
  const Split sp = split_region(L, R, SplitPattern::Cols, {1, 1});
  EigOptions opt;
  opt.tol = 1e-8;
  for (double beta : {0.5, 1.0, 2.0, 4.0}) {
    auto m = martingale_measurement(z2(), L, R, sp, beta, opt);
    o.check(m.measured <= 1 + 1e-12, fmt("beta %.1f: ||P_AB P_BC - P_ABC|| = %.6f <= 1", beta, m.measured));
    if (m.eps_b < 0.5)
      o.check(m.measured <= 16 * m.eps_b, fmt("beta %.1f: measured <= 16 eps_B = %.4e", beta, 16 * m.eps_b));
    else
      o.lines.push_back(fmt("     beta %.1f: eps_B = %.3f >= 1/2, the 16 eps_B bound does not apply", beta, m.eps_b));
    o.check(m.lemma_min >= -1e-10, fmt("beta %.1f: overlap lemma lambda_min = %.3e >= -1e-10", beta, m.lemma_min));
  }
  Rng rng(7);
  double worst = 1;
  for (int t = 0; t < 50; ++t) {
    const int w = 3 + t % 5, x = 4 + t % 3, y = 5 + t % 4;
    MatC Q = random_isometry(40, w + x + y, rng);
    MatC U(40, w + x), V(40, w + y);
    U << Q.leftCols(w), Q.middleCols(w, x);
    MatC Yb = Q.rightCols(y);
    Yb.col(0) = (Yb.col(0) + 0.7 * Q.col(w)).normalized();
    V << Q.leftCols(w), Yb;
    MatC Ub = column_basis(U), Vb = column_basis(V), W = Q.leftCols(w);
    auto r = overlap_constant(Ub * Ub.adjoint(), Vb * Vb.adjoint(), W * W.adjoint());
    worst = std::min(worst, r.lemma_min);
  }
  o.check(worst >= -1e-10, fmt("50 random triples in dim 40: worst lemma lambda_min = %.3e >= -1e-10", worst));
  return o;
}

// ---------------------------------------------------------------- 7

void davies_structure(Outcome& o, const QuantumDoubleModel& m, double beta, const std::string& tag, bool dense) {
  DaviesGenerator g = generator(m, beta);
  const long D = g.dim();
  Rng rng(17);
  double asym = 0;
  for (int t = 0; t < 5; ++t) {
    MatC A = random_matrix(D, D, rng), B = random_matrix(D, D, rng);
    const double scale = std::sqrt(gns_inner(A, A, g.rho()).real() * gns_inner(B, B, g.rho()).real());
    asym = std::max(asym, std::abs(gns_inner(A, g.apply(B), g.rho()) - gns_inner(g.apply(A), B, g.rho())) / scale);
  }
  o.check(asym <= 1e-10, tag + fmt(": detailed balance asymmetry %.3e <= 1e-10", asym));

  double lmin = 0;
  if (dense) {
    lmin = hermitian_spectrum(gns_symmetrized_generator(g, m.patch().edges)).values(0);
  } else {
    EigOptions opt;
    opt.tol = 1e-10;
    lmin = lowest_eigs(g.h_tilde(), opt).values[0];
  }
  o.check(lmin >= -1e-10, tag + fmt(": lambda_min(-L) = %.3e >= -1e-10", lmin) + (dense ? " (dense)" : " (matrix-free)"));

  double sum_dev = 0, dag_dev = 0;
  auto c = default_coupling(m.d());
  for (const auto& j : g.jumps()) {
    MatC S = MatC(embed_operator(c.ops[j.alpha], m.d(), {j.edge}, m.patch().edges));
    MatC sum = MatC::Zero(D, D);
    for (int w = -kOmegaMax; w <= kOmegaMax; ++w) {
      sum += MatC(j.at(w));
      dag_dev = std::max(dag_dev, (MatC(j.at(w)).adjoint() - MatC(j.at(-w))).cwiseAbs().maxCoeff());
    }
    sum_dev = std::max(sum_dev, (sum - S).cwiseAbs().maxCoeff());
  }
  o.check(sum_dev <= 1e-13, tag + fmt(": max |sum_w S(w) - S| = %.2e", sum_dev));
  o.check(dag_dev <= 1e-13, tag + fmt(": max |S(w)^dag - S(-w)| = %.2e", dag_dev));

  const auto& E = m.patch().edges;
  if (dense) {
    for (unsigned mask = 0; mask < (1u << E.size()); ++mask) {
      std::vector<int> X;
      for (size_t i = 0; i < E.size(); ++i)
        if (mask >> i & 1) X.push_back(E[i]);
      auto k = kernel_check(g, X);
      o.check(k.pass, tag + fmt(": kernel of H~_X, |X| = %.0f: measured %.0f, predicted %.0f", double(X.size()),
                                double(k.measured), double(k.predicted)));
    }
  } else {
    auto k = kernel_check(g, E);
    o.check(k.pass, tag + fmt(": kernel of H~, X = E: measured %.0f, predicted %.0f, angle %.1e", double(k.measured),
                              double(k.predicted), k.angle) + " (" + k.method + ")");
  }
}

Outcome criterion7() {
  Outcome o;
  for (double beta : {0.5, 1.0}) {
    davies_structure(o, three_edge_patch(), beta, fmt("3-edge patch beta %.1f", beta), true);
    davies_structure(o, QuantumDoubleModel(z2(), TorusLattice(2)), beta, fmt("torus N=2 beta %.1f", beta), false);
  }
  return o;
}

// ---------------------------------------------------------------- 8

Outcome criterion8() {
  Outcome o;
  for (auto [model, name] : {std::pair{three_edge_patch(), "3-edge patch"}, {plaquette_patch(), "plaquette patch"}})
    for (double beta : {0.5, 1.0, 2.0}) {
      DaviesGenerator g = generator(model, beta);
      EigOptions opt;
      opt.tol = 1e-10;
      opt.dense_threshold = 0;
      auto rep = davies_gap(g, opt);
      Spectrum sp = hermitian_spectrum(gns_symmetrized_generator(g, model.patch().edges));
      double dense_gap = 0;
      for (long i = 0; i < sp.values.size(); ++i)
        if (sp.values(i) > 1e-9) {
          dense_gap = sp.values(i);
          break;
        }
      const double diff = std::abs(rep.gap - dense_gap);
      o.check(diff <= 1e-8, std::string(name) + fmt(" beta %.1f: matrix-free %.10f vs dense %.10f", beta, rep.gap,
                                                      dense_gap) + " (" + rep.method + ")");
    }
  return o;
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
  Outcome o;
  TorusLattice L(2);
  QuantumDoubleModel m(z2(), L);
  for (double beta : {0.5, 1.0}) {
    DaviesGenerator g = generator(m, beta);
    for (Edge e : {Edge{Orient::H, 0, 0}, Edge{Orient::V, 0, 0}}) {
      auto r = local_gap_constants(g, L.edge_index(e));
      o.check(r.lambda_min >= -1e-9,
              fmt("torus N=2 beta %.1f, ", beta) + (e.o == Orient::H ? "H" : "V") +
                  fmt(" edge: lambda_min(H~_e - b Pi_e^perp) = %.3e, b = %.4e", r.lambda_min, r.bound) +
                  fmt(" (C1 %.0f, C2 %.0f)", r.c1, r.c2));
    }
  }
  return o;
}

// ---------------------------------------------------------------- 10

Outcome criterion10() {
  Outcome o;
  const auto t0 = clk::now();
  auto r = gap_chain(z2(), TorusLattice(2), 1.0, 2, default_coupling(2), kms_rates(1.0));
  for (const auto& q : r.inequalities)
    o.check(q.pass, q.name + fmt(": lhs %.4e, rhs %.4e", q.lhs, q.rhs));
  o.check(r.final_bound > 0, fmt("final bound %.4e > 0", r.final_bound));
  o.check(r.final_bound <= r.gap_l, fmt("final bound <= gap(L) = %.6f (dim %.0f)", r.gap_l, double(r.dim)));
  const double s = seconds_since(t0);
  o.check(s <= 900, fmt("runtime %.1f s <= 900 s", s));
  return o;
}

// ---------------------------------------------------------------- 11

Outcome criterion11() {
  Outcome o;
  for (double beta : {0.5, 1.0, 2.0, 4.0}) {
    const int r = n_beta(beta, 2);
    auto rb = recursion_bound(r, [&](double l) { return delta_function(l, beta, 2); });
    o.check(rb.product > 0 && rb.tail < 1e-12,
            fmt("beta %.1f: product %.6e > 0, tail %.2e < 1e-12", beta, rb.product, rb.tail) +
                " (r " + std::to_string(r) + ", " + std::to_string(rb.terms) + " terms)");
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"PEPO correctness", criterion1},
      {"edge boundary identity", criterion2},
      {"plaquette constants", criterion3},
      {"leading term", criterion4},
      {"support projector", criterion5},
      {"martingale and overlap", criterion6},
      {"Davies structure", criterion7},
      {"gap(L) = gap(H~)", criterion8},
      {"local gap constant", criterion9},
      {"end-to-end chain", criterion10},
      {"recursion bound", criterion11},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = clk::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& l : o.lines) std::cout << "    " << l << '\n';
    std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL")
              << fmt("  [%.1f s]", seconds_since(t0)) << std::endl;
    failures += !o.pass;
  }
  std::cout << (failures == 0 ? "all criteria PASS" : std::to_string(failures) + " criteria FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}

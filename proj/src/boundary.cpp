// boundary.cpp
#include "qdlab/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qdlab/errors.hpp"

namespace qdlab {

namespace {

double gamma_half(const FiniteGroup& G, double beta) {
  if (beta < 0) throw DomainError("beta must be non-negative");
  return gamma_beta(beta / 2, G.order());
}

double delta1(const FiniteGroup& G, Elem g) { return g == G.identity() ? 1.0 : 0.0; }

double chi_tilde(const FiniteGroup& G, Elem g) { return regular_character(G, g) - 1.0; }

// vec(L^g) or vec(W^2 L^g), index r*n + c
VecR psi_vector(const FiniteGroup& G, Elem g, double beta, Variant v) {
  const int n = G.order();
  MatR M = left_regular_matrix(G, g);
  if (v == Variant::Full) {
    MatR W = weight_plaq(G, beta).op;
    M = W * W * M;
  }
  VecR u(n * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) u(r * n + c) = M(r, c);
  return u;
}

// Shared data of the closed edge formula.
struct EdgeFormula {
  const FiniteGroup& G;
  int n;
  std::vector<VecR> u;            // psi vectors per g
  std::vector<double> star_w;  // (d_{h,1} + gamma_{b/2})^{1/4}, or 1
  EdgeFormula(const FiniteGroup& G_, double beta, Variant v) : G(G_), n(G_.order()) {
    double gh = gamma_half(G, beta);
    for (int g = 0; g < n; ++g) {
      u.push_back(psi_vector(G, g, beta, v));
      star_w.push_back(v == Variant::Full ? std::pow(delta1(G, g) + gh, 0.25) : 1.0);
    }
  }
  void column(long col, std::vector<std::pair<long, double>>& out) const {
    out.clear();
    const long n2 = static_cast<long>(n) * n;
    long r = col;
    int s4 = r % n; r /= n;
    int s3 = r % n; r /= n;
    int s2 = r % n; r /= n;
    int s1 = r % n; r /= n;
    long i2 = r % n2; r /= n2;
    long i1 = r;
    if (s1 != s2 || s3 != s4) return;
    const int h = s1, k = s3;
    for (int g = 0; g < n; ++g) {
      const VecR& up = u[G.inv(g)];
      const VecR& lo = u[g];
      double pc = up(i1) * lo(i2);
      if (pc == 0.0) continue;
      for (int a = 0; a < n; ++a) {
        int b = G.mul(G.mul(G.inv(g), a), g);
        int ha = G.mul(h, a), kb = G.mul(k, b);
        double w = pc * star_w[h] * star_w[ha] * star_w[k] * star_w[kb];
        if (w == 0.0) continue;
        long star = (static_cast<long>(ha) * n + ha) * n2 + (static_cast<long>(kb) * n + kb);
        for (long j1 = 0; j1 < n2; ++j1) {
          if (up(j1) == 0.0) continue;
          for (long j2 = 0; j2 < n2; ++j2) {
            if (lo(j2) == 0.0) continue;
            out.push_back({((j1 * n2 + j2) * n2 * n2) + star, w * up(j1) * lo(j2)});
          }
        }
      }
    }
  }
};

}  // namespace

// ---------------------------------------------------------------- local pieces

MatR phi_operator(const FiniteGroup& G, Elem a, int m, double beta, Variant v) {
  if (m < 1 || m > 4) throw std::invalid_argument("phi_operator: exponent must be 1..4");
  G.check_index(a);
  const int n = G.order();
  const double gh = gamma_half(G, beta);
  MatR P = MatR::Zero(n * n, n * n);
  for (int h = 0; h < n; ++h) {
    int ha = G.mul(h, a);
    double w = 1.0;
    if (v == Variant::Full) w = std::pow(delta1(G, h) + gh, m / 4.0) * std::pow(delta1(G, ha) + gh, m / 4.0);
    P(ha * n + ha, h * n + h) = w;
  }
  return P;
}

MatR psi_operator(const FiniteGroup& G, Elem g, double beta, Variant v) {
  G.check_index(g);
  VecR u = psi_vector(G, g, beta, v);
  return u * u.transpose();
}

MatR delta_projector(const FiniteGroup& G) {
  const int n = G.order();
  MatR D = MatR::Zero(n * n, n * n);
  for (int g = 0; g < n; ++g) D += psi_operator(G, g, 0.0, Variant::Slim);
  return D / n;
}

double vertex_contraction_scalar(const FiniteGroup& G, Elem a, double beta) {
  G.check_index(a);
  if (beta < 0) throw DomainError("beta must be non-negative");
  return delta1(G, a) + gamma_beta(beta, G.order());
}

double vertex_contraction_sum(const FiniteGroup& G, Elem a, double beta) {
  const double gh = gamma_half(G, beta);
  double s = 0;
  for (int h = 0; h < G.order(); ++h) s += (delta1(G, h) + gh) * (delta1(G, G.mul(h, a)) + gh);
  return s;
}

double plaquette_loop_scalar(const FiniteGroup& G, const std::array<Elem, 4>& g, double beta) {
  if (beta < 0) throw DomainError("beta must be non-negative");
  Elem hol = G.mul(G.mul(g[0], g[1]), G.mul(G.inv(g[2]), G.inv(g[3])));
  return 1.0 + gamma_beta(beta, G.order()) * regular_character(G, hol);
}

double plaquette_loop_trace(const FiniteGroup& G, const std::array<Elem, 4>& g, double beta) {
  const double gh = gamma_half(G, beta);
  auto P = trivial_projector(G);
  MatR Lh = left_regular_matrix(G, g[0]) * left_regular_matrix(G, g[1]) * left_regular_matrix(G, G.inv(g[2])) *
            left_regular_matrix(G, G.inv(g[3]));
  const MatR* Pn[2] = {&P.P0, &P.P1};
  double s = 0;
  for (int m = 0; m < 2; ++m)
    for (int k = 0; k < 2; ++k) s += (m + gh) * (k + gh) * (*Pn[m] * Lh).trace() * (*Pn[k] * Lh).trace();
  return s;
}

GatheringValues gathering_check(const FiniteGroup& G, Elem u, Elem v, cplx a0, cplx b0, cplx a1, cplx b1, int m) {
  if (m < 1) throw std::invalid_argument("gathering_check: m must be positive");
  const int n = G.order();
  if (std::pow(double(n), m) > 1e7) throw FeasibilityError("gathering_check: |G|^m too large", std::pow(double(n), m));
  long total = 1;
  for (int i = 0; i < m; ++i) total *= n;
  cplx brute = 0;
  for (long t = 0; t < total; ++t) {
    long r = t;
    Elem prod = G.identity();
    for (int i = 0; i < m; ++i) {
      prod = G.mul(prod, static_cast<Elem>(r % n));
      r /= n;
    }
    brute += (a0 + b0 * chi_tilde(G, G.mul(u, prod))) * (a1 + b1 * chi_tilde(G, G.mul(G.inv(prod), v)));
  }
  cplx closed = std::pow(double(n), m) * (a0 * a1 + b0 * b1 * chi_tilde(G, G.mul(u, v)));
  return {brute, closed};
}

std::vector<PlaqLeg> boundary_loop(const TorusLattice& L, const Region& R) {
  if (R.kind != RegionKind::Rect) throw GeometryError("boundary_loop: proper rectangles only");
  validate_region(L, R);
  std::vector<PlaqLeg> out;
  for (int i = R.a - 1; i >= 0; --i) out.push_back({L.edge_index({Orient::H, L.wrap(R.x0 + i), L.wrap(R.y0 + R.b)}), 1});
  for (int j = R.b - 1; j >= 0; --j) out.push_back({L.edge_index({Orient::V, L.wrap(R.x0), L.wrap(R.y0 + j)}), 1});
  for (int i = 0; i < R.a; ++i) out.push_back({L.edge_index({Orient::H, L.wrap(R.x0 + i), L.wrap(R.y0)}), -1});
  for (int j = 0; j < R.b; ++j) out.push_back({L.edge_index({Orient::V, L.wrap(R.x0 + R.a), L.wrap(R.y0 + j)}), -1});
  return out;
}

double interior_sum_brute(const FiniteGroup& G, const TorusLattice& L, const Region& R,
                          const std::map<int, Elem>& fhat, double beta) {
  auto cls = classify_region(L, R);
  const int n = G.order();
  for (int e : cls.boundary_edges)
    if (!fhat.count(e)) throw std::invalid_argument("interior_sum_brute: missing boundary edge " + std::to_string(e));
  const double gb = gamma_beta(beta, n);
  std::map<int, Elem> g = fhat;
  const int m = static_cast<int>(cls.inner_edges.size());
  if (std::pow(double(n), m) > 1e8) throw FeasibilityError("interior_sum_brute: too many interior assignments", 0);
  long total = 1;
  for (int i = 0; i < m; ++i) total *= n;
  double s = 0;
  for (long t = 0; t < total; ++t) {
    long r = t;
    for (int i = 0; i < m; ++i) {
      g[cls.inner_edges[i]] = static_cast<Elem>(r % n);
      r /= n;
    }
    double c = 1;
    for (int p : cls.plaquettes) {
      Elem hol = G.identity();
      for (auto leg : L.plaquette(p)) hol = G.mul(hol, leg.sign > 0 ? g[leg.edge] : G.inv(g[leg.edge]));
      c *= 1 + gb * regular_character(G, hol);
    }
    s += c;
  }
  return s;
}

double interior_sum_closed_form(const FiniteGroup& G, const TorusLattice& L, const Region& R,
                                const std::map<int, Elem>& fhat, double beta) {
  auto cls = classify_region(L, R);
  const int n = G.order();
  const double gb = gamma_beta(beta, n);
  Elem hol = G.identity();
  for (auto leg : boundary_loop(L, R)) {
    auto it = fhat.find(leg.edge);
    if (it == fhat.end()) throw std::invalid_argument("interior_sum_closed_form: missing boundary edge");
    hol = G.mul(hol, leg.sign > 0 ? it->second : G.inv(it->second));
  }
  return std::pow(double(n), cls.inner_edges.size()) *
         (std::pow(1 + gb, cls.n_plaquettes) + std::pow(gb, cls.n_plaquettes) * chi_tilde(G, hol));
}

// ---------------------------------------------------------------- edge boundary

void edge_boundary_column(const FiniteGroup& G, double beta, Variant v, long col,
                          std::vector<std::pair<long, double>>& out) {
  EdgeFormula f(G, beta, v);
  f.column(col, out);
}

std::vector<long> edge_boundary_support(const FiniteGroup& G) {
  const long n = G.order(), n2 = n * n;
  std::vector<long> cols;
  for (long i1 = 0; i1 < n2; ++i1)
    for (long i2 = 0; i2 < n2; ++i2)
      for (long h = 0; h < n; ++h)
        for (long k = 0; k < n; ++k) cols.push_back((i1 * n2 + i2) * n2 * n2 + (h * n + h) * n2 + (k * n + k));
  return cols;
}

SpMatR boundary_state_edge(const FiniteGroup& G, double beta, Variant v, long max_nnz) {
  const long n = G.order();
  const double per_col = static_cast<double>(n * n) * n * n * n * n;
  const double est = per_col * std::pow(double(n), 6);
  if (est > static_cast<double>(max_nnz))
    throw FeasibilityError("boundary_state_edge: about " + std::to_string(est) + " nonzeros", est * 16.0);
  EdgeFormula f(G, beta, v);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<std::pair<long, double>> col;
  for (long c : edge_boundary_support(G)) {
    f.column(c, col);
    for (auto [r, w] : col) trip.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
  }
  const long D = n * n * n * n * n * n * n * n;
  SpMatR rho(static_cast<int>(D), static_cast<int>(D));
  rho.setFromTriplets(trip.begin(), trip.end());
  return rho;
}

double gram_max_deviation(const SpMatR& V, std::vector<long> cols,
                          const std::function<void(long, std::vector<std::pair<long, double>>&)>& formula) {
  Eigen::SparseMatrix<double, Eigen::ColMajor> Vc(V);
  for (int c = 0; c < Vc.outerSize(); ++c)
    if (Vc.col(c).nonZeros() > 0) cols.push_back(c);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  std::vector<double> acc(V.cols(), 0.0);
  std::vector<char> touched(V.cols(), 0);
  std::vector<long> list;
  std::vector<std::pair<long, double>> fcol;
  double worst = 0;
  for (long c : cols) {
    if (c < 0 || c >= V.cols()) throw ContractError("gram_max_deviation: column out of range");
    list.clear();
    for (Eigen::SparseMatrix<double, Eigen::ColMajor>::InnerIterator it(Vc, static_cast<int>(c)); it; ++it) {
      const double w = it.value();
      for (SpMatR::InnerIterator jt(V, static_cast<int>(it.row())); jt; ++jt) {
        long j = jt.col();
        if (!touched[j]) {
          touched[j] = 1;
          list.push_back(j);
        }
        acc[j] += w * jt.value();
      }
    }
    formula(c, fcol);
    for (auto [j, w] : fcol) {
      if (j < 0 || j >= V.cols()) throw ContractError("gram_max_deviation: formula row out of range");
      if (!touched[j]) {
        touched[j] = 1;
        list.push_back(j);
      }
      acc[j] -= w;
    }
    for (long j : list) {
      worst = std::max(worst, std::abs(acc[j]));
      acc[j] = 0.0;
      touched[j] = 0;
    }
  }
  return worst;
}

double edge_boundary_deviation(const FiniteGroup& G, double beta, Variant v) {
  TorusLattice L(3);
  auto lay = network_layout(L, {0});
  SpMatR V = contract_network_matrix(G, beta, lay, v);
  EdgeFormula f(G, beta, v);
  return gram_max_deviation(V, edge_boundary_support(G),
                            [&](long c, std::vector<std::pair<long, double>>& out) { f.column(c, out); });
}

// ---------------------------------------------------------------- regions

KappaEpsilon kappa_epsilon(const RegionClassification& c, double beta, int order) {
  if (beta < 0) throw DomainError("beta must be non-negative");
  const double gb = gamma_beta(beta, order);
  const double nv = static_cast<double>(c.inner_vertices.size());
  KappaEpsilon ke;
  ke.kappa = std::pow(1 + gb, nv + c.n_plaquettes) * std::pow(double(order), c.edges.size());
  ke.epsilon = 3.0 * order * order * std::pow(gb / (1 + gb), nv);
  return ke;
}

long StructuredBoundary::block_dim() const {
  long d = 1;
  for (size_t i = 0; i < phi_pos.size(); ++i) d *= order;
  return d;
}

long StructuredBoundary::reduced_index(long b, long s) const {
  const int C = lay.num_chains();
  std::vector<int> digit(C, 0);
  for (int i = static_cast<int>(psi_pos.size()) - 1; i >= 0; --i) {
    digit[psi_pos[i]] = static_cast<int>(b % order);
    b /= order;
  }
  for (int i = static_cast<int>(phi_pos.size()) - 1; i >= 0; --i) {
    digit[phi_pos[i]] = static_cast<int>(s % order);
    s /= order;
  }
  long idx = 0;
  for (int c = 0; c < C; ++c) idx = idx * order + digit[c];
  return idx;
}

namespace {

// s -> s.A on the star-chain coordinates
long shift_index(const FiniteGroup& G, long s, const std::vector<int>& A) {
  const int n = G.order();
  const int k = static_cast<int>(A.size());
  std::vector<int> d(k);
  for (int i = k - 1; i >= 0; --i) {
    d[i] = static_cast<int>(s % n);
    s /= n;
  }
  long t = 0;
  for (int i = 0; i < k; ++i) t = t * n + G.mul(d[i], A[i]);
  return t;
}

}  // namespace

MatR StructuredBoundary::block_matrix(long b) const {
  const long D = block_dim();
  if (D > 8192) throw FeasibilityError("block_matrix: block dimension " + std::to_string(D), 8.0 * D * D);
  if (b < 0 || b >= num_blocks()) throw std::invalid_argument("block_matrix: block out of range");
  MatR M = MatR::Zero(D, D);
  for (const auto& [A, w] : blocks[b])
    for (long s = 0; s < D; ++s) M(s, shift_index(group, s, A)) += w;
  return M;
}

LinearMap StructuredBoundary::block_map(long b) const {
  if (b < 0 || b >= num_blocks()) throw std::invalid_argument("block_map: block out of range");
  const long D = block_dim();
  std::vector<std::pair<std::vector<long>, double>> terms;
  for (const auto& [A, w] : blocks[b]) {
    std::vector<long> dst(D);
    for (long s = 0; s < D; ++s) dst[s] = shift_index(group, s, A);
    terms.push_back({std::move(dst), w});
  }
  LinearMap m;
  m.dim = D;
  m.apply = [terms = std::move(terms)](const VecC& x, VecC& y) {
    for (const auto& [dst, w] : terms)
      for (size_t s = 0; s < dst.size(); ++s) y(s) += w * x(dst[s]);
  };
  return m;
}

MatR StructuredBoundary::dense() const {
  const long D = dim();
  if (D > 4096) throw FeasibilityError("StructuredBoundary::dense: dimension " + std::to_string(D), 8.0 * D * D);
  MatR M = MatR::Zero(D, D);
  for (long b = 0; b < num_blocks(); ++b) {
    MatR B = block_matrix(b);
    for (long i = 0; i < B.rows(); ++i)
      for (long j = 0; j < B.cols(); ++j)
        if (B(i, j) != 0.0) M(reduced_index(b, i), reduced_index(b, j)) = B(i, j);
  }
  return M;
}

StructuredBoundary boundary_state_region(const FiniteGroup& G, const NetworkLayout& lay, double beta) {
  if (beta < 0) throw DomainError("beta must be non-negative");
  const int n = G.order();
  const int E = static_cast<int>(lay.edges.size());
  StructuredBoundary sb;
  sb.lay = lay;
  sb.beta = beta;
  sb.order = n;
  sb.group = G;
  for (int c = 0; c < lay.num_chains(); ++c) (lay.objects[lay.chains[c]].star ? sb.phi_pos : sb.psi_pos).push_back(c);
  const double nblocks = std::pow(double(n), sb.psi_pos.size());
  if (std::pow(double(n), E) > 5e7 || nblocks * sb.block_dim() > 1e8)
    throw FeasibilityError("boundary_state_region: region too large", std::pow(double(n), E) * 64.0);
  sb.blocks.resize(static_cast<size_t>(nblocks));
  const double gb = gamma_beta(beta, n);

  // star objects, the plaquette rings, and the star graph through the edges
  const int O = static_cast<int>(lay.objects.size());
  std::vector<int> star_id(O, -1), stars;
  std::vector<int> plaq_rings;
  for (int o = 0; o < O; ++o) {
    if (lay.objects[o].star) {
      star_id[o] = static_cast<int>(stars.size());
      stars.push_back(o);
    } else if (lay.objects[o].closed) {
      plaq_rings.push_back(o);
    }
  }
  const int S = static_cast<int>(stars.size());
  std::map<int, int> local;
  for (int i = 0; i < E; ++i) local[lay.edges[i]] = i;
  std::vector<std::vector<int>> adj(S);  // local edge ids
  for (int i = 0; i < E; ++i) {
    int t = star_id[lay.slot_object[i][2]], h = star_id[lay.slot_object[i][3]];
    adj[t].push_back(i);
    if (h != t) adj[h].push_back(i);
  }
  // BFS trees: order of visit, parent edge, and edges left for a check
  std::vector<std::vector<int>> comp_order;
  std::vector<int> parent_edge(S, -1), tree_edge(E, 0);
  std::vector<char> seen(S, 0);
  for (int r = 0; r < S; ++r) {
    if (seen[r]) continue;
    std::vector<int> order{r};
    seen[r] = 1;
    for (size_t q = 0; q < order.size(); ++q) {
      int u = order[q];
      for (int i : adj[u]) {
        int t = star_id[lay.slot_object[i][2]], h = star_id[lay.slot_object[i][3]];
        int w = t == u ? h : t;
        if (seen[w]) continue;
        seen[w] = 1;
        parent_edge[w] = i;
        tree_edge[i] = 1;
        order.push_back(w);
      }
    }
    comp_order.push_back(order);
  }
  std::vector<int> closed_stars, phi_star(sb.phi_pos.size());
  for (int s = 0; s < S; ++s)
    if (lay.objects[stars[s]].closed) closed_stars.push_back(s);
  for (size_t k = 0; k < sb.phi_pos.size(); ++k) phi_star[k] = star_id[lay.chains[sb.phi_pos[k]]];
  std::vector<std::vector<int>> obj_local(O);
  for (int o = 0; o < O; ++o)
    for (int e : lay.objects[o].edges) obj_local[o].push_back(local[e]);

  std::vector<int> g(E, 0), a(S, 0);
  auto product = [&](int o) {
    const auto& ob = lay.objects[o];
    Elem p = G.identity();
    for (size_t j = 0; j < ob.edges.size(); ++j) {
      int ge = g[obj_local[o][j]];
      p = G.mul(p, ob.signs[j] > 0 ? ge : G.inv(ge));
    }
    return p;
  };
  const long ng = static_cast<long>(std::llround(std::pow(double(n), E)));
  const double psi_factor = std::pow(double(n), sb.psi_pos.size());
  std::vector<std::vector<std::vector<int>>> comp_sols(comp_order.size());
  for (long it = 0; it < ng; ++it) {
    long r = it;
    for (int i = E - 1; i >= 0; --i) {
      g[i] = static_cast<int>(r % n);
      r /= n;
    }
    double coef = psi_factor;
    for (int o : plaq_rings) coef *= 1 + gb * regular_character(G, product(o));
    if (coef == 0.0) continue;
    long b = 0;
    for (int c : sb.psi_pos) b = b * n + product(lay.chains[c]);
    // compatible a per component
    for (size_t k = 0; k < comp_order.size(); ++k) {
      const auto& order = comp_order[k];
      comp_sols[k].clear();
      for (int root = 0; root < n; ++root) {
        a[order[0]] = root;
        for (size_t q = 1; q < order.size(); ++q) {
          int w = order[q], i = parent_edge[w];
          int t = star_id[lay.slot_object[i][2]];
          a[w] = t == w ? G.mul(G.mul(g[i], a[star_id[lay.slot_object[i][3]]]), G.inv(g[i]))
                        : G.mul(G.mul(G.inv(g[i]), a[t]), g[i]);
        }
        bool ok = true;
        for (int w : order) {
          for (int i : adj[w]) {
            if (tree_edge[i]) continue;
            int t = star_id[lay.slot_object[i][2]], h = star_id[lay.slot_object[i][3]];
            if (a[h] != G.mul(G.mul(G.inv(g[i]), a[t]), g[i])) ok = false;
          }
        }
        if (!ok) continue;
        std::vector<int> sol;
        for (int w : order) sol.push_back(a[w]);
        comp_sols[k].push_back(std::move(sol));
      }
    }
    // cartesian product over the components
    std::vector<size_t> pick(comp_order.size(), 0);
    bool empty = false;
    for (const auto& cs : comp_sols) empty |= cs.empty();
    if (empty) continue;
    auto& block = sb.blocks[b];
    while (true) {
      for (size_t k = 0; k < comp_order.size(); ++k)
        for (size_t q = 0; q < comp_order[k].size(); ++q) a[comp_order[k][q]] = comp_sols[k][pick[k]][q];
      double w = coef;
      for (int s : closed_stars) w *= delta1(G, a[s]) + gb;
      if (w != 0.0) {
        std::vector<int> key(phi_star.size());
        for (size_t k = 0; k < phi_star.size(); ++k) key[k] = a[phi_star[k]];
        block[key] += w;
      }
      size_t k = 0;
      for (; k < pick.size(); ++k) {
        if (++pick[k] < comp_sols[k].size()) break;
        pick[k] = 0;
      }
      if (k == pick.size()) break;
    }
  }
  return sb;
}

MatR boundary_state_full_dense(const FiniteGroup& G, const StructuredBoundary& sb) {
  MatR W = boundary_weight(G, sb.beta, sb.lay);
  return W * sb.dense() * W;
}

SpMatR leading_term_legs(const FiniteGroup& G, const NetworkLayout& lay) {
  SpMatR J = reduced_embedding(G, lay);
  SpMatR S = J * SpMatR(J.transpose());
  S.prune(1e-14);
  return S;
}

namespace {

// A block sum_A w_A R(A) acts the same way on every coset of the subgroup H
// generated by its terms, so its spectrum is that of the |H|-dimensional
// right regular action. Returns || block / kappa - 1 ||.
double block_deviation(const StructuredBoundary& sb, long b, double kappa, long* sub_dim) {
  const auto& G = sb.group;
  const auto& terms = sb.blocks[b];
  const size_t k = sb.phi_pos.size();
  std::map<std::vector<int>, int> index;
  std::vector<std::vector<int>> elems{std::vector<int>(k, G.identity())};
  index[elems[0]] = 0;
  for (size_t q = 0; q < elems.size(); ++q) {
    for (const auto& [A, w] : terms) {
      std::vector<int> e(k);
      for (size_t i = 0; i < k; ++i) e[i] = G.mul(elems[q][i], A[i]);
      if (index.emplace(e, static_cast<int>(elems.size())).second) elems.push_back(std::move(e));
    }
    if (elems.size() > 4096) throw FeasibilityError("block_deviation: generated subgroup too large", 0);
  }
  const int h = static_cast<int>(elems.size());
  if (sub_dim) *sub_dim = std::max<long>(*sub_dim, h);
  MatR M = -MatR::Identity(h, h);
  for (int q = 0; q < h; ++q)
    for (const auto& [A, w] : terms) {
      std::vector<int> e(k);
      for (size_t i = 0; i < k; ++i) e[i] = G.mul(elems[q][i], A[i]);
      M(q, index.at(e)) += w / kappa;
    }
  MatR Ms = (M + M.transpose()) / 2;
  Eigen::SelfAdjointEigenSolver<MatR> es(Ms, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

double leading_term_deviation(const StructuredBoundary& sb, double kappa, long* distinct) {
  if (!(kappa > 0)) throw DomainError("leading_term_deviation: kappa must be positive");
  std::map<std::vector<std::pair<std::vector<int>, long long>>, double> cache;
  double worst = 0;
  long sub_dim = 0;
  for (long b = 0; b < sb.num_blocks(); ++b) {
    std::vector<std::pair<std::vector<int>, long long>> key;
    for (const auto& [A, w] : sb.blocks[b]) key.push_back({A, std::llround(w / kappa * 1e12)});
    if (cache.count(key)) continue;
    double dev = sb.blocks[b].empty() ? 1.0 : block_deviation(sb, b, kappa, &sub_dim);
    cache[key] = dev;
    worst = std::max(worst, dev);
  }
  if (distinct) *distinct = static_cast<long>(cache.size());
  return worst;
}

FactorizationCertificate verify_leading_term(const FiniteGroup& G, const TorusLattice& L, const Region& R,
                                             double beta) {
  auto cls = classify_region(L, R);
  auto lay = network_layout(L, cls.edges);
  auto sb = boundary_state_region(G, lay, beta);
  auto ke = kappa_epsilon(cls, beta, G.order());
  FactorizationCertificate c;
  c.region = R.str();
  c.beta = beta;
  c.kappa = ke.kappa;
  c.epsilon = ke.epsilon;
  c.measured = leading_term_deviation(sb, ke.kappa, &c.distinct_blocks);
  c.bound = ke.epsilon + 1e-8 * std::max(1.0, ke.epsilon);
  c.pass = c.measured <= c.bound;
  c.vacuous = ke.epsilon >= 1;
  c.exact = c.measured <= 1e-12;
  c.method = "coset-blocks";
  return c;
}

SupportReport support_and_sigma(const FiniteGroup& G, const TorusLattice& L, const Region& R, double beta) {
  if (!(beta > 0)) throw DomainError("support_and_sigma: beta must be positive");
  auto cls = classify_region(L, R);
  auto lay = network_layout(L, cls.edges);
  auto ke = kappa_epsilon(cls, beta, G.order());
  const int n = G.order();
  const double dim = std::pow(double(n), lay.num_chains());
  SupportReport rep;
  rep.epsilon = ke.epsilon;
  rep.hypothesis = ke.epsilon < 1;
  rep.rank_leading = static_cast<int>(std::llround(dim));
  const double cut = 1e-10;

  if (dim <= 4096 && std::pow(double(n), 2 * cls.edges.size()) <= (1 << 22)) {
    rep.method = "dense";
    SpMatR V = region_map(G, beta, lay, Variant::Full);
    MatR rho = MatR(SpMatR(V.transpose()) * V);
    MatR W = boundary_weight(G, beta, lay);
    MatR sigma = ke.kappa * W * W;
    Eigen::SelfAdjointEigenSolver<MatR> er(rho);
    const VecR& lam = er.eigenvalues();
    const double lmax = lam.cwiseAbs().maxCoeff();
    VecR sq = VecR::Zero(lam.size()), isq = VecR::Zero(lam.size()), proj = VecR::Zero(lam.size());
    for (int i = 0; i < lam.size(); ++i)
      if (lam(i) > cut * lmax) {
        ++rep.rank_rho;
        sq(i) = std::sqrt(lam(i));
        isq(i) = 1 / sq(i);
        proj(i) = 1;
      }
    const MatR& U = er.eigenvectors();
    MatR rh = U * sq.asDiagonal() * U.transpose();
    MatR rih = U * isq.asDiagonal() * U.transpose();
    MatR Jp = U * proj.asDiagonal() * U.transpose();
    Eigen::SelfAdjointEigenSolver<MatR> es(sigma);
    const VecR& mu = es.eigenvalues();
    if (mu.minCoeff() <= 0) throw DomainError("support_and_sigma: sigma is singular");
    MatR sinv = es.eigenvectors() * mu.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    auto sym_norm = [](const MatR& M) {
      Eigen::SelfAdjointEigenSolver<MatR> e((M + M.transpose()) / 2, Eigen::EigenvaluesOnly);
      return e.eigenvalues().cwiseAbs().maxCoeff();
    };
    rep.norm_sigma_inv = sym_norm(rh * sinv * rh - Jp);
    rep.norm_sigma = sym_norm(rih * sigma * rih - Jp);

    // principal angle in leg coordinates: supp(J rho J^T) against range(J J^T)
    SpMatR J = reduced_embedding(G, lay);
    MatR Vl = MatR(V * SpMatR(J.transpose()));   // physical x legs
    MatR gram = Vl * Vl.transpose();
    Eigen::SelfAdjointEigenSolver<MatR> eg(gram);
    const double gmax = eg.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < eg.eigenvalues().size(); ++i)
      if (eg.eigenvalues()(i) > cut * gmax) keep.push_back(i);
    MatR Q(Vl.cols(), keep.size());
    for (size_t k = 0; k < keep.size(); ++k)
      Q.col(k) = Vl.transpose() * eg.eigenvectors().col(keep[k]) / std::sqrt(eg.eigenvalues()(keep[k]));
    MatR JtQ = SpMatR(J.transpose()) * Q;
    MatR resid = Q - J * JtQ;
    Eigen::JacobiSVD<MatR> svd(resid);
    double s = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    rep.angle = std::asin(std::min(1.0, s));
    if (static_cast<int>(keep.size()) != rep.rank_rho)
      throw ContractError("support_and_sigma: leg and reduced ranks differ");
    return rep;
  }

  rep.method = "blocks";
  SpMatR V = region_map(G, beta, lay, Variant::Slim, 1L << 26);
  Eigen::SparseMatrix<double, Eigen::ColMajor> Vc(V);
  double lmax = 0;
  std::vector<double> lams;
  for (const auto& blk : column_blocks(V)) {
    const int k = static_cast<int>(blk.size());
    MatR Gm = MatR::Zero(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) {
        double d = Vc.col(blk[i]).dot(Vc.col(blk[j]));
        Gm(i, j) = Gm(j, i) = d;
      }
    Eigen::SelfAdjointEigenSolver<MatR> e(Gm, Eigen::EigenvaluesOnly);
    for (int i = 0; i < k; ++i) {
      lams.push_back(e.eigenvalues()(i) / ke.kappa);
      lmax = std::max(lmax, std::abs(lams.back()));
    }
  }
  // columns with no support are missing singular directions
  long empty_cols = static_cast<long>(std::llround(dim)) - static_cast<long>(lams.size());
  for (long i = 0; i < empty_cols; ++i) lams.push_back(0.0);
  for (double l : lams) {
    if (l <= cut * lmax) continue;
    ++rep.rank_rho;
    rep.norm_sigma_inv = std::max(rep.norm_sigma_inv, std::abs(l - 1));
    rep.norm_sigma = std::max(rep.norm_sigma, std::abs(1 / l - 1));
  }
  rep.angle = 0;  // the support sits inside range(J) in reduced coordinates
  return rep;
}

}  // namespace qdlab

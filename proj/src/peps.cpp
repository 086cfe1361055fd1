// peps.cpp
#include "qdlab/peps.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qdlab/errors.hpp"

namespace qdlab {

namespace {

double half_gamma(const FiniteGroup& G, double beta) {
  if (beta < 0) throw DomainError("beta must be non-negative");
  return gamma_beta(beta / 2, G.order());
}

// Tr(W^{2k} L^y) for a plaquette piece of k edges, with q = 2k/8.
double weighted_trace(const FiniteGroup& G, double gh, double q, Elem y) {
  double a = std::pow(1 + gh, q), b = std::pow(gh, q);
  return a + b * (regular_character(G, y) - 1);
}

std::vector<long> powers(int d, int n) {
  std::vector<long> p(n, 1);
  for (int i = n - 2; i >= 0; --i) p[i] = p[i + 1] * d;
  return p;
}

}  // namespace

WeightOperator weight_star(const FiniteGroup& G, double beta) {
  double gh = half_gamma(G, beta);
  MatR W = MatR::Zero(G.order(), G.order());
  for (int g = 0; g < G.order(); ++g) W(g, g) = std::pow((g == G.identity() ? 1.0 : 0.0) + gh, 0.125);
  return {WeightOperator::Star, beta, W};
}

WeightOperator weight_plaq(const FiniteGroup& G, double beta) {
  double gh = half_gamma(G, beta);
  auto P = trivial_projector(G);
  MatR W = std::pow(1 + gh, 0.125) * P.P1 + std::pow(gh, 0.125) * P.P0;
  return {WeightOperator::Plaquette, beta, W};
}

SparseTensor edge_tensor(const FiniteGroup& G, double beta, Variant v) {
  const int n = G.order();
  SparseTensor T;
  for (int s = 0; s < NumSlots; ++s) {
    T.labels.push_back(s);
    T.dims.push_back(n);
  }
  T.volume();
  std::vector<int> idx(NumSlots);
  for (int g = 0; g < n; ++g)
    for (int h = 0; h < n; ++h)
      for (int k = 0; k < n; ++k)
        for (int c = 0; c < n; ++c)
          for (int c2 = 0; c2 < n; ++c2) {
            idx[Ket] = G.mul(G.mul(h, g), G.inv(k));
            idx[Copy] = g;
            idx[UpRow] = G.mul(G.inv(g), c);
            idx[UpCol] = c;
            idx[LoRow] = G.mul(g, c2);
            idx[LoCol] = c2;
            idx[TailIn] = idx[TailOut] = h;
            idx[HeadIn] = idx[HeadOut] = k;
            T.push(idx, 1.0);
          }
  if (v == Variant::Slim) {
    T.compress();
    return T;
  }
  MatR WS = weight_star(G, beta).op, WP = weight_plaq(G, beta).op;
  SparseTensor F;
  F.labels = T.labels;
  F.dims = T.dims;
  for (size_t t = 0; t < T.nnz(); ++t) {
    auto base = T.unpack(T.keys[t]);
    double ws = WS(base[TailIn], base[TailIn]) * WS(base[TailOut], base[TailOut]) * WS(base[HeadIn], base[HeadIn]) *
                WS(base[HeadOut], base[HeadOut]);
    if (ws == 0.0) continue;
    // T'[..x..] = sum_x' T[..x'..] W(x', x) on the four plaquette legs
    std::vector<int> out = base;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            double w = WP(base[UpRow], a) * WP(base[UpCol], b) * WP(base[LoRow], c) * WP(base[LoCol], d);
            if (w == 0.0) continue;
            out[UpRow] = a;
            out[UpCol] = b;
            out[LoRow] = c;
            out[LoCol] = d;
            F.push(out, T.vals[t] * ws * w);
          }
  }
  F.compress(1e-300);
  return F;
}

LabeledTensor edge_tensor_dense(const FiniteGroup& G, double beta, Variant v) {
  SparseTensor S = edge_tensor(G, beta, v);
  if (static_cast<double>(S.volume()) > static_cast<double>(1 << 22))
    throw FeasibilityError("edge_tensor_dense: " + std::to_string(S.volume()) + " entries", 16.0 * S.volume());
  LabeledTensor T(S.labels, S.dims);
  for (size_t t = 0; t < S.nnz(); ++t) T.data[S.keys[t]] = S.vals[t];
  return T;
}

std::vector<SparseTensor> edge_quarters(const FiniteGroup& G) {
  const int n = G.order();
  auto make = [&](std::vector<int> labels) {
    SparseTensor T;
    T.labels = std::move(labels);
    T.dims.assign(T.labels.size(), n);
    return T;
  };
  // upper face: |g>_100 <L^{g^-1}|
  SparseTensor up = make({100, UpRow, UpCol});
  // lower face: |g>_copy |g>_101 <g|_100 <L^g|
  SparseTensor lo = make({Copy, 101, 100, LoRow, LoCol});
  // tail star: L^h from 101 to 102, with <hh|
  SparseTensor tail = make({102, 101, TailIn, TailOut});
  // head star: right action x -> x k^-1 from 102 to the ket
  SparseTensor head = make({Ket, 102, HeadIn, HeadOut});
  for (int g = 0; g < n; ++g)
    for (int c = 0; c < n; ++c) {
      up.push({g, G.mul(G.inv(g), c), c}, 1.0);
      lo.push({g, g, g, G.mul(g, c), c}, 1.0);
      tail.push({G.mul(g, c), c, g, g}, 1.0);
      head.push({G.mul(c, G.inv(g)), c, g, g}, 1.0);
    }
  return {up, lo, tail, head};
}

SparseTensor contract_quarters(const FiniteGroup& G) {
  auto q = edge_quarters(G);
  SparseTensor pl = sparse_contract_pair(q[0], q[1]);
  SparseTensor st = sparse_contract_pair(pl, q[2]);
  SparseTensor all = sparse_contract_pair(st, q[3]);
  std::vector<int> order(NumSlots);
  for (int s = 0; s < NumSlots; ++s) order[s] = s;
  return sparse_contract_network({all}, order);
}

// ---------------------------------------------------------------- layout

int NetworkLayout::num_psi_chains() const {
  int c = 0;
  for (int i : chains) c += !objects[i].star;
  return c;
}

int NetworkLayout::num_phi_chains() const { return num_chains() - num_psi_chains(); }

NetworkLayout network_layout(const TorusLattice& L, std::vector<int> edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (edges.empty()) throw GeometryError("network_layout: empty edge set");
  for (int e : edges)
    if (e < 0 || e >= L.num_edges()) throw GeometryError("network_layout: edge " + std::to_string(e) + " out of range");
  NetworkLayout lay;
  lay.edges = edges;
  const int E = static_cast<int>(edges.size());
  lay.slot_object.assign(E, {-1, -1, -1, -1});
  auto local = [&](int g) {
    auto it = std::lower_bound(edges.begin(), edges.end(), g);
    return it != edges.end() && *it == g ? static_cast<int>(it - edges.begin()) : -1;
  };
  auto add_runs = [&](bool star, int id, const std::array<int, 4>& ring, const std::array<int, 4>& sg) {
    std::array<bool, 4> in{};
    int count = 0;
    for (int i = 0; i < 4; ++i) count += in[i] = local(ring[i]) >= 0;
    if (count == 0) return;
    auto record = [&](const RingObject& o) {
      int idx = static_cast<int>(lay.objects.size());
      for (size_t j = 0; j < o.edges.size(); ++j) {
        int le = local(o.edges[j]);
        int slot = star ? (o.signs[j] ? 2 : 3) : (o.signs[j] < 0 ? 0 : 1);
        lay.slot_object[le][slot] = idx;
      }
      lay.objects.push_back(o);
    };
    if (count == 4) {
      RingObject o{star, id, true, {ring.begin(), ring.end()}, {sg.begin(), sg.end()}};
      record(o);
      return;
    }
    for (int s = 0; s < 4; ++s) {
      if (!in[s] || in[(s + 3) % 4]) continue;
      RingObject o{star, id, false, {}, {}};
      for (int j = s; in[j % 4] && static_cast<int>(o.edges.size()) < 4; ++j) {
        o.edges.push_back(ring[j % 4]);
        o.signs.push_back(sg[j % 4]);
      }
      record(o);
    }
  };
  for (int v = 0; v < L.num_vertices(); ++v) {
    auto st = L.star(v);
    add_runs(true, v, {st[0].edge, st[1].edge, st[2].edge, st[3].edge},
             {st[0].away, st[1].away, st[2].away, st[3].away});
  }
  for (int p = 0; p < L.num_plaquettes(); ++p) {
    auto pl = L.plaquette(p);
    add_runs(false, p, {pl[0].edge, pl[1].edge, pl[2].edge, pl[3].edge},
             {pl[0].sign, pl[1].sign, pl[2].sign, pl[3].sign});
  }
  std::vector<char> seen(lay.objects.size(), 0);
  for (int i = 0; i < E; ++i)
    for (int s = 0; s < 4; ++s) {
      int o = lay.slot_object[i][s];
      if (o < 0) throw ContractError("network_layout: unassigned slot");
      if (!lay.objects[o].closed && !seen[o]) {
        seen[o] = 1;
        lay.chains.push_back(o);
      }
    }
  return lay;
}

// ---------------------------------------------------------------- region maps

SpMatR region_map(const FiniteGroup& G, double beta, const NetworkLayout& lay, Variant v, long max_rows) {
  const int n = G.order();
  const int E = static_cast<int>(lay.edges.size());
  const int C = lay.num_chains();
  const double gh = half_gamma(G, beta);
  const bool full = v == Variant::Full;
  double rows = std::pow(double(n), 2 * E), cols = std::pow(double(n), C);
  if (rows > static_cast<double>(max_rows) || cols > 2e9)
    throw FeasibilityError("region_map: " + std::to_string(rows) + " x " + std::to_string(cols), rows * 8.0);
  std::vector<int> star_objs, plaq_rings;
  std::vector<int> star_slot(lay.objects.size(), -1);
  for (size_t o = 0; o < lay.objects.size(); ++o) {
    if (lay.objects[o].star) {
      star_slot[o] = static_cast<int>(star_objs.size());
      star_objs.push_back(static_cast<int>(o));
    } else if (lay.objects[o].closed) {
      plaq_rings.push_back(static_cast<int>(o));
    }
  }
  double work = std::pow(double(n), E + static_cast<int>(star_objs.size())) *
                (full ? std::pow(double(n), lay.num_psi_chains()) : 1.0);
  if (work > 3e8) throw FeasibilityError("region_map: enumeration of " + std::to_string(work) + " terms", work * 16.0);
  std::map<int, int> local;
  for (int i = 0; i < E; ++i) local[lay.edges[i]] = i;
  auto rp = powers(n, 2 * E);
  auto cp = powers(n, C);
  const double sq = std::sqrt(static_cast<double>(n));

  std::vector<int> g(E, 0), t(star_objs.size(), 0);
  std::vector<Eigen::Triplet<double>> trip;
  const long nt = static_cast<long>(std::llround(std::pow(double(n), E + static_cast<int>(star_objs.size()))));
  std::vector<std::vector<int>> obj_local(lay.objects.size());
  for (size_t o = 0; o < lay.objects.size(); ++o)
    for (int e : lay.objects[o].edges) obj_local[o].push_back(local[e]);
  auto product = [&](int o) {
    const auto& ob = lay.objects[o];
    Elem p = G.identity();
    for (size_t j = 0; j < ob.edges.size(); ++j) {
      int ge = g[obj_local[o][j]];
      p = G.mul(p, ob.signs[j] > 0 ? ge : G.inv(ge));
    }
    return p;
  };
  std::vector<std::vector<double>> chain_coef(C);
  std::vector<int> chain_const(C, -1);
  for (long it = 0; it < nt; ++it) {
    long r = it;
    for (int i = static_cast<int>(t.size()) - 1; i >= 0; --i) {
      t[i] = static_cast<int>(r % n);
      r /= n;
    }
    for (int i = E - 1; i >= 0; --i) {
      g[i] = static_cast<int>(r % n);
      r /= n;
    }
    double amp = 1.0;
    for (int o : star_objs) {
      const auto& ob = lay.objects[o];
      double base = (t[star_slot[o]] == G.identity() ? 1.0 : 0.0) + gh;
      if (ob.closed) amp *= base;
      else if (full) amp *= std::pow(base, ob.edges.size() / 4.0);
    }
    for (int o : plaq_rings) amp *= weighted_trace(G, gh, 1.0, product(o));
    if (amp == 0.0) continue;
    long row = 0;
    for (int i = 0; i < E; ++i) {
      int tt = t[star_slot[lay.slot_object[i][2]]], th = t[star_slot[lay.slot_object[i][3]]];
      row += G.mul(G.mul(tt, g[i]), G.inv(th)) * rp[i] + g[i] * rp[E + i];
    }
    long col0 = 0;
    std::vector<int> free_chains;
    for (int c = 0; c < C; ++c) {
      const auto& ob = lay.objects[lay.chains[c]];
      if (ob.star) {
        col0 += t[star_slot[lay.chains[c]]] * cp[c];
        continue;
      }
      Elem p = product(lay.chains[c]);
      if (!full) {
        col0 += p * cp[c];
        amp *= sq;
        continue;
      }
      chain_coef[c].assign(n, 0.0);
      double q = ob.edges.size() / 4.0;
      for (int x = 0; x < n; ++x) chain_coef[c][x] = weighted_trace(G, gh, q, G.mul(x, G.inv(p))) / sq;
      free_chains.push_back(c);
    }
    if (free_chains.empty()) {
      trip.emplace_back(static_cast<int>(row), static_cast<int>(col0), amp);
      continue;
    }
    const long combos = static_cast<long>(std::llround(std::pow(double(n), free_chains.size())));
    for (long cc = 0; cc < combos; ++cc) {
      long rr = cc, col = col0;
      double a = amp;
      for (int k = static_cast<int>(free_chains.size()) - 1; k >= 0; --k) {
        int x = static_cast<int>(rr % n);
        rr /= n;
        a *= chain_coef[free_chains[k]][x];
        col += x * cp[free_chains[k]];
      }
      if (a != 0.0) trip.emplace_back(static_cast<int>(row), static_cast<int>(col), a);
    }
  }
  SpMatR V(static_cast<int>(rows), static_cast<int>(cols));
  V.setFromTriplets(trip.begin(), trip.end());
  V.prune(0.0);
  return V;
}

std::vector<MatR> boundary_weight_factors(const FiniteGroup& G, double beta, const NetworkLayout& lay) {
  const int n = G.order();
  const double gh = half_gamma(G, beta);
  std::vector<MatR> out;
  for (int c : lay.chains) {
    const auto& ob = lay.objects[c];
    double q = ob.edges.size() / 4.0;
    MatR F = MatR::Zero(n, n);
    if (ob.star) {
      for (int h = 0; h < n; ++h) F(h, h) = std::pow((h == G.identity() ? 1.0 : 0.0) + gh, q);
    } else {
      // W^{2k} L^x = b L^x + (a - b)/|G| sum_y L^y
      double a = std::pow(1 + gh, q), b = std::pow(gh, q);
      F = b * MatR::Identity(n, n) + (a - b) / n * MatR::Ones(n, n);
    }
    out.push_back(F);
  }
  return out;
}

MatR boundary_weight(const FiniteGroup& G, double beta, const NetworkLayout& lay) {
  MatR W = MatR::Identity(1, 1);
  for (const auto& F : boundary_weight_factors(G, beta, lay)) W = kron(W, F);
  return W;
}

SpMatR reduced_embedding(const FiniteGroup& G, const NetworkLayout& lay) {
  const int n = G.order();
  const int C = lay.num_chains();
  double rows = std::pow(double(n), 2 * C), cols = std::pow(double(n), C);
  if (rows > 2e9) throw FeasibilityError("reduced_embedding: leg space too large", rows * 8.0);
  std::vector<Eigen::Triplet<double>> trip;
  auto rp = powers(n, 2 * C);
  const double isq = 1.0 / std::sqrt(static_cast<double>(n));
  const long nc = static_cast<long>(cols);
  for (long col = 0; col < nc; ++col) {
    std::vector<int> x(C);
    long r = col;
    for (int c = C - 1; c >= 0; --c) {
      x[c] = static_cast<int>(r % n);
      r /= n;
    }
    // expand the psi chains over their second index
    std::vector<std::pair<long, double>> acc{{0L, 1.0}};
    for (int c = 0; c < C; ++c) {
      std::vector<std::pair<long, double>> next;
      if (lay.objects[lay.chains[c]].star) {
        for (auto [row, w] : acc) next.push_back({row + x[c] * rp[2 * c] + x[c] * rp[2 * c + 1], w});
      } else {
        for (auto [row, w] : acc)
          for (int k = 0; k < n; ++k) next.push_back({row + G.mul(x[c], k) * rp[2 * c] + k * rp[2 * c + 1], w * isq});
      }
      acc.swap(next);
    }
    for (auto [row, w] : acc) trip.emplace_back(static_cast<int>(row), static_cast<int>(col), w);
  }
  SpMatR J(static_cast<int>(rows), static_cast<int>(cols));
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

namespace {

struct NetworkLabels {
  std::vector<std::array<int, NumSlots>> label;  // per local edge and slot
  std::vector<int> physical, open;
};

NetworkLabels network_labels(const NetworkLayout& lay) {
  const int E = static_cast<int>(lay.edges.size());
  NetworkLabels nl;
  nl.label.resize(E);
  for (int i = 0; i < E; ++i)
    for (int s = 0; s < NumSlots; ++s) nl.label[i][s] = 1000 + NumSlots * i + s;
  for (int i = 0; i < E; ++i) {
    nl.label[i][Ket] = 2 * i;
    nl.label[i][Copy] = 2 * i + 1;
  }
  std::map<int, int> local;
  for (int i = 0; i < E; ++i) local[lay.edges[i]] = i;
  auto in_out = [](const RingObject& o, size_t j) -> std::pair<int, int> {
    if (o.star) return o.signs[j] ? std::pair{int(TailIn), int(TailOut)} : std::pair{int(HeadIn), int(HeadOut)};
    return o.signs[j] < 0 ? std::pair{int(UpRow), int(UpCol)} : std::pair{int(LoRow), int(LoCol)};
  };
  for (const auto& o : lay.objects) {
    const size_t k = o.edges.size();
    const size_t bonds = o.closed ? k : k - 1;
    for (size_t j = 0; j < bonds; ++j) {
      int a = local[o.edges[j]], b = local[o.edges[(j + 1) % k]];
      nl.label[b][in_out(o, (j + 1) % k).first] = nl.label[a][in_out(o, j).second];
    }
  }
  for (int i = 0; i < E; ++i) nl.physical.push_back(2 * i);
  for (int i = 0; i < E; ++i) nl.physical.push_back(2 * i + 1);
  for (int c : lay.chains) {
    const auto& o = lay.objects[c];
    nl.open.push_back(nl.label[local[o.edges.front()]][in_out(o, 0).first]);
    nl.open.push_back(nl.label[local[o.edges.back()]][in_out(o, o.edges.size() - 1).second]);
  }
  return nl;
}

}  // namespace

SparseTensor contract_network(const FiniteGroup& G, double beta, const NetworkLayout& lay, Variant v) {
  SparseTensor base = edge_tensor(G, beta, v);
  auto nl = network_labels(lay);
  std::vector<SparseTensor> ts;
  for (size_t i = 0; i < lay.edges.size(); ++i) {
    SparseTensor T = base;
    for (int s = 0; s < NumSlots; ++s) T.labels[s] = nl.label[i][s];
    ts.push_back(std::move(T));
  }
  std::vector<int> order = nl.physical;
  order.insert(order.end(), nl.open.begin(), nl.open.end());
  return sparse_contract_network(std::move(ts), order);
}

SpMatR contract_network_matrix(const FiniteGroup& G, double beta, const NetworkLayout& lay, Variant v) {
  SparseTensor T = contract_network(G, beta, lay, v);
  auto nl = network_labels(lay);
  return sparse_to_matrix(T, nl.physical, nl.open);
}

VecC thermofield_state(const QuantumDoubleModel& m, double beta, long max_dim) {
  MatC rho = gibbs_state(m, beta, max_dim);
  MatC s = matrix_function_hermitian(rho, [](double x) { return std::sqrt(std::max(x, 0.0)); });
  VecC v = vectorize(s);
  return v / v.norm();
}

}  // namespace qdlab

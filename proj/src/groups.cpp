// groups.cpp
#include "qdlab/groups.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qdlab {

FiniteGroup::FiniteGroup(std::vector<std::vector<Elem>> table, std::string label)
    : n_(static_cast<int>(table.size())), label_(std::move(label)) {
  if (n_ == 0) throw std::invalid_argument("group: empty multiplication table");
  mul_.resize(static_cast<size_t>(n_) * n_);
  for (int a = 0; a < n_; ++a) {
    if (static_cast<int>(table[a].size()) != n_)
      throw std::invalid_argument("group: row " + std::to_string(a) + " has wrong length");
    for (int b = 0; b < n_; ++b) {
      Elem c = table[a][b];
      if (c < 0 || c >= n_)
        throw std::invalid_argument("group: entry out of range at (" + std::to_string(a) + "," +
                                    std::to_string(b) + ")");
      mul_[a * n_ + b] = c;
    }
  }
  // Latin square
  for (int a = 0; a < n_; ++a) {
    std::vector<char> row(n_, 0), col(n_, 0);
    for (int b = 0; b < n_; ++b) {
      if (row[mul(a, b)]++) throw std::invalid_argument("group: row " + std::to_string(a) + " is not a permutation");
      if (col[mul(b, a)]++) throw std::invalid_argument("group: column " + std::to_string(a) + " is not a permutation");
    }
  }
  for (int g = 0; g < n_; ++g)
    if (mul(0, g) != g || mul(g, 0) != g) throw std::invalid_argument("group: element 0 is not the identity");
  inv_.assign(n_, -1);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      if (mul(a, b) == 0) inv_[a] = b;
  for (int a = 0; a < n_; ++a)
    if (inv_[a] < 0 || mul(inv_[a], a) != 0) throw std::invalid_argument("group: missing inverse");
  // exhaustive for small orders, a deterministic sample beyond
  if (n_ <= 24) {
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b)
        for (int c = 0; c < n_; ++c)
          if (mul(mul(a, b), c) != mul(a, mul(b, c))) throw std::invalid_argument("group: table is not associative");
  } else {
    for (long t = 0; t < 20000; ++t) {
      int a = static_cast<int>((t * 7919) % n_), b = static_cast<int>((t * 104729 + 3) % n_);
      int c = static_cast<int>((t * 1299709 + 11) % n_);
      if (mul(mul(a, b), c) != mul(a, mul(b, c))) throw std::invalid_argument("group: table is not associative");
    }
  }
}

bool FiniteGroup::is_abelian() const {
  for (int a = 0; a < n_; ++a)
    for (int b = a + 1; b < n_; ++b)
      if (mul(a, b) != mul(b, a)) return false;
  return true;
}

std::vector<std::vector<Elem>> FiniteGroup::conjugacy_classes() const {
  std::vector<int> cls(n_, -1);
  std::vector<std::vector<Elem>> out;
  for (int g = 0; g < n_; ++g) {
    if (cls[g] >= 0) continue;
    std::vector<Elem> c;
    for (int h = 0; h < n_; ++h) {
      Elem x = mul(mul(h, g), inv(h));
      if (cls[x] < 0) {
        cls[x] = static_cast<int>(out.size());
        c.push_back(x);
      }
    }
    std::sort(c.begin(), c.end());
    out.push_back(std::move(c));
  }
  return out;
}

void FiniteGroup::check_index(Elem g) const {
  if (g < 0 || g >= n_) throw std::invalid_argument("group: element index " + std::to_string(g) + " out of range");
}

FiniteGroup make_cyclic(int n) {
  if (n < 1) throw std::invalid_argument("make_cyclic: invalid order " + std::to_string(n));
  std::vector<std::vector<Elem>> t(n, std::vector<Elem>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) t[a][b] = (a + b) % n;
  return FiniteGroup(std::move(t), "Z" + std::to_string(n));
}

FiniteGroup make_symmetric(int n) {
  if (n < 1) throw std::invalid_argument("make_symmetric: invalid degree " + std::to_string(n));
  if (n > 5) throw std::invalid_argument("make_symmetric: table too large for S" + std::to_string(n));
  // permutations in lexicographic order; the first one is the identity
  std::vector<std::vector<int>> perms;
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  const int m = static_cast<int>(perms.size());
  auto find = [&](const std::vector<int>& q) {
    return static_cast<int>(std::lower_bound(perms.begin(), perms.end(), q) - perms.begin());
  };
  std::vector<std::vector<Elem>> t(m, std::vector<Elem>(m));
  std::vector<int> q(n);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      // (ab)(i) = a(b(i))
      for (int i = 0; i < n; ++i) q[i] = perms[a][perms[b][i]];
      t[a][b] = find(q);
    }
  return FiniteGroup(std::move(t), "S" + std::to_string(n));
}

FiniteGroup load_group_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("group file: cannot open " + path);
  std::string line;
  int lineno = 0, n = -1;
  std::vector<std::vector<Elem>> t;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<long> vals;
    std::string tok;
    while (ls >> tok) {
      try {
        size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        vals.push_back(v);
      } catch (const std::exception&) {
        throw std::invalid_argument("group file " + path + ":" + std::to_string(lineno) + ": bad token '" + tok + "'");
      }
    }
    if (vals.empty()) continue;
    if (n < 0) {
      if (vals.size() != 1 || vals[0] < 1)
        throw std::invalid_argument("group file " + path + ":" + std::to_string(lineno) + ": expected the order");
      n = static_cast<int>(vals[0]);
      continue;
    }
    if (static_cast<int>(vals.size()) != n)
      throw std::invalid_argument("group file " + path + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(n) + " entries");
    t.emplace_back(vals.begin(), vals.end());
  }
  if (n < 0) throw std::invalid_argument("group file " + path + ": empty");
  if (static_cast<int>(t.size()) != n)
    throw std::invalid_argument("group file " + path + ": expected " + std::to_string(n) + " rows, got " +
                                std::to_string(t.size()));
  return FiniteGroup(std::move(t), "file:" + path);
}

FiniteGroup parse_group(const std::string& spec) {
  if (spec.rfind("file:", 0) == 0) return load_group_file(spec.substr(5));
  if (spec.size() >= 2 && (spec[0] == 'Z' || spec[0] == 'S')) {
    int n = 0;
    try {
      size_t pos = 0;
      n = std::stoi(spec.substr(1), &pos);
      if (pos != spec.size() - 1) throw std::invalid_argument(spec);
    } catch (const std::exception&) {
      throw std::invalid_argument("unknown group '" + spec + "'");
    }
    return spec[0] == 'Z' ? make_cyclic(n) : make_symmetric(n);
  }
  throw std::invalid_argument("unknown group '" + spec + "'");
}

Eigen::MatrixXd left_regular_matrix(const FiniteGroup& G, Elem g) {
  G.check_index(g);
  const int n = G.order();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int h = 0; h < n; ++h) L(G.mul(g, h), h) = 1.0;
  return L;
}

double regular_character(const FiniteGroup& G, Elem g) {
  G.check_index(g);
  return g == G.identity() ? static_cast<double>(G.order()) : 0.0;
}

TrivialProjector trivial_projector(const FiniteGroup& G) {
  const int n = G.order();
  TrivialProjector t;
  t.P1 = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  t.P0 = Eigen::MatrixXd::Identity(n, n) - t.P1;
  return t;
}

}  // namespace qdlab

// linalg.cpp
#include "qdlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qdlab/errors.hpp"

namespace qdlab {

// ---------------------------------------------------------------- LabeledTensor

LabeledTensor::LabeledTensor(std::vector<int> l, std::vector<int> d) : labels(std::move(l)), dims(std::move(d)) {
  if (labels.size() != dims.size()) throw ContractError("tensor: label/dimension count mismatch");
  data.assign(size(), cplx(0.0));
}

size_t LabeledTensor::size() const {
  size_t s = 1;
  for (int d : dims) s *= static_cast<size_t>(d);
  return s;
}

int LabeledTensor::leg(int label) const {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

namespace {

size_t flat_index(const std::vector<int>& dims, const std::vector<int>& idx) {
  size_t k = 0;
  for (size_t i = 0; i < dims.size(); ++i) k = k * dims[i] + idx[i];
  return k;
}

std::vector<size_t> strides_of(const std::vector<int>& dims) {
  std::vector<size_t> s(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * dims[i + 1];
  return s;
}

}  // namespace

cplx& LabeledTensor::at(const std::vector<int>& idx) { return data[flat_index(dims, idx)]; }
cplx LabeledTensor::at(const std::vector<int>& idx) const { return data[flat_index(dims, idx)]; }

LabeledTensor LabeledTensor::permuted(const std::vector<int>& order) const {
  if (order.size() != labels.size()) throw ContractError("permute: wrong label count");
  std::vector<int> src(order.size()), nd(order.size());
  for (size_t i = 0; i < order.size(); ++i) {
    src[i] = leg(order[i]);
    if (src[i] < 0) throw ContractError("permute: unknown label " + std::to_string(order[i]));
    nd[i] = dims[src[i]];
  }
  LabeledTensor out(order, nd);
  auto ss = strides_of(dims);
  const size_t n = size();
  const size_t r = order.size();
  std::vector<int> idx(r, 0);
  for (size_t k = 0; k < n; ++k) {
    size_t s = 0;
    for (size_t i = 0; i < r; ++i) s += idx[i] * ss[src[i]];
    out.data[k] = data[s];
    for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
      if (++idx[i] < nd[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

LabeledTensor contract_pair(const LabeledTensor& A, const LabeledTensor& B) {
  std::vector<int> shared, freeA, freeB;
  for (size_t i = 0; i < A.labels.size(); ++i) {
    int j = B.leg(A.labels[i]);
    if (j >= 0) {
      if (A.dims[i] != B.dims[j])
        throw ContractError("contract: leg " + std::to_string(A.labels[i]) + " has dimension " +
                            std::to_string(A.dims[i]) + " on one side and " + std::to_string(B.dims[j]) +
                            " on the other");
      shared.push_back(A.labels[i]);
    } else {
      freeA.push_back(A.labels[i]);
    }
  }
  for (int l : B.labels)
    if (A.leg(l) < 0) freeB.push_back(l);
  std::vector<int> oa = freeA, ob = shared;
  oa.insert(oa.end(), shared.begin(), shared.end());
  ob.insert(ob.end(), freeB.begin(), freeB.end());
  LabeledTensor Ap = A.permuted(oa), Bp = B.permuted(ob);
  long m = 1, k = 1, n = 1;
  std::vector<int> dims;
  for (int l : freeA) {
    m *= A.dims[A.leg(l)];
    dims.push_back(A.dims[A.leg(l)]);
  }
  for (int l : shared) k *= A.dims[A.leg(l)];
  for (int l : freeB) {
    n *= B.dims[B.leg(l)];
    dims.push_back(B.dims[B.leg(l)]);
  }
  // row-major (m x k) and (k x n) blocks map onto Eigen column-major transposes
  Eigen::Map<const MatC> At(Ap.data.data(), k, m);
  Eigen::Map<const MatC> Bt(Bp.data.data(), n, k);
  std::vector<int> labels = freeA;
  labels.insert(labels.end(), freeB.begin(), freeB.end());
  LabeledTensor out(labels, dims);
  Eigen::Map<MatC> Ct(out.data.data(), n, m);
  Ct.noalias() = Bt * At;
  return out;
}

LabeledTensor contract(const std::vector<LabeledTensor>& tensors, const std::vector<Pairing>& pairings) {
  if (tensors.empty()) throw ContractError("contract: empty network");
  std::vector<LabeledTensor> ts = tensors;
  // paired legs receive fresh labels below every user label
  int fresh = std::numeric_limits<int>::min() / 2;
  std::vector<std::vector<char>> paired(ts.size());
  for (size_t t = 0; t < ts.size(); ++t) paired[t].assign(ts[t].labels.size(), 0);
  for (const auto& p : pairings) {
    if (p.t1 < 0 || p.t2 < 0 || p.t1 >= static_cast<int>(ts.size()) || p.t2 >= static_cast<int>(ts.size()))
      throw ContractError("contract: pairing names a missing tensor");
    if (p.t1 == p.t2) throw ContractError("contract: self pairing on tensor " + std::to_string(p.t1));
    auto& A = ts[p.t1];
    auto& B = ts[p.t2];
    if (p.leg1 < 0 || p.leg2 < 0 || p.leg1 >= static_cast<int>(A.dims.size()) ||
        p.leg2 >= static_cast<int>(B.dims.size()))
      throw ContractError("contract: pairing names a missing leg");
    if (A.dims[p.leg1] != B.dims[p.leg2])
      throw ContractError("contract: dimension mismatch between tensor " + std::to_string(p.t1) + " leg " +
                          std::to_string(p.leg1) + " (" + std::to_string(A.dims[p.leg1]) + ") and tensor " +
                          std::to_string(p.t2) + " leg " + std::to_string(p.leg2) + " (" +
                          std::to_string(B.dims[p.leg2]) + ")");
    if (paired[p.t1][p.leg1]++ || paired[p.t2][p.leg2]++) throw ContractError("contract: leg paired twice");
    A.labels[p.leg1] = fresh;
    B.labels[p.leg2] = fresh;
    ++fresh;
  }
  std::vector<int> free_order;
  for (size_t t = 0; t < ts.size(); ++t)
    for (size_t l = 0; l < ts[t].labels.size(); ++l)
      if (!paired[t][l]) {
        int lab = ts[t].labels[l];
        if (std::find(free_order.begin(), free_order.end(), lab) != free_order.end())
          throw ContractError("contract: duplicate free label " + std::to_string(lab));
        free_order.push_back(lab);
      }
  while (ts.size() > 1) {
    size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    bool best_shares = false;
    for (size_t i = 0; i < ts.size(); ++i)
      for (size_t j = i + 1; j < ts.size(); ++j) {
        double out = 1.0;
        bool shares = false;
        for (size_t l = 0; l < ts[i].labels.size(); ++l)
          if (ts[j].leg(ts[i].labels[l]) < 0) out *= ts[i].dims[l];
          else shares = true;
        for (size_t l = 0; l < ts[j].labels.size(); ++l)
          if (ts[i].leg(ts[j].labels[l]) < 0) out *= ts[j].dims[l];
        if ((shares && !best_shares) || (shares == best_shares && out < best)) {
          best = out;
          bi = i;
          bj = j;
          best_shares = shares;
        }
      }
    LabeledTensor c = contract_pair(ts[bi], ts[bj]);
    ts.erase(ts.begin() + bj);
    ts[bi] = std::move(c);
  }
  return ts[0].permuted(free_order);
}

// ---------------------------------------------------------------- SparseTensor

uint64_t SparseTensor::volume() const {
  long double v = 1;
  uint64_t u = 1;
  for (int d : dims) {
    v *= d;
    u *= static_cast<uint64_t>(d);
  }
  if (v > 9.2e18L) throw FeasibilityError("sparse tensor: index space exceeds 64 bits", static_cast<double>(v));
  return u;
}

void SparseTensor::push(const std::vector<int>& idx, double v) {
  uint64_t k = 0;
  for (size_t i = 0; i < dims.size(); ++i) k = k * dims[i] + idx[i];
  keys.push_back(k);
  vals.push_back(v);
}

std::vector<int> SparseTensor::unpack(uint64_t key) const {
  std::vector<int> idx(dims.size());
  for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
    idx[i] = static_cast<int>(key % dims[i]);
    key /= dims[i];
  }
  return idx;
}

void SparseTensor::compress(double drop) {
  std::vector<size_t> ord(keys.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) { return keys[a] < keys[b]; });
  std::vector<uint64_t> nk;
  std::vector<double> nv;
  nk.reserve(keys.size());
  nv.reserve(keys.size());
  for (size_t i = 0; i < ord.size();) {
    uint64_t k = keys[ord[i]];
    double s = 0;
    while (i < ord.size() && keys[ord[i]] == k) s += vals[ord[i++]];
    if (std::abs(s) > drop) {
      nk.push_back(k);
      nv.push_back(s);
    }
  }
  keys.swap(nk);
  vals.swap(nv);
}

namespace {

int label_pos(const std::vector<int>& labels, int l) {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == l) return static_cast<int>(i);
  return -1;
}

}  // namespace

SparseTensor sparse_contract_pair(const SparseTensor& A, const SparseTensor& B) {
  std::vector<int> sharedA, sharedB, freeA, freeB;
  for (size_t i = 0; i < A.labels.size(); ++i) {
    int j = label_pos(B.labels, A.labels[i]);
    if (j >= 0) {
      if (A.dims[i] != B.dims[j])
        throw ContractError("sparse contract: dimension mismatch on label " + std::to_string(A.labels[i]));
      sharedA.push_back(static_cast<int>(i));
      sharedB.push_back(j);
    } else {
      freeA.push_back(static_cast<int>(i));
    }
  }
  for (size_t j = 0; j < B.labels.size(); ++j)
    if (label_pos(A.labels, B.labels[j]) < 0) freeB.push_back(static_cast<int>(j));
  SparseTensor C;
  for (int i : freeA) {
    C.labels.push_back(A.labels[i]);
    C.dims.push_back(A.dims[i]);
  }
  for (int j : freeB) {
    C.labels.push_back(B.labels[j]);
    C.dims.push_back(B.dims[j]);
  }
  C.volume();
  uint64_t volFB = 1;
  for (int j : freeB) volFB *= B.dims[j];
  auto split = [](const SparseTensor& T, uint64_t key, const std::vector<int>& sh, const std::vector<int>& fr,
                  uint64_t& skey, uint64_t& fkey) {
    std::vector<int> idx = T.unpack(key);
    skey = 0;
    fkey = 0;
    for (int i : sh) skey = skey * T.dims[i] + idx[i];
    for (int i : fr) fkey = fkey * T.dims[i] + idx[i];
  };
  std::unordered_map<uint64_t, std::vector<std::pair<uint64_t, double>>> index;
  index.reserve(B.nnz());
  for (size_t t = 0; t < B.nnz(); ++t) {
    uint64_t s, f;
    split(B, B.keys[t], sharedB, freeB, s, f);
    index[s].emplace_back(f, B.vals[t]);
  }
  for (size_t t = 0; t < A.nnz(); ++t) {
    uint64_t s, f;
    split(A, A.keys[t], sharedA, freeA, s, f);
    auto it = index.find(s);
    if (it == index.end()) continue;
    for (const auto& [fb, vb] : it->second) {
      C.keys.push_back(f * volFB + fb);
      C.vals.push_back(A.vals[t] * vb);
    }
  }
  C.compress();
  return C;
}

SparseTensor sparse_contract_network(std::vector<SparseTensor> ts, const std::vector<int>& open_order) {
  if (ts.empty()) throw ContractError("sparse network: empty");
  while (ts.size() > 1) {
    size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    bool best_shares = false;
    for (size_t i = 0; i < ts.size(); ++i)
      for (size_t j = i + 1; j < ts.size(); ++j) {
        double shared_vol = 1;
        bool shares = false;
        for (size_t l = 0; l < ts[i].labels.size(); ++l) {
          int p = label_pos(ts[j].labels, ts[i].labels[l]);
          if (p >= 0) {
            shares = true;
            shared_vol *= ts[i].dims[l];
          }
        }
        double est = static_cast<double>(ts[i].nnz()) * static_cast<double>(ts[j].nnz()) / shared_vol;
        if ((shares && !best_shares) || (shares == best_shares && est < best)) {
          best = est;
          bi = i;
          bj = j;
          best_shares = shares;
        }
      }
    SparseTensor c = sparse_contract_pair(ts[bi], ts[bj]);
    ts.erase(ts.begin() + bj);
    ts[bi] = std::move(c);
  }
  SparseTensor& T = ts[0];
  if (open_order.size() != T.labels.size()) throw ContractError("sparse network: open label count mismatch");
  std::vector<int> src(open_order.size());
  SparseTensor out;
  for (size_t i = 0; i < open_order.size(); ++i) {
    src[i] = label_pos(T.labels, open_order[i]);
    if (src[i] < 0) throw ContractError("sparse network: label " + std::to_string(open_order[i]) + " not open");
    out.labels.push_back(open_order[i]);
    out.dims.push_back(T.dims[src[i]]);
  }
  out.keys.reserve(T.nnz());
  out.vals = T.vals;
  std::vector<int> idx2(open_order.size());
  for (size_t t = 0; t < T.nnz(); ++t) {
    auto idx = T.unpack(T.keys[t]);
    for (size_t i = 0; i < src.size(); ++i) idx2[i] = idx[src[i]];
    uint64_t k = 0;
    for (size_t i = 0; i < idx2.size(); ++i) k = k * out.dims[i] + idx2[i];
    out.keys.push_back(k);
  }
  out.compress();
  return out;
}

std::vector<std::vector<int>> column_blocks(const SpMatR& V) {
  std::vector<int> parent(V.cols());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int r = 0; r < V.outerSize(); ++r) {
    int first = -1;
    for (SpMatR::InnerIterator it(V, r); it; ++it) {
      if (it.value() == 0.0) continue;
      if (first < 0) first = find(static_cast<int>(it.col()));
      else parent[find(static_cast<int>(it.col()))] = first;
    }
  }
  std::vector<int> id(V.cols(), -1);
  std::vector<std::vector<int>> out;
  for (int c = 0; c < V.cols(); ++c) {
    int root = find(c);
    if (id[root] < 0) {
      id[root] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[id[root]].push_back(c);
  }
  return out;
}

SpMatR sparse_to_matrix(const SparseTensor& T, const std::vector<int>& rows, const std::vector<int>& cols) {
  if (rows.size() + cols.size() != T.labels.size()) throw ContractError("sparse_to_matrix: labels must cover the tensor");
  std::vector<int> rp, cp;
  long nr = 1, nc = 1;
  for (int l : rows) {
    int p = label_pos(T.labels, l);
    if (p < 0) throw ContractError("sparse_to_matrix: unknown label " + std::to_string(l));
    rp.push_back(p);
    nr *= T.dims[p];
  }
  for (int l : cols) {
    int p = label_pos(T.labels, l);
    if (p < 0) throw ContractError("sparse_to_matrix: unknown label " + std::to_string(l));
    cp.push_back(p);
    nc *= T.dims[p];
  }
  if (nr > std::numeric_limits<int>::max() || nc > std::numeric_limits<int>::max())
    throw FeasibilityError("sparse_to_matrix: dimension exceeds index range", static_cast<double>(nr) * nc);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(T.nnz());
  for (size_t t = 0; t < T.nnz(); ++t) {
    auto idx = T.unpack(T.keys[t]);
    long r = 0, c = 0;
    for (int p : rp) r = r * T.dims[p] + idx[p];
    for (int p : cp) c = c * T.dims[p] + idx[p];
    trip.emplace_back(static_cast<int>(r), static_cast<int>(c), T.vals[t]);
  }
  SpMatR M(static_cast<int>(nr), static_cast<int>(nc));
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// ---------------------------------------------------------------- dense ops

MatC kron(const MatC& A, const MatC& B) {
  MatC K(A.rows() * B.rows(), A.cols() * B.cols());
  for (long i = 0; i < A.rows(); ++i)
    for (long j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

MatR kron(const MatR& A, const MatR& B) {
  MatR K(A.rows() * B.rows(), A.cols() * B.cols());
  for (long i = 0; i < A.rows(); ++i)
    for (long j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

SpMatC kron(const SpMatC& A, const SpMatC& B) {
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<size_t>(A.nonZeros()) * B.nonZeros());
  for (int i = 0; i < A.outerSize(); ++i)
    for (SpMatC::InnerIterator a(A, i); a; ++a)
      for (int k = 0; k < B.outerSize(); ++k)
        for (SpMatC::InnerIterator b(B, k); b; ++b)
          trip.emplace_back(static_cast<int>(a.row() * B.rows() + b.row()),
                            static_cast<int>(a.col() * B.cols() + b.col()), a.value() * b.value());
  SpMatC K(A.rows() * B.rows(), A.cols() * B.cols());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

MatC dagger(const MatC& A) { return A.adjoint(); }

VecC vectorize(const MatC& Q) {
  if (Q.rows() != Q.cols()) throw ContractError("vectorize: operator must be square");
  const long d = Q.rows();
  VecC v(d * d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) v(i * d + j) = Q(i, j);
  return v;
}

MatC devectorize(const VecC& v, int d) {
  if (v.size() != static_cast<long>(d) * d) throw ContractError("devectorize: length is not d^2");
  MatC Q(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) Q(i, j) = v(i * d + j);
  return Q;
}

MatC partial_trace(const MatC& M, const std::vector<int>& dims, const std::vector<int>& keep) {
  long D = 1;
  for (int d : dims) D *= d;
  if (M.rows() != D || M.cols() != D) throw ContractError("partial_trace: operator does not match factor dims");
  FactorMap kmap(dims, keep);
  const long dk = kmap.local_dim();
  // base() of kmap enumerates the traced factors and offset() the kept ones
  MatC out = MatC::Zero(dk, dk);
  for (long s : kmap.base())
    for (long a = 0; a < dk; ++a)
      for (long b = 0; b < dk; ++b) out(a, b) += M(s + kmap.offset()[a], s + kmap.offset()[b]);
  return out;
}

bool is_hermitian(const MatC& M, double tol) {
  if (M.rows() != M.cols()) return false;
  double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

Spectrum hermitian_spectrum(const MatC& M) {
  if (!is_hermitian(M)) throw ContractError("hermitian_spectrum: input is not Hermitian");
  MatC H = 0.5 * (M + M.adjoint());
  Eigen::SelfAdjointEigenSolver<MatC> es(H);
  if (es.info() != Eigen::Success) throw ConvergenceError("hermitian_spectrum: eigensolver failed", 0.0);
  return {es.eigenvalues(), es.eigenvectors()};
}

MatC matrix_function_hermitian(const MatC& M, const std::function<double(double)>& f) {
  Spectrum s = hermitian_spectrum(M);
  VecC fv(s.values.size());
  for (long i = 0; i < s.values.size(); ++i) fv(i) = f(s.values(i));
  return s.vectors * fv.asDiagonal() * s.vectors.adjoint();
}

MatC matrix_exp_hermitian(const MatC& M, double t) {
  return matrix_function_hermitian(M, [t](double x) { return std::exp(t * x); });
}

double operator_norm(const MatC& M) {
  if (M.size() == 0) return 0.0;
  Eigen::BDCSVD<MatC> svd(M);
  return svd.singularValues()(0);
}

int numerical_rank(const MatC& M, double rel_cut) {
  if (M.size() == 0) return 0;
  Eigen::BDCSVD<MatC> svd(M);
  const VecR& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  int r = 0;
  for (long i = 0; i < s.size(); ++i)
    if (s(i) > rel_cut * s(0)) ++r;
  return r;
}

MatC column_basis(const MatC& V, double rel_cut) {
  if (V.size() == 0) return MatC(V.rows(), 0);
  Eigen::BDCSVD<MatC> svd(V, Eigen::ComputeThinU);
  const VecR& s = svd.singularValues();
  int r = 0;
  if (s(0) > 0)
    for (long i = 0; i < s.size(); ++i)
      if (s(i) > rel_cut * s(0)) ++r;
  return svd.matrixU().leftCols(r);
}

MatC projector_onto_columns(const MatC& V, double rel_cut) {
  MatC U = column_basis(V, rel_cut);
  return U * U.adjoint();
}

double largest_principal_angle(const MatC& U, const MatC& W) {
  if (U.cols() != W.cols()) return M_PI / 2;
  if (U.cols() == 0) return 0.0;
  // sine form keeps accuracy for nearly equal subspaces
  double s = operator_norm(W - U * (U.adjoint() * W));
  return std::asin(std::clamp(s, 0.0, 1.0));
}

MatC random_matrix(int r, int c, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  MatC M(r, c);
  for (long j = 0; j < c; ++j)
    for (long i = 0; i < r; ++i) {
      double re = nd(rng);
      double im = nd(rng);
      M(i, j) = cplx(re, im);
    }
  return M;
}

MatC random_hermitian(int d, Rng& rng) {
  MatC A = random_matrix(d, d, rng);
  return 0.5 * (A + A.adjoint());
}

MatC random_psd(int d, Rng& rng) {
  MatC A = random_matrix(d, d, rng);
  return A * A.adjoint();
}

VecC random_vector(int d, Rng& rng) { return random_matrix(d, 1, rng).col(0); }

MatC random_isometry(int d, int k, Rng& rng) {
  MatC A = random_matrix(d, k, rng);
  Eigen::HouseholderQR<MatC> qr(A);
  return qr.householderQ() * MatC::Identity(d, k);
}

// ---------------------------------------------------------------- matrix-free

LinearMap dense_map(const MatC& M) {
  return {M.rows(), [M](const VecC& x, VecC& y) { y.noalias() = M * x; }};
}

LinearMap sparse_map(const SpMatC& M) {
  return {M.rows(), [M](const VecC& x, VecC& y) { y = M * x; }};
}

double linearity_defect(const LinearMap& A, Rng& rng, int probes) {
  double worst = 0;
  for (int t = 0; t < probes; ++t) {
    VecC x = random_vector(static_cast<int>(A.dim), rng), y = random_vector(static_cast<int>(A.dim), rng);
    cplx a(0.3, -1.1), b(-0.7, 0.4);
    VecC lhs = A(a * x + b * y), rhs = a * A(x) + b * A(y);
    double scale = std::max(1e-300, rhs.norm());
    worst = std::max(worst, (lhs - rhs).norm() / scale);
  }
  return worst;
}

MatC materialize(const LinearMap& A) {
  MatC M(A.dim, A.dim);
  VecC e = VecC::Zero(A.dim), y(A.dim);
  for (long j = 0; j < A.dim; ++j) {
    e.setZero();
    e(j) = 1.0;
    y.setZero();
    A.apply(e, y);
    M.col(j) = y;
  }
  return M;
}

namespace {

EigResult dense_lowest(const LinearMap& A, const EigOptions& opt) {
  MatC M = materialize(A);
  M = 0.5 * (M + M.adjoint());
  MatC C;  // orthonormal basis of the complement of the deflation span
  if (opt.deflate.cols() > 0) {
    Eigen::HouseholderQR<MatC> qr(opt.deflate);
    MatC Q = qr.householderQ();
    C = Q.rightCols(A.dim - opt.deflate.cols());
  } else {
    C = MatC::Identity(A.dim, A.dim);
  }
  MatC Mr = C.adjoint() * M * C;
  Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (Mr + Mr.adjoint()));
  EigResult r;
  r.method = "dense";
  r.matvecs = A.dim;
  int k = std::min<long>(opt.k, Mr.rows());
  MatC X = C * es.eigenvectors().leftCols(k);
  for (int i = 0; i < k; ++i) {
    r.values.push_back(es.eigenvalues()(i));
    VecC res = M * X.col(i) - es.eigenvalues()(i) * X.col(i);
    if (opt.deflate.cols() > 0) res -= opt.deflate * (opt.deflate.adjoint() * res);
    r.residuals.push_back(res.norm());
  }
  if (opt.want_vectors) r.vectors = X;
  return r;
}

// Orthogonalizes v against the columns of Q and V[:, 0:m] (two passes).
double orthogonalize(VecC& v, const MatC& Q, const MatC& V, long m) {
  double n0 = v.norm();
  for (int pass = 0; pass < 2; ++pass) {
    if (Q.cols() > 0) v.noalias() -= Q * (Q.adjoint() * v);
    if (m > 0) v.noalias() -= V.leftCols(m) * (V.leftCols(m).adjoint() * v);
  }
  return n0 > 0 ? v.norm() / n0 : 0.0;
}

}  // namespace

EigResult lowest_eigs(const LinearMap& A, const EigOptions& opt) {
  const long n = A.dim;
  if (opt.k < 1) throw ContractError("lowest_eigs: k must be positive");
  if (opt.k > n - opt.deflate.cols()) throw ContractError("lowest_eigs: k exceeds the deflated dimension");
  if (n <= opt.dense_threshold) return dense_lowest(A, opt);
  Rng rng(opt.seed);
  const long maxb = std::max(opt.max_basis, opt.k + 8);
  MatC Q = opt.deflate;  // deflation plus locked vectors
  MatC V(n, maxb), W(n, maxb);
  long m = 0;
  EigResult res;
  res.method = "davidson";
  std::vector<VecC> locked;
  VecC v = random_vector(static_cast<int>(n), rng);
  VecC w(n);
  double last_res = std::numeric_limits<double>::infinity();
  while (true) {
    if (orthogonalize(v, Q, V, m) < 1e-8) {
      v = random_vector(static_cast<int>(n), rng);
      orthogonalize(v, Q, V, m);
    }
    v /= v.norm();
    w.setZero();
    A.apply(v, w);
    ++res.matvecs;
    V.col(m) = v;
    W.col(m) = w;
    ++m;
    MatC T = V.leftCols(m).adjoint() * W.leftCols(m);
    T = 0.5 * (T + T.adjoint());
    Eigen::SelfAdjointEigenSolver<MatC> es(T);
    const VecR& th = es.eigenvalues();
    const MatC& Y = es.eigenvectors();
    VecC x = V.leftCols(m) * Y.col(0);
    VecC r = W.leftCols(m) * Y.col(0) - th(0) * x;
    if (Q.cols() > 0) r.noalias() -= Q * (Q.adjoint() * r);
    double rn = r.norm();
    last_res = rn;
    if (rn <= opt.tol) {
      res.values.push_back(th(0));
      res.residuals.push_back(rn);
      x /= x.norm();
      locked.push_back(x);
      if (static_cast<int>(locked.size()) == opt.k) break;
      Q.conservativeResize(n, Q.cols() + 1);
      Q.col(Q.cols() - 1) = x;
      // keep the remaining Ritz vectors
      long keep = m - 1;
      MatC Vn = V.leftCols(m) * Y.rightCols(keep);
      MatC Wn = W.leftCols(m) * Y.rightCols(keep);
      V.leftCols(keep) = Vn;
      W.leftCols(keep) = Wn;
      m = keep;
      if (m > 0) {
        // next target: residual of the new lowest Ritz pair
        VecC y = W.col(0) - th(1) * V.col(0);
        v = y;
      } else {
        v = random_vector(static_cast<int>(n), rng);
      }
      continue;
    }
    if (res.matvecs >= opt.max_matvecs)
      throw ConvergenceError("lowest_eigs: no convergence after " + std::to_string(res.matvecs) +
                                 " applications, residual " + std::to_string(rn),
                             rn);
    if (m == maxb) {
      long keep = std::max<long>(opt.k + 2, maxb / 3);
      MatC Vn = V.leftCols(m) * Y.leftCols(keep);
      MatC Wn = W.leftCols(m) * Y.leftCols(keep);
      V.leftCols(keep) = Vn;
      W.leftCols(keep) = Wn;
      m = keep;
    }
    v = r;
  }
  (void)last_res;
  if (opt.want_vectors) {
    res.vectors.resize(n, static_cast<long>(locked.size()));
    for (size_t i = 0; i < locked.size(); ++i) res.vectors.col(static_cast<long>(i)) = locked[i];
  }
  return res;
}

EigResult highest_eigs(const LinearMap& A, const EigOptions& opt) {
  LinearMap neg{A.dim, [&A](const VecC& x, VecC& y) {
                  A.apply(x, y);
                  y = -y;
                }};
  EigResult r = lowest_eigs(neg, opt);
  for (double& v : r.values) v = -v;
  return r;
}

double hermitian_norm(const LinearMap& A, const EigOptions& opt) {
  EigOptions o = opt;
  o.k = 1;
  double lo = lowest_eigs(A, o).values[0];
  double hi = highest_eigs(A, o).values[0];
  return std::max(std::abs(lo), std::abs(hi));
}

double operator_norm_power(const LinearMap& A, const LinearMap& Adag, const EigOptions& opt) {
  LinearMap AtA{A.dim, [&](const VecC& x, VecC& y) {
                  VecC t = VecC::Zero(A.dim);
                  A.apply(x, t);
                  Adag.apply(t, y);
                }};
  EigOptions o = opt;
  o.k = 1;
  double l = highest_eigs(AtA, o).values[0];
  return std::sqrt(std::max(0.0, l));
}

// ---------------------------------------------------------------- FactorMap

FactorMap::FactorMap(const std::vector<int>& dims, const std::vector<int>& local) {
  const int r = static_cast<int>(dims.size());
  std::vector<long> stride(r, 1);
  for (int i = r - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];
  dim_ = r ? stride[0] * dims[0] : 1;
  std::vector<char> is_local(r, 0);
  for (int p : local) {
    if (p < 0 || p >= r || is_local[p]) throw ContractError("FactorMap: bad local factor list");
    is_local[p] = 1;
  }
  std::vector<int> spect;
  for (int i = 0; i < r; ++i)
    if (!is_local[i]) spect.push_back(i);
  auto enumerate = [&](const std::vector<int>& pos) {
    std::vector<long> out{0};
    for (int p : pos) {
      std::vector<long> next;
      next.reserve(out.size() * dims[p]);
      for (long o : out)
        for (int d = 0; d < dims[p]; ++d) next.push_back(o + d * stride[p]);
      out.swap(next);
    }
    return out;
  };
  off_ = enumerate(local);
  base_ = enumerate(spect);
}

void FactorMap::apply_add(const SpMatC& op, const VecC& x, VecC& y) const {
  const long L = local_dim();
  if (op.rows() != L || op.cols() != L) throw ContractError("FactorMap: operator size mismatch");
  for (long b : base_)
    for (int r = 0; r < op.outerSize(); ++r) {
      cplx acc = 0;
      for (SpMatC::InnerIterator it(op, r); it; ++it) acc += it.value() * x(b + off_[it.col()]);
      y(b + off_[r]) += acc;
    }
}

void FactorMap::apply_add(const MatC& op, const VecC& x, VecC& y) const {
  const long L = local_dim(), S = spectator_count();
  if (op.rows() != L || op.cols() != L) throw ContractError("FactorMap: operator size mismatch");
  MatC X(L, S);
  for (long s = 0; s < S; ++s)
    for (long l = 0; l < L; ++l) X(l, s) = x(base_[s] + off_[l]);
  MatC Y = op * X;
  for (long s = 0; s < S; ++s)
    for (long l = 0; l < L; ++l) y(base_[s] + off_[l]) += Y(l, s);
}

void FactorMap::apply_projector_add(const MatC& U, const VecC& x, VecC& y, double scale) const {
  const long L = local_dim(), S = spectator_count();
  if (U.rows() != L) throw ContractError("FactorMap: isometry size mismatch");
  MatC X(L, S);
  for (long s = 0; s < S; ++s)
    for (long l = 0; l < L; ++l) X(l, s) = x(base_[s] + off_[l]);
  MatC C = U.adjoint() * X;
  MatC Y = U * C;
  for (long s = 0; s < S; ++s)
    for (long l = 0; l < L; ++l) y(base_[s] + off_[l]) += scale * Y(l, s);
}

MatC FactorMap::gather(const VecC& x) const {
  const long L = local_dim(), S = spectator_count();
  MatC X(L, S);
  for (long s = 0; s < S; ++s)
    for (long l = 0; l < L; ++l) X(l, s) = x(base_[s] + off_[l]);
  return X;
}

void FactorMap::scatter_add(const MatC& Y, VecC& y, double scale) const {
  const long L = local_dim(), S = spectator_count();
  if (Y.rows() != L || Y.cols() != S) throw ContractError("FactorMap: scatter shape mismatch");
  for (long s = 0; s < S; ++s)
    for (long l = 0; l < L; ++l) y(base_[s] + off_[l]) += scale * Y(l, s);
}

}  // namespace qdlab

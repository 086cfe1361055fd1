// linalg.hpp
// Dense and sparse operators, labeled tensors, matrix functions and the
// matrix-free eigensolver used throughout.
#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qdlab {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;
using SpMatC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using SpMatR = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------- tensors

// Dense tensor with one integer label per leg. Entries are row-major: the
// first leg is the most significant index.
struct LabeledTensor {
  std::vector<int> labels;
  std::vector<int> dims;
  std::vector<cplx> data;

  LabeledTensor() = default;
  LabeledTensor(std::vector<int> labels, std::vector<int> dims);
  size_t size() const;
  int leg(int label) const;  // position of a label, -1 if absent
  cplx& at(const std::vector<int>& idx);
  cplx at(const std::vector<int>& idx) const;
  // Reorders the legs to the given label order.
  LabeledTensor permuted(const std::vector<int>& order) const;
};

struct Pairing {
  int t1, leg1, t2, leg2;
};

// Full contraction of a network. Paired legs are summed; the free legs are
// returned in the order they appear (tensor by tensor, leg by leg). Pairs are
// contracted greedily by the smallest intermediate.
LabeledTensor contract(const std::vector<LabeledTensor>& tensors, const std::vector<Pairing>& pairings);

// Contraction of two tensors over all labels they share.
LabeledTensor contract_pair(const LabeledTensor& A, const LabeledTensor& B);

// Real sparse tensor in coordinate form. Keys pack the multi-index in mixed
// radix with the first leg most significant.
struct SparseTensor {
  std::vector<int> labels;
  std::vector<int> dims;
  std::vector<uint64_t> keys;
  std::vector<double> vals;

  size_t nnz() const { return vals.size(); }
  uint64_t volume() const;
  void push(const std::vector<int>& idx, double v);
  std::vector<int> unpack(uint64_t key) const;
  // Merges duplicate keys and drops entries with |v| <= drop.
  void compress(double drop = 0.0);
};

SparseTensor sparse_contract_pair(const SparseTensor& A, const SparseTensor& B);
// Contracts all shared labels of a network greedily; labels must appear at
// most twice. The result keeps the open labels in the order requested.
SparseTensor sparse_contract_network(std::vector<SparseTensor> tensors, const std::vector<int>& open_order);
// Matrix with rows indexed by row_labels and columns by col_labels.
SpMatR sparse_to_matrix(const SparseTensor& T, const std::vector<int>& row_labels,
                        const std::vector<int>& col_labels);

// Groups of columns that are linked through shared nonzero rows. Columns in
// different groups have disjoint supports, so V^T V is block diagonal.
std::vector<std::vector<int>> column_blocks(const SpMatR& V);

// ---------------------------------------------------------------- dense ops

MatC kron(const MatC& A, const MatC& B);
MatR kron(const MatR& A, const MatR& B);
SpMatC kron(const SpMatC& A, const SpMatC& B);
MatC dagger(const MatC& A);
// |Q> = sum_ij Q_ij |i>|j>
VecC vectorize(const MatC& Q);
MatC devectorize(const VecC& v, int d);
MatC partial_trace(const MatC& M, const std::vector<int>& dims, const std::vector<int>& keep);

bool is_hermitian(const MatC& M, double tol = 1e-12);
struct Spectrum {
  VecR values;  // ascending
  MatC vectors;
};
Spectrum hermitian_spectrum(const MatC& M);
MatC matrix_function_hermitian(const MatC& M, const std::function<double(double)>& f);
MatC matrix_exp_hermitian(const MatC& M, double t);
double operator_norm(const MatC& M);
// Numerical rank with cutoff sigma <= rel_cut * sigma_max.
int numerical_rank(const MatC& M, double rel_cut = 1e-10);
// Orthonormal basis of the column space, rank decided at the cutoff above.
MatC column_basis(const MatC& V, double rel_cut = 1e-10);
MatC projector_onto_columns(const MatC& V, double rel_cut = 1e-10);
// Largest principal angle between the column spans of two orthonormal bases.
double largest_principal_angle(const MatC& U, const MatC& W);

MatC random_matrix(int r, int c, Rng& rng);
MatC random_hermitian(int d, Rng& rng);
MatC random_psd(int d, Rng& rng);
VecC random_vector(int d, Rng& rng);
MatC random_isometry(int d, int k, Rng& rng);

// ---------------------------------------------------------------- matrix-free

struct LinearMap {
  long dim = 0;
  std::function<void(const VecC& x, VecC& y)> apply;  // y = A x, y is resized by the caller
  VecC operator()(const VecC& x) const {
    VecC y = VecC::Zero(dim);
    apply(x, y);
    return y;
  }
};

LinearMap dense_map(const MatC& M);
LinearMap sparse_map(const SpMatC& M);
// Relative linearity defect on random probes.
double linearity_defect(const LinearMap& A, Rng& rng, int probes = 3);
MatC materialize(const LinearMap& A);

struct EigOptions {
  int k = 1;
  double tol = 1e-9;       // residual norm
  uint64_t seed = 1;
  int max_basis = 40;
  long max_matvecs = 20000;
  MatC deflate;            // orthonormal columns projected out of the problem
  bool want_vectors = false;
  long dense_threshold = 4096;  // dims at or below use a dense solve
};

struct EigResult {
  std::vector<double> values;
  std::vector<double> residuals;
  MatC vectors;
  long matvecs = 0;
  std::string method;
};

// k lowest eigenvalues of a Hermitian map restricted to the complement of the
// deflation vectors.
EigResult lowest_eigs(const LinearMap& A, const EigOptions& opt);
EigResult highest_eigs(const LinearMap& A, const EigOptions& opt);
// max |lambda| of a Hermitian map.
double hermitian_norm(const LinearMap& A, const EigOptions& opt);
// Largest singular value from the Hermitian map A^dag A.
double operator_norm_power(const LinearMap& A, const LinearMap& Adag, const EigOptions& opt);

// ---------------------------------------------------------------- factor spaces

// Index bookkeeping for operators that act on a subset of tensor factors. The
// space is a product of factors, the first most significant. `local` lists the
// acted-on factor positions, in the order that defines the local index.
class FactorMap {
 public:
  FactorMap(const std::vector<int>& dims, const std::vector<int>& local);
  long dim() const { return dim_; }
  long local_dim() const { return static_cast<long>(off_.size()); }
  long spectator_count() const { return static_cast<long>(base_.size()); }
  const std::vector<long>& base() const { return base_; }
  const std::vector<long>& offset() const { return off_; }

  // y += (op on local factors) x
  void apply_add(const SpMatC& op, const VecC& x, VecC& y) const;
  void apply_add(const MatC& op, const VecC& x, VecC& y) const;
  // y += U (U^dag x) locally, for an isometry U with local_dim rows.
  void apply_projector_add(const MatC& U, const VecC& x, VecC& y, double scale = 1.0) const;
  // x reshaped to (local x spectator) and back.
  MatC gather(const VecC& x) const;
  void scatter_add(const MatC& Y, VecC& y, double scale = 1.0) const;

 private:
  long dim_ = 1;
  std::vector<long> base_;
  std::vector<long> off_;
};

}  // namespace qdlab

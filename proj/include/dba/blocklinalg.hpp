#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace dba {

using Vec = Eigen::VectorXd;
using DenseMat = Eigen::MatrixXd;
using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Sparse matrix in canonical compressed row form: entries sorted by
/// (row, col), duplicates summed, no explicit zeros.
class SparseMat {
 public:
  SparseMat() = default;
  SparseMat(int rows, int cols);

  /// Duplicate (row, col) entries are summed. Throws DimensionMismatch on
  /// out-of-range indices.
  static SparseMat from_triplets(int rows, int cols, std::span<const Triplet> entries);
  static SparseMat from_dense(const DenseMat& dense, double drop_tol = 0.0);
  static SparseMat identity(int n);
  /// Canonicalizes an Eigen sparse matrix (explicit zeros dropped).
  static SparseMat from_eigen(const SparseRowMat& m);

  int rows() const { return static_cast<int>(mat_.rows()); }
  int cols() const { return static_cast<int>(mat_.cols()); }
  std::size_t nnz() const { return static_cast<std::size_t>(mat_.nonZeros()); }
  double density() const;

  const SparseRowMat& eigen() const { return mat_; }
  std::vector<Triplet> triplets() const;
  DenseMat to_dense() const { return DenseMat(mat_); }
  SparseMat transpose() const;

  /// Exact bit comparison of canonical forms.
  bool operator==(const SparseMat& other) const;

 private:
  explicit SparseMat(SparseRowMat m);
  SparseRowMat mat_;
};

/// Symmetric dense matrix stored as its lower triangle, row-major:
/// (0,0), (1,0), (1,1), (2,0), ...
class SymDense {
 public:
  SymDense() = default;
  explicit SymDense(int dim);
  SymDense(int dim, std::vector<double> lower);
  static SymDense from_full(const DenseMat& full);

  int dim() const { return dim_; }
  double operator()(int i, int j) const;
  void set(int i, int j, double value);
  const std::vector<double>& lower() const { return lower_; }
  DenseMat to_full() const;

  static std::size_t packed_size(int dim) {
    return static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim + 1) / 2;
  }

 private:
  static std::size_t index(int i, int j);
  int dim_ = 0;
  std::vector<double> lower_;
};

/// A matrix-represented linear map. The canonical sparse form is always
/// kept; a dense copy is used for products when density exceeds 25%.
class LinearMap {
 public:
  static constexpr double kDenseThreshold = 0.25;

  LinearMap() = default;
  explicit LinearMap(SparseMat sparse);
  static LinearMap zero(int rows, int cols) { return LinearMap(SparseMat(rows, cols)); }
  static LinearMap from_dense(const DenseMat& dense) { return LinearMap(SparseMat::from_dense(dense)); }

  int rows() const { return sparse_.rows(); }
  int cols() const { return sparse_.cols(); }
  bool dense_storage() const { return dense_ != nullptr; }

  const SparseMat& sparse() const { return sparse_; }
  DenseMat to_dense() const;

  Vec apply(const Vec& x) const;
  Vec apply_adjoint(const Vec& y) const;
  /// out += alpha * (this) x
  void apply_add(const Vec& x, Vec& out, double alpha = 1.0) const;
  void apply_adjoint_add(const Vec& y, Vec& out, double alpha = 1.0) const;

  /// this * this^T, dense.
  DenseMat gram() const;
  /// this * other^T, dense.
  DenseMat times_adjoint(const LinearMap& other) const;
  /// this^T * W * this for a dense symmetric W (rows x rows), dense result.
  DenseMat congruence(const DenseMat& w) const;

  bool identical(const LinearMap& other) const { return sparse_ == other.sparse_; }

 private:
  SparseMat sparse_;
  std::shared_ptr<const DenseMat> dense_;
};

/// B = [B_1; ...; B_N], a non-owning view; all blocks share a column count.
class StackedOp {
 public:
  StackedOp() = default;
  explicit StackedOp(std::vector<const LinearMap*> blocks);

  std::size_t num_blocks() const { return blocks_.size(); }
  const LinearMap& block(std::size_t i) const { return *blocks_[i]; }
  int rows() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int cols() const { return cols_; }
  int row_offset(std::size_t i) const { return offsets_[i]; }

  Vec apply(const Vec& x) const;
  /// Sum of B_i^T y_i, accumulated in block order.
  Vec apply_adjoint(const Vec& y) const;
  DenseMat to_dense() const;

 private:
  std::vector<const LinearMap*> blocks_;
  std::vector<int> offsets_;
  int cols_ = 0;
};

/// B̄ = diag(B̄_1, ..., B̄_N), a non-owning view.
class BlockDiagOp {
 public:
  BlockDiagOp() = default;
  explicit BlockDiagOp(std::vector<const LinearMap*> blocks);

  std::size_t num_blocks() const { return blocks_.size(); }
  const LinearMap& block(std::size_t i) const { return *blocks_[i]; }
  int rows() const { return row_offsets_.empty() ? 0 : row_offsets_.back(); }
  int cols() const { return col_offsets_.empty() ? 0 : col_offsets_.back(); }
  int row_offset(std::size_t i) const { return row_offsets_[i]; }
  int col_offset(std::size_t i) const { return col_offsets_[i]; }

  Vec apply(const Vec& x) const;
  Vec apply_adjoint(const Vec& y) const;
  DenseMat to_dense() const;

 private:
  std::vector<const LinearMap*> blocks_;
  std::vector<int> row_offsets_;
  std::vector<int> col_offsets_;
};

/// Cholesky factor of a symmetric positive-definite matrix. Immutable after
/// construction; copies share the factorization and solves are reentrant.
class CholFactor {
 public:
  static constexpr double kPivotTolerance = 1e-13;

  CholFactor() = default;
  /// Throws NotPositiveDefinite if a pivot is <= 1e-13 * max diagonal.
  static CholFactor factor(const DenseMat& s);
  static CholFactor factor(const SparseMat& s);

  int dim() const { return dim_; }
  bool empty() const { return dim_ == 0 && !dense_ && !sparse_; }
  Vec solve(const Vec& h) const;
  DenseMat solve(const DenseMat& h) const;

 private:
  struct SparseImpl;
  int dim_ = 0;
  std::shared_ptr<const Eigen::LLT<DenseMat>> dense_;
  std::shared_ptr<const SparseImpl> sparse_;
};

using LinearOperator = std::function<Vec(const Vec&)>;

struct PcgResult {
  Vec x;
  int iters = 0;
  double relres = 0.0;
  bool converged = false;
};

/// Preconditioned conjugate gradients for an SPD operator. `precond` applies
/// an approximation of the inverse; pass nullptr for none. Throws Breakdown
/// when <p, apply(p)> <= 0.
PcgResult pcg_solve(const LinearOperator& apply, const Vec& h, const LinearOperator& precond, double tol,
                    int maxit, const Vec* x0 = nullptr);

struct PowerResult {
  double value = 0.0;
  int iters = 0;
  bool converged = false;
};

/// Largest eigenvalue of a symmetric PSD operator by power iteration from
/// the normalized all-ones vector.
PowerResult power_lambda_max(const LinearOperator& apply, int dim, double tol = 1e-8, int maxit = 500);

/// Spectral norm sqrt(lambda_max(C C^T)).
double op_norm_2(const LinearMap& c, double tol = 1e-8, int maxit = 500);
double op_norm_2(const DenseMat& c, double tol = 1e-8, int maxit = 500);

}  // namespace dba

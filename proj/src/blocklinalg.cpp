#include "dba/blocklinalg.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <string>

#include "dba/errors.hpp"
#include "dba/parallel.hpp"

namespace dba {

// ---------------------------------------------------------------- SparseMat

SparseMat::SparseMat(int rows, int cols) : mat_(rows, cols) { mat_.makeCompressed(); }

SparseMat::SparseMat(SparseRowMat m) : mat_(std::move(m)) {
  mat_.prune(0.0, 0.0);
  mat_.makeCompressed();
}

SparseMat SparseMat::from_triplets(int rows, int cols, std::span<const Triplet> entries) {
  if (rows < 0 || cols < 0) throw DimensionMismatch("negative matrix dimension");
  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      throw DimensionMismatch("triplet (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                              ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    t.emplace_back(e.row, e.col, e.value);
  }
  SparseRowMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return SparseMat(std::move(m));
}

SparseMat SparseMat::from_dense(const DenseMat& dense, double drop_tol) {
  SparseRowMat m = dense.sparseView(1.0, drop_tol);
  return SparseMat(std::move(m));
}

SparseMat SparseMat::from_eigen(const SparseRowMat& m) {
  // A storage-order round trip sorts the inner indices.
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> col = m;
  return SparseMat(SparseRowMat(col));
}

SparseMat SparseMat::identity(int n) {
  SparseRowMat m(n, n);
  m.setIdentity();
  return SparseMat(std::move(m));
}

double SparseMat::density() const {
  const double total = static_cast<double>(rows()) * static_cast<double>(cols());
  return total > 0 ? static_cast<double>(nnz()) / total : 0.0;
}

std::vector<Triplet> SparseMat::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (int r = 0; r < mat_.outerSize(); ++r)
    for (SparseRowMat::InnerIterator it(mat_, r); it; ++it) out.push_back({r, static_cast<int>(it.col()), it.value()});
  return out;
}

SparseMat SparseMat::transpose() const {
  SparseRowMat t = mat_.transpose();
  return SparseMat(std::move(t));
}

bool SparseMat::operator==(const SparseMat& other) const {
  if (rows() != other.rows() || cols() != other.cols() || nnz() != other.nnz()) return false;
  const auto n = static_cast<std::size_t>(mat_.nonZeros());
  const auto rows_n = static_cast<std::size_t>(mat_.outerSize()) + 1;
  return std::equal(mat_.outerIndexPtr(), mat_.outerIndexPtr() + rows_n, other.mat_.outerIndexPtr()) &&
         std::equal(mat_.innerIndexPtr(), mat_.innerIndexPtr() + n, other.mat_.innerIndexPtr()) &&
         std::equal(mat_.valuePtr(), mat_.valuePtr() + n, other.mat_.valuePtr());
}

// ----------------------------------------------------------------- SymDense

SymDense::SymDense(int dim) : dim_(dim), lower_(packed_size(dim), 0.0) {}

SymDense::SymDense(int dim, std::vector<double> lower) : dim_(dim), lower_(std::move(lower)) {
  if (lower_.size() != packed_size(dim))
    throw DimensionMismatch("packed symmetric matrix of order " + std::to_string(dim) + " needs " +
                            std::to_string(packed_size(dim)) + " values, got " + std::to_string(lower_.size()));
}

SymDense SymDense::from_full(const DenseMat& full) {
  if (full.rows() != full.cols()) throw DimensionMismatch("symmetric matrix must be square");
  SymDense s(static_cast<int>(full.rows()));
  for (int i = 0; i < s.dim_; ++i)
    for (int j = 0; j <= i; ++j) s.lower_[index(i, j)] = 0.5 * (full(i, j) + full(j, i));
  return s;
}

std::size_t SymDense::index(int i, int j) {
  if (i < j) std::swap(i, j);
  return static_cast<std::size_t>(i) * static_cast<std::size_t>(i + 1) / 2 + static_cast<std::size_t>(j);
}

double SymDense::operator()(int i, int j) const { return lower_[index(i, j)]; }

void SymDense::set(int i, int j, double value) { lower_[index(i, j)] = value; }

DenseMat SymDense::to_full() const {
  DenseMat m(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = lower_[index(i, j)];
  return m;
}

// ---------------------------------------------------------------- LinearMap

LinearMap::LinearMap(SparseMat sparse) : sparse_(std::move(sparse)) {
  if (sparse_.rows() > 0 && sparse_.cols() > 0 && sparse_.density() > kDenseThreshold)
    dense_ = std::make_shared<const DenseMat>(sparse_.to_dense());
}

DenseMat LinearMap::to_dense() const { return dense_ ? *dense_ : sparse_.to_dense(); }

Vec LinearMap::apply(const Vec& x) const {
  Vec out = Vec::Zero(rows());
  apply_add(x, out);
  return out;
}

Vec LinearMap::apply_adjoint(const Vec& y) const {
  Vec out = Vec::Zero(cols());
  apply_adjoint_add(y, out);
  return out;
}

void LinearMap::apply_add(const Vec& x, Vec& out, double alpha) const {
  if (x.size() != cols() || out.size() != rows()) throw DimensionMismatch("LinearMap::apply size mismatch");
  if (dense_)
    out.noalias() += alpha * (*dense_) * x;
  else
    out.noalias() += alpha * (sparse_.eigen() * x);
}

void LinearMap::apply_adjoint_add(const Vec& y, Vec& out, double alpha) const {
  if (y.size() != rows() || out.size() != cols()) throw DimensionMismatch("LinearMap::apply_adjoint size mismatch");
  if (dense_)
    out.noalias() += alpha * dense_->transpose() * y;
  else
    out.noalias() += alpha * (sparse_.eigen().transpose() * y);
}

DenseMat LinearMap::gram() const { return times_adjoint(*this); }

DenseMat LinearMap::times_adjoint(const LinearMap& other) const {
  if (cols() != other.cols()) throw DimensionMismatch("times_adjoint: column counts differ");
  if (!dense_ && !other.dense_) {
    SparseRowMat p = sparse_.eigen() * SparseRowMat(other.sparse_.eigen().transpose());
    return DenseMat(p);
  }
  return to_dense() * other.to_dense().transpose();
}

DenseMat LinearMap::congruence(const DenseMat& w) const {
  if (w.rows() != rows() || w.cols() != rows()) throw DimensionMismatch("congruence: weight size mismatch");
  if (dense_) return dense_->transpose() * w * (*dense_);
  const auto& s = sparse_.eigen();
  DenseMat ws = w * s;  // rows x cols
  return DenseMat(s.transpose() * ws);
}

// ---------------------------------------------------------------- StackedOp

StackedOp::StackedOp(std::vector<const LinearMap*> blocks) : blocks_(std::move(blocks)) {
  offsets_.assign(1, 0);
  cols_ = blocks_.empty() ? 0 : blocks_.front()->cols();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i]->cols() != cols_)
      throw DimensionMismatch("stacked block " + std::to_string(i) + " has " + std::to_string(blocks_[i]->cols()) +
                              " columns, expected " + std::to_string(cols_));
    offsets_.push_back(offsets_.back() + blocks_[i]->rows());
  }
}

Vec StackedOp::apply(const Vec& x) const {
  Vec out = Vec::Zero(rows());
  for_each_index(blocks_.size(), [&](std::size_t i) {
    Vec seg = blocks_[i]->apply(x);
    out.segment(offsets_[i], seg.size()) = seg;
  });
  return out;
}

Vec StackedOp::apply_adjoint(const Vec& y) const {
  std::vector<Vec> parts(blocks_.size());
  for_each_index(blocks_.size(), [&](std::size_t i) {
    parts[i] = blocks_[i]->apply_adjoint(y.segment(offsets_[i], blocks_[i]->rows()));
  });
  Vec out = Vec::Zero(cols_);
  for (const auto& p : parts) out += p;
  return out;
}

DenseMat StackedOp::to_dense() const {
  DenseMat m(rows(), cols_);
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    m.middleRows(offsets_[i], blocks_[i]->rows()) = blocks_[i]->to_dense();
  return m;
}

// -------------------------------------------------------------- BlockDiagOp

BlockDiagOp::BlockDiagOp(std::vector<const LinearMap*> blocks) : blocks_(std::move(blocks)) {
  row_offsets_.assign(1, 0);
  col_offsets_.assign(1, 0);
  for (const auto* b : blocks_) {
    row_offsets_.push_back(row_offsets_.back() + b->rows());
    col_offsets_.push_back(col_offsets_.back() + b->cols());
  }
}

Vec BlockDiagOp::apply(const Vec& x) const {
  Vec out = Vec::Zero(rows());
  for_each_index(blocks_.size(), [&](std::size_t i) {
    out.segment(row_offsets_[i], blocks_[i]->rows()) =
        blocks_[i]->apply(x.segment(col_offsets_[i], blocks_[i]->cols()));
  });
  return out;
}

Vec BlockDiagOp::apply_adjoint(const Vec& y) const {
  Vec out = Vec::Zero(cols());
  for_each_index(blocks_.size(), [&](std::size_t i) {
    out.segment(col_offsets_[i], blocks_[i]->cols()) =
        blocks_[i]->apply_adjoint(y.segment(row_offsets_[i], blocks_[i]->rows()));
  });
  return out;
}

DenseMat BlockDiagOp::to_dense() const {
  DenseMat m = DenseMat::Zero(rows(), cols());
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    m.block(row_offsets_[i], col_offsets_[i], blocks_[i]->rows(), blocks_[i]->cols()) = blocks_[i]->to_dense();
  return m;
}

// --------------------------------------------------------------- CholFactor

struct CholFactor::SparseImpl {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

namespace {

void check_pivots(const Vec& factor_diag, double max_diag, int dim) {
  const double tol = CholFactor::kPivotTolerance * std::max(max_diag, 0.0);
  for (int k = 0; k < dim; ++k) {
    const double pivot = factor_diag[k] * factor_diag[k];
    if (!(pivot > tol) || !std::isfinite(pivot))
      throw NotPositiveDefinite("Cholesky pivot " + std::to_string(k) + " = " + std::to_string(pivot) +
                                " below tolerance " + std::to_string(tol));
  }
}

}  // namespace

CholFactor CholFactor::factor(const DenseMat& s) {
  if (s.rows() != s.cols()) throw DimensionMismatch("Cholesky of a non-square matrix");
  CholFactor f;
  f.dim_ = static_cast<int>(s.rows());
  if (f.dim_ == 0) return f;
  auto llt = std::make_shared<Eigen::LLT<DenseMat>>(s);
  if (llt->info() != Eigen::Success) throw NotPositiveDefinite("Cholesky failed: matrix is not positive definite");
  check_pivots(llt->matrixLLT().diagonal(), s.diagonal().maxCoeff(), f.dim_);
  f.dense_ = std::move(llt);
  return f;
}

CholFactor CholFactor::factor(const SparseMat& s) {
  if (s.rows() != s.cols()) throw DimensionMismatch("Cholesky of a non-square matrix");
  CholFactor f;
  f.dim_ = s.rows();
  if (f.dim_ == 0) return f;
  auto impl = std::make_shared<SparseImpl>();
  Eigen::SparseMatrix<double> colmajor = s.eigen();
  impl->llt.compute(colmajor);
  if (impl->llt.info() != Eigen::Success) throw NotPositiveDefinite("sparse Cholesky failed: matrix is not positive definite");
  Vec ldiag = Eigen::SparseMatrix<double>(impl->llt.matrixL()).diagonal();
  check_pivots(ldiag, Vec(colmajor.diagonal()).maxCoeff(), f.dim_);
  f.sparse_ = std::move(impl);
  return f;
}

Vec CholFactor::solve(const Vec& h) const {
  if (h.size() != dim_) throw DimensionMismatch("CholFactor::solve size mismatch");
  if (dim_ == 0) return Vec();
  if (dense_) return dense_->solve(h);
  return sparse_->llt.solve(h);
}

DenseMat CholFactor::solve(const DenseMat& h) const {
  if (h.rows() != dim_) throw DimensionMismatch("CholFactor::solve size mismatch");
  if (dim_ == 0) return DenseMat(0, h.cols());
  if (dense_) return dense_->solve(h);
  return sparse_->llt.solve(h);
}

// ---------------------------------------------------------------------- PCG

PcgResult pcg_solve(const LinearOperator& apply, const Vec& h, const LinearOperator& precond, double tol, int maxit,
                    const Vec* x0) {
  PcgResult res;
  const double hnorm = h.norm();
  res.x = x0 ? *x0 : Vec::Zero(h.size());
  if (hnorm == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }
  Vec r = h - (x0 ? apply(res.x) : Vec::Zero(h.size()));
  res.relres = r.norm() / hnorm;
  if (res.relres <= tol) {
    res.converged = true;
    return res;
  }
  Vec z = precond ? precond(r) : r;
  Vec p = z;
  double rz = r.dot(z);
  for (int k = 1; k <= maxit; ++k) {
    Vec q = apply(p);
    const double curvature = p.dot(q);
    if (!(curvature > 0.0)) throw Breakdown("PCG breakdown: non-positive curvature " + std::to_string(curvature));
    const double alpha = rz / curvature;
    res.x.noalias() += alpha * p;
    r.noalias() -= alpha * q;
    res.iters = k;
    res.relres = r.norm() / hnorm;
    if (res.relres <= tol) {
      res.converged = true;
      return res;
    }
    z = precond ? precond(r) : r;
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return res;
}

// ---------------------------------------------------------- power iteration

PowerResult power_lambda_max(const LinearOperator& apply, int dim, double tol, int maxit) {
  PowerResult res;
  if (dim == 0) {
    res.converged = true;
    return res;
  }
  Vec v = Vec::Ones(dim) / std::sqrt(static_cast<double>(dim));
  double lambda = 0.0;
  double prev_step = 0.0;
  for (int k = 1; k <= maxit; ++k) {
    Vec w = apply(v);
    const double next = v.dot(w);
    const double wn = w.norm();
    res.iters = k;
    if (wn == 0.0) {
      res.value = 0.0;
      res.converged = true;
      return res;
    }
    v = w / wn;
    if (k > 1) {
      // The Rayleigh quotients approach lambda_max geometrically; estimate
      // the remaining gap from the ratio of successive steps.
      const double step = std::abs(next - lambda);
      const double scale = std::abs(next);
      bool done = step <= 1e-15 * scale;
      if (!done && k > 2 && prev_step > 0.0 && step <= tol * scale) {
        const double q = step / prev_step;
        done = q < 1.0 && step * q / (1.0 - q) <= tol * scale;
      }
      prev_step = step;
      if (done) {
        res.value = std::max(next, v.dot(apply(v)));
        res.converged = true;
        return res;
      }
    }
    lambda = next;
  }
  res.value = lambda;
  return res;
}

double op_norm_2(const LinearMap& c, double tol, int maxit) {
  auto r = power_lambda_max([&](const Vec& v) { return c.apply(c.apply_adjoint(v)); }, c.rows(), tol, maxit);
  return std::sqrt(std::max(r.value, 0.0));
}

double op_norm_2(const DenseMat& c, double tol, int maxit) {
  auto r = power_lambda_max([&](const Vec& v) -> Vec { return c * (c.transpose() * v); },
                            static_cast<int>(c.rows()), tol, maxit);
  return std::sqrt(std::max(r.value, 0.0));
}

}  // namespace dba

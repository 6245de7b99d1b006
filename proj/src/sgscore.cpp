#include "dba/sgscore.hpp"

#include <cmath>
#include <numeric>

#include "dba/errors.hpp"
#include "dba/parallel.hpp"

namespace dba {

// ================================================================== sGS

namespace {

std::vector<int> block_offsets(const std::vector<int>& dims) {
  std::vector<int> off(dims.size() + 1, 0);
  for (std::size_t i = 0; i < dims.size(); ++i) off[i + 1] = off[i] + dims[i];
  return off;
}

}  // namespace

SgsBlockQ SgsBlockQ::from_dense(const DenseMat& q, std::vector<int> dims) {
  const auto off = block_offsets(dims);
  if (q.rows() != off.back() || q.cols() != off.back())
    throw DimensionMismatch("sGS operator size does not match its block dimensions");
  auto mat = std::make_shared<DenseMat>(q);
  auto factors = std::make_shared<std::vector<CholFactor>>(dims.size());
  for (std::size_t i = 1; i < dims.size(); ++i)
    (*factors)[i] = CholFactor::factor(DenseMat(q.block(off[i], off[i], dims[i], dims[i])));
  SgsBlockQ out;
  out.dims = std::move(dims);
  out.diag_solve = [factors](int i, const Vec& r) { return (*factors)[i].solve(r); };
  out.diag_apply = [mat, off](int i, const Vec& x) -> Vec {
    return mat->block(off[i], off[i], off[i + 1] - off[i], off[i + 1] - off[i]) * x;
  };
  out.off_apply = [mat, off](int i, int j, const Vec& xj) -> Vec {
    return mat->block(off[i], off[j], off[i + 1] - off[i], off[j + 1] - off[j]) * xj;
  };
  out.off_adjoint = [mat, off](int i, int j, const Vec& xi) -> Vec {
    return mat->block(off[i], off[j], off[i + 1] - off[i], off[j + 1] - off[j]).transpose() * xi;
  };
  return out;
}

SgsSweepResult sgs_sweep(const SgsBlockQ& q, const std::function<Vec(const Vec&)>& prox1, const std::vector<Vec>& z,
                         const std::vector<Vec>& c) {
  const int s = q.groups();
  if (s < 2) throw DimensionMismatch("sGS sweep needs at least two block groups");
  if (static_cast<int>(z.size()) != s || static_cast<int>(c.size()) != s)
    throw DimensionMismatch("sGS sweep: point and linear term must have one entry per block");

  SgsSweepResult out;
  out.x.resize(s);
  out.x_backward.resize(s);
  out.delta_prime.resize(s);
  out.delta.resize(s);
  out.delta_prime[0] = Vec::Zero(q.dims[0]);
  out.delta[0] = Vec::Zero(q.dims[0]);

  // Backward pass: i = s..2 against z for earlier blocks.
  for (int i = s - 1; i >= 1; --i) {
    Vec rhs = c[i];
    for (int j = 0; j < i; ++j) rhs -= q.off_adjoint(j, i, z[j]);
    for (int j = i + 1; j < s; ++j) rhs -= q.off_apply(i, j, out.x_backward[j]);
    out.x_backward[i] = q.diag_solve(i, rhs);
    out.delta_prime[i] = q.diag_apply(i, out.x_backward[i]) - rhs;
  }

  Vec r1 = c[0];
  for (int j = 1; j < s; ++j) r1 -= q.off_apply(0, j, out.x_backward[j]);
  out.x[0] = prox1(r1);

  // Forward pass: i = 2..s against the new values.
  for (int i = 1; i < s; ++i) {
    Vec rhs = c[i];
    for (int j = 0; j < i; ++j) rhs -= q.off_adjoint(j, i, out.x[j]);
    for (int j = i + 1; j < s; ++j) rhs -= q.off_apply(i, j, out.x_backward[j]);
    out.x[i] = q.diag_solve(i, rhs);
    out.delta[i] = q.diag_apply(i, out.x[i]) - rhs;
  }
  return out;
}

namespace {

void split_ud(const DenseMat& q, const std::vector<int>& dims, DenseMat& u, DenseMat& d) {
  const auto off = block_offsets(dims);
  const int n = off.back();
  u = DenseMat::Zero(n, n);
  d = DenseMat::Zero(n, n);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    d.block(off[i], off[i], dims[i], dims[i]) = q.block(off[i], off[i], dims[i], dims[i]);
    for (std::size_t j = i + 1; j < dims.size(); ++j)
      u.block(off[i], off[j], dims[i], dims[j]) = q.block(off[i], off[j], dims[i], dims[j]);
  }
}

}  // namespace

DenseMat sgs_operator_dense(const DenseMat& q, const std::vector<int>& dims) {
  DenseMat u, d;
  split_ud(q, dims, u, d);
  return u * d.ldlt().solve(u.transpose());
}

Vec sgs_perturbation(const DenseMat& q, const std::vector<int>& dims, const std::vector<Vec>& delta_prime,
                     const std::vector<Vec>& delta) {
  const auto off = block_offsets(dims);
  Vec dp = Vec::Zero(off.back());
  Vec dd = Vec::Zero(off.back());
  for (std::size_t i = 1; i < dims.size(); ++i) {
    dp.segment(off[i], dims[i]) = delta_prime[i];
    dd.segment(off[i], dims[i]) = delta[i];
  }
  DenseMat u, d;
  split_ud(q, dims, u, d);
  return dd + u * d.ldlt().solve(Vec(dd - dp));
}

// ============================================================ M-system

std::string to_string(MStrategy s) {
  switch (s) {
    case MStrategy::Auto:
      return "auto";
    case MStrategy::DirectCholesky:
      return "chol";
    case MStrategy::SmwExact:
      return "smw";
    case MStrategy::SmwDiagonal:
      return "smw-diag";
    case MStrategy::BlockDiagJ:
      return "block-diag";
    case MStrategy::SharedBlock:
      return "shared";
    case MStrategy::UflAnalytic:
      return "ufl";
  }
  return "?";
}

MStrategy parse_mstrategy(const std::string& name) {
  for (auto s : {MStrategy::Auto, MStrategy::DirectCholesky, MStrategy::SmwExact, MStrategy::SmwDiagonal,
                 MStrategy::BlockDiagJ, MStrategy::SharedBlock, MStrategy::UflAnalytic})
    if (to_string(s) == name) return s;
  throw DimensionMismatch("unknown strategy '" + name + "'");
}

bool shared_coupling_blocks(const DBAProblem& problem) {
  for (std::size_t i = 1; i < problem.N(); ++i)
    if (!problem.scenarios[i].B.identical(problem.scenarios[0].B)) return false;
  return true;
}

bool shared_recourse_blocks(const DBAProblem& problem) {
  for (std::size_t i = 1; i < problem.N(); ++i)
    if (!problem.scenarios[i].Bbar.identical(problem.scenarios[0].Bbar)) return false;
  return true;
}

namespace {

LinearMap ufl_recourse_map(int p) {
  std::vector<Triplet> t;
  for (int j = 0; j < p; ++j) {
    t.push_back({0, j, 1.0});
    t.push_back({1 + j, j, -1.0});
    t.push_back({1 + j, p + j, -1.0});
  }
  return LinearMap(SparseMat::from_triplets(1 + p, 2 * p, t));
}

}  // namespace

bool ufl_recourse_pattern(const DBAProblem& problem) {
  if (problem.N() == 0) return false;
  const auto& b0 = problem.scenarios[0].Bbar;
  const int p = b0.rows() - 1;
  if (p < 1 || b0.cols() != 2 * p) return false;
  if (!b0.identical(ufl_recourse_map(p))) return false;
  return shared_recourse_blocks(problem);
}

DenseMat ufl_bbt_inverse(int p) {
  DenseMat w = DenseMat::Zero(1 + p, 1 + p);
  w.bottomRightCorner(p, p).diagonal().setConstant(0.5);
  Vec a(1 + p);
  a(0) = 2.0;
  a.tail(p).setOnes();
  w += (a * a.transpose()) / (2.0 * p);
  return w;
}

MStrategy auto_strategy(const DBAProblem& problem) {
  const int mbar = problem.layout().mbar();
  if (mbar < 5000) return MStrategy::DirectCholesky;
  if (shared_coupling_blocks(problem) && ufl_recourse_pattern(problem)) return MStrategy::UflAnalytic;
  if (shared_coupling_blocks(problem)) return MStrategy::SharedBlock;
  if (mbar < 50000) return MStrategy::SmwExact;
  return MStrategy::SmwDiagonal;
}

namespace {

constexpr double kSpectralTol = 1e-12;
constexpr int kSpectralMaxit = 20000;
// Fixed chunk so the accumulation order of G never depends on the worker count.
constexpr std::size_t kReduceChunk = 8;

/// Inverse of one diagonal block D̄_i (or Ē_i).
struct BlockInverse {
  enum class Kind { Factor, Scalar, Matrix } kind = Kind::Factor;
  CholFactor factor;
  double scalar = 1.0;  // D = scalar·I
  DenseMat matrix;      // explicit inverse

  Vec solve(const Vec& h) const {
    switch (kind) {
      case Kind::Factor:
        return factor.solve(h);
      case Kind::Scalar:
        return h / scalar;
      case Kind::Matrix:
        return matrix * h;
    }
    return h;
  }
  DenseMat solve(const DenseMat& h) const {
    switch (kind) {
      case Kind::Factor:
        return factor.solve(h);
      case Kind::Scalar:
        return h / scalar;
      case Kind::Matrix:
        return matrix * h;
    }
    return h;
  }
};

DenseMat recourse_gram(const ScenarioBlock& s) { return s.Bbar.gram(); }

}  // namespace

struct MSolver::Impl {
  const DBAProblem* problem = nullptr;
  Layout layout;
  MStrategy strategy = MStrategy::DirectCholesky;
  std::string description;

  // J̄ = diag(jdiag_i) - (minus_bbt ? BB* : 0); empty jdiag_i means 0.
  std::vector<DenseMat> jdiag;
  bool minus_bbt = false;

  // Direct path.
  CholFactor m_factor;

  // SMW paths: D̄_i inverses (possibly shared) and G.
  std::vector<std::shared_ptr<const BlockInverse>> dinv;
  bool shared_b = false;
  bool shared_dinv = false;
  CholFactor g_factor;
  bool g_iterative = false;
  Vec g_jacobi;
  double pcg_tol = 1e-10;
  int pcg_maxit = 1000;

  // BlockDiagJ path: Ē_i inverses.
  std::vector<std::shared_ptr<const BlockInverse>> einv;

  Vec stacked_Bt(const Vec& y) const { return problem->B().apply_adjoint(y); }

  Vec apply_G(const Vec& x) const {
    const std::size_t n = layout.N;
    if (shared_b && shared_dinv) {
      const auto& b1 = problem->scenarios[0].B;
      return x + static_cast<double>(n) * b1.apply_adjoint(dinv[0]->solve(b1.apply(x)));
    }
    std::vector<Vec> parts(n);
    for_each_index(n, [&](std::size_t i) {
      const auto& bi = problem->scenarios[i].B;
      parts[i] = bi.apply_adjoint(dinv[i]->solve(bi.apply(x)));
    });
    Vec out = x;
    for (const auto& p : parts) out += p;
    return out;
  }

  Vec smw_solve(const Vec& h, MSolveStats* stats, double pcg_tol) const {
    const std::size_t n = layout.N;
    Vec u(layout.mbar());
    for_each_index(n, [&](std::size_t i) {
      u.segment(layout.y_off[i], layout.m(i)) = dinv[i]->solve(Vec(h.segment(layout.y_off[i], layout.m(i))));
    });
    const Vec g = stacked_Bt(u);
    Vec s;
    if (g_iterative) {
      const Vec& jac = g_jacobi;
      auto res = pcg_solve([&](const Vec& x) { return apply_G(x); }, g,
                           [&](const Vec& x) { return Vec(x.cwiseQuotient(jac)); }, pcg_tol, pcg_maxit);
      s = std::move(res.x);
      if (stats) stats->pcg_iters += res.iters;
    } else {
      s = g_factor.solve(g);
    }
    Vec out = u;
    if (shared_b && shared_dinv) {
      const Vec w = dinv[0]->solve(problem->scenarios[0].B.apply(s));
      for (std::size_t i = 0; i < n; ++i) out.segment(layout.y_off[i], layout.m(i)) -= w;
    } else {
      for_each_index(n, [&](std::size_t i) {
        out.segment(layout.y_off[i], layout.m(i)) -= dinv[i]->solve(problem->scenarios[i].B.apply(s));
      });
    }
    return out;
  }

  Vec block_solve(const Vec& h) const {
    Vec out(layout.mbar());
    for_each_index(layout.N, [&](std::size_t i) {
      out.segment(layout.y_off[i], layout.m(i)) = einv[i]->solve(Vec(h.segment(layout.y_off[i], layout.m(i))));
    });
    return out;
  }
};

MStrategy MSolver::strategy() const { return impl_->strategy; }
const std::string& MSolver::description() const { return impl_->description; }
int MSolver::dim() const { return impl_->layout.mbar(); }

Vec MSolver::apply_J(const Vec& y) const {
  const Impl& m = *impl_;
  const Layout& l = m.layout;
  Vec out = Vec::Zero(l.mbar());
  for_each_index(l.N, [&](std::size_t i) {
    if (m.jdiag[i].size() > 0)
      out.segment(l.y_off[i], l.m(i)) = m.jdiag[i] * y.segment(l.y_off[i], l.m(i));
  });
  if (m.minus_bbt) out -= m.problem->B().apply(m.problem->B().apply_adjoint(y));
  return out;
}

Vec MSolver::apply(const Vec& y) const {
  const Impl& m = *impl_;
  const Layout& l = m.layout;
  Vec out = m.problem->B().apply(m.problem->B().apply_adjoint(y));
  for_each_index(l.N, [&](std::size_t i) {
    const auto& bb = m.problem->scenarios[i].Bbar;
    out.segment(l.y_off[i], l.m(i)) += bb.apply(bb.apply_adjoint(Vec(y.segment(l.y_off[i], l.m(i)))));
  });
  return out + apply_J(y);
}

Vec MSolver::solve(const Vec& h, MSolveStats* stats, double pcg_tol) const {
  const Impl& m = *impl_;
  if (h.size() != m.layout.mbar()) throw DimensionMismatch("msolve: right-hand side has wrong length");
  if (pcg_tol <= 0.0) pcg_tol = m.pcg_tol;
  Vec y;
  switch (m.strategy) {
    case MStrategy::DirectCholesky:
      y = m.m_factor.solve(h);
      break;
    case MStrategy::BlockDiagJ:
      y = m.block_solve(h);
      break;
    default:
      y = m.smw_solve(h, stats, pcg_tol);
  }
  if (stats) {
    const double hn = h.norm();
    stats->relres = hn > 0 ? (apply(y) - h).norm() / hn : 0.0;
  }
  return y;
}

DenseMat MSolver::J_dense() const {
  const Impl& m = *impl_;
  const Layout& l = m.layout;
  DenseMat j = DenseMat::Zero(l.mbar(), l.mbar());
  for (std::size_t i = 0; i < l.N; ++i)
    if (m.jdiag[i].size() > 0) j.block(l.y_off[i], l.y_off[i], l.m(i), l.m(i)) = m.jdiag[i];
  if (m.minus_bbt) {
    const DenseMat b = m.problem->B().to_dense();
    j -= b * b.transpose();
  }
  return j;
}

DenseMat MSolver::M_dense() const {
  const Impl& m = *impl_;
  const DenseMat b = m.problem->B().to_dense();
  const DenseMat bb = m.problem->Bbar().to_dense();
  return b * b.transpose() + bb * bb.transpose() + J_dense();
}

namespace {

SparseRowMat stacked_sparse(const DBAProblem& problem) {
  const Layout l = problem.layout();
  std::vector<Eigen::Triplet<double, int>> t;
  for (std::size_t i = 0; i < l.N; ++i)
    for (const auto& e : problem.scenarios[i].B.sparse().triplets())
      t.emplace_back(l.y_off[i] + e.row, e.col, e.value);
  SparseRowMat m(l.mbar(), l.n0);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseRowMat blockdiag_sparse(const DBAProblem& problem) {
  const Layout l = problem.layout();
  std::vector<Eigen::Triplet<double, int>> t;
  for (std::size_t i = 0; i < l.N; ++i)
    for (const auto& e : problem.scenarios[i].Bbar.sparse().triplets())
      t.emplace_back(l.y_off[i] + e.row, l.x_off[i] + e.col, e.value);
  SparseRowMat m(l.mbar(), l.nbar());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

double lambda_max_gram(const LinearMap& c) {
  auto r = power_lambda_max([&](const Vec& v) { return c.apply(c.apply_adjoint(v)); }, c.rows(), kSpectralTol,
                            kSpectralMaxit);
  return r.value;
}

/// Σ_{j≠i} ||B_iB_j*||₂ for every i.
std::vector<double> pairwise_norm_sums(const DBAProblem& problem) {
  const std::size_t n = problem.N();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> norms(pairs.size());
  for_each_index(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const DenseMat c = problem.scenarios[i].B.times_adjoint(problem.scenarios[j].B);
    norms[k] = op_norm_2(c, kSpectralTol, kSpectralMaxit);
  });
  std::vector<double> sums(n, 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    sums[pairs[k].first] += norms[k];
    sums[pairs[k].second] += norms[k];
  }
  return sums;
}

void assemble_dense_G(MSolver::Impl& m, const DBAProblem& problem) {
  const Layout& l = m.layout;
  DenseMat g = DenseMat::Identity(l.n0, l.n0);
  if (m.shared_b) {
    // G = I + B_1^* (Σ D̄_i⁻¹) B_1, or N·B_1^* D̄_1⁻¹ B_1 when D̄ is shared too.
    const auto& b1 = problem.scenarios[0].B;
    const DenseMat b1d = b1.to_dense();
    if (m.shared_dinv) {
      g += static_cast<double>(l.N) * (b1d.transpose() * m.dinv[0]->solve(b1d));
    } else {
      const int m1 = b1.rows();
      DenseMat sum = DenseMat::Zero(m1, m1);
      const DenseMat eye = DenseMat::Identity(m1, m1);
      for (std::size_t i = 0; i < l.N; ++i) sum += m.dinv[i]->solve(eye);
      g += b1d.transpose() * sum * b1d;
    }
  } else {
    for (std::size_t start = 0; start < l.N; start += kReduceChunk) {
      const std::size_t count = std::min(kReduceChunk, l.N - start);
      std::vector<DenseMat> parts(count);
      for_each_index(count, [&](std::size_t k) {
        const auto& bi = problem.scenarios[start + k].B;
        parts[k] = bi.sparse().eigen().transpose() * m.dinv[start + k]->solve(bi.to_dense());
      });
      for (const auto& p : parts) g += p;
    }
  }
  g = 0.5 * (g + g.transpose());
  m.g_factor = CholFactor::factor(g);
}

void prepare_iterative_G(MSolver::Impl& m, const DBAProblem& problem) {
  const Layout& l = m.layout;
  m.g_iterative = true;
  std::vector<Vec> parts(l.N);
  const std::size_t blocks = m.shared_b && m.shared_dinv ? 1 : l.N;
  for_each_index(blocks, [&](std::size_t i) {
    const DenseMat bi = problem.scenarios[i].B.to_dense();
    const DenseMat w = m.dinv[i]->solve(bi);
    parts[i] = bi.cwiseProduct(w).colwise().sum().transpose();
  });
  m.g_jacobi = Vec::Ones(l.n0);
  if (blocks == 1)
    m.g_jacobi += static_cast<double>(l.N) * parts[0];
  else
    for (std::size_t i = 0; i < l.N; ++i) m.g_jacobi += parts[i];
}

std::shared_ptr<const BlockInverse> factor_dbar(const DenseMat& d, std::size_t i, const char* strategy) {
  auto inv = std::make_shared<BlockInverse>();
  try {
    inv->factor = CholFactor::factor(d);
  } catch (const NotPositiveDefinite&) {
    throw StrategyPrecondition(std::string(strategy) + " requires B̄_iB̄_i* + J̄_i positive definite; scenario block " +
                               std::to_string(i + 1) + " is singular");
  }
  return inv;
}

}  // namespace

MSolver build_msolver(const DBAProblem& problem, const MSolverOptions& options) {
  auto impl = std::make_shared<MSolver::Impl>();
  MSolver::Impl& m = *impl;
  m.problem = &problem;
  m.layout = problem.layout();
  const Layout& l = m.layout;
  m.strategy = options.strategy == MStrategy::Auto ? auto_strategy(problem) : options.strategy;
  m.jdiag.assign(l.N, DenseMat());
  m.pcg_tol = options.pcg_tol;
  m.pcg_maxit = options.pcg_maxit;
  if (options.alpha < 0.0) throw StrategyPrecondition("alpha must be nonnegative");

  auto alpha_J = [&] {
    if (options.alpha > 0.0)
      for (std::size_t i = 0; i < l.N; ++i)
        m.jdiag[i] = options.alpha * DenseMat::Identity(l.m(i), l.m(i));
  };

  switch (m.strategy) {
    case MStrategy::DirectCholesky: {
      alpha_J();
      SparseRowMat b = stacked_sparse(problem);
      SparseRowMat bb = blockdiag_sparse(problem);
      SparseRowMat mm = SparseRowMat(b * b.transpose()) + SparseRowMat(bb * bb.transpose());
      if (options.alpha > 0.0) {
        SparseRowMat eye(l.mbar(), l.mbar());
        eye.setIdentity();
        mm += options.alpha * eye;
      }
      m.m_factor = CholFactor::factor(SparseMat::from_eigen(mm));
      m.description = "direct Cholesky of M";
      break;
    }
    case MStrategy::SmwExact:
    case MStrategy::SharedBlock: {
      const bool shared = m.strategy == MStrategy::SharedBlock;
      if (shared && !shared_coupling_blocks(problem))
        throw StrategyPrecondition("shared strategy requires identical coupling blocks B_i");
      alpha_J();
      m.shared_b = shared;
      m.shared_dinv = shared && shared_recourse_blocks(problem);
      m.dinv.resize(l.N);
      const char* name = shared ? "shared" : "smw";
      if (m.shared_dinv) {
        DenseMat d = recourse_gram(problem.scenarios[0]);
        d.diagonal().array() += options.alpha;
        auto inv = factor_dbar(d, 0, name);
        for (auto& p : m.dinv) p = inv;
      } else {
        for_each_index(l.N, [&](std::size_t i) {
          DenseMat d = recourse_gram(problem.scenarios[i]);
          d.diagonal().array() += options.alpha;
          m.dinv[i] = factor_dbar(d, i, name);
        });
      }
      if (l.n0 <= options.g_direct_max)
        assemble_dense_G(m, problem);
      else
        prepare_iterative_G(m, problem);
      m.description = shared ? (m.shared_dinv ? "SMW, shared B_i and B̄_i" : "SMW, shared B_i") : "SMW, exact D̄_i";
      break;
    }
    case MStrategy::UflAnalytic: {
      if (!shared_coupling_blocks(problem) || !ufl_recourse_pattern(problem))
        throw StrategyPrecondition("ufl strategy requires identical B_i and B̄_i = [e^T 0^T; -I -I]");
      if (options.alpha > 0.0) throw StrategyPrecondition("ufl strategy requires J̄ = 0");
      m.shared_b = true;
      m.shared_dinv = true;
      auto inv = std::make_shared<BlockInverse>();
      inv->kind = BlockInverse::Kind::Matrix;
      inv->matrix = ufl_bbt_inverse(l.m(0) - 1);
      m.dinv.assign(l.N, inv);
      if (l.n0 <= options.g_direct_max)
        assemble_dense_G(m, problem);
      else
        prepare_iterative_G(m, problem);
      m.description = "SMW with the analytic UFL inverse";
      break;
    }
    case MStrategy::SmwDiagonal: {
      m.dinv.resize(l.N);
      for_each_index(l.N, [&](std::size_t i) {
        const auto& bb = problem.scenarios[i].Bbar;
        const double lam = lambda_max_gram(bb);
        if (!(lam > 0.0))
          throw StrategyPrecondition("smw-diag requires nonzero B̄_i; scenario block " + std::to_string(i + 1) +
                                     " is zero");
        auto inv = std::make_shared<BlockInverse>();
        inv->kind = BlockInverse::Kind::Scalar;
        inv->scalar = lam;
        m.dinv[i] = inv;
        m.jdiag[i] = lam * DenseMat::Identity(l.m(i), l.m(i)) - bb.gram();
      });
      // G = I + Σ λ_i⁻¹ B_i^* B_i stays sparse.
      SparseRowMat g(l.n0, l.n0);
      g.setIdentity();
      for (std::size_t i = 0; i < l.N; ++i) {
        const SparseRowMat& bi = problem.scenarios[i].B.sparse().eigen();
        g += SparseRowMat(bi.transpose() * bi) / m.dinv[i]->scalar;
      }
      m.g_factor = CholFactor::factor(SparseMat::from_eigen(g));
      m.description = "SMW, D̄_i = λ_max(B̄_iB̄_i*) I";
      break;
    }
    case MStrategy::BlockDiagJ: {
      const bool use_std = options.block_diag_std || static_cast<int>(l.N) > options.block_diag_max_pairs_N;
      std::vector<double> sums;
      if (!use_std) sums = pairwise_norm_sums(problem);
      m.minus_bbt = true;
      m.einv.resize(l.N);
      for_each_index(l.N, [&](std::size_t i) {
        const auto& s = problem.scenarios[i];
        const DenseMat bbt = s.B.gram();
        DenseMat jd;
        if (use_std) {
          jd = static_cast<double>(l.N + 1) * bbt;
        } else {
          jd = bbt;
          jd.diagonal().array() += sums[i];
        }
        // Ē_i = B̄_iB̄_i* + B_iB_i* + (diagonal block of J̄) - B_iB_i*.
        DenseMat e = s.Bbar.gram() + jd;
        auto inv = std::make_shared<BlockInverse>();
        try {
          inv->factor = CholFactor::factor(DenseMat(0.5 * (e + e.transpose())));
        } catch (const NotPositiveDefinite&) {
          throw StrategyPrecondition("block-diag strategy: Ē_" + std::to_string(i + 1) + " is singular");
        }
        m.einv[i] = inv;
        m.jdiag[i] = std::move(jd);
      });
      m.description = use_std ? "block diagonal, standard J̄" : "block diagonal, pairwise-norm J̄";
      break;
    }
    case MStrategy::Auto:
      break;
  }
  MSolver out;
  out.impl_ = std::move(impl);
  return out;
}

DenseMat std_block_diag_J(const DBAProblem& problem) {
  const Layout l = problem.layout();
  const DenseMat b = problem.B().to_dense();
  DenseMat j = -b * b.transpose();
  for (std::size_t i = 0; i < l.N; ++i)
    j.block(l.y_off[i], l.y_off[i], l.m(i), l.m(i)) += static_cast<double>(l.N + 1) * problem.scenarios[i].B.gram();
  return j;
}

DenseMat pairwise_block_diag_J(const DBAProblem& problem) {
  const Layout l = problem.layout();
  const auto sums = pairwise_norm_sums(problem);
  const DenseMat b = problem.B().to_dense();
  DenseMat j = -b * b.transpose();
  for (std::size_t i = 0; i < l.N; ++i) {
    auto blk = j.block(l.y_off[i], l.y_off[i], l.m(i), l.m(i));
    blk += problem.scenarios[i].B.gram();
    blk.diagonal().array() += sums[i];
  }
  return j;
}

}  // namespace dba

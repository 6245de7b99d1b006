#pragma once

// Symmetric Gauss-Seidel block sweep and the structured solvers for
//   M ȳ = h,   M = BB* + B̄B̄* + J̄.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dba/blocklinalg.hpp"
#include "dba/model.hpp"

namespace dba {

// ------------------------------------------------------------------ sGS

/// A symmetric PSD operator split into s >= 2 block groups. Off-diagonal
/// blocks Q_{i,j} are only queried for i < j.
struct SgsBlockQ {
  std::vector<int> dims;
  /// Approximate Q_{i,i}^{-1} r, for i >= 1 (block 0 is handled by prox1).
  std::function<Vec(int i, const Vec& r)> diag_solve;
  std::function<Vec(int i, const Vec& x)> diag_apply;
  /// Q_{i,j} x_j and Q_{i,j}^* x_i for i < j.
  std::function<Vec(int i, int j, const Vec& xj)> off_apply;
  std::function<Vec(int i, int j, const Vec& xi)> off_adjoint;

  int groups() const { return static_cast<int>(dims.size()); }

  /// Exact dense blocks of a symmetric matrix; diagonal blocks factored by
  /// Cholesky (NotPositiveDefinite if a block is not PD).
  static SgsBlockQ from_dense(const DenseMat& q, std::vector<int> dims);
};

struct SgsSweepResult {
  std::vector<Vec> x;            // x⁺ per block
  std::vector<Vec> x_backward;   // x'_i, i >= 1 (x'_0 left empty)
  std::vector<Vec> delta_prime;  // δ'_i = Q_ii x'_i - (backward right-hand side)
  std::vector<Vec> delta;        // δ_i = Q_ii x⁺_i - (forward right-hand side)
};

/// One sGS sweep for min p(x_1) + ½<x,Qx> - <c,x> with proximal term
/// ½||x - z||²_{U D⁻¹ U*}. prox1(r) must return
/// argmin p(x_1) + ½<x_1,Q_11 x_1> - <r,x_1>. The recorded residuals make
/// x⁺ the exact minimizer with linear term c + Δ, Δ = δ + U D⁻¹(δ - δ'),
/// δ'_1 = δ_1 = 0.
SgsSweepResult sgs_sweep(const SgsBlockQ& q, const std::function<Vec(const Vec&)>& prox1,
                         const std::vector<Vec>& z, const std::vector<Vec>& c);

/// Dense S = U D⁻¹ U* and the perturbation Δ(δ', δ) for checking sweeps.
DenseMat sgs_operator_dense(const DenseMat& q, const std::vector<int>& dims);
Vec sgs_perturbation(const DenseMat& q, const std::vector<int>& dims, const std::vector<Vec>& delta_prime,
                     const std::vector<Vec>& delta);

// ------------------------------------------------------------- M-system

enum class MStrategy { Auto, DirectCholesky, SmwExact, SmwDiagonal, BlockDiagJ, SharedBlock, UflAnalytic };

std::string to_string(MStrategy s);
/// Accepts the CLI names auto|chol|smw|smw-diag|block-diag|shared|ufl.
MStrategy parse_mstrategy(const std::string& name);

struct MSolverOptions {
  MStrategy strategy = MStrategy::Auto;
  /// SmwExact/SharedBlock: J̄_i = alpha·I (0 gives J̄ = 0).
  double alpha = 0.0;
  /// BlockDiagJ: use J̄^std = (N+1)diag(B_iB_i*) - BB* instead of the
  /// pairwise-norm choice. Forced when N exceeds block_diag_max_pairs_N.
  bool block_diag_std = false;
  int block_diag_max_pairs_N = 64;
  /// G is factored when n0 <= this, else solved by Jacobi-PCG.
  int g_direct_max = 2000;
  double pcg_tol = 1e-10;
  int pcg_maxit = 1000;
};

/// Strategy picked by Auto: Σm_i < 5000 direct; otherwise UFL pattern,
/// shared coupling blocks, Σm_i < 50000 exact SMW, else diagonal SMW.
MStrategy auto_strategy(const DBAProblem& problem);

/// True when all B_i (and, for `bar`, all B̄_i) are bitwise identical.
bool shared_coupling_blocks(const DBAProblem& problem);
bool shared_recourse_blocks(const DBAProblem& problem);
/// True when every B̄_i equals [e^T 0^T; -I -I] for some p.
bool ufl_recourse_pattern(const DBAProblem& problem);

/// (B̄B̄*)⁻¹ for B̄ = [e^T 0^T; -I_p -I_p]:
/// [0 0; 0 ½I] + (1/2p)[2; e][2, e^T].
DenseMat ufl_bbt_inverse(int p);

struct MSolveStats {
  int pcg_iters = 0;
  double relres = 0.0;  // ||M ȳ - h|| / ||h||, when computed
};

class MSolver {
 public:
  MStrategy strategy() const;
  const std::string& description() const;
  int dim() const;

  /// M⁻¹ h. When stats is given the true residual is computed.
  Vec solve(const Vec& h, MSolveStats* stats = nullptr, double pcg_tol = 0.0) const;
  /// M y, including this solver's J̄.
  Vec apply(const Vec& y) const;
  /// J̄ y.
  Vec apply_J(const Vec& y) const;
  /// Dense J̄ and M (small problems; for testing).
  DenseMat J_dense() const;
  DenseMat M_dense() const;

  struct Impl;

 private:
  friend MSolver build_msolver(const DBAProblem&, const MSolverOptions&);
  std::shared_ptr<const Impl> impl_;
};

/// Precomputes the factors for the chosen strategy. Throws
/// StrategyPrecondition when the strategy does not apply to the problem.
/// The problem must outlive the solver.
MSolver build_msolver(const DBAProblem& problem, const MSolverOptions& options = {});

/// J̄^std = (N+1) diag(B_iB_i*) - BB*, dense.
DenseMat std_block_diag_J(const DBAProblem& problem);
/// J̄ of the pairwise-norm choice, dense.
DenseMat pairwise_block_diag_J(const DBAProblem& problem);

}  // namespace dba

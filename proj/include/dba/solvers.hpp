#pragma once

// sGS-based ADMM and proximal ALM for the dual of a DBA problem, and the
// semismooth Newton solver for the joint (z, y) block.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dba/model.hpp"
#include "dba/sgscore.hpp"

namespace dba {

enum class SolveStatus { Converged, MaxIter, Stalled };
std::string to_string(SolveStatus s);

enum class SsnMode { Auto, On, Off };
SsnMode parse_ssn_mode(const std::string& name);

struct SigmaUpdateRule {
  bool enabled = true;
  int period = 25;
  double factor = 1.4;
  double ratio = 5.0;
  double min = 1e-6;
  double max = 1e6;
};

struct SolverConfig {
  double sigma0 = 0.0;  // <= 0: 1/(1 + ||c||_inf + ||c̄||_inf)
  double tau = 0.0;     // <= 0: 1.618 for ADMM, 1.9 for ALM
  double tol_kkt = 1e-5;
  double tol_gap = 1e-4;
  int max_iter = 20000;
  double eps0 = 1e-4;
  MSolverOptions msolver;
  SigmaUpdateRule sigma_update;
  SsnMode ssn = SsnMode::Auto;
  /// (AA*)⁻¹ by Cholesky up to this m0; beyond it J = λ_max(AA*)I - AA*.
  int y_direct_max = 20000;
  int log_every = 1;
  int stall_window = 500;
  double stall_improvement = 1e-3;
  std::optional<PrimalPoint> warm_primal;
  std::optional<DualPoint> warm_dual;
};

struct LogRow {
  int k = 0;
  KktResidues r;
  double sigma = 0.0;
  int inner_iters = 0;
  // Progressive hedging only.
  std::optional<double> nonant_residual;
  std::optional<double> rel_change;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  KktResidues residues;
  PrimalPoint primal;
  DualPoint dual;
  std::vector<LogRow> log;
  double elapsed_seconds = 0.0;
  double sigma = 0.0;
  std::string msolver;
  bool ssn_used = false;
  /// Largest recorded inner residual against the ε_k cap (iterative paths).
  double max_inner_ratio = 0.0;
  /// Progressive hedging: scenario solves that ended before converging.
  int unconverged_subsolves = 0;
};

/// ε_k = eps0 / (k+1)^1.5.
double eps_schedule(int k, double eps0);

/// σ' = factor·σ when max(η_D, η_D̄) > ratio·max(η_P, η_P̄), σ/factor in the
/// opposite case, clamped; unchanged outside the period.
double sigma_update(const KktResidues& r, double sigma, int k, const SigmaUpdateRule& rule);

double default_sigma0(const DBAProblem& problem);

/// Throws InvalidConfig unless tau ∈ (0, (1+√5)/2).
void check_admm_tau(double tau);
/// Throws InvalidConfig unless tau ∈ (0, 2).
void check_alm_tau(double tau);

/// m0 <= 10, n0 <= 20, N >= 100, A present, K polyhedral.
bool ssn_auto_eligible(const DBAProblem& problem);

SolveReport admm_solve(const DBAProblem& problem, const SolverConfig& config = {});
/// Requires θ = 0 and every θ̄_i = 0 (UnsupportedObjective otherwise).
SolveReport alm_solve(const DBAProblem& problem, const SolverConfig& config = {});

struct SsnResult {
  Vec y;
  Vec z;
  int iters = 0;
  double grad_norm = 0.0;
};

/// argmin over (z, y) of -<b,y> + δ*_K(-z) + σ/2 ||z + A*y - ĉ||², via
/// y = argmin -<b,y> + σ M_{δ*_K/σ}(A*y - ĉ) by semismooth Newton and
/// z = σ⁻¹Π_K(σ(A*y - ĉ)) - (A*y - ĉ). K must be polyhedral.
SsnResult ssn_zy(const LinearMap& a, const Vec& b, const ConeSpec& k, double sigma, const Vec& chat, const Vec& y0,
                 double tol, int maxit = 100);

/// CSV header and rows; PHA columns are appended when `pha_columns`.
void write_log_csv(std::ostream& out, const std::vector<LogRow>& rows, bool pha_columns = false);

}  // namespace dba

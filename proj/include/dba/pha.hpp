#pragma once

// Progressive hedging on the primal two-stage problem, splitting the
// first-stage variable into one copy per scenario.

#include <functional>
#include <vector>

#include "dba/solvers.hpp"

namespace dba {

/// Snapshot passed to PhaConfig::observer after each outer iteration.
struct PhaIterate {
  int k = 0;
  const std::vector<Vec>* copies = nullptr;      // x_i
  const std::vector<Vec>* multipliers = nullptr;  // w_i
  const Vec* consensus = nullptr;                 // x̂
  const std::vector<double>* probabilities = nullptr;
};

struct PhaConfig {
  double rho = 0.0;  // <= 0: default_sigma0(problem)
  double tau = 1.618;
  double tol_nonant = 1e-5;
  double tol_rel = 1e-5;
  int max_iter = 2000;
  /// Subproblem tolerance = factor · tol_nonant.
  double sub_tol_factor = 0.1;
  /// Base configuration for the scenario solves (tolerances are overridden).
  SolverConfig sub;
  /// Empty: taken from metadata "probabilities", else uniform.
  std::vector<double> probabilities;
  int log_every = 1;
  std::function<void(const PhaIterate&)> observer;
};

/// Scenario probabilities: explicit, from metadata, or uniform. Throws
/// InvalidConfig when they are not positive or do not sum to 1 (1e-10).
std::vector<double> scenario_probabilities(const DBAProblem& problem, const std::vector<double>& explicit_p = {});

/// min θ(x) + <c + w,x> + (ρ/2)||x - x̂||² + (θ̄_i(x̄) + <c̄_i,x̄>)/p_i
/// s.t. Ax = b, B_i x + B̄_i x̄ = b̄_i, x ∈ K, x̄ ∈ K_i, as a one-scenario problem
/// (the constant (ρ/2)||x̂||² is dropped).
DBAProblem scenario_subproblem(const DBAProblem& problem, std::size_t i, double probability, double rho,
                               const Vec& w, const Vec& xhat);

/// Solves scenario_subproblem with admm_solve at tolerance `tol`.
SolveReport scenario_subsolve(const DBAProblem& problem, std::size_t i, double probability, const Vec& w,
                              const Vec& xhat, double rho, double tol, const SolverConfig& base = {});

/// Stops when max_i ||x_i - x̂||/(1+||x̂||) <= tol_nonant and
/// ||x̂⁺ - x̂||/(1+||x̂||) <= tol_rel. The reported point is (x̂, x̄) with the
/// probability-weighted scenario multipliers; its residues are the true KKT
/// residues of that point.
SolveReport pha_solve(const DBAProblem& problem, const PhaConfig& config = {});

}  // namespace dba

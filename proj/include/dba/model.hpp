#pragma once

// Problem data, primal/dual points and the relative KKT residual map.
//
//   min  θ(x) + <c,x> + Σ_i θ̄_i(x̄_i) + <c̄_i,x̄_i>
//   s.t. A x = b,  B_i x + B̄_i x̄_i = b̄_i,  x ∈ K,  x̄_i ∈ K_i.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dba/blocklinalg.hpp"
#include "dba/proxcone.hpp"

namespace dba {

struct ScenarioBlock {
  LinearMap B;     // m_i x n0
  LinearMap Bbar;  // m_i x n_i
  Vec bbar;
  Vec cbar;
  ConeSpec cone = FreeSpace{};
  SeparableFunction theta = ZeroFunction{};

  int m() const { return Bbar.rows(); }
  int n() const { return Bbar.cols(); }
};

/// Offsets of the stacked second-stage vectors x̄ (length n̄) and ȳ (length m̄).
struct Layout {
  int n0 = 0;
  int m0 = 0;
  std::size_t N = 0;
  std::vector<int> x_off;  // N+1 entries
  std::vector<int> y_off;  // N+1 entries
  int nbar() const { return x_off.back(); }
  int mbar() const { return y_off.back(); }
  int n(std::size_t i) const { return x_off[i + 1] - x_off[i]; }
  int m(std::size_t i) const { return y_off[i + 1] - y_off[i]; }
};

struct DBAProblem {
  std::optional<LinearMap> A;  // absent: no first-stage equality rows
  Vec b;
  Vec c;
  ConeSpec cone = FreeSpace{};
  SeparableFunction theta = ZeroFunction{};
  std::vector<ScenarioBlock> scenarios;
  std::map<std::string, std::string> metadata;

  int n0() const { return static_cast<int>(c.size()); }
  int m0() const { return A ? A->rows() : 0; }
  std::size_t N() const { return scenarios.size(); }
  Layout layout() const;

  StackedOp B() const;
  BlockDiagOp Bbar() const;
  Vec bbar_stacked() const;
  Vec cbar_stacked() const;
};

struct PrimalPoint {
  Vec x;
  Vec xbar;  // stacked per Layout::x_off

  static PrimalPoint zeros(const Layout& l);
};

struct DualPoint {
  Vec y;
  Vec ybar;  // stacked per Layout::y_off
  Vec z;
  Vec zbar;
  Vec v;
  Vec vbar;

  static DualPoint zeros(const Layout& l);
};

struct KktResidues {
  double eta_P = 0, eta_D = 0, eta_K = 0, eta_theta = 0;
  double eta_Pbar = 0, eta_Dbar = 0, eta_Kbar = 0, eta_thetabar = 0;
  double eta = 0;
  double eta_gap = 0;
  double obj_P = 0;
  double obj_D = 0;
};

struct ValidationReport {
  std::vector<std::string> warnings;
};

/// Hard dimension checks (DimensionMismatch naming the offending block);
/// rank deficiency of A or [B, B̄] is only a warning and is checked when the
/// matrices have at most 500 rows.
ValidationReport validate(const DBAProblem& problem);

void check_point_dims(const DBAProblem& problem, const PrimalPoint& p);
void check_point_dims(const DBAProblem& problem, const DualPoint& d);

/// θ(x) + <c,x> + Σ θ̄_i(x̄_i) + <c̄_i,x̄_i>, indicator parts omitted.
double primal_objective(const DBAProblem& problem, const PrimalPoint& p);

/// Dual objective of (D); -inf if any conjugate is +inf beyond the clamp
/// tolerance. The summed clamp magnitude is added to *clamp.
double dual_objective(const DBAProblem& problem, const DualPoint& d, double feas_tol = kDefaultFeasTol,
                      double* clamp = nullptr);

/// The eight relative residuals, their weighted maximum and the duality gap.
KktResidues kkt_residues(const DBAProblem& problem, const PrimalPoint& p, const DualPoint& d,
                         double feas_tol = kDefaultFeasTol);

}  // namespace dba

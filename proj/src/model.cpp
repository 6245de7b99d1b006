#include "dba/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dba/errors.hpp"
#include "dba/parallel.hpp"

namespace dba {

namespace {

void expect(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

std::string block_name(std::size_t i) { return "scenario block " + std::to_string(i + 1); }

void check_function_dim(const SeparableFunction& f, int n, const std::string& where) {
  const int d = function_dim(f);
  expect(d < 0 || d == n, where + ": function dimension " + std::to_string(d) + " != " + std::to_string(n));
}

int numeric_rank(const DenseMat& m) {
  Eigen::ColPivHouseholderQR<DenseMat> qr(m);
  return static_cast<int>(qr.rank());
}

}  // namespace

Layout DBAProblem::layout() const {
  Layout l;
  l.n0 = n0();
  l.m0 = m0();
  l.N = scenarios.size();
  l.x_off.assign(1, 0);
  l.y_off.assign(1, 0);
  for (const auto& s : scenarios) {
    l.x_off.push_back(l.x_off.back() + s.n());
    l.y_off.push_back(l.y_off.back() + s.m());
  }
  return l;
}

StackedOp DBAProblem::B() const {
  std::vector<const LinearMap*> blocks;
  blocks.reserve(scenarios.size());
  for (const auto& s : scenarios) blocks.push_back(&s.B);
  return StackedOp(std::move(blocks));
}

BlockDiagOp DBAProblem::Bbar() const {
  std::vector<const LinearMap*> blocks;
  blocks.reserve(scenarios.size());
  for (const auto& s : scenarios) blocks.push_back(&s.Bbar);
  return BlockDiagOp(std::move(blocks));
}

Vec DBAProblem::bbar_stacked() const {
  const Layout l = layout();
  Vec out(l.mbar());
  for (std::size_t i = 0; i < l.N; ++i) out.segment(l.y_off[i], l.m(i)) = scenarios[i].bbar;
  return out;
}

Vec DBAProblem::cbar_stacked() const {
  const Layout l = layout();
  Vec out(l.nbar());
  for (std::size_t i = 0; i < l.N; ++i) out.segment(l.x_off[i], l.n(i)) = scenarios[i].cbar;
  return out;
}

PrimalPoint PrimalPoint::zeros(const Layout& l) { return {Vec::Zero(l.n0), Vec::Zero(l.nbar())}; }

DualPoint DualPoint::zeros(const Layout& l) {
  return {Vec::Zero(l.m0), Vec::Zero(l.mbar()), Vec::Zero(l.n0), Vec::Zero(l.nbar()), Vec::Zero(l.n0),
          Vec::Zero(l.nbar())};
}

ValidationReport validate(const DBAProblem& problem) {
  ValidationReport report;
  const int n0 = problem.n0();
  expect(problem.N() >= 1, "problem needs at least one scenario block");
  validate_cone(problem.cone);
  expect(cone_dim(problem.cone) == n0, "first-stage cone dimension " + std::to_string(cone_dim(problem.cone)) +
                                           " != n0 = " + std::to_string(n0));
  check_function_dim(problem.theta, n0, "first-stage theta");
  if (problem.A) {
    expect(problem.A->cols() == n0, "A has " + std::to_string(problem.A->cols()) + " columns, expected n0 = " +
                                        std::to_string(n0));
    expect(problem.b.size() == problem.A->rows(),
           "b has length " + std::to_string(problem.b.size()) + ", expected m0 = " + std::to_string(problem.A->rows()));
  } else {
    expect(problem.b.size() == 0, "b given but A is absent");
  }
  for (std::size_t i = 0; i < problem.N(); ++i) {
    const auto& s = problem.scenarios[i];
    const std::string name = block_name(i);
    expect(s.B.cols() == n0, name + ": B has " + std::to_string(s.B.cols()) + " columns, expected n0 = " +
                                 std::to_string(n0));
    expect(s.B.rows() == s.Bbar.rows(), name + ": B and Bbar row counts differ (" + std::to_string(s.B.rows()) +
                                            " vs " + std::to_string(s.Bbar.rows()) + ")");
    expect(s.bbar.size() == s.m(), name + ": bbar has length " + std::to_string(s.bbar.size()) + ", expected " +
                                       std::to_string(s.m()));
    expect(s.cbar.size() == s.n(), name + ": cbar has length " + std::to_string(s.cbar.size()) + ", expected " +
                                       std::to_string(s.n()));
    validate_cone(s.cone);
    expect(cone_dim(s.cone) == s.n(), name + ": cone dimension " + std::to_string(cone_dim(s.cone)) + " != " +
                                          std::to_string(s.n()));
    check_function_dim(s.theta, s.n(), name + " theta");
  }

  constexpr int kRankCheckLimit = 500;
  if (problem.A && problem.m0() > 0 && problem.m0() <= kRankCheckLimit && n0 <= 4 * kRankCheckLimit) {
    const int r = numeric_rank(problem.A->to_dense());
    if (r < problem.m0())
      report.warnings.push_back("A appears rank deficient (rank " + std::to_string(r) + " < " +
                                std::to_string(problem.m0()) + " rows)");
  }
  const Layout l = problem.layout();
  if (l.mbar() > 0 && l.mbar() <= kRankCheckLimit && n0 + l.nbar() <= 4 * kRankCheckLimit) {
    DenseMat bb(l.mbar(), n0 + l.nbar());
    bb.leftCols(n0) = problem.B().to_dense();
    bb.rightCols(l.nbar()) = problem.Bbar().to_dense();
    const int r = numeric_rank(bb);
    if (r < l.mbar())
      report.warnings.push_back("[B, Bbar] appears rank deficient (rank " + std::to_string(r) + " < " +
                                std::to_string(l.mbar()) + " rows)");
  }
  return report;
}

void check_point_dims(const DBAProblem& problem, const PrimalPoint& p) {
  const Layout l = problem.layout();
  expect(p.x.size() == l.n0, "primal x has wrong length");
  expect(p.xbar.size() == l.nbar(), "primal xbar has wrong length");
}

void check_point_dims(const DBAProblem& problem, const DualPoint& d) {
  const Layout l = problem.layout();
  expect(d.y.size() == l.m0, "dual y has wrong length");
  expect(d.ybar.size() == l.mbar(), "dual ybar has wrong length");
  expect(d.z.size() == l.n0 && d.v.size() == l.n0, "dual z/v have wrong length");
  expect(d.zbar.size() == l.nbar() && d.vbar.size() == l.nbar(), "dual zbar/vbar have wrong length");
}

double primal_objective(const DBAProblem& problem, const PrimalPoint& p) {
  check_point_dims(problem, p);
  const Layout l = problem.layout();
  std::vector<double> parts(l.N);
  for_each_index(l.N, [&](std::size_t i) {
    const auto& s = problem.scenarios[i];
    Vec xi = p.xbar.segment(l.x_off[i], l.n(i));
    parts[i] = smooth_value(s.theta, xi) + s.cbar.dot(xi);
  });
  double value = smooth_value(problem.theta, p.x) + problem.c.dot(p.x);
  for (double v : parts) value += v;
  return value;
}

double dual_objective(const DBAProblem& problem, const DualPoint& d, double feas_tol, double* clamp) {
  check_point_dims(problem, d);
  const Layout l = problem.layout();
  std::vector<double> parts(l.N);
  std::vector<double> clamps(l.N, 0.0);
  for_each_index(l.N, [&](std::size_t i) {
    const auto& s = problem.scenarios[i];
    const Vec vi = -d.vbar.segment(l.x_off[i], l.n(i));
    const Vec zi = -d.zbar.segment(l.x_off[i], l.n(i));
    parts[i] = -conjugate_value(s.theta, vi, feas_tol, &clamps[i]) - support_value(s.cone, zi, feas_tol, &clamps[i]) +
               s.bbar.dot(d.ybar.segment(l.y_off[i], l.m(i)));
  });
  double local_clamp = 0.0;
  double value = -conjugate_value(problem.theta, -d.v, feas_tol, &local_clamp) -
                 support_value(problem.cone, -d.z, feas_tol, &local_clamp);
  if (l.m0 > 0) value += problem.b.dot(d.y);
  for (std::size_t i = 0; i < l.N; ++i) {
    value += parts[i];
    local_clamp += clamps[i];
  }
  if (clamp) *clamp += local_clamp;
  if (std::isnan(value) || value == -std::numeric_limits<double>::infinity())
    return -std::numeric_limits<double>::infinity();
  return value;
}

KktResidues kkt_residues(const DBAProblem& problem, const PrimalPoint& p, const DualPoint& d, double feas_tol) {
  check_point_dims(problem, p);
  check_point_dims(problem, d);
  const Layout l = problem.layout();
  KktResidues r;

  // Per-scenario squared norms, reduced afterwards in index order.
  struct Parts {
    double pbar = 0, dbar = 0, kbar = 0, thetabar = 0;
  };
  std::vector<Parts> parts(l.N);
  for_each_index(l.N, [&](std::size_t i) {
    const auto& s = problem.scenarios[i];
    const Vec xi = p.xbar.segment(l.x_off[i], l.n(i));
    const Vec zi = d.zbar.segment(l.x_off[i], l.n(i));
    const Vec vi = d.vbar.segment(l.x_off[i], l.n(i));
    const Vec yi = d.ybar.segment(l.y_off[i], l.m(i));
    Vec prim = s.Bbar.apply(xi) - s.bbar;
    s.B.apply_add(p.x, prim);
    Vec dual = s.Bbar.apply_adjoint(yi) + zi + vi - s.cbar;
    parts[i].pbar = prim.squaredNorm();
    parts[i].dbar = dual.squaredNorm();
    parts[i].kbar = (xi - project_cone(s.cone, xi - zi)).squaredNorm();
    parts[i].thetabar = (xi - prox(s.theta, 1.0, xi - vi)).squaredNorm();
  });
  Parts sum;
  for (const auto& q : parts) {
    sum.pbar += q.pbar;
    sum.dbar += q.dbar;
    sum.kbar += q.kbar;
    sum.thetabar += q.thetabar;
  }

  if (problem.A) r.eta_P = (problem.A->apply(p.x) - problem.b).norm() / (1.0 + problem.b.norm());
  Vec dual0 = problem.B().apply_adjoint(d.ybar) + d.z + d.v - problem.c;
  if (problem.A) problem.A->apply_adjoint_add(d.y, dual0);
  r.eta_D = dual0.norm() / (1.0 + problem.c.norm());
  r.eta_K = (p.x - project_cone(problem.cone, p.x - d.z)).norm() / (1.0 + p.x.norm() + d.z.norm());
  r.eta_theta = (p.x - prox(problem.theta, 1.0, p.x - d.v)).norm() / (1.0 + p.x.norm() + d.v.norm());

  r.eta_Pbar = std::sqrt(sum.pbar) / (1.0 + problem.bbar_stacked().norm());
  r.eta_Dbar = std::sqrt(sum.dbar) / (1.0 + problem.cbar_stacked().norm());
  r.eta_Kbar = std::sqrt(sum.kbar) / (1.0 + p.xbar.norm() + d.zbar.norm());
  r.eta_thetabar = std::sqrt(sum.thetabar) / (1.0 + p.xbar.norm() + d.vbar.norm());

  r.eta = std::max({r.eta_P, r.eta_D, 0.2 * r.eta_K, 0.2 * r.eta_theta, r.eta_Pbar, r.eta_Dbar, 0.2 * r.eta_Kbar,
                    0.2 * r.eta_thetabar});

  r.obj_P = primal_objective(problem, p);
  r.obj_D = dual_objective(problem, d, feas_tol);
  if (std::isinf(r.obj_D))
    r.eta_gap = 1.0;
  else
    r.eta_gap = std::abs(r.obj_P - r.obj_D) / (1.0 + std::abs(r.obj_P) + std::abs(r.obj_D));
  return r;
}

}  // namespace dba

// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion with its
// measured quantity and wall time; exits nonzero when any criterion fails.

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "dba/builders.hpp"
#include "dba/io.hpp"
#include "dba/parallel.hpp"
#include "dba/pha.hpp"
#include "dba/sgscore.hpp"
#include "dba/solvers.hpp"
#include "support/functions.hpp"
#include "support/instances.hpp"
#include "support/kkt_oracle.hpp"
#include "support/oracles.hpp"
#include "support/problems.hpp"
#include "support/sgs.hpp"
#include "support/solver_oracles.hpp"
#include "support/ufl_oracle.hpp"

using namespace dba;
using namespace dba::testing;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict verdict(bool ok, const std::string& detail) { return {ok ? Outcome::Pass : Outcome::Fail, detail}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SolverConfig tight(double tol) {
  SolverConfig cfg;
  cfg.tol_kkt = tol;
  cfg.tol_gap = tol;
  cfg.max_iter = 50000;
  cfg.stall_window = 0;
  return cfg;
}

SolverConfig fixed_sigma(double tol) {
  SolverConfig cfg = tight(tol);
  cfg.sigma_update.enabled = false;
  return cfg;
}

Verdict sgs_exactness() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int count = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_sgs_instance(rng, 2 + trial % 2);
    const int n = static_cast<int>(inst.q.rows());
    if (n > 12) continue;
    const Vec z = random_vec(rng, n), c = random_vec(rng, n, 2.0);
    auto blocks = SgsBlockQ::from_dense(inst.q, inst.dims);
    auto r = sgs_sweep(blocks, orthant_prox(inst.q, inst.dims[0]), split(z, inst.dims), split(c, inst.dims));
    const Vec oracle = sgs_oracle(inst, z, c, Vec::Zero(n));
    if (oracle.size() != n) return verdict(false, "oracle failed");
    worst = std::max(worst, (join(r.x) - oracle).norm() / (1 + oracle.norm()));
    ++count;
  }
  return verdict(count >= 100 && worst <= 1e-10,
                 std::to_string(count) + " instances, max rel err " + fmt("%.2e", worst));
}

Verdict smw_correctness() {
  std::mt19937_64 rng(102);
  double worst_smw = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    DBAProblem p = structured_problem(rng, 5, 3 + trial % 8);
    const DenseMat b = p.B().to_dense(), bb = p.Bbar().to_dense();
    const DenseMat m = b * b.transpose() + bb * bb.transpose();
    MSolverOptions o;
    o.strategy = MStrategy::SmwExact;
    worst_smw = std::max(worst_smw, rel_solve_err(build_msolver(p, o), m, random_vec(rng, m.rows())));
  }
  double worst_ufl = 0.0;
  for (int p : {2, 5, 10}) {
    DenseMat bb = DenseMat::Zero(1 + p, 2 * p);
    bb.row(0).head(p).setOnes();
    bb.bottomLeftCorner(p, p) = -DenseMat::Identity(p, p);
    bb.bottomRightCorner(p, p) = -DenseMat::Identity(p, p);
    const DenseMat inv = (bb * bb.transpose()).inverse();
    worst_ufl = std::max(worst_ufl, (ufl_bbt_inverse(p) - inv).cwiseAbs().maxCoeff());
  }
  return verdict(worst_smw <= 1e-8 && worst_ufl <= 1e-12,
                 "SMW rel err " + fmt("%.2e", worst_smw) + ", UFL inverse err " + fmt("%.2e", worst_ufl));
}

Verdict moreau_suite() {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> tdist(-2.0, 2.0);
  double id1 = 0.0, id2 = 0.0;
  int count = 0;
  while (count < 1000) {
    for (const auto& f : function_zoo(rng, 6)) {
      const double t = std::pow(10.0, tdist(rng));
      const Vec x = random_vec(rng, 6, 2.0);
      const Vec u = prox(f, t, x);
      const Vec w = prox_conjugate(f, t, x / t);
      id1 = std::max(id1, (x - u - t * w).norm() / (1 + x.norm()));
      const double m1 = t * smooth_value(f, u) + 0.5 * (u - x).squaredNorm();
      const double m2 = conjugate_value(f, w, 1e-9) / t + 0.5 * (w - x / t).squaredNorm();
      id2 = std::max(id2, std::abs(0.5 * x.squaredNorm() - (m1 + t * t * m2)) / (1 + x.squaredNorm()));
      ++count;
    }
  }
  double proj = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    ConeSpec k = random_cone(rng, trial, 6);
    const Vec x = random_vec(rng, 6, 3.0), y = random_vec(rng, 6, 3.0);
    const Vec px = project_cone(k, x);
    proj = std::max(proj, (project_cone(k, px) - px).norm() / (1 + px.norm()));
    proj = std::max(proj, (px - project_cone(k, y)).norm() - (x - y).norm());
  }
  double orth = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = svec(random_sym(rng, 4));
    const Vec p = project_cone(PsdCone{4}, x);
    Eigen::SelfAdjointEigenSolver<DenseMat> neg(smat(x - p)), pos(smat(p));
    orth = std::max({orth, std::abs((x - p).dot(p)), neg.eigenvalues().maxCoeff(), -pos.eigenvalues().minCoeff()});
  }
  const bool ok = id1 <= 1e-12 && id2 <= 1e-12 && proj <= 1e-10 && orth <= 1e-10;
  return verdict(ok, std::to_string(count) + " triples, prox " + fmt("%.2e", id1) + ", envelope " +
                         fmt("%.2e", id2) + ", projection " + fmt("%.2e", proj) + ", PSD " + fmt("%.2e", orth));
}

Verdict kkt_oracle() {
  std::mt19937_64 rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RandomShape shape;
    shape.m0 = trial % 3;
    shape.N = 1 + trial % 5;
    const DBAProblem p = random_problem(rng, shape);
    const Layout l = p.layout();
    const PrimalPoint x = random_primal(rng, l);
    const DualPoint d = random_dual(rng, l);
    const KktResidues r = kkt_residues(p, x, d);
    const OracleEta o = oracle_eta(p, x, d);
    for (double e : {r.eta_P - o.P, r.eta_D - o.D, r.eta_K - o.K, r.eta_theta - o.T, r.eta_Pbar - o.Pb,
                     r.eta_Dbar - o.Db, r.eta_Kbar - o.Kb, r.eta_thetabar - o.Tb, r.eta - o.eta})
      worst = std::max(worst, std::abs(e));
  }
  // min x s.t. x - s = 1, s >= 0: x = 1, ȳ = 1, z̄ = 1.
  DBAProblem p;
  p.c = Vec::Ones(1);
  p.cone = FreeSpace{1};
  ScenarioBlock blk;
  blk.B = LinearMap::from_dense(DenseMat::Ones(1, 1));
  blk.Bbar = LinearMap::from_dense(-DenseMat::Ones(1, 1));
  blk.bbar = Vec::Ones(1);
  blk.cbar = Vec::Zero(1);
  blk.cone = NonnegOrthant{1};
  p.scenarios.push_back(blk);
  // min x²/2 - x over the line: x = 1, v = -1.
  DBAProblem q;
  q.c = -Vec::Ones(1);
  q.cone = FreeSpace{1};
  q.theta = DiagQuadratic{Vec::Ones(1)};
  ScenarioBlock free_blk;
  free_blk.B = LinearMap::zero(1, 1);
  free_blk.Bbar = LinearMap::from_dense(DenseMat::Ones(1, 1));
  free_blk.bbar = Vec::Zero(1);
  free_blk.cbar = Vec::Zero(1);
  free_blk.cone = FreeSpace{1};
  q.scenarios.push_back(free_blk);

  PrimalPoint xp = PrimalPoint::zeros(p.layout());
  xp.x(0) = 1.0;
  DualPoint dp = DualPoint::zeros(p.layout());
  dp.ybar(0) = 1.0;
  dp.zbar(0) = 1.0;
  const KktResidues rp = kkt_residues(p, xp, dp);
  PrimalPoint xq = PrimalPoint::zeros(q.layout());
  xq.x(0) = 1.0;
  DualPoint dq = DualPoint::zeros(q.layout());
  dq.v(0) = -1.0;
  const KktResidues rq = kkt_residues(q, xq, dq);
  const double at_opt = std::max({rp.eta, rp.eta_gap, rq.eta, rq.eta_gap});
  return verdict(worst <= 1e-14 && at_opt <= 1e-14,
                 "max deviation " + fmt("%.2e", worst) + ", residue at optima " + fmt("%.2e", at_opt));
}

Verdict solver_toys() {
  std::mt19937_64 rng(105);
  const PlantedLp lp = planted_lp(rng, 3, 1, 2, 2, 3);
  const auto oracle = vertex_enumeration_lp(lp.E, lp.f, lp.cost);
  if (!oracle) return verdict(false, "vertex enumeration found no feasible basis");
  PhaConfig pcfg;
  pcfg.tol_nonant = 1e-7;
  pcfg.tol_rel = 1e-7;
  pcfg.max_iter = 5000;
  pcfg.sub = fixed_sigma(1e-9);
  const SolveReport runs[] = {admm_solve(lp.problem, tight(1e-8)), alm_solve(lp.problem, tight(1e-8)),
                              pha_solve(lp.problem, pcfg)};
  const char* names[] = {"ADMM", "ALM", "PHA"};
  bool ok = true;
  std::ostringstream os;
  os << "LP optimum " << fmt("%.6g", *oracle);
  for (int s = 0; s < 3; ++s) {
    const KktResidues& r = runs[s].residues;
    const double err = rel_err(r.obj_P, *oracle);
    ok = ok && r.eta <= 1e-5 && r.eta_gap <= 1e-4 && err <= 1e-6;
    os << "; " << names[s] << " eta " << fmt("%.1e", r.eta) << " gap " << fmt("%.1e", r.eta_gap) << " obj err "
       << fmt("%.1e", err);
  }
  const FreeQp qp = free_qp(rng, 5, 2, 3, 2, 4);
  const SolveReport r = admm_solve(qp.problem, tight(1e-9));
  const double qerr = rel_err(stacked_primal(r), qp.solution);
  ok = ok && qerr <= 1e-5;
  os << "; QP rel err " << fmt("%.1e", qerr);
  return verdict(ok, os.str());
}

Verdict ssn_equivalence() {
  std::mt19937_64 rng(106);
  const PlantedLp lp = recourse_lp(rng, 8, 2, 100, 1, 2);
  SolverConfig on = fixed_sigma(1e-6), off = fixed_sigma(1e-6);
  on.ssn = SsnMode::On;
  off.ssn = SsnMode::Off;
  const SolveReport a = alm_solve(lp.problem, on);
  const SolveReport b = alm_solve(lp.problem, off);
  const double obj_err = rel_err(a.residues.obj_P, b.residues.obj_P);
  const bool eligible = ssn_auto_eligible(lp.problem);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 1 + trial % 3, n = 4 + trial % 5;
    const DenseMat am = random_mat(rng, m, n);
    const Vec bv = am * uniform_vec(rng, n, 0.1, 1.0);
    const Vec chat = random_vec(rng, n);
    const double sigma = 0.5 + trial % 4;
    const Vec oracle = orthant_ssn_oracle(am, bv, sigma, chat);
    if (oracle.size() == 0) continue;
    const SsnResult r = ssn_zy(LinearMap::from_dense(am), bv, NonnegOrthant{n}, sigma, chat, Vec::Zero(m), 1e-13);
    const Vec z_oracle = (chat - am.transpose() * oracle).cwiseMax(0.0);
    worst = std::max({worst, rel_err(r.y, oracle), rel_err(r.z, z_oracle)});
    ++checked;
  }
  const bool ok = eligible && a.ssn_used && !b.ssn_used && a.status == SolveStatus::Converged &&
                  b.status == SolveStatus::Converged && obj_err <= 1e-5 && checked >= 30 && worst <= 1e-8;
  return verdict(ok, "N=100 objective rel diff " + fmt("%.2e", obj_err) + " (iters " +
                         std::to_string(a.iterations) + " vs " + std::to_string(b.iterations) + "), ssn_zy " +
                         std::to_string(checked) + " cases max err " + fmt("%.2e", worst));
}

Verdict ufl_bound() {
  int ok_count = 0, converged = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();
  for (int seed = 0; seed < 20; ++seed) {
    const UflInstance u = random_ufl(3, 4, 1000 + seed);
    const SolveReport r = admm_solve(build_ufl_dnn(u), tight(1e-7));
    const double opt = ufl_brute_force(u);
    const double slack = r.residues.obj_P - opt - 1e-6 * (1 + std::abs(opt));
    worst_slack = std::max(worst_slack, slack);
    if (r.status == SolveStatus::Converged) ++converged;
    if (slack <= 0.0) ++ok_count;
  }
  return verdict(ok_count == 20 && converged == 20, std::to_string(ok_count) + "/20 bounds hold, " +
                                                        std::to_string(converged) + "/20 converged, max excess " +
                                                        fmt("%.2e", worst_slack));
}

Verdict phone1() {
  const char* path = std::getenv("DBA_PHONE1");
  if (!path || !*path) return {Outcome::Skip, "set DBA_PHONE1 to a dba/1 problem file for phone_1 to run this check"};
  const DBAProblem p = read_problem_file(path);
  const SolveReport r = admm_solve(p, tight(1e-6));
  const double err = rel_err(r.residues.obj_P, 36.9);
  return verdict(err <= 1e-3, "objective " + fmt("%.6g", r.residues.obj_P) + ", rel diff " + fmt("%.2e", err));
}

Verdict determinism() {
  const DBAProblem p = random_qp(4, 10, 3, 6, 16, 109);
  const DBAProblem lp = random_two_stage(2, 6, 3, 4, 12, 110);
  std::string ref;
  int runs = 0;
  bool same = true;
  for (int workers : {1, 2, 4}) {
    set_worker_count(workers);
    std::ostringstream os;
    SolverConfig cfg;
    cfg.max_iter = 300;
    write_log_csv(os, admm_solve(p, cfg).log);
    write_log_csv(os, alm_solve(lp, cfg).log);
    PhaConfig pcfg;
    pcfg.max_iter = 30;
    write_log_csv(os, pha_solve(lp, pcfg).log, true);
    if (runs++ == 0)
      ref = os.str();
    else
      same = same && os.str() == ref;
  }
  set_worker_count(1);
  return verdict(same, std::string("logs of ADMM, ALM and PHA with 1, 2, 4 workers ") +
                           (same ? "identical" : "differ") + (parallel_enabled() ? "" : " (built without OpenMP)"));
}

Verdict block_diag_j() {
  std::mt19937_64 rng(110);
  double min_eig = std::numeric_limits<double>::infinity(), worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const DBAProblem p = structured_problem(rng, 2 + trial % 5, 5);
    for (bool use_std : {false, true}) {
      MSolverOptions o;
      o.strategy = MStrategy::BlockDiagJ;
      o.block_diag_std = use_std;
      const MSolver ms = build_msolver(p, o);
      const DenseMat j = use_std ? std_block_diag_J(p) : pairwise_block_diag_J(p);
      Eigen::SelfAdjointEigenSolver<DenseMat> es(j);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
      const DenseMat b = p.B().to_dense(), bb = p.Bbar().to_dense();
      const DenseMat m = b * b.transpose() + bb * bb.transpose() + j;
      worst = std::max(worst, rel_solve_err(ms, m, random_vec(rng, m.rows())));
    }
  }
  return verdict(min_eig >= -1e-8 && worst <= 1e-8,
                 "min eig " + fmt("%.2e", min_eig) + ", solve rel err " + fmt("%.2e", worst));
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
    double budget;  // seconds, 0 for none
  };
  const Criterion criteria[] = {
      {"sGS sweep exactness", sgs_exactness, 10},
      {"SMW and UFL inverse", smw_correctness, 5},
      {"Moreau identities and projections", moreau_suite, 10},
      {"KKT residue oracle", kkt_oracle, 0},
      {"toy LP and QP solves", solver_toys, 60},
      {"SSN equivalence", ssn_equivalence, 0},
      {"UFL relaxation bound", ufl_bound, 60},
      {"phone_1 objective", phone1, 0},
      {"worker-count determinism", determinism, 0},
      {"block-diagonal J", block_diag_j, 0},
  };
  int failed = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (v.outcome == Outcome::Pass && c.budget > 0 && secs > c.budget) {
      v.outcome = Outcome::Fail;
      v.detail += ", over the " + fmt("%.0f", c.budget) + " s budget";
    }
    const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    if (v.outcome == Outcome::Fail) ++failed;
    std::printf("%s %d %s: %s [%.2f s]\n", tag, index, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

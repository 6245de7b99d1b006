#include "dba/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "dba/errors.hpp"
#include "dba/parallel.hpp"

namespace dba {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "Converged";
    case SolveStatus::MaxIter:
      return "MaxIter";
    case SolveStatus::Stalled:
      return "Stalled";
  }
  return "?";
}

SsnMode parse_ssn_mode(const std::string& name) {
  if (name == "auto") return SsnMode::Auto;
  if (name == "on") return SsnMode::On;
  if (name == "off") return SsnMode::Off;
  throw InvalidConfig("unknown ssn mode '" + name + "' (expected auto|on|off)");
}

double eps_schedule(int k, double eps0) { return eps0 / std::pow(static_cast<double>(k) + 1.0, 1.5); }

double sigma_update(const KktResidues& r, double sigma, int k, const SigmaUpdateRule& rule) {
  if (!rule.enabled || rule.period <= 0 || k <= 0 || k % rule.period != 0) return sigma;
  // The iteration runs on (D) with x as multiplier: its own primal
  // infeasibility is the residual of the constraint σ penalizes (η_D, η_D̄)
  // and its dual infeasibility is η_P, η_P̄.
  const double primal = std::max(r.eta_D, r.eta_Dbar);
  const double dual = std::max(r.eta_P, r.eta_Pbar);
  if (primal > rule.ratio * dual)
    sigma *= rule.factor;
  else if (dual > rule.ratio * primal)
    sigma /= rule.factor;
  return std::clamp(sigma, rule.min, rule.max);
}

double default_sigma0(const DBAProblem& problem) {
  double cmax = problem.c.size() ? problem.c.cwiseAbs().maxCoeff() : 0.0;
  double cbar_max = 0.0;
  for (const auto& s : problem.scenarios)
    if (s.cbar.size()) cbar_max = std::max(cbar_max, s.cbar.cwiseAbs().maxCoeff());
  return 1.0 / (1.0 + cmax + cbar_max);
}

void check_admm_tau(double tau) {
  const double limit = (1.0 + std::sqrt(5.0)) / 2.0;
  if (!(tau > 0.0 && tau < limit))
    throw InvalidConfig("ADMM step length tau must lie in (0, (1+sqrt 5)/2), got " + std::to_string(tau));
}

void check_alm_tau(double tau) {
  if (!(tau > 0.0 && tau < 2.0)) throw InvalidConfig("ALM step length tau must lie in (0, 2), got " + std::to_string(tau));
}

bool ssn_auto_eligible(const DBAProblem& problem) {
  return problem.A && cone_polyhedral(problem.cone) && problem.m0() <= 10 && problem.n0() <= 20 && problem.N() >= 100;
}

// ------------------------------------------------------------------ SSN

namespace {

// 0/1 generalized Jacobian of Π_K at x for the polyhedral cones.
Vec projection_jacobian(const ConeSpec& k, const Vec& x) {
  Vec d = Vec::Ones(x.size());
  if (const auto* box = std::get_if<Box>(&k)) {
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (!(x[j] > box->lower[j] && x[j] < box->upper[j])) d[j] = 0.0;
  } else if (std::holds_alternative<NonnegOrthant>(k) || std::holds_alternative<NonnegSymMatrices>(k)) {
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (!(x[j] > 0.0)) d[j] = 0.0;
  }
  return d;
}

}  // namespace

SsnResult ssn_zy(const LinearMap& a, const Vec& b, const ConeSpec& k, double sigma, const Vec& chat, const Vec& y0,
                 double tol, int maxit) {
  if (!cone_polyhedral(k)) throw StrategyPrecondition("semismooth Newton (z, y) step needs a polyhedral cone");
  if (a.rows() != b.size() || a.cols() != chat.size() || y0.size() != b.size())
    throw DimensionMismatch("ssn_zy: inconsistent dimensions");

  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 50;
  constexpr int kMaxRegularizations = 3;

  const DenseMat ad = a.to_dense();
  auto phi_at = [&](const Vec& y, Vec& w, Vec& u) {
    w = a.apply_adjoint(y) - chat;
    u = project_cone(k, sigma * w);
    return -b.dot(y) + 0.5 * sigma * w.squaredNorm() - (sigma * w - u).squaredNorm() / (2.0 * sigma);
  };

  SsnResult out;
  Vec y = y0;
  Vec w, u;
  double phi = phi_at(y, w, u);
  Vec g = a.apply(u) - b;
  for (;;) {
    out.grad_norm = g.norm();
    if (out.grad_norm <= tol || out.iters >= maxit) break;
    const Vec active = projection_jacobian(k, sigma * w);
    const DenseMat ap = ad * active.asDiagonal();
    double rho = 1e-12 * (1.0 + out.grad_norm);
    const DenseMat h0 = sigma * ap * ad.transpose();
    bool accepted = false;
    for (int reg = 0; reg <= kMaxRegularizations && !accepted; ++reg, rho *= 1e4) {
      DenseMat h = h0;
      h.diagonal().array() += rho;
      Eigen::LLT<DenseMat> llt(h);
      if (llt.info() != Eigen::Success) continue;
      Vec d = -llt.solve(g);
      // One refinement step against the unshifted matrix.
      d += llt.solve(Vec(-g - h0 * d));
      double slope = g.dot(d);
      if (!(slope < 0.0)) {
        d = -llt.solve(g);
        slope = g.dot(d);
      }
      if (!(slope < 0.0)) continue;
      // Near the solution φ changes below its rounding level; accept a step
      // that does not raise φ beyond rounding and shrinks the gradient.
      const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi));
      double t = 1.0;
      for (int bt = 0; bt <= kMaxBacktracks; ++bt, t *= 0.5) {
        Vec wt, ut;
        const Vec yt = y + t * d;
        const double phit = phi_at(yt, wt, ut);
        const bool armijo = phit <= phi + kArmijo * t * slope;
        if (armijo || (phit <= phi + noise && (a.apply(ut) - b).norm() < out.grad_norm)) {
          y = yt;
          w = std::move(wt);
          u = std::move(ut);
          phi = phit;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted)
      throw LineSearchFailure("semismooth Newton line search failed after " + std::to_string(kMaxBacktracks) +
                              " backtracks (gradient norm " + std::to_string(out.grad_norm) + ")");
    g = a.apply(u) - b;
    ++out.iters;
  }
  out.y = std::move(y);
  out.z = u / sigma - w;
  return out;
}

// ---------------------------------------------------------------- loops

namespace {

// -Prox_{σ⁻¹δ*_K}(w) = σ⁻¹Π_K(σw) - w
Vec neg_prox_support(const ConeSpec& k, double sigma, const Vec& w) {
  Vec u = project_cone(k, sigma * w);
  u /= sigma;
  u -= w;
  return u;
}

// -Prox_{σ⁻¹f*}(w); exactly zero for f = 0.
Vec neg_prox_conj(const SeparableFunction& f, double sigma, const Vec& w) {
  if (is_zero_function(f)) return Vec::Zero(w.size());
  return -prox_conjugate(f, sigma, w);
}

bool all_theta_zero(const DBAProblem& p) {
  if (!is_zero_function(p.theta)) return false;
  for (const auto& s : p.scenarios)
    if (!is_zero_function(s.theta)) return false;
  return true;
}

// (AA* + J)⁻¹ with J = 0 (Cholesky) or J = λI - AA*.
class YSolver {
 public:
  YSolver() = default;
  YSolver(const LinearMap& a, int direct_max) {
    const int m = a.rows();
    if (m == 0) return;
    if (m <= direct_max) {
      if (m <= 2000) {
        chol_ = CholFactor::factor(a.gram());
      } else {
        const SparseRowMat& s = a.sparse().eigen();
        chol_ = CholFactor::factor(SparseMat::from_eigen(SparseRowMat(s * s.transpose())));
      }
      return;
    }
    const auto p = power_lambda_max([&](const Vec& y) { return Vec(a.apply(a.apply_adjoint(y))); }, m, 1e-10, 20000);
    lambda_ = p.value * (1.0 + 1e-6);
    if (!(lambda_ > 0.0)) throw NotPositiveDefinite("AA* is zero");
  }

  Vec solve(const Vec& h) const { return lambda_ > 0.0 ? Vec(h / lambda_) : chol_.solve(h); }

 private:
  CholFactor chol_;
  double lambda_ = 0.0;
};

struct Inner {
  int iters = 0;
  double ratio = 0.0;
};

struct Context {
  const DBAProblem& p;
  const SolverConfig& cfg;
  Layout l;
  StackedOp B;
  BlockDiagOp Bbar;
  Vec bbar;
  Vec cbar;
  MSolver m;
  bool m_iterative = false;
  YSolver ys;
  bool theta_zero = false;
  bool ssn = false;

  Context(const DBAProblem& problem, const SolverConfig& config, bool use_ssn)
      : p(problem),
        cfg(config),
        l(problem.layout()),
        B(problem.B()),
        Bbar(problem.Bbar()),
        bbar(problem.bbar_stacked()),
        cbar(problem.cbar_stacked()),
        theta_zero(all_theta_zero(problem)),
        ssn(use_ssn) {
    m = build_msolver(problem, config.msolver);
    m_iterative = m.strategy() != MStrategy::DirectCholesky && m.strategy() != MStrategy::BlockDiagJ &&
                  problem.n0() > config.msolver.g_direct_max;
    if (problem.A && !use_ssn) ys = YSolver(*problem.A, config.y_direct_max);
  }

  Vec msolve(const Vec& h, double eps, Inner& inner) const {
    if (!m_iterative) return m.solve(h);
    const double hn = h.norm();
    double tol = std::max(1e-14, eps / (1.0 + hn));
    MSolveStats st;
    Vec y = m.solve(h, &st, tol);
    double res = st.relres * hn;
    for (int t = 0; t < 3 && res > eps && tol > 1e-14; ++t) {
      tol = std::max(1e-14, tol * 1e-2);
      y = m.solve(h, &st, tol);
      res = st.relres * hn;
    }
    inner.iters += st.pcg_iters;
    inner.ratio = std::max(inner.ratio, res / eps);
    return y;
  }

  // A*y, or zeros when A is absent.
  Vec At(const Vec& y) const { return p.A ? p.A->apply_adjoint(y) : Vec::Zero(l.n0); }

  // out_i = f(i) over the stacked x̄ layout.
  template <typename F>
  Vec per_scenario_x(F&& f) const {
    Vec out(l.nbar());
    for_each_index(l.N, [&](std::size_t i) { out.segment(l.x_off[i], l.n(i)) = f(i); });
    return out;
  }

  Vec zbar_step(const Vec& w) const {
    return per_scenario_x([&](std::size_t i) {
      return neg_prox_support(p.scenarios[i].cone, sigma_, w.segment(l.x_off[i], l.n(i)));
    });
  }

  double sigma_ = 1.0;
};

struct State {
  PrimalPoint x;
  DualPoint d;
};

int ssn_maxit() { return 200; }

double ssn_tol(const DBAProblem& p, double eps) { return std::max(eps, 1e-13 * (1.0 + p.b.norm())); }

void multiplier_update(const Context& c, State& s, double tau) {
  const double sigma = c.sigma_;
  Vec r = c.B.apply_adjoint(s.d.ybar) + s.d.z + s.d.v - c.p.c;
  if (c.p.A) c.p.A->apply_adjoint_add(s.d.y, r);
  Vec rbar = c.Bbar.apply_adjoint(s.d.ybar) + s.d.zbar + s.d.vbar - c.cbar;
  s.x.x += (tau * sigma) * r;
  s.x.xbar += (tau * sigma) * rbar;
}

void admm_step(const Context& c, State& s, double tau, double eps, Inner& inner) {
  const double sigma = c.sigma_;
  const DBAProblem& p = c.p;
  DualPoint& d = s.d;
  const Vec ck = p.c - s.x.x / sigma;
  const Vec cbk = c.cbar - s.x.xbar / sigma;
  const Vec bty = c.B.apply_adjoint(d.ybar);

  Vec r2 = c.Bbar.apply_adjoint(d.ybar) + d.zbar + d.vbar - cbk;

  // Step 1a
  const Vec zbar_new = c.zbar_step(r2 - d.zbar);

  // Step 1b
  Vec y_new = d.y;
  Vec z_new;
  Vec r3;
  if (c.ssn) {
    const Vec chat = ck - bty - d.v;
    SsnResult res = ssn_zy(*p.A, p.b, p.cone, sigma, chat, d.y, ssn_tol(p, eps), ssn_maxit());
    inner.iters += res.iters;
    inner.ratio = std::max(inner.ratio, res.grad_norm / eps);
    y_new = std::move(res.y);
    z_new = std::move(res.z);
    r3 = p.A->apply_adjoint(y_new) + bty + z_new + d.v - ck;
  } else {
    const Vec r1 = c.At(d.y) + bty + d.z + d.v - ck;
    if (p.A) {
      const Vec y_tmp = d.y + c.ys.solve(p.b / sigma - p.A->apply(r1));
      z_new = neg_prox_support(p.cone, sigma, p.A->apply_adjoint(y_tmp - d.y) + r1 - d.z);
      y_new = d.y + c.ys.solve(p.b / sigma - p.A->apply(r1 + z_new - d.z));
      r3 = r1 + p.A->apply_adjoint(y_new - d.y) + (z_new - d.z);
    } else {
      z_new = neg_prox_support(p.cone, sigma, r1 - d.z);
      r3 = r1 + (z_new - d.z);
    }
  }
  Vec r4 = r2 + (zbar_new - d.zbar);

  // Step 2
  const Vec h = c.bbar / sigma - c.B.apply(r3) - c.Bbar.apply(r4);
  const Vec ybar_tmp = d.ybar + c.msolve(h, eps, inner);
  Vec ybar_new = ybar_tmp;
  Vec v_new = d.v;
  Vec vbar_new = d.vbar;
  if (!c.theta_zero) {
    const Vec dy = ybar_tmp - d.ybar;
    v_new = neg_prox_conj(p.theta, sigma, c.B.apply_adjoint(dy) + r3 - d.v);
    const Vec bbdy = c.Bbar.apply_adjoint(dy);
    vbar_new = c.per_scenario_x([&](std::size_t i) {
      const auto seg = [&](const Vec& v) { return v.segment(c.l.x_off[i], c.l.n(i)); };
      return neg_prox_conj(p.scenarios[i].theta, sigma, Vec(seg(bbdy) + seg(r4) - seg(d.vbar)));
    });
    const Vec h2 =
        c.bbar / sigma - c.B.apply(r3 + v_new - d.v) - c.Bbar.apply(r4 + vbar_new - d.vbar);
    ybar_new = d.ybar + c.msolve(h2, eps, inner);
  }

  d.y = std::move(y_new);
  d.z = std::move(z_new);
  d.zbar = zbar_new;
  d.v = std::move(v_new);
  d.vbar = std::move(vbar_new);
  d.ybar = std::move(ybar_new);

  // Step 3
  multiplier_update(c, s, tau);
}

void alm_step(const Context& c, State& s, double tau, double eps, Inner& inner) {
  const double sigma = c.sigma_;
  const DBAProblem& p = c.p;
  DualPoint& d = s.d;
  const Vec ck = p.c - s.x.x / sigma;
  const Vec cbk = c.cbar - s.x.xbar / sigma;
  const Vec aty = c.At(d.y);
  const Vec bty = c.B.apply_adjoint(d.ybar);
  const Vec bbty = c.Bbar.apply_adjoint(d.ybar);

  // Backward: ȳ_tmp, then y_tmp.
  const Vec ybar_tmp =
      d.ybar + c.msolve(c.bbar / sigma - c.B.apply(aty + bty + d.z - ck) - c.Bbar.apply(bbty + d.zbar - cbk), eps,
                        inner);
  const Vec bty_tmp = c.B.apply_adjoint(ybar_tmp);
  const Vec bbty_tmp = c.Bbar.apply_adjoint(ybar_tmp);

  Vec y_new = d.y;
  Vec z_new;
  if (c.ssn) {
    SsnResult res = ssn_zy(*p.A, p.b, p.cone, sigma, ck - bty_tmp, d.y, ssn_tol(p, eps), ssn_maxit());
    inner.iters += res.iters;
    inner.ratio = std::max(inner.ratio, res.grad_norm / eps);
    y_new = std::move(res.y);
    z_new = std::move(res.z);
  } else if (p.A) {
    const Vec y_tmp = d.y + c.ys.solve(p.b / sigma - p.A->apply(aty + bty_tmp + d.z - ck));
    z_new = neg_prox_support(p.cone, sigma, p.A->apply_adjoint(y_tmp) + bty_tmp - ck);
    y_new = d.y + c.ys.solve(p.b / sigma - p.A->apply(aty + bty_tmp + z_new - ck));
  } else {
    z_new = neg_prox_support(p.cone, sigma, bty_tmp - ck);
  }
  const Vec zbar_new = c.zbar_step(bbty_tmp - cbk);

  // Forward: ȳ.
  const Vec h = c.bbar / sigma - c.B.apply(c.At(y_new) + bty + z_new - ck) - c.Bbar.apply(bbty + zbar_new - cbk);
  d.ybar = d.ybar + c.msolve(h, eps, inner);
  d.y = std::move(y_new);
  d.z = std::move(z_new);
  d.zbar = zbar_new;

  multiplier_update(c, s, tau);
}

bool decide_ssn(const DBAProblem& p, SsnMode mode) {
  switch (mode) {
    case SsnMode::Off:
      return false;
    case SsnMode::Auto:
      return ssn_auto_eligible(p);
    case SsnMode::On:
      if (!p.A) throw StrategyPrecondition("semismooth Newton (z, y) step needs first-stage rows A");
      if (!cone_polyhedral(p.cone)) throw StrategyPrecondition("semismooth Newton (z, y) step needs a polyhedral K");
      return true;
  }
  return false;
}

template <typename Step>
SolveReport run(const DBAProblem& problem, const SolverConfig& config, double tau, Step step) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool use_ssn = decide_ssn(problem, config.ssn);
  Context ctx(problem, config, use_ssn);
  ctx.sigma_ = config.sigma0 > 0.0 ? config.sigma0 : default_sigma0(problem);

  State s{PrimalPoint::zeros(ctx.l), DualPoint::zeros(ctx.l)};
  if (config.warm_primal) {
    check_point_dims(problem, *config.warm_primal);
    s.x = *config.warm_primal;
  }
  if (config.warm_dual) {
    check_point_dims(problem, *config.warm_dual);
    s.d = *config.warm_dual;
  }

  SolveReport rep;
  rep.msolver = ctx.m.description();
  rep.ssn_used = use_ssn;
  rep.residues = kkt_residues(problem, s.x, s.d);
  rep.status = SolveStatus::MaxIter;

  std::vector<double> best;
  best.reserve(static_cast<std::size_t>(std::max(0, std::min(config.max_iter, 1 << 20))));
  double best_eta = std::numeric_limits<double>::infinity();
  const int log_every = std::max(1, config.log_every);

  for (int k = 0; k < config.max_iter; ++k) {
    Inner inner;
    step(ctx, s, tau, eps_schedule(k, config.eps0), inner);
    rep.iterations = k + 1;
    rep.max_inner_ratio = std::max(rep.max_inner_ratio, inner.ratio);
    const KktResidues r = kkt_residues(problem, s.x, s.d);
    rep.residues = r;

    const bool converged = r.eta <= config.tol_kkt && r.eta_gap <= config.tol_gap;
    best_eta = std::min(best_eta, r.eta);
    best.push_back(best_eta);
    bool stalled = false;
    const int w = config.stall_window;
    if (!converged && w > 0 && k >= w) {
      const double before = best[static_cast<std::size_t>(k - w)];
      stalled = best_eta > (1.0 - config.stall_improvement) * before;
    }
    const bool last = converged || stalled || k + 1 == config.max_iter;
    if ((k + 1) % log_every == 0 || last) rep.log.push_back({k + 1, r, ctx.sigma_, inner.iters, {}, {}});
    if (converged) {
      rep.status = SolveStatus::Converged;
      break;
    }
    if (stalled) {
      rep.status = SolveStatus::Stalled;
      break;
    }
    ctx.sigma_ = sigma_update(r, ctx.sigma_, k + 1, config.sigma_update);
  }

  rep.primal = std::move(s.x);
  rep.dual = std::move(s.d);
  rep.sigma = ctx.sigma_;
  rep.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace

SolveReport admm_solve(const DBAProblem& problem, const SolverConfig& config) {
  const double tau = config.tau > 0.0 ? config.tau : 1.618;
  check_admm_tau(tau);
  validate(problem);
  return run(problem, config, tau, admm_step);
}

SolveReport alm_solve(const DBAProblem& problem, const SolverConfig& config) {
  const double tau = config.tau > 0.0 ? config.tau : 1.9;
  check_alm_tau(tau);
  validate(problem);
  if (!all_theta_zero(problem))
    throw UnsupportedObjective("the sGS proximal ALM needs theta = 0 and every scenario theta = 0");
  return run(problem, config, tau, alm_step);
}

void write_log_csv(std::ostream& out, const std::vector<LogRow>& rows, bool pha_columns) {
  out << "k,eta_P,eta_D,eta_K,eta_theta,eta_Pbar,eta_Dbar,eta_Kbar,eta_thetabar,eta,eta_gap,sigma,obj_P,obj_D,"
         "inner_iters";
  if (pha_columns) out << ",nonant_residual,rel_change";
  out << '\n';
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (const auto& row : rows) {
    const auto& r = row.r;
    out << row.k;
    for (double v : {r.eta_P, r.eta_D, r.eta_K, r.eta_theta, r.eta_Pbar, r.eta_Dbar, r.eta_Kbar, r.eta_thetabar, r.eta,
                     r.eta_gap, row.sigma, r.obj_P, r.obj_D})
      num(v);
    out << ',' << row.inner_iters;
    if (pha_columns) {
      num(row.nonant_residual.value_or(std::numeric_limits<double>::quiet_NaN()));
      num(row.rel_change.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    out << '\n';
  }
}

}  // namespace dba

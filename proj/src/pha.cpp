#include "dba/pha.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dba/errors.hpp"
#include "dba/parallel.hpp"

namespace dba {

std::vector<double> scenario_probabilities(const DBAProblem& problem, const std::vector<double>& explicit_p) {
  const std::size_t n = problem.N();
  std::vector<double> p = explicit_p;
  if (p.empty()) {
    const auto it = problem.metadata.find("probabilities");
    if (it != problem.metadata.end()) {
      std::istringstream in(it->second);
      double v;
      while (in >> v) p.push_back(v);
    }
  }
  if (p.empty()) p.assign(n, 1.0 / static_cast<double>(n));
  if (p.size() != n)
    throw InvalidConfig("expected " + std::to_string(n) + " scenario probabilities, got " + std::to_string(p.size()));
  double sum = 0.0;
  for (double v : p) {
    if (!(v > 0.0)) throw InvalidConfig("scenario probabilities must be positive");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-10) throw InvalidConfig("scenario probabilities sum to " + std::to_string(sum));
  return p;
}

DBAProblem scenario_subproblem(const DBAProblem& problem, std::size_t i, double probability, double rho,
                               const Vec& w, const Vec& xhat) {
  if (!(rho > 0.0)) throw InvalidConfig("progressive hedging needs rho > 0");
  const ScenarioBlock& s = problem.scenarios.at(i);
  DBAProblem sub;
  sub.A = problem.A;
  sub.b = problem.b;
  sub.c = problem.c + w - rho * xhat;
  sub.cone = problem.cone;
  sub.theta = plus_half_squared_norm(problem.theta, rho, problem.n0());
  ScenarioBlock blk = s;
  blk.cbar = s.cbar / probability;
  if (!is_zero_function(s.theta)) blk.theta = scaled(s.theta, 1.0 / probability);
  sub.scenarios.push_back(std::move(blk));
  return sub;
}

namespace {

SolverConfig sub_config(const SolverConfig& base, double tol) {
  SolverConfig cfg = base;
  cfg.tol_kkt = tol;
  cfg.tol_gap = tol;
  cfg.log_every = std::max(cfg.max_iter, 1);
  cfg.ssn = SsnMode::Off;
  return cfg;
}

}  // namespace

SolveReport scenario_subsolve(const DBAProblem& problem, std::size_t i, double probability, const Vec& w,
                              const Vec& xhat, double rho, double tol, const SolverConfig& base) {
  return admm_solve(scenario_subproblem(problem, i, probability, rho, w, xhat), sub_config(base, tol));
}

SolveReport pha_solve(const DBAProblem& problem, const PhaConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  check_admm_tau(config.tau);
  validate(problem);
  const std::vector<double> prob = scenario_probabilities(problem, config.probabilities);
  const double rho = config.rho > 0.0 ? config.rho : default_sigma0(problem);
  const Layout l = problem.layout();
  // With θ = 0 the only point of dom θ* is v = 0; the averaged proximal
  // terms are left to the dual residual.
  const bool theta_zero = is_zero_function(problem.theta);
  const std::size_t N = l.N;
  const int n0 = l.n0;

  std::vector<Vec> x(N, Vec::Zero(n0)), w(N, Vec::Zero(n0));
  std::vector<SolveReport> last(N);
  std::vector<char> have(N, 0);
  Vec xhat = Vec::Zero(n0);
  const SolverConfig base = sub_config(config.sub, config.sub_tol_factor * config.tol_nonant);

  SolveReport rep;
  rep.status = SolveStatus::MaxIter;
  rep.sigma = rho;
  rep.msolver = "progressive hedging";
  PrimalPoint point = PrimalPoint::zeros(l);
  DualPoint dual = DualPoint::zeros(l);
  rep.residues = kkt_residues(problem, point, dual);

  for (int k = 0; k < config.max_iter; ++k) {
    std::vector<int> inner(N, 0);
    std::vector<int> unconverged(N, 0);
    for_each_index(N, [&](std::size_t i) {
      try {
        const DBAProblem sub = scenario_subproblem(problem, i, prob[i], rho, w[i], xhat);
        SolverConfig cfg = base;
        if (have[i]) {
          cfg.warm_primal = last[i].primal;
          cfg.warm_dual = last[i].dual;
        }
        last[i] = admm_solve(sub, cfg);
      } catch (const std::exception& e) {
        throw SubproblemFailure(i, e.what());
      }
      have[i] = 1;
      x[i] = last[i].primal.x;
      inner[i] = last[i].iterations;
      unconverged[i] = last[i].status == SolveStatus::Converged ? 0 : 1;
    });

    Vec next = Vec::Zero(n0);
    for (std::size_t i = 0; i < N; ++i) next += prob[i] * x[i];
    const double scale = 1.0 + next.norm();
    double nonant = 0.0;
    for (std::size_t i = 0; i < N; ++i) nonant = std::max(nonant, (x[i] - next).norm() / scale);
    const double rel_change = (next - xhat).norm() / (1.0 + xhat.norm());
    xhat = next;
    for (std::size_t i = 0; i < N; ++i) w[i] += (config.tau * rho) * (x[i] - xhat);

    // Averaged point and the scenario multipliers mapped back to (D).
    point.x = xhat;
    dual.y = Vec::Zero(l.m0);
    dual.z = Vec::Zero(n0);
    dual.v = Vec::Zero(n0);
    for (std::size_t i = 0; i < N; ++i) {
      const SolveReport& r = last[i];
      const double p = prob[i];
      if (l.m0 > 0) dual.y += p * r.dual.y;
      dual.z += p * r.dual.z;
      if (!theta_zero) dual.v += p * (r.dual.v + rho * x[i]);
      point.xbar.segment(l.x_off[i], l.n(i)) = r.primal.xbar;
      dual.ybar.segment(l.y_off[i], l.m(i)) = p * r.dual.ybar;
      dual.zbar.segment(l.x_off[i], l.n(i)) = p * r.dual.zbar;
      dual.vbar.segment(l.x_off[i], l.n(i)) = p * r.dual.vbar;
    }
    const KktResidues res = kkt_residues(problem, point, dual);
    rep.residues = res;
    rep.iterations = k + 1;
    const int inner_total = std::accumulate(inner.begin(), inner.end(), 0);
    rep.unconverged_subsolves += std::accumulate(unconverged.begin(), unconverged.end(), 0);

    if (config.observer) config.observer({k + 1, &x, &w, &xhat, &prob});

    const bool converged = nonant <= config.tol_nonant && rel_change <= config.tol_rel;
    const bool final_row = converged || k + 1 == config.max_iter;
    if ((k + 1) % std::max(1, config.log_every) == 0 || final_row)
      rep.log.push_back({k + 1, res, rho, inner_total, nonant, rel_change});
    if (converged) {
      rep.status = SolveStatus::Converged;
      break;
    }
  }
  rep.primal = std::move(point);
  rep.dual = std::move(dual);
  rep.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace dba

#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dba/errors.hpp"
#include "dba/io.hpp"
#include "dba/parallel.hpp"
#include "dba/pha.hpp"
#include "json.hpp"

namespace dba::cli {

namespace {

using Json = nlohmann::ordered_json;

struct RunFlags {
  std::string solver = "sgs-admm";
  double tol_kkt = 1e-5;
  double tol_gap = 1e-4;
  double sigma = 0.0;
  double tau = 0.0;
  int max_iter = 20000;
  std::string strategy = "auto";
  std::string ssn = "auto";
  int threads = 0;
  std::uint64_t seed = 0;
  int log_every = 1;
  double rho = 0.0;
  double tol_nonant = 1e-5;
  double tol_rel = 1e-5;
  int stall_window = 500;
  bool fixed_sigma = false;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--tol-kkt", f.tol_kkt, "KKT residual tolerance")->capture_default_str();
  app->add_option("--tol-gap", f.tol_gap, "relative duality gap tolerance")->capture_default_str();
  app->add_option("--sigma", f.sigma, "initial penalty (default 1/(1+||c||+||c̄||))");
  app->add_option("--tau", f.tau, "dual step length (ADMM 1.618, ALM 1.9, PHA 1.618)");
  app->add_option("--max-iter", f.max_iter, "outer iteration limit")->capture_default_str();
  app->add_option("--strategy", f.strategy, "auto|chol|smw|smw-diag|block-diag|shared|ufl")->capture_default_str();
  app->add_option("--ssn", f.ssn, "auto|on|off")->capture_default_str();
  app->add_option("--threads", f.threads, "scenario workers (default $DBA_THREADS or 1)");
  app->add_option("--seed", f.seed, "recorded in the run manifest")->capture_default_str();
  app->add_option("--log-every", f.log_every, "iteration log period")->capture_default_str();
  app->add_option("--rho", f.rho, "PHA proximal parameter");
  app->add_option("--tol-nonant", f.tol_nonant, "PHA nonanticipativity tolerance")->capture_default_str();
  app->add_option("--tol-rel", f.tol_rel, "PHA consensus change tolerance")->capture_default_str();
  app->add_option("--stall-window", f.stall_window, "stall detection window (0 disables)")->capture_default_str();
  app->add_flag("--fixed-sigma", f.fixed_sigma, "keep sigma constant");
}

void apply_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("DBA_THREADS")) threads = std::atoi(env);
  }
  set_worker_count(threads > 0 ? threads : 1);
}

SolverConfig solver_config(const RunFlags& f) {
  if (f.max_iter < 1) throw InvalidConfig("--max-iter must be >= 1");
  if (f.log_every < 1) throw InvalidConfig("--log-every must be >= 1");
  if (!(f.tol_kkt > 0) || !(f.tol_gap > 0)) throw InvalidConfig("tolerances must be positive");
  SolverConfig cfg;
  cfg.tol_kkt = f.tol_kkt;
  cfg.tol_gap = f.tol_gap;
  cfg.sigma0 = f.sigma;
  cfg.tau = f.tau;
  cfg.max_iter = f.max_iter;
  try {
    cfg.msolver.strategy = parse_mstrategy(f.strategy);
  } catch (const Error& e) {
    throw InvalidConfig(e.what());
  }
  cfg.ssn = parse_ssn_mode(f.ssn);
  cfg.log_every = f.log_every;
  cfg.stall_window = f.stall_window;
  cfg.sigma_update.enabled = !f.fixed_sigma;
  return cfg;
}

PhaConfig pha_config(const RunFlags& f) {
  PhaConfig cfg;
  SolverConfig sub = solver_config(f);
  sub.max_iter = 20000;
  sub.sigma0 = 0.0;
  sub.tau = 0.0;
  cfg.sub = sub;
  cfg.rho = f.rho;
  if (f.tau > 0) cfg.tau = f.tau;
  cfg.tol_nonant = f.tol_nonant;
  cfg.tol_rel = f.tol_rel;
  cfg.max_iter = f.max_iter;
  cfg.log_every = f.log_every;
  return cfg;
}

SolveReport run_solver(const DBAProblem& p, const std::string& solver, const RunFlags& f) {
  if (solver == "sgs-admm") return admm_solve(p, solver_config(f));
  if (solver == "sgs-alm") return alm_solve(p, solver_config(f));
  if (solver == "pha") return pha_solve(p, pha_config(f));
  throw InvalidConfig("unknown solver '" + solver + "' (sgs-admm|sgs-alm|pha)");
}

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string default_prefix(const std::string& path) {
  const auto dot = path.rfind(".json");
  return dot != std::string::npos && dot + 5 == path.size() ? path.substr(0, dot) : path;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_residues(std::ostream& out, const KktResidues& k) {
  out << "obj_P " << fmt(k.obj_P) << "\nobj_D " << fmt(k.obj_D) << "\neta " << fmt(k.eta) << "\neta_gap "
      << fmt(k.eta_gap) << "\neta_P " << fmt(k.eta_P) << "\neta_D " << fmt(k.eta_D) << "\neta_K " << fmt(k.eta_K)
      << "\neta_theta " << fmt(k.eta_theta) << "\neta_Pbar " << fmt(k.eta_Pbar) << "\neta_Dbar " << fmt(k.eta_Dbar)
      << "\neta_Kbar " << fmt(k.eta_Kbar) << "\neta_thetabar " << fmt(k.eta_thetabar) << "\n";
}

int cmd_solve(const std::string& path, const std::string& out_prefix, const RunFlags& f, std::ostream& out) {
  const DBAProblem p = read_problem_file(path);
  apply_threads(f.threads);
  const SolveReport r = run_solver(p, f.solver, f);
  const std::string prefix = out_prefix.empty() ? default_prefix(path) : out_prefix;
  const std::string sol = prefix + ".solution.json", log = prefix + ".log.csv", sum = prefix + ".summary.json",
                    man = prefix + ".manifest.json";
  write_text_file(sol, write_solution({to_string(r.status), r.primal, r.dual}));
  std::ostringstream csv;
  write_log_csv(csv, r.log, f.solver == "pha");
  write_text_file(log, csv.str());
  write_text_file(sum, write_summary(r, f.solver));
  Json manifest{{"command", "solve"},
                {"solver", f.solver},
                {"input", path},
                {"outputs", {{"solution", sol}, {"log", log}, {"summary", sum}}},
                {"config",
                 {{"tol_kkt", f.tol_kkt},
                  {"tol_gap", f.tol_gap},
                  {"sigma", f.sigma},
                  {"tau", f.tau},
                  {"max_iter", f.max_iter},
                  {"strategy", f.strategy},
                  {"ssn", f.ssn},
                  {"log_every", f.log_every},
                  {"rho", f.rho},
                  {"tol_nonant", f.tol_nonant},
                  {"tol_rel", f.tol_rel},
                  {"stall_window", f.stall_window},
                  {"fixed_sigma", f.fixed_sigma}}},
                {"threads", worker_count()},
                {"seed", f.seed},
                {"timestamp", timestamp()}};
  write_text_file(man, manifest.dump(1) + "\n");
  out << "status " << to_string(r.status) << "\nsolver " << f.solver << "\niterations " << r.iterations
      << "\nmsolver " << r.msolver << "\n";
  print_residues(out, r.residues);
  return r.status == SolveStatus::Converged ? kOk : kNotConverged;
}

struct GenerateFlags {
  std::string kind;
  std::string out;
  std::uint64_t seed = 1;
  int m0 = 10, n0 = 20, mi = 10, ni = 20, N = 10;
  double quad_eps = 0.0;
  int p = 3, q = 4;
  std::string ufl_file;
  std::string write_ufl_file;
};

int cmd_generate(const GenerateFlags& g, std::ostream& out) {
  DBAProblem p;
  if (g.kind == "two-stage") {
    p = random_two_stage(g.m0, g.n0, g.mi, g.ni, g.N, g.seed, g.quad_eps);
  } else if (g.kind == "ufl-dnn") {
    const UflInstance u = g.ufl_file.empty() ? random_ufl(g.p, g.q, g.seed) : parse_ufl(read_text_file(g.ufl_file));
    if (!g.write_ufl_file.empty()) write_text_file(g.write_ufl_file, write_ufl(u));
    p = build_ufl_dnn(u);
    if (g.ufl_file.empty()) p.metadata["seed"] = std::to_string(g.seed);
  } else if (g.kind == "rand-qp") {
    p = random_qp(g.m0, g.n0, g.mi, g.ni, g.N, g.seed);
  } else if (g.kind == "rand-sdp") {
    p = random_sdp(g.m0, g.n0, g.mi, g.ni, g.N, g.seed);
  } else {
    throw InvalidConfig("unknown kind '" + g.kind + "' (two-stage|ufl-dnn|rand-qp|rand-sdp)");
  }
  write_text_file(g.out, write_problem(p));
  out << "wrote " << g.out << " (n0 " << p.n0() << ", m0 " << p.m0() << ", N " << p.N() << ")\n";
  return kOk;
}

int cmd_check(const std::string& problem, const std::string& solution, double tol_kkt, double tol_gap,
              std::ostream& out) {
  const DBAProblem p = read_problem_file(problem);
  Solution s;
  try {
    s = parse_solution(read_text_file(solution));
    check_point_dims(p, s.primal);
    check_point_dims(p, s.dual);
  } catch (const Error& e) {
    throw ParseError(solution + ": " + e.what());
  }
  const KktResidues k = kkt_residues(p, s.primal, s.dual);
  print_residues(out, k);
  const bool ok = k.eta <= tol_kkt && k.eta_gap <= tol_gap;
  out << (ok ? "OK" : "FAIL") << "\n";
  return ok ? kOk : kNotConverged;
}

int cmd_compare(const std::string& path, const std::vector<std::string>& solvers, const std::string& out_path,
                const RunFlags& f, std::ostream& out) {
  const DBAProblem p = read_problem_file(path);
  apply_threads(f.threads);
  std::ostringstream csv;
  csv << "solver,status,iterations,time_s,obj_P,eta,eta_gap,error\n";
  for (const std::string& s : solvers) {
    try {
      const SolveReport r = run_solver(p, s, f);
      csv << s << ',' << to_string(r.status) << ',' << r.iterations << ',' << fmt(r.elapsed_seconds) << ','
          << fmt(r.residues.obj_P) << ',' << fmt(r.residues.eta) << ',' << fmt(r.residues.eta_gap) << ",\n";
    } catch (const std::exception& e) {
      std::string what = e.what();
      for (char& c : what)
        if (c == ',' || c == '\n') c = ';';
      std::string kind = "Error";
      if (dynamic_cast<const UnsupportedObjective*>(&e)) kind = "UnsupportedObjective";
      else if (dynamic_cast<const InvalidConfig*>(&e)) kind = "InvalidConfig";
      else if (dynamic_cast<const StrategyPrecondition*>(&e)) kind = "StrategyPrecondition";
      else if (dynamic_cast<const SubproblemFailure*>(&e)) kind = "SubproblemFailure";
      csv << s << ",Failed,0,0,nan,nan,nan," << kind << ": " << what << "\n";
    }
  }
  if (out_path.empty()) {
    out << csv.str();
  } else {
    write_text_file(out_path, csv.str());
    out << csv.str();
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decomposition solver for dual block-angular convex programs"};
  app.name(args.empty() ? "dba" : args[0]);
  app.require_subcommand(1);

  RunFlags solve_flags;
  std::string solve_path, solve_out;
  auto* solve = app.add_subcommand("solve", "solve a problem file");
  solve->add_option("problem", solve_path, "problem file (dba/1 JSON)")->required();
  solve->add_option("--solver", solve_flags.solver, "sgs-admm|sgs-alm|pha")->capture_default_str();
  solve->add_option("--out", solve_out, "output prefix (default: problem path without .json)");
  add_run_flags(solve, solve_flags);

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "write a generated problem file");
  generate->add_option("kind", gen.kind, "two-stage|ufl-dnn|rand-qp|rand-sdp")->required();
  generate->add_option("--out", gen.out, "problem file to write")->required();
  generate->add_option("--seed", gen.seed)->capture_default_str();
  generate->add_option("--m0", gen.m0)->capture_default_str();
  generate->add_option("--n0", gen.n0)->capture_default_str();
  generate->add_option("--mi", gen.mi)->capture_default_str();
  generate->add_option("--ni", gen.ni)->capture_default_str();
  generate->add_option("--N", gen.N)->capture_default_str();
  generate->add_option("--quad-eps", gen.quad_eps, "two-stage: add (eps/2)||.||^2")->capture_default_str();
  generate->add_option("--p", gen.p, "ufl-dnn: facilities")->capture_default_str();
  generate->add_option("--q", gen.q, "ufl-dnn: customers")->capture_default_str();
  generate->add_option("--ufl-file", gen.ufl_file, "ufl-dnn: cost file {p, q, c, P, Q}");
  generate->add_option("--write-ufl", gen.write_ufl_file, "ufl-dnn: also write the cost data");

  std::string check_problem, check_solution;
  double check_tol_kkt = 1e-5, check_tol_gap = 1e-4;
  auto* check = app.add_subcommand("check", "evaluate the KKT residues of a solution");
  check->add_option("problem", check_problem)->required();
  check->add_option("solution", check_solution)->required();
  check->add_option("--tol-kkt", check_tol_kkt)->capture_default_str();
  check->add_option("--tol-gap", check_tol_gap)->capture_default_str();

  RunFlags cmp_flags;
  std::string cmp_path, cmp_out, cmp_solvers = "sgs-admm,sgs-alm,pha";
  auto* compare = app.add_subcommand("compare", "run several solvers and tabulate");
  compare->add_option("problem", cmp_path)->required();
  compare->add_option("--solvers", cmp_solvers, "comma-separated list")->capture_default_str();
  compare->add_option("--out", cmp_out, "CSV file to write");
  add_run_flags(compare, cmp_flags);

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kBadInput;
  }

  try {
    if (*solve) return cmd_solve(solve_path, solve_out, solve_flags, out);
    if (*generate) return cmd_generate(gen, out);
    if (*check) return cmd_check(check_problem, check_solution, check_tol_kkt, check_tol_gap, out);
    if (*compare) {
      std::vector<std::string> list;
      std::stringstream ss(cmp_solvers);
      for (std::string s; std::getline(ss, s, ',');)
        if (!s.empty()) list.push_back(s);
      if (list.empty()) throw InvalidConfig("--solvers is empty");
      return cmd_compare(cmp_path, list, cmp_out, cmp_flags, out);
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kBadInput;
  } catch (const InvalidConfig& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    err << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kBadInput;
}

}  // namespace dba::cli

#include "dba/builders.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "dba/errors.hpp"

namespace dba {

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Rng = std::mt19937_64;

double unif(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int pick(Rng& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

/// round(density·rows·cols) uniform entries at random positions, duplicates
/// summed; with `cover_rows` every row gets at least one extra entry.
SparseMat sprand(Rng& rng, int rows, int cols, double density, bool cover_rows) {
  density = std::min(1.0, std::max(0.0, density));
  const auto count = static_cast<long>(std::llround(density * rows * static_cast<double>(cols)));
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(count + rows));
  for (long k = 0; k < count; ++k) {
    const int r = pick(rng, rows), c = pick(rng, cols);
    t.push_back({r, c, unif(rng)});
  }
  if (cover_rows && cols > 0) {
    for (int r = 0; r < rows; ++r) {
      const int c = pick(rng, cols);
      t.push_back({r, c, unif(rng)});
    }
  }
  return SparseMat::from_triplets(rows, cols, t);
}

Vec uniform_vec(Rng& rng, int n, double lo, double hi) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = unif(rng, lo, hi);
  return v;
}

DenseQuadratic sparse_spd(Rng& rng, int n, double density) {
  const DenseMat m = sprand(rng, n, n, density, false).to_dense();
  DenseMat q = m.transpose() * m;
  q.diagonal().array() += 1e-3;
  return DenseQuadratic(SymDense::from_full(q));
}

/// svec(C C^T) for sparse C with at least one entry.
Vec psd_constraint(Rng& rng, int order, double density) {
  SparseMat c = sprand(rng, order, order, density, false);
  if (c.nnz() == 0) {
    const Triplet one{pick(rng, order), pick(rng, order), unif(rng, 0.5, 1.0)};
    c = SparseMat::from_triplets(order, order, std::span<const Triplet>(&one, 1));
  }
  const DenseMat d = c.to_dense();
  return svec(d * d.transpose());
}

LinearMap rows_to_map(const std::vector<Vec>& rows, int cols) {
  DenseMat m(static_cast<int>(rows.size()), cols);
  for (std::size_t k = 0; k < rows.size(); ++k) m.row(static_cast<int>(k)) = rows[k].transpose();
  return LinearMap::from_dense(m);
}

DenseMat random_pd(Rng& rng, int order) {
  DenseMat g(order, order);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j) g(i, j) = unif(rng, -1.0, 1.0);
  DenseMat x = g * g.transpose() / order;
  x.diagonal().array() += 1.0;
  return x;
}

void record_params(DBAProblem& p, const char* kind, int m0, int n0, int mi, int ni, int N, std::uint64_t seed) {
  p.metadata["generator"] = kind;
  p.metadata["seed"] = std::to_string(seed);
  p.metadata["m0"] = std::to_string(m0);
  p.metadata["n0"] = std::to_string(n0);
  p.metadata["mi"] = std::to_string(mi);
  p.metadata["ni"] = std::to_string(ni);
  p.metadata["N"] = std::to_string(N);
}

void check_sizes(int m0, int n0, int mi, int ni, int N) {
  if (m0 < 0 || n0 < 1 || mi < 1 || ni < 1 || N < 1)
    throw InvalidConfig("generator sizes must satisfy m0 >= 0, n0, mi, ni, N >= 1");
}

}  // namespace

DBAProblem build_two_stage(const FirstStage& first, const std::vector<ScenarioData>& scenarios, double quad_eps) {
  if (!(quad_eps >= 0.0)) throw InvalidConfig("quad_eps must be >= 0");
  const int n0 = static_cast<int>(first.c.size());
  if (first.A && (first.A->cols() != n0 || first.A->rows() != first.b.size()))
    throw DimensionMismatch("first stage: A is " + std::to_string(first.A->rows()) + "x" +
                            std::to_string(first.A->cols()) + ", b has " + std::to_string(first.b.size()) +
                            ", c has " + std::to_string(n0));
  double total = 0.0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const double p = scenarios[i].probability;
    if (!(p > 0.0) || !std::isfinite(p))
      throw InvalidConfig("scenario " + std::to_string(i) + ": probability must be positive");
    total += p;
  }
  DBAProblem out;
  std::vector<double> prob(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) prob[i] = scenarios[i].probability;
  if (!scenarios.empty() && std::abs(total - 1.0) > 1e-10) {
    for (double& p : prob) p /= total;
    out.metadata["warnings"] = "probabilities summed to " + fmt17(total) + " and were normalized";
  }

  out.A = first.A;
  out.b = first.A ? first.b : Vec();
  out.c = first.c;
  out.cone = first.cone;
  out.theta = quad_eps > 0.0 ? plus_half_squared_norm(first.theta, quad_eps, n0) : first.theta;
  std::string probs;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const ScenarioData& s = scenarios[i];
    const int n = static_cast<int>(s.c.size());
    if (s.B.cols() != n0 || s.B.rows() != s.Bbar.rows() || s.Bbar.cols() != n || s.bbar.size() != s.Bbar.rows())
      throw DimensionMismatch("scenario " + std::to_string(i) + ": B is " + std::to_string(s.B.rows()) + "x" +
                              std::to_string(s.B.cols()) + ", B̄ is " + std::to_string(s.Bbar.rows()) + "x" +
                              std::to_string(s.Bbar.cols()) + ", b̄ has " + std::to_string(s.bbar.size()) +
                              ", c̃ has " + std::to_string(n));
    ScenarioBlock blk;
    blk.B = s.B;
    blk.Bbar = s.Bbar;
    blk.bbar = s.bbar;
    blk.cbar = prob[i] * s.c;
    blk.cone = s.cone;
    blk.theta = is_zero_function(s.theta) ? s.theta : scaled(s.theta, prob[i]);
    if (quad_eps > 0.0) blk.theta = plus_half_squared_norm(blk.theta, quad_eps, n);
    out.scenarios.push_back(std::move(blk));
    if (i > 0) probs += ' ';
    probs += fmt17(prob[i]);
  }
  out.metadata["probabilities"] = probs;
  if (quad_eps > 0.0) out.metadata["quad_eps"] = fmt17(quad_eps);
  validate(out);
  return out;
}

void validate_ufl(const UflInstance& inst) {
  if (inst.p < 1 || inst.q < 1) throw DimensionMismatch("ufl: p and q must be positive");
  if (inst.c.size() != inst.p || inst.P.rows() != inst.p || inst.P.cols() != inst.q || inst.Q.rows() != inst.p ||
      inst.Q.cols() != inst.q)
    throw DimensionMismatch("ufl: c must have p entries and P, Q must be p x q");
  if ((inst.c.array() < 0).any() || (inst.P.array() < 0).any() || (inst.Q.array() < 0).any())
    throw InvalidConfig("ufl: costs must be nonnegative");
}

DBAProblem build_ufl_dnn(const UflInstance& inst) {
  validate_ufl(inst);
  const int p = inst.p, order = 1 + p, n0 = svec_dim(order);
  DBAProblem out;

  DenseMat cmat = DenseMat::Zero(order, order);
  for (int i = 0; i < p; ++i) cmat(0, 1 + i) = cmat(1 + i, 0) = 0.5 * inst.c(i);
  out.c = svec(cmat);

  std::vector<Vec> a_rows;
  DenseMat a0 = DenseMat::Zero(order, order);
  a0(0, 0) = 1.0;
  a_rows.push_back(svec(a0));
  for (int i = 0; i < p; ++i) {
    DenseMat ai = DenseMat::Zero(order, order);
    ai(0, 1 + i) = ai(1 + i, 0) = 0.5;
    ai(1 + i, 1 + i) = -1.0;
    a_rows.push_back(svec(ai));
  }
  out.A = rows_to_map(a_rows, n0);
  out.b = Vec::Zero(order);
  out.b(0) = 1.0;
  out.cone = PsdCone{order};
  out.theta = IndicatorCone{NonnegSymMatrices{order}};

  // B_j(𝐔) = (0; u) with E_i = [0 e_i^T/2; e_i/2 0].
  std::vector<Vec> b_rows{Vec::Zero(n0)};
  for (int i = 0; i < p; ++i) {
    DenseMat ei = DenseMat::Zero(order, order);
    ei(0, 1 + i) = ei(1 + i, 0) = 0.5;
    b_rows.push_back(svec(ei));
  }
  const LinearMap bmap = rows_to_map(b_rows, n0);
  std::vector<Triplet> t;
  for (int j = 0; j < p; ++j) {
    t.push_back({0, j, 1.0});
    t.push_back({1 + j, j, -1.0});
    t.push_back({1 + j, p + j, -1.0});
  }
  const LinearMap bbar(SparseMat::from_triplets(order, 2 * p, t));
  Vec rhs = Vec::Zero(order);
  rhs(0) = 1.0;

  for (int j = 0; j < inst.q; ++j) {
    ScenarioBlock s;
    s.B = bmap;
    s.Bbar = bbar;
    s.bbar = rhs;
    s.cbar = Vec::Zero(2 * p);
    s.cbar.head(p) = inst.P.col(j);
    s.cone = NonnegOrthant{2 * p};
    const Vec qj = inst.Q.col(j);
    if ((qj.array() > 0).any()) {
      Vec d = Vec::Zero(2 * p);
      d.head(p) = qj;
      s.theta = DiagQuadratic{d};
    }
    out.scenarios.push_back(std::move(s));
  }
  out.metadata["generator"] = "ufl-dnn";
  out.metadata["p"] = std::to_string(p);
  out.metadata["q"] = std::to_string(inst.q);
  return out;
}

void ufl_extra_constraints(DBAProblem& problem, const DenseMat& H, const Vec& beta) {
  if (!problem.A) throw DimensionMismatch("ufl_extra_constraints: problem has no first-stage rows");
  const int order = svec_order(problem.n0());
  const int p = order - 1;
  if (H.cols() != p || H.rows() != beta.size())
    throw DimensionMismatch("ufl_extra_constraints: H must be m x " + std::to_string(p) + " with m = |β|");
  const int m0 = problem.m0(), m = static_cast<int>(H.rows());
  DenseMat a(m0 + 2 * m, problem.n0());
  a.topRows(m0) = problem.A->to_dense();
  Vec b(m0 + 2 * m);
  b.head(m0) = problem.b;
  for (int k = 0; k < m; ++k) {
    const Vec h = H.row(k).transpose();
    DenseMat hk = DenseMat::Zero(order, order);
    hk.block(0, 1, 1, p) = 0.5 * h.transpose();
    hk.block(1, 0, p, 1) = 0.5 * h;
    DenseMat hhat = DenseMat::Zero(order, order);
    hhat.bottomRightCorner(p, p) = h * h.transpose();
    a.row(m0 + 2 * k) = svec(hk).transpose();
    a.row(m0 + 2 * k + 1) = svec(hhat).transpose();
    b(m0 + 2 * k) = beta(k);
    b(m0 + 2 * k + 1) = beta(k) * beta(k);
  }
  problem.A = LinearMap::from_dense(a);
  problem.b = b;
}

UflInstance random_ufl(int p, int q, std::uint64_t seed, double open_scale) {
  if (p < 1 || q < 1) throw InvalidConfig("ufl: p and q must be positive");
  Rng rng(seed);
  UflInstance u;
  u.p = p;
  u.q = q;
  u.c = open_scale * uniform_vec(rng, p, 0.0, 1.0);
  u.P = DenseMat(p, q);
  u.Q = DenseMat(p, q);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < p; ++i) u.P(i, j) = unif(rng);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < p; ++i) u.Q(i, j) = unif(rng);
  return u;
}

DBAProblem random_qp(int m0, int n0, int mi, int ni, int N, std::uint64_t seed) {
  check_sizes(m0, n0, mi, ni, N);
  Rng rng(seed);
  DBAProblem out;
  const Vec x0 = uniform_vec(rng, n0, 0.0, 1.0);
  if (m0 > 0) {
    out.A = LinearMap(sprand(rng, m0, n0, 10.0 / n0, true));
    out.b = out.A->apply(x0);
  }
  out.c = uniform_vec(rng, n0, 0.0, 1.0);
  out.cone = NonnegOrthant{n0};
  out.theta = sparse_spd(rng, n0, 2.0 / n0);
  for (int i = 0; i < N; ++i) {
    ScenarioBlock s;
    s.B = LinearMap(sprand(rng, mi, n0, 10.0 / n0, false));
    s.Bbar = LinearMap(sprand(rng, mi, ni, 10.0 / ni, true));
    const Vec xb = uniform_vec(rng, ni, 0.0, 1.0);
    s.bbar = s.B.apply(x0) + s.Bbar.apply(xb);
    s.cbar = uniform_vec(rng, ni, 0.0, 1.0);
    s.cone = NonnegOrthant{ni};
    s.theta = sparse_spd(rng, ni, 2.0 / ni);
    out.scenarios.push_back(std::move(s));
  }
  record_params(out, "rand-qp", m0, n0, mi, ni, N, seed);
  return out;
}

DBAProblem random_sdp(int m0, int n0, int mi, int ni, int N, std::uint64_t seed) {
  check_sizes(m0, n0, mi, ni, N);
  Rng rng(seed);
  DBAProblem out;
  const int d0 = svec_dim(n0), di = svec_dim(ni);
  const Vec x0 = svec(random_pd(rng, n0));
  if (m0 > 0) {
    std::vector<Vec> rows;
    for (int k = 0; k < m0; ++k) rows.push_back(psd_constraint(rng, n0, 0.2));
    out.A = rows_to_map(rows, d0);
    out.b = out.A->apply(x0);
  }
  out.c = svec(random_pd(rng, n0));
  out.cone = PsdCone{n0};
  for (int i = 0; i < N; ++i) {
    ScenarioBlock s;
    std::vector<Vec> brows, bbrows;
    for (int k = 0; k < mi; ++k) {
      brows.push_back(psd_constraint(rng, n0, 5.0 / ni));
      bbrows.push_back(psd_constraint(rng, ni, 5.0 / ni));
    }
    s.B = rows_to_map(brows, d0);
    s.Bbar = rows_to_map(bbrows, di);
    const Vec xb = svec(random_pd(rng, ni));
    s.bbar = s.B.apply(x0) + s.Bbar.apply(xb);
    s.cbar = svec(random_pd(rng, ni));
    s.cone = PsdCone{ni};
    out.scenarios.push_back(std::move(s));
  }
  record_params(out, "rand-sdp", m0, n0, mi, ni, N, seed);
  return out;
}

DBAProblem random_two_stage(int m0, int n0, int mi, int ni, int N, std::uint64_t seed, double quad_eps) {
  check_sizes(m0, n0, mi, ni, N);
  if (ni < mi) throw InvalidConfig("two-stage: ni must be at least mi (recourse [W I])");
  Rng rng(seed);
  FirstStage first;
  const Vec x0 = uniform_vec(rng, n0, 0.5, 1.5);
  if (m0 > 0) {
    first.A = LinearMap(sprand(rng, m0, n0, std::min(1.0, 10.0 / n0), true));
    first.b = first.A->apply(x0);
  }
  first.c = uniform_vec(rng, n0, 0.1, 1.0);
  first.cone = NonnegOrthant{n0};
  std::vector<ScenarioData> sc;
  const Vec w = uniform_vec(rng, N, 0.5, 1.5);
  for (int i = 0; i < N; ++i) {
    ScenarioData s;
    s.probability = w(i) / w.sum();
    const DenseMat wmat = sprand(rng, mi, ni - mi, std::min(1.0, 10.0 / ni), false).to_dense();
    DenseMat bb(mi, ni);
    bb << wmat, DenseMat::Identity(mi, mi);
    s.B = LinearMap(sprand(rng, mi, n0, std::min(1.0, 10.0 / n0), false));
    s.Bbar = LinearMap::from_dense(bb);
    const Vec xb = uniform_vec(rng, ni, 0.5, 1.5);
    s.bbar = s.B.apply(x0) + s.Bbar.apply(xb);
    s.c = uniform_vec(rng, ni, 0.1, 1.0);
    s.cone = NonnegOrthant{ni};
    sc.push_back(std::move(s));
  }
  DBAProblem out = build_two_stage(first, sc, quad_eps);
  record_params(out, "two-stage", m0, n0, mi, ni, N, seed);
  return out;
}

}  // namespace dba

#include "doctest.h"

#include <numeric>
#include <random>

#include "dba/errors.hpp"
#include "dba/sgscore.hpp"
#include "support/oracles.hpp"
#include "support/problems.hpp"
#include "support/sgs.hpp"

using namespace dba;
using namespace dba::testing;


TEST_CASE("sGS sweep with Q = I is the identity map on c") {
  SgsBlockQ q = SgsBlockQ::from_dense(DenseMat::Identity(4, 4), {2, 2});
  std::vector<Vec> z{Vec::Zero(2), Vec::Zero(2)};
  std::vector<Vec> c{Vec::LinSpaced(2, 1, 2), Vec::LinSpaced(2, -3, 4)};
  auto r = sgs_sweep(q, [](const Vec& v) { return v; }, z, c);
  CHECK(r.x[0] == c[0]);
  CHECK(r.x[1] == c[1]);
}

TEST_CASE("sGS sweep equals the proximal QP minimizer with S = U D^-1 U*") {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    auto inst = random_sgs_instance(rng, 2 + trial % 2);
    const int n = static_cast<int>(inst.q.rows());
    Vec z = random_vec(rng, n);
    Vec c = random_vec(rng, n, 2.0);
    auto blocks = SgsBlockQ::from_dense(inst.q, inst.dims);
    auto r = sgs_sweep(blocks, orthant_prox(inst.q, inst.dims[0]), split(z, inst.dims), split(c, inst.dims));
    Vec x = join(r.x);
    Vec oracle = sgs_oracle(inst, z, c, Vec::Zero(n));
    REQUIRE(oracle.size() == n);
    worst = std::max(worst, (x - oracle).norm() / (1 + oracle.norm()));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("inexact inner solves are accounted for by the recorded residuals") {
  std::mt19937_64 rng(32);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    auto inst = random_sgs_instance(rng, 3);
    const int n = static_cast<int>(inst.q.rows());
    auto blocks = SgsBlockQ::from_dense(inst.q, inst.dims);
    // Corrupt the diagonal solves with a deterministic relative error.
    auto exact = blocks.diag_solve;
    std::mt19937_64 noise(trial);
    blocks.diag_solve = [exact, &noise](int i, const Vec& r) {
      Vec x = exact(i, r);
      return Vec(x + 1e-3 * random_vec(noise, static_cast<int>(x.size())));
    };
    Vec z = random_vec(rng, n);
    Vec c = random_vec(rng, n, 2.0);
    auto r = sgs_sweep(blocks, orthant_prox(inst.q, inst.dims[0]), split(z, inst.dims), split(c, inst.dims));
    Vec delta = sgs_perturbation(inst.q, inst.dims, r.delta_prime, r.delta);
    CHECK(join(r.delta).norm() > 0.0);
    Vec oracle = sgs_oracle(inst, z, c, delta);
    worst = std::max(worst, (join(r.x) - oracle).norm() / (1 + oracle.norm()));
  }
  CHECK(worst <= 1e-10);
}


TEST_CASE("trivial M = I") {
  DBAProblem p;
  p.c = Vec::Zero(2);
  p.cone = FreeSpace{2};
  ScenarioBlock s;
  s.B = LinearMap::zero(3, 2);
  s.Bbar = LinearMap(SparseMat::identity(3));
  s.bbar = Vec::Zero(3);
  s.cbar = Vec::Zero(3);
  s.cone = FreeSpace{3};
  p.scenarios.push_back(s);
  Vec h = Vec::LinSpaced(3, 1, 3);
  for (auto st : {MStrategy::DirectCholesky, MStrategy::SmwExact, MStrategy::SharedBlock}) {
    MSolverOptions o;
    o.strategy = st;
    auto ms = build_msolver(p, o);
    CHECK((ms.solve(h) - h).norm() <= 1e-15);
  }
}

TEST_CASE("SMW solves agree with the dense M") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    DBAProblem p = structured_problem(rng, 5, 3 + trial % 8);
    const DenseMat b = p.B().to_dense();
    const DenseMat bb = p.Bbar().to_dense();
    const DenseMat m = b * b.transpose() + bb * bb.transpose();
    Vec h = random_vec(rng, m.rows());
    MSolverOptions o;
    o.strategy = MStrategy::SmwExact;
    CHECK(rel_solve_err(build_msolver(p, o), m, h) <= 1e-8);
    o.strategy = MStrategy::DirectCholesky;
    CHECK(rel_solve_err(build_msolver(p, o), m, h) <= 1e-8);
    // Iterative G.
    o.strategy = MStrategy::SmwExact;
    o.g_direct_max = 0;
    o.pcg_tol = 1e-13;
    MSolveStats stats;
    auto ms = build_msolver(p, o);
    Vec y = ms.solve(h, &stats);
    CHECK((y - m.llt().solve(h)).norm() <= 1e-8 * y.norm());
    CHECK(stats.relres <= 1e-9);
    CHECK(stats.pcg_iters > 0);
    // alpha·I proximal term.
    o = MSolverOptions{};
    o.strategy = MStrategy::SmwExact;
    o.alpha = 0.5;
    auto ma = build_msolver(p, o);
    DenseMat m_alpha = m + 0.5 * DenseMat::Identity(m.rows(), m.rows());
    CHECK((ma.M_dense() - m_alpha).norm() <= 1e-12 * m_alpha.norm());
    CHECK(rel_solve_err(ma, m_alpha, h) <= 1e-8);
  }
}

TEST_CASE("diagonal SMW solves the M of its own J") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    DBAProblem p = structured_problem(rng, 4, 6);
    MSolverOptions o;
    o.strategy = MStrategy::SmwDiagonal;
    auto ms = build_msolver(p, o);
    const DenseMat j = ms.J_dense();
    Eigen::SelfAdjointEigenSolver<DenseMat> es(j);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    const DenseMat b = p.B().to_dense();
    const DenseMat bb = p.Bbar().to_dense();
    const DenseMat m = b * b.transpose() + bb * bb.transpose() + j;
    Vec h = random_vec(rng, m.rows());
    CHECK(rel_solve_err(ms, m, h) <= 1e-8);
    // Each D̄_i is a multiple of the identity.
    const Layout l = p.layout();
    for (std::size_t i = 0; i < l.N; ++i) {
      DenseMat d = p.scenarios[i].Bbar.gram() + j.block(l.y_off[i], l.y_off[i], l.m(i), l.m(i));
      CHECK((d - d(0, 0) * DenseMat::Identity(l.m(i), l.m(i))).norm() <= 1e-10 * d(0, 0));
    }
  }
}

TEST_CASE("shared-block solves") {
  std::mt19937_64 rng(35);
  for (bool shared_bbar : {false, true}) {
    DBAProblem p = structured_problem(rng, 6, 7, true, shared_bbar);
    CHECK(shared_coupling_blocks(p));
    CHECK(shared_recourse_blocks(p) == shared_bbar);
    const DenseMat b = p.B().to_dense();
    const DenseMat bb = p.Bbar().to_dense();
    const DenseMat m = b * b.transpose() + bb * bb.transpose();
    MSolverOptions o;
    o.strategy = MStrategy::SharedBlock;
    Vec h = random_vec(rng, m.rows());
    CHECK(rel_solve_err(build_msolver(p, o), m, h) <= 1e-8);
  }
  DBAProblem q = structured_problem(rng, 3, 4);
  MSolverOptions o;
  o.strategy = MStrategy::SharedBlock;
  CHECK_THROWS_AS(build_msolver(q, o), StrategyPrecondition);
  o.strategy = MStrategy::UflAnalytic;
  CHECK_THROWS_AS(build_msolver(q, o), StrategyPrecondition);
}

TEST_CASE("UFL analytic inverse") {
  for (int p : {1, 2, 5, 10}) {
    DenseMat bb = DenseMat::Zero(1 + p, 2 * p);
    bb.row(0).head(p).setOnes();
    bb.bottomLeftCorner(p, p) = -DenseMat::Identity(p, p);
    bb.bottomRightCorner(p, p) = -DenseMat::Identity(p, p);
    DenseMat inv = (bb * bb.transpose()).inverse();
    CHECK((ufl_bbt_inverse(p) - inv).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("block-diagonal J choices are PSD and solve their own M") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    DBAProblem p = structured_problem(rng, 2 + trial % 5, 5);
    for (bool use_std : {false, true}) {
      MSolverOptions o;
      o.strategy = MStrategy::BlockDiagJ;
      o.block_diag_std = use_std;
      auto ms = build_msolver(p, o);
      const DenseMat j = ms.J_dense();
      const DenseMat ref = use_std ? std_block_diag_J(p) : pairwise_block_diag_J(p);
      CHECK((j - ref).norm() <= 1e-12 * (1 + ref.norm()));
      Eigen::SelfAdjointEigenSolver<DenseMat> es(j);
      CHECK(es.eigenvalues().minCoeff() >= -1e-8);
      const DenseMat m = ms.M_dense();
      // M is block diagonal.
      const Layout l = p.layout();
      DenseMat off = m;
      for (std::size_t i = 0; i < l.N; ++i) off.block(l.y_off[i], l.y_off[i], l.m(i), l.m(i)).setZero();
      CHECK(off.norm() <= 1e-12 * m.norm());
      Vec h = random_vec(rng, m.rows());
      CHECK(rel_solve_err(ms, m, h) <= 1e-8);
    }
  }
}

TEST_CASE("standard J for one block") {
  std::mt19937_64 rng(37);
  DBAProblem p = structured_problem(rng, 1, 4);
  const DenseMat b1 = p.scenarios[0].B.to_dense();
  CHECK((std_block_diag_J(p) - b1 * b1.transpose()).norm() <= 1e-12);
}

TEST_CASE("standard J is more conservative for near-orthogonal coupling") {
  std::mt19937_64 rng(38);
  // Coupling blocks act on disjoint columns except for a tiny overlap.
  DBAProblem p;
  const int n0 = 12;
  p.c = Vec::Zero(n0);
  p.cone = FreeSpace{n0};
  for (int i = 0; i < 4; ++i) {
    DenseMat b = DenseMat::Zero(3, n0);
    b.block(0, 3 * i, 3, 3) = random_mat(rng, 3, 3);
    b(0, (3 * i + 3) % n0) = 1e-3;
    ScenarioBlock s;
    s.B = LinearMap::from_dense(b);
    s.Bbar = LinearMap::from_dense(random_mat(rng, 3, 4));
    s.bbar = Vec::Zero(3);
    s.cbar = Vec::Zero(4);
    s.cone = FreeSpace{4};
    p.scenarios.push_back(s);
  }
  CHECK(std_block_diag_J(p).trace() >= pairwise_block_diag_J(p).trace());
}

TEST_CASE("auto strategy and names") {
  std::mt19937_64 rng(39);
  DBAProblem p = structured_problem(rng, 3, 4);
  CHECK(auto_strategy(p) == MStrategy::DirectCholesky);
  for (auto s : {MStrategy::Auto, MStrategy::DirectCholesky, MStrategy::SmwExact, MStrategy::SmwDiagonal,
                 MStrategy::BlockDiagJ, MStrategy::SharedBlock, MStrategy::UflAnalytic})
    CHECK(parse_mstrategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_mstrategy("lu"), DimensionMismatch);
}

TEST_CASE("SMW rejects singular recourse blocks") {
  std::mt19937_64 rng(40);
  DBAProblem p = structured_problem(rng, 2, 4);
  p.scenarios[1].Bbar = LinearMap::zero(p.scenarios[1].m(), p.scenarios[1].n());
  MSolverOptions o;
  o.strategy = MStrategy::SmwExact;
  CHECK_THROWS_AS(build_msolver(p, o), StrategyPrecondition);
}

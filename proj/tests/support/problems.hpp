#pragma once

#include <random>

#include "dba/model.hpp"
#include "support/random.hpp"

namespace dba::testing {

struct RandomShape {
  int n0 = 4;
  int m0 = 2;  // 0: A absent
  int N = 3;
  int m_min = 1, m_max = 4;
  int n_min = 2, n_max = 5;
  double density = 0.6;
};

/// Random problem with polyhedral cones and diagonal quadratic objectives;
/// the cone family cycles with the block index.
inline DBAProblem random_problem(std::mt19937_64& rng, const RandomShape& s, bool quadratic = true) {
  std::uniform_int_distribution<int> mdist(s.m_min, s.m_max);
  std::uniform_int_distribution<int> ndist(s.n_min, s.n_max);
  DBAProblem p;
  p.c = random_vec(rng, s.n0);
  if (s.m0 > 0) {
    p.A = LinearMap::from_dense(random_sparse_dense(rng, s.m0, s.n0, s.density) +
                                DenseMat::Identity(s.m0, s.n0));
    p.b = random_vec(rng, s.m0);
  }
  p.cone = NonnegOrthant{s.n0};
  if (quadratic) p.theta = DiagQuadratic{random_vec(rng, s.n0).cwiseAbs()};
  for (int i = 0; i < s.N; ++i) {
    const int m = mdist(rng);
    const int n = std::max(ndist(rng), m);
    ScenarioBlock blk;
    blk.B = LinearMap::from_dense(random_sparse_dense(rng, m, s.n0, s.density));
    blk.Bbar = LinearMap::from_dense(random_sparse_dense(rng, m, n, s.density) + DenseMat::Identity(m, n));
    blk.bbar = random_vec(rng, m);
    blk.cbar = random_vec(rng, n);
    switch (i % 3) {
      case 0:
        blk.cone = NonnegOrthant{n};
        break;
      case 1: {
        Vec lo = -random_vec(rng, n).cwiseAbs();
        Vec hi = random_vec(rng, n).cwiseAbs();
        blk.cone = Box{lo, hi};
        break;
      }
      default:
        blk.cone = FreeSpace{n};
    }
    if (quadratic) blk.theta = DiagQuadratic{random_vec(rng, n).cwiseAbs()};
    p.scenarios.push_back(std::move(blk));
  }
  return p;
}

inline PrimalPoint random_primal(std::mt19937_64& rng, const Layout& l) {
  return {random_vec(rng, l.n0), random_vec(rng, l.nbar())};
}

inline DualPoint random_dual(std::mt19937_64& rng, const Layout& l) {
  return {random_vec(rng, l.m0),   random_vec(rng, l.mbar()), random_vec(rng, l.n0),
          random_vec(rng, l.nbar()), random_vec(rng, l.n0),   random_vec(rng, l.nbar())};
}

}  // namespace dba::testing

#pragma once

#include <random>

#include "dba/blocklinalg.hpp"

namespace dba::testing {

inline Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

inline DenseMat random_mat(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

/// Random matrix with roughly the given fraction of nonzeros.
inline DenseMat random_sparse_dense(std::mt19937_64& rng, int r, int c, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMat m = DenseMat::Zero(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      if (u(rng) < density) m(i, j) = g(rng);
  return m;
}

inline DenseMat random_spd(std::mt19937_64& rng, int n, double shift = 1e-1) {
  DenseMat c = random_mat(rng, n, n);
  return c * c.transpose() + shift * DenseMat::Identity(n, n);
}

inline DenseMat random_psd(std::mt19937_64& rng, int n, int rank) {
  DenseMat c = random_mat(rng, n, rank);
  return c * c.transpose();
}

inline DenseMat random_sym(std::mt19937_64& rng, int n) {
  DenseMat c = random_mat(rng, n, n);
  return 0.5 * (c + c.transpose());
}

inline double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace dba::testing

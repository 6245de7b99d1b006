#pragma once

// Brute-force integer optimum of a small facility-location instance.

#include <algorithm>
#include <cmath>
#include <limits>

#include "dba/builders.hpp"

namespace dba::testing {

/// min Σ_{i∈S} p_i s_i + ½ q_i s_i² over the simplex on S, with q_i > 0:
/// s_i = max(0, (λ - p_i)/q_i) and λ found by bisection on Σ s_i = 1.
inline double simplex_allocation(const Vec& p, const Vec& q, unsigned mask) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < p.size(); ++i)
    if (mask & (1u << i)) {
      lo = std::min(lo, p(i));
      hi = std::max(hi, p(i) + q(i));
    }
  auto total = [&](double lam) {
    double s = 0.0;
    for (int i = 0; i < p.size(); ++i)
      if (mask & (1u << i)) s += std::max(0.0, (lam - p(i)) / q(i));
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < 1.0 ? lo : hi) = mid;
  }
  const double lam = 0.5 * (lo + hi);
  const double scale = 1.0 / total(lam);
  double cost = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (mask & (1u << i)) {
      const double s = scale * std::max(0.0, (lam - p(i)) / q(i));
      cost += p(i) * s + 0.5 * q(i) * s * s;
    }
  return cost;
}

/// Optimum over all nonempty open sets; `cardinality` >= 0 keeps only sets
/// of that size. Requires Q > 0.
inline double ufl_brute_force(const UflInstance& u, int cardinality = -1) {
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << u.p); ++mask) {
    int open = 0;
    double cost = 0.0;
    for (int i = 0; i < u.p; ++i)
      if (mask & (1u << i)) {
        ++open;
        cost += u.c(i);
      }
    if (cardinality >= 0 && open != cardinality) continue;
    for (int j = 0; j < u.q; ++j) cost += simplex_allocation(u.P.col(j), u.Q.col(j), mask);
    best = std::min(best, cost);
  }
  return best;
}

}  // namespace dba::testing

#include "dba/proxcone.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dba/errors.hpp"

namespace dba {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

void require_dim(const char* what, Eigen::Index got, int expected) {
  if (got != expected)
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(expected) + ", got " +
                            std::to_string(got));
}

Vec project_psd(const Vec& x) {
  Eigen::SelfAdjointEigenSolver<DenseMat> eig(smat(x));
  Vec lam = eig.eigenvalues().cwiseMax(0.0);
  const DenseMat& u = eig.eigenvectors();
  return svec(u * lam.asDiagonal() * u.transpose());
}

double add_clamp(double* clamp, double amount) {
  if (clamp) *clamp += amount;
  return 0.0;
}

}  // namespace

// --------------------------------------------------------------------- svec

int svec_dim(int order) { return order * (order + 1) / 2; }

int svec_order(int n) {
  const int d = static_cast<int>(std::lround((std::sqrt(8.0 * n + 1.0) - 1.0) / 2.0));
  if (svec_dim(d) != n) throw DimensionMismatch(std::to_string(n) + " is not a triangular number");
  return d;
}

Vec svec(const DenseMat& u) {
  const int d = static_cast<int>(u.rows());
  Vec v(svec_dim(d));
  int k = 0;
  for (int i = 0; i < d; ++i) {
    v[k++] = u(i, i);
    for (int j = i + 1; j < d; ++j) v[k++] = kSqrt2 * 0.5 * (u(i, j) + u(j, i));
  }
  return v;
}

DenseMat smat(const Vec& v) {
  const int d = svec_order(static_cast<int>(v.size()));
  DenseMat u(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i) {
    u(i, i) = v[k++];
    for (int j = i + 1; j < d; ++j) u(i, j) = u(j, i) = v[k++] / kSqrt2;
  }
  return u;
}

// -------------------------------------------------------------------- cones

int cone_dim(const ConeSpec& k) {
  return std::visit(overloaded{[](const NonnegOrthant& c) { return c.n; },
                               [](const Box& c) { return static_cast<int>(c.lower.size()); },
                               [](const PsdCone& c) { return svec_dim(c.order); },
                               [](const NonnegSymMatrices& c) { return svec_dim(c.order); },
                               [](const FreeSpace& c) { return c.n; }},
                    k);
}

bool cone_polyhedral(const ConeSpec& k) { return !std::holds_alternative<PsdCone>(k); }

void validate_cone(const ConeSpec& k) {
  std::visit(overloaded{[](const NonnegOrthant& c) {
                          if (c.n < 0) throw DimensionMismatch("orthant dimension must be >= 0");
                        },
                        [](const Box& c) {
                          if (c.lower.size() != c.upper.size())
                            throw DimensionMismatch("box bounds have different lengths");
                          for (Eigen::Index j = 0; j < c.lower.size(); ++j)
                            if (!(c.lower[j] <= c.upper[j]))
                              throw DimensionMismatch("box lower bound exceeds upper bound at index " +
                                                      std::to_string(j));
                        },
                        [](const PsdCone& c) {
                          if (c.order < 1) throw DimensionMismatch("PSD cone order must be >= 1");
                        },
                        [](const NonnegSymMatrices& c) {
                          if (c.order < 1) throw DimensionMismatch("matrix order must be >= 1");
                        },
                        [](const FreeSpace& c) {
                          if (c.n < 0) throw DimensionMismatch("free-space dimension must be >= 0");
                        }},
             k);
}

Vec project_cone(const ConeSpec& k, const Vec& x) {
  require_dim("project_cone", x.size(), cone_dim(k));
  return std::visit(overloaded{[&](const NonnegOrthant&) -> Vec { return x.cwiseMax(0.0); },
                               [&](const Box& c) -> Vec { return x.cwiseMax(c.lower).cwiseMin(c.upper); },
                               [&](const PsdCone&) -> Vec { return project_psd(x); },
                               [&](const NonnegSymMatrices&) -> Vec { return x.cwiseMax(0.0); },
                               [&](const FreeSpace&) -> Vec { return x; }},
                    k);
}

double support_value(const ConeSpec& k, const Vec& w, double feas_tol, double* clamp) {
  require_dim("support_value", w.size(), cone_dim(k));
  const double scale = feas_tol * (1.0 + w.norm());
  auto polar_orthant = [&](const Vec& v) {
    const double worst = v.size() ? v.maxCoeff() : 0.0;
    if (worst <= 0.0) return 0.0;
    return worst <= scale ? add_clamp(clamp, worst) : kInf;
  };
  return std::visit(
      overloaded{[&](const NonnegOrthant&) { return polar_orthant(w); },
                 [&](const NonnegSymMatrices&) { return polar_orthant(w); },
                 [&](const FreeSpace&) {
                   const double worst = w.size() ? w.cwiseAbs().maxCoeff() : 0.0;
                   if (worst == 0.0) return 0.0;
                   return worst <= scale ? add_clamp(clamp, worst) : kInf;
                 },
                 [&](const PsdCone&) {
                   Eigen::SelfAdjointEigenSolver<DenseMat> eig(smat(w), Eigen::EigenvaluesOnly);
                   const double worst = eig.eigenvalues().maxCoeff();
                   if (worst <= 0.0) return 0.0;
                   return worst <= scale ? add_clamp(clamp, worst) : kInf;
                 },
                 [&](const Box& c) {
                   double value = 0.0;
                   for (Eigen::Index j = 0; j < w.size(); ++j) {
                     const double bound = w[j] > 0 ? c.upper[j] : (w[j] < 0 ? c.lower[j] : 0.0);
                     if (w[j] == 0.0) continue;
                     if (std::isinf(bound)) {
                       if (std::abs(w[j]) > scale) return kInf;
                       add_clamp(clamp, std::abs(w[j]));
                       continue;
                     }
                     value += bound * w[j];
                   }
                   return value;
                 }},
      k);
}

// ------------------------------------------------------------ DenseQuadratic

DenseQuadratic::DenseQuadratic(SymDense q) : q_(std::move(q)) {
  auto cache = std::make_shared<Cache>();
  cache->full = q_.to_full();
  cache->eig.compute(cache->full);
  if (q_.dim() > 0 && cache->eig.eigenvalues().minCoeff() < -1e-10)
    throw NotPositiveDefinite("quadratic coefficient is not positive semidefinite (min eigenvalue " +
                              std::to_string(cache->eig.eigenvalues().minCoeff()) + ")");
  cache_ = std::move(cache);
}

Vec DenseQuadratic::solve_shifted(double t, const Vec& x) const {
  require_dim("DenseQuadratic prox", x.size(), q_.dim());
  CholFactor f;
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->shifted.find(t);
    if (it == cache_->shifted.end()) {
      DenseMat s = t * cache_->full;
      s.diagonal().array() += 1.0;
      it = cache_->shifted.emplace(t, CholFactor::factor(s)).first;
    }
    f = it->second;
  }
  return f.solve(x);
}

double DenseQuadratic::conjugate(const Vec& w, double feas_tol, double* clamp) const {
  require_dim("DenseQuadratic conjugate", w.size(), q_.dim());
  const Vec& lam = cache_->eig.eigenvalues();
  const DenseMat& u = cache_->eig.eigenvectors();
  const double cutoff = 1e-12 * std::max(1.0, lam.size() ? lam.maxCoeff() : 0.0);
  const double scale = feas_tol * (1.0 + w.norm());
  Vec coef = u.transpose() * w;
  double value = 0.0;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam[k] > cutoff) {
      value += 0.5 * coef[k] * coef[k] / lam[k];
    } else if (std::abs(coef[k]) > scale) {
      return kInf;
    } else {
      add_clamp(clamp, std::abs(coef[k]));
    }
  }
  return value;
}

// ---------------------------------------------------------------- functions

bool is_zero_function(const SeparableFunction& f) { return std::holds_alternative<ZeroFunction>(f); }

int function_dim(const SeparableFunction& f) {
  return std::visit(overloaded{[](const ZeroFunction&) { return -1; },
                               [](const DiagQuadratic& g) { return static_cast<int>(g.diag.size()); },
                               [](const DenseQuadratic& g) { return g.matrix().dim(); },
                               [](const IndicatorCone& g) { return cone_dim(g.cone); }},
                    f);
}

double smooth_value(const SeparableFunction& f, const Vec& x) {
  return std::visit(overloaded{[](const ZeroFunction&) { return 0.0; },
                               [&](const DiagQuadratic& g) {
                                 require_dim("function value", x.size(), static_cast<int>(g.diag.size()));
                                 return 0.5 * g.diag.dot(x.cwiseProduct(x));
                               },
                               [&](const DenseQuadratic& g) {
                                 require_dim("function value", x.size(), g.matrix().dim());
                                 return 0.5 * x.dot(g.full() * x);
                               },
                               [](const IndicatorCone&) { return 0.0; }},
                    f);
}

SeparableFunction scaled(const SeparableFunction& f, double s) {
  return std::visit(overloaded{[](const ZeroFunction& g) -> SeparableFunction { return g; },
                               [&](const DiagQuadratic& g) -> SeparableFunction { return DiagQuadratic{s * g.diag}; },
                               [&](const DenseQuadratic& g) -> SeparableFunction {
                                 return DenseQuadratic(SymDense::from_full(s * g.full()));
                               },
                               [](const IndicatorCone& g) -> SeparableFunction { return g; }},
                    f);
}

SeparableFunction plus_half_squared_norm(const SeparableFunction& f, double mu, int n) {
  return std::visit(
      overloaded{[&](const ZeroFunction&) -> SeparableFunction { return DiagQuadratic{Vec::Constant(n, mu)}; },
                 [&](const DiagQuadratic& g) -> SeparableFunction {
                   require_dim("quadratic extension", g.diag.size(), n);
                   return DiagQuadratic{g.diag.array() + mu};
                 },
                 [&](const DenseQuadratic& g) -> SeparableFunction {
                   require_dim("quadratic extension", g.matrix().dim(), n);
                   DenseMat q = g.full();
                   q.diagonal().array() += mu;
                   return DenseQuadratic(SymDense::from_full(q));
                 },
                 [](const IndicatorCone&) -> SeparableFunction {
                   throw UnsupportedObjective("cannot add a quadratic term to an indicator function");
                 }},
      f);
}

Vec prox(const SeparableFunction& f, double t, const Vec& x) {
  if (!(t > 0.0)) throw DimensionMismatch("prox requires t > 0");
  return std::visit(overloaded{[&](const ZeroFunction&) -> Vec { return x; },
                               [&](const DiagQuadratic& g) -> Vec {
                                 require_dim("prox", x.size(), static_cast<int>(g.diag.size()));
                                 return x.array() / (1.0 + t * g.diag.array());
                               },
                               [&](const DenseQuadratic& g) -> Vec { return g.solve_shifted(t, x); },
                               [&](const IndicatorCone& g) -> Vec { return project_cone(g.cone, x); }},
                    f);
}

Vec prox_conjugate(const SeparableFunction& f, double t, const Vec& x) {
  return x - prox(f, t, t * x) / t;
}

double conjugate_value(const SeparableFunction& f, const Vec& w, double feas_tol, double* clamp) {
  return std::visit(overloaded{[&](const ZeroFunction&) {
                                 const double n = w.norm();
                                 if (n == 0.0) return 0.0;
                                 return n <= feas_tol ? add_clamp(clamp, n) : kInf;
                               },
                               [&](const DiagQuadratic& g) {
                                 require_dim("conjugate", w.size(), static_cast<int>(g.diag.size()));
                                 const double scale = feas_tol * (1.0 + w.norm());
                                 double value = 0.0;
                                 for (Eigen::Index j = 0; j < w.size(); ++j) {
                                   if (g.diag[j] > 0.0) {
                                     value += w[j] * w[j] / (2.0 * g.diag[j]);
                                   } else if (w[j] != 0.0) {
                                     if (std::abs(w[j]) > scale) return kInf;
                                     add_clamp(clamp, std::abs(w[j]));
                                   }
                                 }
                                 return value;
                               },
                               [&](const DenseQuadratic& g) { return g.conjugate(w, feas_tol, clamp); },
                               [&](const IndicatorCone& g) { return support_value(g.cone, w, feas_tol, clamp); }},
                    f);
}

}  // namespace dba

#pragma once

// Closed convex sets K and the functions θ of a DBA problem, with their
// projections, proximal maps and conjugates.
//
// Symmetric-matrix variables are stored as scaled upper-triangle vectors
// ("svec"): for i <= j in row-major order, entry U(i,i) or sqrt(2)·U(i,j).
// With this scaling <svec(U), svec(V)> = trace(UV).

#include <map>
#include <memory>
#include <mutex>
#include <variant>

#include "dba/blocklinalg.hpp"

namespace dba {

int svec_dim(int order);
/// Inverse of svec_dim; throws DimensionMismatch when n is not triangular.
int svec_order(int n);
Vec svec(const DenseMat& u);
DenseMat smat(const Vec& v);

struct NonnegOrthant {
  int n = 0;
};
struct Box {
  Vec lower;
  Vec upper;
};
struct PsdCone {
  int order = 1;
};
/// Symmetric matrices with entrywise nonnegative entries.
struct NonnegSymMatrices {
  int order = 1;
};
struct FreeSpace {
  int n = 0;
};

using ConeSpec = std::variant<NonnegOrthant, Box, PsdCone, NonnegSymMatrices, FreeSpace>;

/// Vector dimension of the space K lives in.
int cone_dim(const ConeSpec& k);
/// Orthant, box, free space and entrywise-nonnegative matrices.
bool cone_polyhedral(const ConeSpec& k);
/// Throws DimensionMismatch when lower > upper or an order is < 1.
void validate_cone(const ConeSpec& k);

struct ZeroFunction {};
/// f(x) = ½ Σ q_j x_j², q >= 0.
struct DiagQuadratic {
  Vec diag;
};

/// f(x) = ½ <x, Q x> with Q symmetric PSD. Factorizations of I + tQ are
/// cached per t; the cache is shared between copies and thread-safe.
class DenseQuadratic {
 public:
  /// Throws NotPositiveDefinite when min eig(Q) < -1e-10.
  explicit DenseQuadratic(SymDense q);

  const SymDense& matrix() const { return q_; }
  const DenseMat& full() const { return cache_->full; }
  Vec solve_shifted(double t, const Vec& x) const;
  /// ½ <w, Q^+ w>, or +inf when w has a component in ker Q above tol.
  double conjugate(const Vec& w, double feas_tol, double* clamp) const;

 private:
  struct Cache {
    DenseMat full;
    Eigen::SelfAdjointEigenSolver<DenseMat> eig;
    mutable std::mutex mutex;
    mutable std::map<double, CholFactor> shifted;
  };
  SymDense q_;
  std::shared_ptr<const Cache> cache_;
};

struct IndicatorCone {
  ConeSpec cone;
};

using SeparableFunction = std::variant<ZeroFunction, DiagQuadratic, DenseQuadratic, IndicatorCone>;

bool is_zero_function(const SeparableFunction& f);
/// Dimension implied by f, or -1 for ZeroFunction.
int function_dim(const SeparableFunction& f);
/// f(x) with indicator parts evaluated as 0.
double smooth_value(const SeparableFunction& f, const Vec& x);
/// s·f for s > 0.
SeparableFunction scaled(const SeparableFunction& f, double s);
/// f + (mu/2)||·||² on a space of dimension n. Throws UnsupportedObjective
/// for indicator functions.
SeparableFunction plus_half_squared_norm(const SeparableFunction& f, double mu, int n);

Vec project_cone(const ConeSpec& k, const Vec& x);

/// Prox_{t f}(x).
Vec prox(const SeparableFunction& f, double t, const Vec& x);
/// Prox_{f*/t}(x) = x - (1/t) Prox_{t f}(t x).
Vec prox_conjugate(const SeparableFunction& f, double t, const Vec& x);

inline constexpr double kDefaultFeasTol = 1e-8;

/// Support function δ*_K(w). Violations of the polar-cone condition up to
/// feas_tol·(1+||w||) are treated as 0 and their size added to *clamp.
double support_value(const ConeSpec& k, const Vec& w, double feas_tol = kDefaultFeasTol, double* clamp = nullptr);
/// Conjugate f*(w); +inf when outside the domain beyond the clamp tolerance.
double conjugate_value(const SeparableFunction& f, const Vec& w, double feas_tol = kDefaultFeasTol,
                       double* clamp = nullptr);

}  // namespace dba

#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "dba/errors.hpp"
#include "dba/proxcone.hpp"
#include "support/functions.hpp"
#include "support/random.hpp"

using namespace dba;
using namespace dba::testing;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}


double min_eig(const Vec& x) {
  Eigen::SelfAdjointEigenSolver<DenseMat> es(smat(x));
  return es.eigenvalues().minCoeff();
}

double max_eig(const Vec& x) {
  Eigen::SelfAdjointEigenSolver<DenseMat> es(smat(x));
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("svec preserves the trace inner product") {
  std::mt19937_64 rng(11);
  for (int d = 1; d <= 6; ++d) {
    DenseMat u = random_sym(rng, d);
    DenseMat v = random_sym(rng, d);
    CHECK(svec(u).size() == svec_dim(d));
    CHECK(std::abs(svec(u).dot(svec(v)) - (u * v).trace()) <= 1e-12 * (1 + u.norm() * v.norm()));
    CHECK((smat(svec(u)) - u).norm() <= 1e-15 * (1 + u.norm()));
    CHECK(svec_order(svec_dim(d)) == d);
  }
  CHECK_THROWS_AS(svec_order(5), DimensionMismatch);
  // Row-major upper triangle with scaled off-diagonals.
  DenseMat u(2, 2);
  u << 1, 2, 2, 3;
  Vec s = svec(u);
  CHECK(s(0) == 1.0);
  CHECK(s(1) == doctest::Approx(2 * std::sqrt(2.0)));
  CHECK(s(2) == 3.0);
}

TEST_CASE("cone projections, simple cases") {
  CHECK(project_cone(NonnegOrthant{3}, vec({1, -2, 3})) == vec({1, 0, 3}));
  CHECK(project_cone(Box{vec({0, 0}), vec({1, 1})}, vec({2, -1})) == vec({1, 0}));
  DenseMat d = DenseMat::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = -1;
  Vec p = project_cone(PsdCone{2}, svec(d));
  CHECK((smat(p) - DenseMat(Vec(vec({1, 0})).asDiagonal())).norm() <= 1e-15);
  CHECK(project_cone(FreeSpace{2}, vec({-4, 5})) == vec({-4, 5}));
  CHECK_THROWS_AS(project_cone(NonnegOrthant{3}, vec({1, 2})), DimensionMismatch);
  CHECK_THROWS_AS(validate_cone(Box{vec({1}), vec({0})}), DimensionMismatch);
  CHECK_THROWS_AS(validate_cone(PsdCone{0}), DimensionMismatch);
}

TEST_CASE("PSD projection is a Moreau decomposition") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x = svec(random_sym(rng, 4));
    Vec p = project_cone(PsdCone{4}, x);
    CHECK(std::abs((x - p).dot(p)) <= 1e-10);
    CHECK(max_eig(x - p) <= 1e-10);
    CHECK(min_eig(p) >= -1e-10);
  }
}

TEST_CASE("projection idempotence and nonexpansiveness") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 6;
    ConeSpec k = random_cone(rng, trial, n);
    Vec x = random_vec(rng, n, 3.0);
    Vec y = random_vec(rng, n, 3.0);
    Vec px = project_cone(k, x);
    CHECK((project_cone(k, px) - px).norm() <= 1e-12 * (1 + px.norm()));
    CHECK((px - project_cone(k, y)).norm() <= (x - y).norm() + 1e-12);
  }
}

TEST_CASE("prox of each function") {
  CHECK(prox(ZeroFunction{}, 2.0, vec({1, 2})) == vec({1, 2}));
  Vec p = prox(DiagQuadratic{Vec::Constant(2, 0.1)}, 1.0, vec({1.1, 2.2}));
  CHECK(p(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p(1) == doctest::Approx(2.0).epsilon(1e-15));

  // Dense quadratic: the minimizer of ½<u,Qu> + ||u-x||²/(2t) solves (tQ + I)u = x.
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    DenseMat q = random_psd(rng, 5, 3);
    const double t = 0.1 + trial;
    Vec x = random_vec(rng, 5);
    DenseQuadratic f(SymDense::from_full(q));
    Eigen::FullPivLU<DenseMat> lu(t * q + DenseMat::Identity(5, 5));
    Vec oracle = lu.solve(x);
    CHECK(rel_err(prox(f, t, x), oracle) <= 1e-12);
    // Gradient of the prox objective vanishes.
    Vec u = prox(f, t, x);
    CHECK((q * u + (u - x) / t).norm() <= 1e-10 * (1 + x.norm()));
  }
  CHECK_THROWS_AS(prox(ZeroFunction{}, 0.0, vec({1})), DimensionMismatch);
  DenseMat indef(2, 2);
  indef << 1, 0, 0, -1;
  CHECK_THROWS_AS(DenseQuadratic(SymDense::from_full(indef)), NotPositiveDefinite);
}

TEST_CASE("prox of the conjugate, simple cases") {
  Vec p = prox_conjugate(IndicatorCone{NonnegOrthant{2}}, 1.0, vec({1, -1}));
  CHECK(p == vec({0, -1}));
  CHECK(prox_conjugate(ZeroFunction{}, 3.0, vec({1, -1})).norm() == 0.0);
}

TEST_CASE("Moreau identities on random functions") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> tdist(-2.0, 2.0);
  int checked = 0;
  for (int round = 0; round < 100; ++round) {
    for (const auto& f : function_zoo(rng, 6)) {
      const double t = std::pow(10.0, tdist(rng));
      Vec x = random_vec(rng, 6, 2.0);
      // x = Prox_{tf}(x) + t Prox_{f*/t}(x/t)
      Vec rhs = prox(f, t, x) + t * prox_conjugate(f, t, x / t);
      CHECK((x - rhs).norm() <= 1e-12 * (1 + x.norm()));
      ++checked;
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("envelope identity") {
  // ½||x||² = M_{tf}(x) + t² M_{f*/t}(x/t), M evaluated from prox outputs.
  std::mt19937_64 rng(16);
  for (int round = 0; round < 50; ++round) {
    for (const auto& f : function_zoo(rng, 6)) {
      const double t = 0.3 + round * 0.1;
      Vec x = random_vec(rng, 6, 2.0);
      Vec u = prox(f, t, x);
      const double m1 = t * smooth_value(f, u) + 0.5 * (u - x).squaredNorm();
      Vec w = prox_conjugate(f, t, x / t);
      const double fstar = conjugate_value(f, w, 1e-9);
      REQUIRE(std::isfinite(fstar));
      const double m2 = fstar / t + 0.5 * (w - x / t).squaredNorm();
      CHECK(std::abs(0.5 * x.squaredNorm() - (m1 + t * t * m2)) <= 1e-10 * (1 + x.squaredNorm()));
    }
  }
}

TEST_CASE("support functions and conjugates") {
  CHECK(support_value(NonnegOrthant{2}, vec({-1, -2})) == 0.0);
  CHECK(support_value(Box{vec({0, 0}), vec({1, 1})}, vec({2, -3})) == 2.0);
  CHECK(std::isinf(support_value(NonnegOrthant{2}, vec({1, -2}))));
  double clamp = 0.0;
  CHECK(support_value(NonnegOrthant{2}, vec({1e-10, -2}), 1e-8, &clamp) == 0.0);
  CHECK(clamp == 1e-10);
  CHECK(std::isinf(conjugate_value(ZeroFunction{}, vec({1e-3}))));

  // sup_u w u - 0.05 u² is attained at u = w / 0.1.
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Vec w = random_vec(rng, 4);
    double oracle = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double u = w(j) / 0.1;
      oracle += w(j) * u - 0.05 * u * u;
    }
    CHECK(conjugate_value(DiagQuadratic{Vec::Constant(4, 0.1)}, w) == doctest::Approx(oracle).epsilon(1e-13));
    CHECK(conjugate_value(DiagQuadratic{Vec::Constant(4, 0.1)}, w) ==
          doctest::Approx(w.squaredNorm() / 0.2).epsilon(1e-13));
  }

  // PSD cone is self-dual: support is 0 on -PSD and +inf when λmax > 0.
  DenseMat negdef = -random_spd(rng, 3);
  CHECK(support_value(PsdCone{3}, svec(negdef)) == 0.0);
  CHECK(std::isinf(support_value(PsdCone{3}, svec(-negdef))));

  // Dense quadratic with a null space: conjugate finite only on range(Q).
  DenseMat q = random_psd(rng, 4, 2);
  DenseQuadratic f(SymDense::from_full(q));
  Vec y = random_vec(rng, 4);
  Vec w = q * y;
  CHECK(conjugate_value(f, w) == doctest::Approx(0.5 * y.dot(q * y)).epsilon(1e-9));
  Eigen::SelfAdjointEigenSolver<DenseMat> es(q);
  Vec null = es.eigenvectors().col(0);
  CHECK(std::isinf(conjugate_value(f, w + null)));
}

TEST_CASE("quadratic extensions") {
  SeparableFunction f = plus_half_squared_norm(ZeroFunction{}, 0.1, 2);
  CHECK(smooth_value(f, vec({1, 1})) == doctest::Approx(0.1));
  SeparableFunction g = scaled(DiagQuadratic{vec({2, 4})}, 0.5);
  CHECK(std::get<DiagQuadratic>(g).diag == vec({1, 2}));
  CHECK_THROWS_AS(plus_half_squared_norm(IndicatorCone{NonnegOrthant{2}}, 0.1, 2), UnsupportedObjective);
}

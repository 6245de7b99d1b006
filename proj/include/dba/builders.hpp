#pragma once

// Constructors for two-stage stochastic programs, DNN relaxations of
// facility-location problems and planted random QP/SDP instances.

#include <cstdint>
#include <optional>
#include <vector>

#include "dba/model.hpp"

namespace dba {

struct FirstStage {
  std::optional<LinearMap> A;
  Vec b;
  Vec c;
  ConeSpec cone = FreeSpace{};
  SeparableFunction theta = ZeroFunction{};
};

/// One scenario of a two-stage program with unscaled data.
struct ScenarioData {
  double probability = 0.0;
  Vec c;
  Vec bbar;
  LinearMap B;     // recourse coupling
  LinearMap Bbar;  // recourse
  ConeSpec cone = FreeSpace{};
  SeparableFunction theta = ZeroFunction{};
};

/// c̄_i = p_i c̃_i, θ̄_i = p_i θ̃_i; with quad_eps > 0 the term
/// (quad_eps/2)||·||² is added to θ and every θ̄_i. Probabilities that do
/// not sum to 1 within 1e-10 are normalized and a warning is recorded in
/// metadata["warnings"]; the final values are kept in
/// metadata["probabilities"].
DBAProblem build_two_stage(const FirstStage& first, const std::vector<ScenarioData>& scenarios,
                           double quad_eps = 0.0);

struct UflInstance {
  int p = 0;  // facilities
  int q = 0;  // customers
  Vec c;      // opening costs
  DenseMat P; // linear allocation costs, p x q
  DenseMat Q; // quadratic allocation costs, p x q
};

/// Throws DimensionMismatch on inconsistent sizes and InvalidConfig on
/// negative costs.
void validate_ufl(const UflInstance& inst);

/// DNN relaxation over 𝐔 = [α u^T; u U] ∈ S^{1+p}: K = PSD, θ = δ of the
/// entrywise-nonnegative matrices, one scenario (S_j; Z_j) ∈ R^{2p}_+ per
/// customer.
DBAProblem build_ufl_dnn(const UflInstance& inst);

/// Appends <H_k, 𝐔> = β_k and <Ĥ_k, 𝐔> = β_k² for each row h_k of H, in
/// that order per k.
void ufl_extra_constraints(DBAProblem& problem, const DenseMat& H, const Vec& beta);

/// Uniform costs in [0, 1) (opening costs scaled by `open_scale`).
UflInstance random_ufl(int p, int q, std::uint64_t seed, double open_scale = 1.0);

/// Sparse random QP over orthants with a planted feasible point.
DBAProblem random_qp(int m0, int n0, int mi, int ni, int N, std::uint64_t seed);

/// Random linear SDP over PSD cones of orders n0 and ni with a planted
/// positive definite feasible point.
DBAProblem random_sdp(int m0, int n0, int mi, int ni, int N, std::uint64_t seed);

/// Random two-stage LP with recourse [W I], W >= 0, random probabilities
/// and a planted feasible point, assembled by build_two_stage.
DBAProblem random_two_stage(int m0, int n0, int mi, int ni, int N, std::uint64_t seed, double quad_eps = 0.0);

}  // namespace dba

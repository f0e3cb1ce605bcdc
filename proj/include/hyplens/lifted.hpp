#pragma once

#include "hyplens/mollify.hpp"
#include "hyplens/solver.hpp"

#include <vector>

namespace hyplens {

/// ∂_axis of a node field with `comps` values per node: central inside, one-sided on the edge nodes.
/// `reach` = 2 uses the ±2Δx stencil (noise estimation).
GridField diff_axis(const Grid& g, const GridField& f, int comps, int axis, int reach = 1);
/// Stack (∂_1 f, …, ∂_n f) per node: block i holds ∂_i f.
GridField grad_stack(const Grid& g, const GridField& f, int comps, int reach = 1);
/// ∇ʳ of an m-vector field; n^r·m values per node.
GridField spatial_derivative(const Grid& g, const GridField& u, int m, int r);

/// System for V_r = ∇ʳU: ∂_t V_r + Σ Ãʲ ∂_j V_r + B̃ʳ V_r = Σ_{k<r} C_k V_k + ∇ʳF.
/// Coefficient time factors are folded into the sampled values, so lifting needs time-constant A and B.
struct LiftedSystem {
  int order = 0;
  int n = 1;
  int m = 1;
  std::vector<SampledField> A;  // I ⊗ Aʲ
  SampledField divA;            // I ⊗ Σ_j ∂_j Aʲ
  SampledField B;               // B̃ʳ
  std::vector<SampledField> C;  // C_k: block × n^k m
  SampledField F;               // ∇ʳF, with the time factor of F
  SampledField G;               // ∇ʳG
  double noise = 0.0;           // largest relative stencil discrepancy met while lifting

  int block() const;
};

LiftedSystem lift_base(const RegularizedSystem& reg);
/// One differentiation step. Throws RefusalError when the differenced fields are noise dominated.
LiftedSystem lift_once(const LiftedSystem& sys, const RegularizedSystem& reg, double noise_limit = 0.25);
LiftedSystem lift(const RegularizedSystem& reg, int r, double noise_limit = 0.25);

/// 1 + sup_x ‖div Ã − B̃ − B̃*‖_op.
double hermitian_part_growth(const LiftedSystem& sys);

/// Closed block system for W = (U, ∇U, …, ∇ʳU), solvable with `solve`.
RegularizedSystem stacked_system(const RegularizedSystem& reg, int r, double noise_limit = 0.25);

/// ∂_t^l ∇ʳ U at a stored time, from spatial data, coefficients and F only.
/// Budget r ≤ 2, 1 ≤ l ≤ 2; beyond that a RefusalError is raised.
GridField recover_time_derivative(const SolutionTrace& trace, const RegularizedSystem& reg, int r, int l, double t);
/// Same through the base-equation recursion only (no lifted tables).
GridField recover_time_derivative_base(const GridField& u, const RegularizedSystem& reg, int r, int l, double t);

/// True when every coefficient time factor is constant.
bool static_coefficients(const RegularizedSystem& reg);

}  // namespace hyplens

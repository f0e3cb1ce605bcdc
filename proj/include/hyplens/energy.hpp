#pragma once

#include "hyplens/lens.hpp"
#include "hyplens/mollify.hpp"
#include "hyplens/solver.hpp"

#include <string>
#include <vector>

namespace hyplens {

struct EnergyCertificate {
  std::string flavor;     // "lens" or "strip"
  int order = 0;          // derivative order r of the certified field
  double eps = 0.0;
  double constant = 0.0;  // α(𝓛) for lens, ∫_0^t β for strip
  double t = 0.0;         // strip time
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;     // lhs / rhs (0 when both vanish)
  double tol = 0.0;
  bool pass = false;
  double dx = 0.0;
  double dt = 0.0;
  std::string note;
};

/// 1 + sup over lens grid points of ‖div A − B − B*‖_op.
double alpha_lens(const RegularizedSystem& reg, const Lens& lens);

struct BetaProfile {
  std::vector<double> times;
  std::vector<double> beta;      // 1 + sup_x ‖div A − B − B*‖_op(t)
  std::vector<double> integral;  // ∫_0^{t_k} β by the trapezoid rule
  /// ∫_0^t β, linear between samples.
  double integral_to(double t) const;
};
BetaProfile beta_profile(const RegularizedSystem& reg);

/// e^{2TαΘ}·a.
double gronwall_bound(double a, double alpha, double T, double theta);
/// RK4 solution at Θ of v' = a + C v, v(0) = 0.
double gronwall_ode(double a, double C, double theta, int steps = 0);

/// 2T e^{2Tα}(h0 + pu).
double lens_energy_bound(double T, double alpha, double h0, double pu);
/// e^{∫β}(u0 + pu).
double strip_energy_bound(double int_beta, double u0, double pu);

/// 4(Δx + Δt)(1 + α).
double certificate_tolerance(double dx, double dt, double alpha);

/// ‖U‖²_{L²(𝓛)} ≤ 2T e^{2Tα}(‖U‖²_{L²(𝓗₀)} + ‖PU‖²_{L²(𝓛)}) on the trace, PU from the solver residual.
EnergyCertificate certify_lens(const SolutionTrace& trace, const RegularizedSystem& reg, const Lens& lens,
                               const LensQuadrature& q = {});
/// ‖U(t)‖² ≤ e^{∫_0^t β}(‖U(0)‖² + ‖PU‖²_{L²(Ω_t)}).
EnergyCertificate certify_strip(const SolutionTrace& trace, const RegularizedSystem& reg, double t);

}  // namespace hyplens

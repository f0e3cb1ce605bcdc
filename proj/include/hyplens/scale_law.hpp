#pragma once

#include <string>

namespace hyplens {

enum class LawKind { pure, log, slow_scale };

/// ε ↦ σ_ε. The slow-scale law uses r_ε = log(1/ε)^power, σ_ε = 1/r_ε.
struct ScaleLaw {
  LawKind kind = LawKind::pure;
  double power = 1.0;  // slow-scale exponent on log(1/ε)

  double sigma(double eps) const;
  /// True when sup|∂ρ_σ ∗ jump| = O(1/σ_ε) is of log-type.
  bool derivative_log_type() const;
  std::string name() const;
};

ScaleLaw parse_law(const std::string& kind, double power = 1.0);

}  // namespace hyplens

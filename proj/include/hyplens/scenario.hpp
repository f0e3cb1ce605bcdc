#pragma once

#include "hyplens/lens.hpp"
#include "hyplens/solver.hpp"
#include "hyplens/system.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyplens {

inline constexpr int kSchemaVersion = 1;

/// Malformed scenario file. `where` is a field path or "line L, column C".
struct ConfigError : std::runtime_error {
  std::string where;
  ConfigError(const std::string& at, const std::string& msg) : std::runtime_error(at + ": " + msg), where(at) {}
};

struct LensConfig {
  double R1 = 0.0;
  double R2 = 0.0;  // 0: min_outer_radius
};

struct Numerics {
  Scheme scheme = Scheme::lax_wendroff;
  int cells = 512;           // per axis, before auto-refinement
  int max_cells = 16384;     // refinement cap per axis (1D); 2D caps at max_cells_2d
  int max_cells_2d = 384;
  double half_width = 0.0;   // 0: auto
  double cfl = 0.8;
  std::vector<double> eps;   // sweep ε list, decreasing
  int track_order = 2;       // norms ∂_t^l ∇ʳ U with r + l ≤ track_order
  bool certify_strip = true;
  std::optional<LensConfig> lens;
  unsigned seed = 1234;
  int battery = 5;
  double solve_eps = 0.0;    // ε used by single solves; 0: last sweep ε
};

struct Scenario {
  std::string path;
  std::string name;
  int schema_version = kSchemaVersion;
  std::shared_ptr<SystemSpec> spec;
  Theorem theorem = Theorem::T31;
  ScaleLaw law;
  int moments = 1;
  Numerics num;

  /// Lens built from the config (R2 defaults to min_outer_radius).
  std::optional<Lens> lens() const;
};

/// Parses and validates a scenario; throws ConfigError with a location on any problem.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& origin = "<memory>");

}  // namespace hyplens

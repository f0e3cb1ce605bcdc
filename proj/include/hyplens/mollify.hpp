#pragma once

#include "hyplens/linalg.hpp"
#include "hyplens/system.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyplens {

/// Raised when an operation declines to run on the given resolution; carries what would be required.
struct RefusalError : std::runtime_error {
  double required = 0.0;
  RefusalError(const std::string& what, double req) : std::runtime_error(what), required(req) {}
};

/// Kernel ρ(x) = Σ_k c_k s_k^{-n} b(x/s_k) built from dilations of the unit bump b on B₁.
class Mollifier {
 public:
  enum class Shape { bump };

  /// m_mom − 1 moments beyond the zeroth vanish. Throws if normalization misses 1e-10.
  static Mollifier make(int n, int m_mom, Shape shape = Shape::bump);

  int n() const { return n_; }
  int moments() const { return m_mom_; }
  bool is_signed() const;
  const std::vector<double>& dilations() const { return s_; }
  const std::vector<double>& weights() const { return c_; }

  double value(const Point& x) const;
  Point gradient(const Point& x) const;
  /// ρ_σ(x) = σ^{-n} ρ(x/σ).
  double scaled(const Point& x, double sigma) const;
  /// Radial breakpoints in (0,1) where quadrature panels should split.
  std::vector<double> breakpoints() const;
  /// ∫_{-1}^{u} ρ for n = 1.
  double cdf(double u) const;

 private:
  int n_ = 1;
  int m_mom_ = 1;
  std::vector<double> s_;
  std::vector<double> c_;
  double z_ = 1.0;  // ∫ b over the unit ball
};

/// Panelled Gauss–Legendre rule on the kernel support [−1,1]ⁿ.
struct KernelQuadrature {
  int panels = 8;
  int points = 20;
  int panels_2d = 6;  // per axis of the tensor rule in 2D
  int points_2d = 8;
};

/// Value and gradient of (p ∗ ρ_σ)(x), split exactly at the profile's interfaces.
struct ConvResult {
  double value = 0.0;
  Point grad{0.0, 0.0};
};
ConvResult convolve_profile(const Profile& p, const Mollifier& rho, double sigma, const Point& x, int n,
                            const KernelQuadrature& q = {});

/// Time factor after regularization: a δ at t0 becomes weight·ρ¹_σ(t − t0).
struct RegTimeFactor {
  TimeFactor rough;
  double sigma = 0.0;
  std::shared_ptr<const Mollifier> rho;  // 1D, set for delta factors

  bool is_constant() const { return rough.is_constant(); }
  double value(double t) const;
  double derivative(double t, int order) const;
  /// ∫_a^b factor(t) dt.
  double integral(double a, double b) const;
  double sup_abs() const;
};

/// m×m (or m×1) values per node, multiplied by a time factor.
struct SampledField {
  int rows = 0;
  int cols = 0;
  std::vector<cplx> data;  // node-major, row-major within a node
  RegTimeFactor time;

  bool empty() const { return data.empty(); }
  const cplx* node(long idx) const { return data.data() + idx * rows * cols; }
  CMat at(long idx) const { return load_matrix(node(idx), rows, cols); }
  CMat at(long idx, double t) const { return time.value(t) * at(idx); }
};

/// Norm ingredients recomputed for every ε.
struct Ledger {
  double div_linf = 0.0;             // sup_{t,x} ‖div A − B − B*‖_op
  double div_l1inf = 0.0;            // ∫_0^T sup_x ‖div A − B − B*‖_op dt
  std::vector<double> dA_sup;        // sup ‖∂_i Aʲ‖_op, index i*n + j
  std::vector<double> A_sup;         // sup ‖Aʲ‖_op
  double B_sup = 0.0;
  double B_herm_sup = 0.0;
  double G_l2 = 0.0;
  double G_linf = 0.0;
  double F_l2 = 0.0;                 // L²(Ω_T)
  std::vector<double> times;         // time samples used
  std::vector<double> div_profile;   // sup_x ‖div A − B − B*‖_op at each sample

  static std::vector<std::string> columns(int n);
  std::vector<double> row() const;
};

struct RegularizeOptions {
  KernelQuadrature quad;
  double resolve_factor = 2.0;  // refuse when σ_ε < resolve_factor·Δx
  bool check_extent = true;
};

struct RegularizedSystem {
  std::shared_ptr<const SystemSpec> spec;
  double eps = 0.0;
  ScaleLaw law;
  double sigma = 0.0;  // σ_ε of the default law
  Grid grid;
  std::vector<SampledField> A;   // n fields
  std::vector<SampledField> dA;  // ∂_i Aʲ at index i*n + j
  SampledField B;
  SampledField F;  // m×1
  SampledField G;  // m×1
  Ledger ledger;

  int n() const { return grid.n; }
  int m() const { return B.rows; }
  /// sup over nodes of max_j ‖Aʲ(t)‖_op.
  double max_speed() const;
  /// div A − B − B* at node idx and time t.
  CMat div_term(double t, long idx) const;
  /// Multilinear interpolation of a field at a point (zero outside the grid).
  CMat interp(const SampledField& f, double t, const Point& x) const;
  CMat div_term_at(double t, const Point& x) const;
  CVec G_at(long idx) const;
  CVec F_at(double t, long idx) const;
};

/// Smallest σ among the laws of fields that are actually convolved.
double smallest_sigma(const SystemSpec& spec, const ScaleLaw& law, double eps);

RegularizedSystem regularize(std::shared_ptr<const SystemSpec> spec, const Mollifier& moll, const ScaleLaw& law,
                             double eps, const Grid& grid, const RegularizeOptions& opt = {});

/// Recomputes the ledger from the sampled fields.
Ledger norm_ledger(const RegularizedSystem& reg);

/// Log-log least squares of error against σ.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int used = 0;
};
/// Points with nonpositive entries are dropped; throws RefusalError with fewer than 4 survivors.
RateFit rate_fit(const std::vector<std::pair<double, double>>& values);

/// Default sweep grid ε_k = 2^{−k}, k = k_min..k_max.
std::vector<double> eps_grid(int k_min = 2, int k_max = 12);

/// Gauss–Legendre nodes/weights on [−1,1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

}  // namespace hyplens

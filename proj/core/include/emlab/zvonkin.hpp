#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "emlab/drift_catalog.hpp"

namespace emlab {

/// Scale function of a one-dimensional drift localised around z:
///   phi_z'(x) = exp(-2 int_z^x 1{|z - s| <= 2} b(s) ds),  phi_z(0) = 0,
/// tabulated on [z - R, z + R] with step h, together with phi_z'' and the
/// inverse psi_z. Between nodes phi_z is the cubic Hermite interpolant of
/// (phi, phi'); beyond the table (|x - z| > R >= 2) phi_z' is constant and
/// phi_z is extended linearly, which is exact.
class ScaleTable {
 public:
  double center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }
  double step() const noexcept { return step_; }
  std::size_t size() const noexcept { return grid_.size(); }

  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> phi() const noexcept { return phi_; }
  std::span<const double> phi_prime() const noexcept { return phi_prime_; }
  // Analytic -2 1{|x - z| <= 2} b(x) phi'(x) at the nodes.
  std::span<const double> phi_second() const noexcept { return phi_second_; }
  // One-sided limits of phi'' at the nodes (differ only at jump points).
  std::span<const double> phi_second_left() const noexcept { return phi_second_left_; }
  std::span<const double> phi_second_right() const noexcept { return phi_second_right_; }
  // psi tabulated on a uniform grid over [phi.front(), phi.back()].
  std::span<const double> psi_grid() const noexcept { return psi_grid_; }
  std::span<const double> psi() const noexcept { return psi_; }

  double Phi(double x) const;
  double PhiPrime(double x) const;  // Hermite-interpolated, exact beyond the table
  // Inverse by bisection on the monotone table, then one Newton step.
  double Psi(double y) const;

  bool StrictlyIncreasing() const noexcept;
  // max |phi'(x) - phi'(z +- 2)| over nodes with |x - z| >= 2.
  double LocalisationGap() const noexcept;

 private:
  friend ScaleTable BuildScaleTable(const DriftSpec&, double, double, double);
  std::size_t PanelOf(double x) const;
  double HermiteValue(std::size_t panel, double t) const;
  double HermiteSlope(std::size_t panel, double t) const;

  double center_ = 0.0;
  double radius_ = 0.0;
  double step_ = 0.0;
  std::vector<double> grid_, phi_, phi_prime_, phi_second_, phi_second_left_, phi_second_right_;
  std::vector<double> psi_grid_, psi_;
};

/// Inner integral by the composite midpoint rule on step h/4, outer integral
/// by the trapezoid rule on step h with the Euler-Maclaurin end correction
/// (h^2/12)(phi''(x_i+) - phi''(x_{i+1}-)) per panel.
/// Throws InvalidArgument unless d = 1, h > 0, R >= 2 and R/h is an integer.
ScaleTable BuildScaleTable(const DriftSpec& drift, double z, double radius, double step);

struct OneSidedResidual {
  double x = 0.0;
  double left = 0.0;   // 1/2 phi''(x-) + b(x-) phi'(x) from a one-sided stencil
  double right = 0.0;  // same from the right
};

struct OdeResidualReport {
  double max_fd_residual = 0.0;        // |1/2 D phi' + b phi'|, D centered difference
  double max_analytic_residual = 0.0;  // |1/2 phi'' + b phi'| with analytic phi''
  double max_identity_gap = 0.0;       // |D phi' - phi''|
  double tolerance = 0.0;
  std::int64_t points_checked = 0;
  std::int64_t points_excluded = 0;
  std::vector<OneSidedResidual> one_sided;
  bool passed = false;
};

/// Residual of 1/2 phi'' + b phi' = 0 at interior nodes of the window
/// |x - z| < 2 whose stencil contains no jump of b. Tolerance is
/// tolerance_scale * h^2 * (1 + sup|b|)^3.
OdeResidualReport VerifyOdeResidual(const ScaleTable& table, const DriftSpec& drift,
                                    double tolerance_scale = 10.0);

struct LipschitzBoundReport {
  double sup_phi_prime = 0.0;
  double sup_phi_second = 0.0;
  double sup_psi_prime = 0.0;
  double sup_phi_prime_of_psi_derivative = 0.0;  // |(phi' o psi)'| = |phi''| / phi'
  double bound = 0.0;  // e^{8 sup|b|} (1 + 2 sup|b|)^2
  bool passed = false;
};

/// The four suprema over the table nodes (using one-sided phi'' at jumps),
/// each compared with the crude bound. Since |int_z^x 1{|z-s|<=2} b| <=
/// 2 sup|b| <= 4 sup|b|, phi' and 1/phi' lie below e^{8 sup|b|}; phi'' and
/// (phi' o psi)' are at most 2 sup|b| times that.
LipschitzBoundReport VerifyLipschitzBounds(const ScaleTable& table, const DriftSpec& drift);

struct DriftlessnessConfig {
  double z = 0.0;
  std::int64_t level = 1 << 12;
  double horizon = 0.25;
  std::uint64_t path_count = 100000;
  std::uint64_t seed = 0;
  double table_step = 1e-3;
  double table_radius = 3.0;
  double window = 1.0;
  double sigma_threshold = 5.0;
  int workers = 1;
};

struct DriftlessnessReport {
  double mean_increment = 0.0;  // mean of phi_z(X_{T ^ exit}) - phi_z(z)
  double standard_error = 0.0;
  double z_score = 0.0;
  double exited_fraction = 0.0;
  std::uint64_t path_count = 0;
  bool passed = false;
};

/// EM paths from z stopped on leaving [z - window, z + window]; checks that
/// Y = phi_z(X) has no drift, |mean| <= sigma_threshold * SE.
DriftlessnessReport TransformedDriftlessnessCheck(const DriftSpec& drift,
                                                  const DriftlessnessConfig& config);

/// Columns x, phi, phi_prime, psi (psi evaluated at the same abscissa).
void WriteScaleTableCsv(const std::filesystem::path& file, const ScaleTable& table);

}  // namespace emlab

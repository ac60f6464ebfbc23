#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emlab/drift_catalog.hpp"
#include "emlab/rate_analysis.hpp"

namespace emlab {

using FunctionalFn =
    std::function<double(double s, std::span<const double> x, std::span<const double> y)>;
// Draws the frozen parameter Y from the state at time tau.
using FrozenSampler = std::function<std::vector<double>(std::span<const double> state_at_tau)>;

/// Bounded test function f(s, x, Y) integrated over deterministic [tau, tau'].
struct TestFunctional {
  std::string name;
  FunctionalFn f;
  double sup_bound = 1.0;
  bool autonomous = true;  // f does not depend on s
  double tau = 0.0;
  double tau_prime = 1.0;
  FrozenSampler frozen;  // empty: Y is the empty vector
};

/// Builtins: constant(c) | coordinate | sign_sin | indicator(a) |
/// sign_sin_frozen | cos_time_sign_sin. Throws InvalidArgument if unknown.
TestFunctional BuiltinFunctional(std::string_view identifier, int dimension);

struct FunctionalInfo {
  std::string identifier;
  std::string formula;
};
std::vector<FunctionalInfo> ListFunctionals();

struct QuadratureConfig {
  std::vector<std::int64_t> levels;
  std::uint64_t path_count = 1000;
  std::int64_t finest_n = 1 << 14;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  int dimension = 1;
  std::vector<double> x0;  // EM start; empty means the origin
  int workers = 1;
  bool include_smallest_level = false;  // passed to the slope fits
};

/// Q(n) = E|int_tau^tau' (f(s, Z_s, Y) - f(s, Z_{k_n(s)}, Y)) ds|^2 per level.
struct ScalingReport {
  std::string functional_name;
  std::string drift_name;  // empty for the Brownian statistic
  int dimension = 1;
  std::vector<std::int64_t> levels;
  std::vector<double> q;
  std::vector<double> ci_half_width;
  std::int64_t finest_n = 0;
  std::uint64_t path_count = 0;
  double horizon = 1.0;
  double tau = 0.0;
  double tau_prime = 1.0;
  std::optional<RateFit> plain_fit;      // log Q vs log n
  std::optional<RateFit> corrected_fit;  // log Q vs log(log(n+1)/n)

  bool exact() const noexcept;
  LadderView Ladder() const noexcept { return {levels, q, ci_half_width}; }
};

/// Left-endpoint Riemann sum on the fine grid of
/// int_tau^tau' (f(s, Z_s, Y) - f(s, Z_{k_n(s)}, Y)) ds, where `state(j)` is
/// Z at fine index j, i.e. time j * horizon / finest_n. Throws InvalidArgument
/// if |f| exceeds sup_bound.
double QuadratureIntegral(const TestFunctional& func, std::int64_t level, std::int64_t finest_n,
                          double horizon,
                          const std::function<std::span<const double>(std::int64_t)>& state,
                          std::span<const double> frozen);

ScalingReport QuadratureStatisticBrownian(const TestFunctional& func,
                                          const QuadratureConfig& config);
ScalingReport QuadratureStatisticEm(const TestFunctional& func, const DriftSpec& drift,
                                    const QuadratureConfig& config);

std::vector<std::string> ValidateQuadratureConfig(const TestFunctional& func,
                                                  const QuadratureConfig& config);

}  // namespace emlab

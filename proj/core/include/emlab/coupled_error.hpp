#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emlab/drift_catalog.hpp"
#include "emlab/em_engine.hpp"
#include "emlab/rate_analysis.hpp"

namespace emlab {

/// Perturbs x0^n = x0 + n^{(-1+epsilon)/2} (1,...,1)/sqrt(d), so that
/// E|x0^n - x0|^2 = n^{-1+epsilon}.
struct InitialOffset {
  bool enabled = false;
  double epsilon = 0.1;
};

struct ErrorCurveConfig {
  std::vector<std::int64_t> levels;
  std::uint64_t path_count = 1000;
  std::int64_t n_ref = 1 << 14;
  double horizon = 1.0;
  std::vector<double> x0;  // empty means the origin
  std::uint64_t seed = 0;
  int checkpoint_count = 9;
  std::int64_t ref_factor = 16;
  std::optional<ReferenceKind> reference;  // default: DefaultReferenceKind
  InitialOffset offset;
  int workers = 1;
};

/// e^2(n) estimates for a ladder of levels, all coupled through one tableau
/// per path.
struct ErrorCurve {
  std::string drift_name;
  int dimension = 1;
  double horizon = 1.0;
  InitialOffset offset;
  std::vector<std::int64_t> levels;
  // E[max_t |X^n_t - X_t|^2]: per-path max over checkpoints, then averaged.
  std::vector<double> mse;
  std::vector<double> ci_half_width;
  // max_t E|X^n_t - X_t|^2: per-checkpoint averages, then maximised.
  std::vector<double> mse_time_max;
  std::vector<double> ci_time_max;
  std::vector<double> checkpoint_times;
  std::uint64_t path_count = 0;
  std::int64_t n_ref = 0;
  ReferenceKind reference_kind = ReferenceKind::kFineEm;

  // Every estimate is exactly zero (scheme coincides with the solution).
  bool exact() const noexcept;
  LadderView Ladder() const noexcept { return {levels, mse, ci_half_width}; }
  LadderView TimeMaxLadder() const noexcept { return {levels, mse_time_max, ci_time_max}; }
};

/// Throws InvalidArgument on inadmissible drift/dimension (bounded
/// measurable drift needs d = 1), fewer than 100 paths, unsorted levels or
/// levels not dividing n_ref.
ErrorCurve EstimateErrorCurve(const DriftSpec& drift, const ErrorCurveConfig& config);

// Validation only; returns every violation found.
std::vector<std::string> ValidateErrorCurveConfig(const DriftSpec& drift,
                                                  const ErrorCurveConfig& config);

std::vector<double> InitialStateFor(std::int64_t level, std::span<const double> x0,
                                    const InitialOffset& offset);

}  // namespace emlab

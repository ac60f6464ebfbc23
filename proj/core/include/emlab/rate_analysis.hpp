#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace emlab {

enum class Abscissa {
  kLogN,          // log n
  kLogCorrected,  // log(log(n + 1) / n)
};

std::string_view ToString(Abscissa abscissa) noexcept;

/// Borrowed view of (level, value, ci half-width) triples.
struct LadderView {
  std::span<const std::int64_t> levels;
  std::span<const double> values;
  std::span<const double> ci;  // may be empty when unweighted
};

struct FitOptions {
  Abscissa abscissa = Abscissa::kLogN;
  bool include_smallest_level = false;
  // Weighted least squares with delta-method weights (value / ci)^2, the
  // inverse variance of log(value).
  bool weighted = false;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double r_squared = 0.0;
  std::vector<std::int64_t> levels;
  Abscissa abscissa = Abscissa::kLogN;
  bool weighted = false;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
  double r_squared = 0.0;
};

// Ordinary (or weighted, when weights is non-empty) least squares y ~ a + b x.
// Throws InvalidArgument for fewer than 3 points.
LineFit FitLine(std::span<const double> x, std::span<const double> y,
                std::span<const double> weights = {});

/// Least-squares slope of log(value) against the chosen abscissa.
/// Throws InvalidArgument on a nonpositive value or fewer than 3 levels.
RateFit FitRate(const LadderView& ladder, const FitOptions& options = {});

/// Refit without the largest level; flags a change above 3 standard errors.
struct StabilityDiagnostic {
  double slope_full = 0.0;
  double slope_without_largest = 0.0;
  double threshold = 0.0;
  bool stable = true;
};
StabilityDiagnostic DropLargestLevelDiagnostic(const LadderView& ladder,
                                               const FitOptions& options = {});

}  // namespace emlab

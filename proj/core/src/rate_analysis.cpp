#include "emlab/rate_analysis.hpp"

#include <cmath>
#include <string>

#include "emlab/error.hpp"

namespace emlab {

std::string_view ToString(Abscissa abscissa) noexcept {
  return abscissa == Abscissa::kLogN ? "log_n" : "log_corrected";
}

LineFit FitLine(std::span<const double> x, std::span<const double> y,
                std::span<const double> weights) {
  const std::size_t n = x.size();
  if (n != y.size() || (!weights.empty() && weights.size() != n)) {
    throw InvalidArgument("FitLine: mismatched input sizes");
  }
  if (n < 3) throw InvalidArgument("a rate fit needs at least 3 points");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w(i);
    sx += w(i) * x[i];
    sy += w(i) * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += w(i) * dx * dx;
    sxy += w(i) * dx * dy;
    syy += w(i) * dy * dy;
  }
  if (!(sxx > 0.0)) throw InvalidArgument("FitLine: abscissae are all equal");

  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    rss += w(i) * r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  fit.slope_std_error = std::sqrt(std::max(rss, 0.0) / static_cast<double>(n - 2) / sxx);
  return fit;
}

RateFit FitRate(const LadderView& ladder, const FitOptions& options) {
  const std::size_t count = ladder.levels.size();
  if (ladder.values.size() != count) throw InvalidArgument("FitRate: levels/values size mismatch");
  if (options.weighted && ladder.ci.size() != count) {
    throw InvalidArgument("FitRate: weighted fit needs a ci per level");
  }
  const std::size_t first = options.include_smallest_level ? 0 : 1;
  std::vector<double> x, y, weights;
  RateFit fit;
  fit.abscissa = options.abscissa;
  fit.weighted = options.weighted;
  for (std::size_t i = first; i < count; ++i) {
    const double n = static_cast<double>(ladder.levels[i]);
    const double v = ladder.values[i];
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("FitRate: nonpositive value " + std::to_string(v) + " at n = " +
                            std::to_string(ladder.levels[i]));
    }
    x.push_back(options.abscissa == Abscissa::kLogN ? std::log(n)
                                                    : std::log(std::log(n + 1.0) / n));
    y.push_back(std::log(v));
    if (options.weighted) {
      const double ci = ladder.ci[i];
      if (!(ci > 0.0)) throw InvalidArgument("FitRate: weighted fit needs positive ci");
      weights.push_back((v / ci) * (v / ci));
    }
    fit.levels.push_back(ladder.levels[i]);
  }
  const LineFit line = FitLine(x, y, weights);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.slope_std_error = line.slope_std_error;
  fit.r_squared = line.r_squared;
  return fit;
}

StabilityDiagnostic DropLargestLevelDiagnostic(const LadderView& ladder,
                                               const FitOptions& options) {
  StabilityDiagnostic diag;
  const RateFit full = FitRate(ladder, options);
  LadderView trimmed = ladder;
  trimmed.levels = ladder.levels.first(ladder.levels.size() - 1);
  trimmed.values = ladder.values.first(ladder.values.size() - 1);
  if (!ladder.ci.empty()) trimmed.ci = ladder.ci.first(ladder.ci.size() - 1);
  const RateFit reduced = FitRate(trimmed, options);
  diag.slope_full = full.slope;
  diag.slope_without_largest = reduced.slope;
  diag.threshold = 3.0 * full.slope_std_error;
  diag.stable = std::abs(full.slope - reduced.slope) <= diag.threshold;
  return diag;
}

}  // namespace emlab

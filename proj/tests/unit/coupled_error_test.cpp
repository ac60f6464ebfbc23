#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "emlab/coupled_error.hpp"
#include "emlab/error.hpp"

namespace emlab {
namespace {

ErrorCurveConfig SmallConfig() {
  ErrorCurveConfig c;
  c.levels = {16, 32, 64};
  c.path_count = 200;
  c.n_ref = 1024;
  c.seed = 5;
  return c;
}

TEST(ErrorCurve, ZeroDriftIsExactInEveryDimension) {
  for (int d : {1, 2, 3}) {
    ErrorCurveConfig c = SmallConfig();
    c.x0 = std::vector<double>(d, 0.4);
    const ErrorCurve curve = EstimateErrorCurve(Builtin("zero", d), c);
    EXPECT_TRUE(curve.exact());
    for (double v : curve.mse) EXPECT_EQ(v, 0.0);
    for (double v : curve.ci_half_width) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(curve.reference_kind, ReferenceKind::kExactZeroDrift);
  }
}

TEST(ErrorCurve, ConstantDriftIsExactAgainstBothReferences) {
  for (ReferenceKind kind : {ReferenceKind::kExactConstantDrift, ReferenceKind::kFineEm}) {
    ErrorCurveConfig c = SmallConfig();
    c.reference = kind;
    c.x0 = {0.1, -0.3};
    const ErrorCurve curve = EstimateErrorCurve(Builtin("constant(-1.3)", 2), c);
    EXPECT_TRUE(curve.exact()) << ToString(kind);
  }
}

TEST(ErrorCurve, ValidationListsEveryViolation) {
  ErrorCurveConfig c;
  c.levels = {64, 48, 2048};
  c.path_count = 10;
  c.n_ref = 1000;
  const auto problems = ValidateErrorCurveConfig(Builtin("sign", 2), c);
  EXPECT_GE(problems.size(), 4u);
  EXPECT_THROW(EstimateErrorCurve(Builtin("sign", 2), c), InvalidArgument);

  ErrorCurveConfig ok = SmallConfig();
  EXPECT_TRUE(ValidateErrorCurveConfig(Builtin("sign", 1), ok).empty());
  EXPECT_FALSE(ValidateErrorCurveConfig(Builtin("sign", 2), ok).empty());
  ok.reference = ReferenceKind::kExactZeroDrift;
  EXPECT_FALSE(ValidateErrorCurveConfig(Builtin("sin", 1), ok).empty());
}

TEST(ErrorCurve, BoundedMeasurableDriftErrorDecreases) {
  ErrorCurveConfig c = SmallConfig();
  c.levels = {16, 32, 64, 128};
  c.n_ref = 4096;
  c.path_count = 1000;
  const ErrorCurve curve = EstimateErrorCurve(Builtin("sign", 1), c);
  for (std::size_t i = 1; i < curve.mse.size(); ++i) EXPECT_LT(curve.mse[i], curve.mse[i - 1]);
  EXPECT_EQ(curve.checkpoint_times.size(), 9u);
  EXPECT_EQ(curve.checkpoint_times.front(), 0.0);
  EXPECT_EQ(curve.checkpoint_times.back(), 1.0);
}

TEST(ErrorCurve, MeanThenMaxNeverExceedsMaxThenMean) {
  ErrorCurveConfig c = SmallConfig();
  const ErrorCurve curve = EstimateErrorCurve(Builtin("step_grid", 1), c);
  for (std::size_t i = 0; i < curve.levels.size(); ++i) {
    EXPECT_LE(curve.mse_time_max[i], curve.mse[i] * (1 + 1e-12));
  }
}

TEST(ErrorCurve, DeterministicAndWorkerInvariant) {
  ErrorCurveConfig c = SmallConfig();
  const ErrorCurve a = EstimateErrorCurve(Builtin("sin", 2), c);
  const ErrorCurve b = EstimateErrorCurve(Builtin("sin", 2), c);
  c.workers = 4;
  const ErrorCurve d = EstimateErrorCurve(Builtin("sin", 2), c);
  EXPECT_EQ(a.mse, b.mse);
  EXPECT_EQ(a.mse, d.mse);
  EXPECT_EQ(a.ci_half_width, d.ci_half_width);
  EXPECT_EQ(a.mse_time_max, d.mse_time_max);
}

TEST(ErrorCurve, InitialOffsetReproducesItsSize) {
  // Zero drift: X^n - X = x0^n - x0 for all t, so mse = n^{-1+eps}.
  ErrorCurveConfig c = SmallConfig();
  c.offset = InitialOffset{true, 0.1};
  c.x0 = {0.0, 0.0};
  const ErrorCurve curve = EstimateErrorCurve(Builtin("zero", 2), c);
  for (std::size_t i = 0; i < curve.levels.size(); ++i) {
    EXPECT_NEAR(curve.mse[i], std::pow(static_cast<double>(curve.levels[i]), -0.9), 1e-12);
  }
  const auto x = InitialStateFor(64, std::vector<double>{1.0}, InitialOffset{true, 0.5});
  EXPECT_NEAR(x[0], 1.0 + std::pow(64.0, -0.25), 1e-15);
  EXPECT_EQ(InitialStateFor(64, std::vector<double>{1.0}, InitialOffset{})[0], 1.0);
}

TEST(ErrorCurve, SmallSampleIntervalsCoverLargeSampleEstimate) {
  ErrorCurveConfig big = SmallConfig();
  big.path_count = 16000;
  big.seed = 1000;
  const ErrorCurve reference = EstimateErrorCurve(Builtin("sign", 1), big);
  int covered = 0, trials = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ErrorCurveConfig small = SmallConfig();
    small.path_count = 1000;
    small.seed = seed;
    const ErrorCurve curve = EstimateErrorCurve(Builtin("sign", 1), small);
    for (std::size_t i = 0; i < curve.levels.size(); ++i) {
      ++trials;
      if (std::abs(curve.mse[i] - reference.mse[i]) <= curve.ci_half_width[i] + reference.ci_half_width[i]) {
        ++covered;
      }
    }
  }
  EXPECT_GE(covered, static_cast<int>(0.9 * trials)) << covered << " of " << trials;
}

}  // namespace
}  // namespace emlab

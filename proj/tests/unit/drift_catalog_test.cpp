#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "emlab/drift_catalog.hpp"
#include "emlab/error.hpp"
#include "emlab/rng_paths.hpp"

namespace emlab {
namespace {

TEST(DriftCatalog, ZeroDriftVanishes) {
  const DriftSpec zero = Builtin("zero", 3);
  for (double x : {-5.0, 0.0, 1e-300, 7.25}) {
    const std::vector<double> point{x, -x, 2 * x};
    for (double v : zero(point)) EXPECT_EQ(v, 0.0);
  }
}

TEST(DriftCatalog, SignIsMinusOneAtMinusPointThree) {
  const DriftSpec sign = Builtin("sign", 1);
  EXPECT_EQ(sign.Scalar(-0.3), -1.0);
  EXPECT_EQ(sign.Scalar(0.3), 1.0);
  EXPECT_EQ(sign.Scalar(0.0), 0.0);
  EXPECT_EQ(sign.regularity, Regularity::kBoundedMeasurable);
  EXPECT_EQ(sign.jumps_1d(-1.0, 1.0), std::vector<double>{0.0});
  EXPECT_TRUE(sign.jumps_1d(0.5, 1.0).empty());
}

TEST(DriftCatalog, StepGridAlternatesOnHalfIntegers) {
  const DriftSpec step = Builtin("step_grid", 1);
  EXPECT_EQ(step.Scalar(0.0), 1.0);
  EXPECT_EQ(step.Scalar(0.49), 1.0);
  EXPECT_EQ(step.Scalar(0.5), -1.0);
  EXPECT_EQ(step.Scalar(-0.25), -1.0);
  EXPECT_EQ(step.Scalar(-0.75), 1.0);
  EXPECT_EQ(step.jumps_1d(-0.6, 1.1), (std::vector<double>{-0.5, 0.0, 0.5, 1.0}));
}

TEST(DriftCatalog, ConstantAndParameterParsing) {
  const DriftSpec c = Builtin("constant(-2.5)", 2);
  EXPECT_EQ(c.sup_bound, 2.5);
  ASSERT_TRUE(c.constant_value);
  EXPECT_EQ((*c.constant_value)[1], -2.5);
  const DriftSpec h = Builtin("holder(0.25)", 1);
  EXPECT_EQ(h.regularity, Regularity::kHolder);
  EXPECT_EQ(h.holder_exponent, 0.25);
  EXPECT_NEAR(h.Scalar(0.0625), 0.5, 1e-15);
  EXPECT_EQ(h.Scalar(-3.0), 1.0);
}

TEST(DriftCatalog, RejectsUnknownOrMalformedNames) {
  EXPECT_THROW(Builtin("tanh", 1), InvalidArgument);
  EXPECT_THROW(Builtin("holder(1.5)", 1), InvalidArgument);
  EXPECT_THROW(Builtin("holder(0)", 1), InvalidArgument);
  EXPECT_THROW(Builtin("sin(2)", 1), InvalidArgument);
  EXPECT_THROW(Builtin("constant(abc)", 1), InvalidArgument);
  EXPECT_THROW(Builtin("zero", 0), InvalidArgument);
}

TEST(DriftCatalog, EveryBuiltinIsBoundedBySupBound) {
  for (const std::string name : {"zero", "constant(1.5)", "sin", "holder(0.25)", "holder(0.75)",
                                 "dini_log", "sign", "step_grid"}) {
    for (int d : {1, 2, 3}) {
      const DriftSpec spec = Builtin(name, d);
      const NormalStream stream(PathSeed{17, static_cast<std::uint64_t>(d)});
      std::vector<double> x(d), out(d);
      for (int s = 0; s < 2000; ++s) {
        const double scale = std::pow(10.0, (s % 9) - 6);
        for (int i = 0; i < d; ++i) x[i] = scale * stream.At(static_cast<std::uint64_t>(s * d + i));
        spec.evaluate(x, out);
        for (double v : out) {
          ASSERT_TRUE(std::isfinite(v)) << name;
          ASSERT_LE(std::abs(v), spec.sup_bound) << name << " at scale " << scale;
        }
      }
    }
  }
}

TEST(DiniModulus, LogSquaredIntegralConverges) {
  const DiniModulus theta = DiniModulus::LogSquared(3.0);
  const DiniIntegral integral = ComputeDiniIntegral(theta);
  EXPECT_NEAR(integral.value, 1.0 / 3.0, 1e-8);
  EXPECT_LE(std::abs(integral.value - integral.coarse_value), 1e-6);
  EXPECT_NEAR(theta(1.0), 1.0 / 9.0, 1e-15);
  EXPECT_EQ(theta(0.0), 0.0);
}

TEST(DiniModulus, DiniLogBuiltinHasFiniteIntegral) {
  const DriftSpec spec = Builtin("dini_log", 2);
  ASSERT_TRUE(spec.dini_modulus);
  const DiniIntegral integral = ComputeDiniIntegral(*spec.dini_modulus);
  EXPECT_TRUE(std::isfinite(integral.value));
  EXPECT_LE(std::abs(integral.value - integral.coarse_value), 1e-6);
}

TEST(DiniModulus, PowerIntegralIsOneOverAlpha) {
  for (double alpha : {0.25, 0.5, 1.0}) {
    EXPECT_NEAR(ComputeDiniIntegral(DiniModulus::Power(alpha)).value, 1.0 / alpha, 1e-8);
  }
}

TEST(DiniModulus, IsIncreasingOnUnitInterval) {
  const DiniModulus theta = DiniModulus::LogSquared(3.0);
  double previous = 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const double value = theta(k / 1000.0);
    EXPECT_GT(value, previous);
    previous = value;
  }
}

TEST(DiniSeminorm, ZeroAndConstantDrifts) {
  EXPECT_EQ(DiniSeminormEstimate(Builtin("zero", 2), 5000), 0.0);
  EXPECT_EQ(DiniSeminormEstimate(Builtin("constant(-1.75)", 1), 5000), 1.75);
}

TEST(DiniSeminorm, SinWithLinearModulusIsAtMostTwo) {
  const double estimate = DiniSeminormEstimate(Builtin("sin", 1), 20000);
  EXPECT_LE(estimate, 2.0);
  // Dense-grid maximum of sup|sin| + sup |sin x - sin y| / |x - y| approaches 2.
  EXPECT_GE(estimate, 1.9);
}

TEST(DiniSeminorm, DiniLogWithinDeclaredBound) {
  const double estimate = DiniSeminormEstimate(Builtin("dini_log", 2), 20000);
  EXPECT_GT(estimate, 1.0);
  EXPECT_LE(estimate, 1.0 + 9.0);
}

TEST(DiniSeminorm, RequiresModulus) {
  EXPECT_THROW(DiniSeminormEstimate(Builtin("sign", 1), 10), InvalidArgument);
}

}  // namespace
}  // namespace emlab

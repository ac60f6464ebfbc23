#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "emlab/error.hpp"
#include "emlab/quadrature_stats.hpp"

namespace emlab {
namespace {

QuadratureConfig SmallConfig() {
  QuadratureConfig c;
  c.levels = {4, 8, 16, 32};
  c.path_count = 400;
  c.finest_n = 512;
  c.seed = 3;
  return c;
}

TEST(Quadrature, ConstantFunctionalGivesExactZero) {
  const ScalingReport w = QuadratureStatisticBrownian(BuiltinFunctional("constant(2.5)", 1), SmallConfig());
  EXPECT_TRUE(w.exact());
  for (double q : w.q) EXPECT_EQ(q, 0.0);
  const ScalingReport x =
      QuadratureStatisticEm(BuiltinFunctional("constant(-1)", 1), Builtin("sign", 1), SmallConfig());
  EXPECT_TRUE(x.exact());
  EXPECT_FALSE(x.plain_fit.has_value());
}

// Riemann sum h sum_j (W_{jh} - W_{base(j)}): on each coarse cell with m fine
// points the variance is h^3 sum_{i,l<m} min(i,l) = h^3 (m-1) m (2m-1) / 6.
double CoordinateOracle(std::int64_t n, std::int64_t finest, double horizon) {
  const double h = 1.0 / static_cast<double>(finest);
  const double m = static_cast<double>(finest / n);
  return static_cast<double>(n) * horizon * h * h * h * (m - 1) * m * (2 * m - 1) / 6.0;
}

TEST(Quadrature, CoordinateFunctionalMatchesGaussianClosedForm) {
  QuadratureConfig c = SmallConfig();
  c.path_count = 20000;
  const ScalingReport report = QuadratureStatisticBrownian(BuiltinFunctional("coordinate", 1), c);
  for (std::size_t i = 0; i < report.levels.size(); ++i) {
    const double oracle = CoordinateOracle(report.levels[i], c.finest_n, 1.0);
    // Continuous-time limit T / (3 n^2), approached at relative rate 3 / (2m).
    const double m = static_cast<double>(c.finest_n / report.levels[i]);
    EXPECT_NEAR(oracle, 1.0 / (3.0 * report.levels[i] * report.levels[i]), 2.0 / m * oracle);
    EXPECT_NEAR(report.q[i], oracle, 2.5 * report.ci_half_width[i]) << "n = " << report.levels[i];
  }
}

TEST(Quadrature, AddingAConstantLeavesTheStatisticUnchanged) {
  const TestFunctional base = BuiltinFunctional("sign_sin", 1);
  TestFunctional shifted = base;
  shifted.f = [f = base.f](double s, std::span<const double> x, std::span<const double> y) {
    return f(s, x, y) + 5.0;
  };
  shifted.sup_bound = 6.0;
  const ScalingReport a = QuadratureStatisticBrownian(base, SmallConfig());
  const ScalingReport b = QuadratureStatisticBrownian(shifted, SmallConfig());
  for (std::size_t i = 0; i < a.q.size(); ++i) EXPECT_NEAR(a.q[i], b.q[i], 1e-13 * (1 + a.q[i]));
}

TEST(Quadrature, ScalingTheFunctionalScalesTheStatisticQuadratically) {
  const TestFunctional base = BuiltinFunctional("sign_sin", 1);
  TestFunctional scaled = base;
  scaled.f = [f = base.f](double s, std::span<const double> x, std::span<const double> y) {
    return 4.0 * f(s, x, y);
  };
  scaled.sup_bound = 4.0;
  const ScalingReport a = QuadratureStatisticEm(base, Builtin("sin", 1), SmallConfig());
  const ScalingReport b = QuadratureStatisticEm(scaled, Builtin("sin", 1), SmallConfig());
  // Factor 4 is a power of two, so the scaling is exact.
  for (std::size_t i = 0; i < a.q.size(); ++i) EXPECT_EQ(b.q[i], 16.0 * a.q[i]);
}

TEST(Quadrature, ZeroDriftEmEqualsBrownianStatisticBitExactly) {
  for (const char* name : {"sign_sin", "cos_time_sign_sin", "sign_sin_frozen", "indicator(0.3)"}) {
    QuadratureConfig c = SmallConfig();
    c.horizon = 1.0;
    const TestFunctional func = BuiltinFunctional(name, 1);
    const ScalingReport w = QuadratureStatisticBrownian(func, c);
    const ScalingReport x = QuadratureStatisticEm(func, Builtin("zero", 1), c);
    EXPECT_EQ(w.q, x.q) << name;
    EXPECT_EQ(w.ci_half_width, x.ci_half_width) << name;
  }
}

TEST(Quadrature, SubintervalAndHorizon) {
  QuadratureConfig c = SmallConfig();
  c.horizon = 2.0;
  TestFunctional func = BuiltinFunctional("sign_sin", 1);
  func.tau = 0.5;
  func.tau_prime = 1.5;
  const ScalingReport report = QuadratureStatisticBrownian(func, c);
  EXPECT_EQ(report.tau, 0.5);
  EXPECT_EQ(report.tau_prime, 1.5);
  for (double q : report.q) {
    EXPECT_GT(q, 0.0);
    EXPECT_LE(q, 4.0);  // (2 sup|f| (tau' - tau))^2
  }
}

TEST(Quadrature, StatisticDecreasesWithLevel) {
  QuadratureConfig c = SmallConfig();
  c.path_count = 2000;
  const ScalingReport report = QuadratureStatisticBrownian(BuiltinFunctional("sign_sin", 1), c);
  for (std::size_t i = 1; i < report.q.size(); ++i) EXPECT_LT(report.q[i], report.q[i - 1]);
  ASSERT_TRUE(report.plain_fit.has_value());
  EXPECT_LT(report.plain_fit->slope, -0.5);
}

TEST(Quadrature, FunctionalAboveItsBoundIsRejected) {
  TestFunctional bad = BuiltinFunctional("sign_sin", 1);
  bad.sup_bound = 0.5;
  EXPECT_THROW(QuadratureStatisticBrownian(bad, SmallConfig()), InvalidArgument);
  EXPECT_THROW(QuadratureStatisticEm(bad, Builtin("sin", 1), SmallConfig()), InvalidArgument);
}

TEST(Quadrature, ValidationListsProblems) {
  QuadratureConfig c = SmallConfig();
  c.levels = {3, 8, 8};
  c.finest_n = 500;
  TestFunctional func = BuiltinFunctional("sign_sin", 1);
  func.tau = 0.3;
  func.tau_prime = 1.2;
  EXPECT_GE(ValidateQuadratureConfig(func, c).size(), 4u);
  EXPECT_THROW(QuadratureStatisticBrownian(func, c), InvalidArgument);
  EXPECT_THROW(BuiltinFunctional("cosine", 1), InvalidArgument);
}

TEST(Quadrature, DirectIntegralMatchesHandSum) {
  const TestFunctional func = BuiltinFunctional("coordinate", 1);
  // Deterministic "path" z_j = j^2 on a grid of 8 with level 2.
  std::vector<double> storage(1);
  auto state = [&](std::int64_t j) -> std::span<const double> {
    storage[0] = static_cast<double>(j * j) / 64.0;
    return storage;
  };
  const double integral = QuadratureIntegral(func, 2, 8, 1.0, state, {});
  double expected = 0.0;
  for (int j = 0; j < 8; ++j) {
    const int base = (j / 4) * 4;
    expected += (j * j - base * base) / 64.0;
  }
  EXPECT_NEAR(integral, expected / 8.0, 1e-15);
}

}  // namespace
}  // namespace emlab

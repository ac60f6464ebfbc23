#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "emlab/error.hpp"
#include "emlab/zvonkin.hpp"

namespace emlab {
namespace {

constexpr double kStep = 1e-3;

TEST(ScaleTable, ZeroDriftGivesIdentity) {
  const ScaleTable t = BuildScaleTable(Builtin("zero", 1), 0.0, 3.0, kStep);
  for (double x : {-2.9, -1.0, 0.0, 0.123, 2.5, 7.0}) {
    EXPECT_NEAR(t.Phi(x), x, 1e-12);
    EXPECT_NEAR(t.Psi(x), x, 1e-12);
    EXPECT_EQ(t.PhiPrime(x), 1.0);
  }
}

TEST(ScaleTable, ConstantDriftMatchesClosedForm) {
  for (double c : {0.5, 1.0, -1.0}) {
    const ScaleTable t = BuildScaleTable(Builtin("constant(" + std::to_string(c) + ")", 1), 0.0,
                                         3.0, kStep);
    for (double x = -2.0; x <= 2.0; x += 0.0625) {
      const double exact = (1.0 - std::exp(-2.0 * c * x)) / (2.0 * c);
      EXPECT_NEAR(t.Phi(x), exact, 1e-8) << "c = " << c << ", x = " << x;
      EXPECT_NEAR(t.PhiPrime(x), std::exp(-2.0 * c * x), 1e-8);
    }
  }
}

TEST(ScaleTable, SignDriftMatchesClosedForm) {
  const ScaleTable t = BuildScaleTable(Builtin("sign", 1), 0.0, 3.0, kStep);
  const auto grid = t.grid();
  const auto phi_prime = t.phi_prime();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = std::clamp(grid[i], -2.0, 2.0);
    EXPECT_NEAR(phi_prime[i], std::exp(-2.0 * std::abs(x)), 1e-12) << grid[i];
  }
  for (double x = -2.0; x <= 2.0; x += 0.03125) {
    const double exact = std::copysign(1.0 - std::exp(-2.0 * std::abs(x)), x) / 2.0;
    EXPECT_NEAR(t.Phi(x), exact, 1e-8) << x;
  }
}

TEST(ScaleTable, InverseRoundTrip) {
  for (const char* name : {"sign", "sin", "step_grid", "constant(1)"}) {
    const ScaleTable t = BuildScaleTable(Builtin(name, 1), 0.37, 3.0, kStep);
    EXPECT_TRUE(t.StrictlyIncreasing()) << name;
    for (double x = 0.37 - 3.5; x <= 0.37 + 3.5; x += 0.0371) {
      EXPECT_NEAR(t.Psi(t.Phi(x)), x, 1e-10) << name << " x = " << x;
    }
    const auto y = t.psi_grid();
    for (std::size_t i = 0; i < y.size(); i += 97) {
      EXPECT_NEAR(t.Phi(t.Psi(y[i])), y[i], 1e-10) << name;
    }
  }
}

TEST(ScaleTable, DerivativeRangeAndLocalisation) {
  for (const char* name : {"sign", "sin", "step_grid", "constant(-1)"}) {
    const DriftSpec drift = Builtin(name, 1);
    const ScaleTable t = BuildScaleTable(drift, -0.4, 3.0, kStep);
    const double s = drift.sup_bound;
    for (double v : t.phi_prime()) {
      EXPECT_GE(v, std::exp(-8.0 * s));
      EXPECT_LE(v, std::exp(8.0 * s));
    }
    EXPECT_LE(t.LocalisationGap(), 1e-12) << name;
    EXPECT_EQ(t.Phi(0.0), 0.0);
    // Linear extension beyond the table.
    EXPECT_NEAR(t.Phi(10.0) - t.Phi(9.0), t.PhiPrime(9.0), 1e-12);
  }
}

TEST(ScaleTable, OdeResidual) {
  const double tol = 10.0 * kStep * kStep;
  {
    const ScaleTable t = BuildScaleTable(Builtin("zero", 1), 0.0, 3.0, kStep);
    const OdeResidualReport r = VerifyOdeResidual(t, Builtin("zero", 1));
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.max_fd_residual, 1e-12);
  }
  {
    const DriftSpec drift = Builtin("constant(1)", 1);
    const OdeResidualReport r = VerifyOdeResidual(BuildScaleTable(drift, 0.0, 3.0, kStep), drift);
    EXPECT_TRUE(r.passed);
    EXPECT_NEAR(r.tolerance, tol * 8.0, 1e-15);
    EXPECT_LE(r.max_fd_residual, r.tolerance);
    EXPECT_EQ(r.points_excluded, 0);
  }
  {
    const DriftSpec drift = Builtin("sign", 1);
    const OdeResidualReport r = VerifyOdeResidual(BuildScaleTable(drift, 0.0, 3.0, kStep), drift);
    EXPECT_TRUE(r.passed);
    EXPECT_GT(r.points_excluded, 0);
    ASSERT_EQ(r.one_sided.size(), 1u);
    EXPECT_NEAR(r.one_sided[0].x, 0.0, 1e-15);
    EXPECT_LE(std::abs(r.one_sided[0].left), r.tolerance);
    EXPECT_LE(std::abs(r.one_sided[0].right), r.tolerance);
  }
}

TEST(ScaleTable, LipschitzBounds) {
  {
    const LipschitzBoundReport r =
        VerifyLipschitzBounds(BuildScaleTable(Builtin("zero", 1), 0.0, 3.0, kStep), Builtin("zero", 1));
    EXPECT_NEAR(r.sup_phi_prime, 1.0, 1e-14);
    EXPECT_NEAR(r.sup_phi_second, 0.0, 1e-14);
    EXPECT_NEAR(r.sup_psi_prime, 1.0, 1e-14);
    EXPECT_NEAR(r.sup_phi_prime_of_psi_derivative, 0.0, 1e-14);
    EXPECT_TRUE(r.passed);
  }
  {
    const DriftSpec drift = Builtin("constant(1)", 1);
    const LipschitzBoundReport r = VerifyLipschitzBounds(BuildScaleTable(drift, 0.0, 3.0, kStep), drift);
    EXPECT_NEAR(r.sup_phi_prime, std::exp(4.0), 1e-6);
    EXPECT_NEAR(r.sup_phi_second, 2.0 * std::exp(4.0), 1e-5);
    EXPECT_NEAR(r.sup_phi_prime_of_psi_derivative, 2.0, 1e-9);
    EXPECT_NEAR(r.bound, std::exp(8.0) * 9.0, 1e-6);
    EXPECT_TRUE(r.passed);
  }
  {
    const DriftSpec drift = Builtin("sign", 1);
    const LipschitzBoundReport r = VerifyLipschitzBounds(BuildScaleTable(drift, 0.0, 3.0, kStep), drift);
    EXPECT_NEAR(r.sup_psi_prime, std::exp(4.0), 1e-6);
    EXPECT_NEAR(r.sup_phi_prime, 1.0, 1e-12);
    EXPECT_TRUE(r.passed);
  }
}

TEST(ScaleTable, RejectsBadArguments) {
  EXPECT_THROW(BuildScaleTable(Builtin("sin", 2), 0.0, 3.0, kStep), InvalidArgument);
  EXPECT_THROW(BuildScaleTable(Builtin("sin", 1), 0.0, 1.5, kStep), InvalidArgument);
  EXPECT_THROW(BuildScaleTable(Builtin("sin", 1), 0.0, 3.0, 0.0), InvalidArgument);
  EXPECT_THROW(BuildScaleTable(Builtin("sin", 1), 0.0, 3.0, 0.0007), InvalidArgument);
}

TEST(ScaleTable, CsvColumns) {
  const auto file = std::filesystem::temp_directory_path() / "emlab_scale_table_test.csv";
  WriteScaleTableCsv(file, BuildScaleTable(Builtin("sign", 1), 0.0, 2.0, 0.25));
  std::ifstream in(file);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "x,phi,phi_prime,psi");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 17);
  std::filesystem::remove(file);
}

TEST(Driftlessness, TransformedProcessHasNoDrift) {
  for (const char* name : {"zero", "constant(1)", "sign"}) {
    DriftlessnessConfig c;
    c.path_count = 20000;
    c.level = 1024;
    c.seed = 11;
    const DriftlessnessReport r = TransformedDriftlessnessCheck(Builtin(name, 1), c);
    EXPECT_TRUE(r.passed) << name << " z = " << r.z_score;
    EXPECT_EQ(r.path_count, 20000u);
    EXPECT_GE(r.exited_fraction, 0.0);
    EXPECT_LE(r.exited_fraction, 1.0);
  }
}

}  // namespace
}  // namespace emlab

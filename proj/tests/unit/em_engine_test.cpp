#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "emlab/em_engine.hpp"
#include "emlab/error.hpp"
#include "emlab/streaming_stats.hpp"

namespace emlab {
namespace {

TEST(SimulateEm, ZeroDriftIsStartPlusBrownianPath) {
  const auto tableau = BrownianTableau::Generate(PathSeed{1, 2}, 2, 64, 1.0);
  const std::vector<double> x0{0.3, -1.7};
  const SchemePath path = SimulateEm(Builtin("zero", 2), tableau, 16, x0);
  ASSERT_EQ(path.steps(), 16);
  for (std::int64_t k = 0; k <= 16; ++k) {
    for (int i = 0; i < 2; ++i) EXPECT_EQ(path.State(k)[i], x0[i] + tableau.ValueAtIndex(4 * k)[i]);
  }
  EXPECT_EQ(path.Initial()[0], x0[0]);
}

TEST(SimulateEm, ConstantDriftMatchesClosedForm) {
  const auto tableau = BrownianTableau::Generate(PathSeed{3, 4}, 1, 256, 2.0);
  const std::vector<double> x0{0.5};
  const std::int64_t checkpoints[] = {0, 64, 128, 256, 512};
  const ReferencePath exact = SimulateReference(
      Builtin("constant(0.7)", 1), tableau, {ReferenceKind::kExactConstantDrift, 0, 0, 16}, x0,
      checkpoints);
  const SchemePath path = SimulateEm(Builtin("constant(0.7)", 1), tableau, 32, x0);
  for (std::size_t c = 0; c < 5; ++c) {
    const std::int64_t k = checkpoints[c] / path.stride();
    EXPECT_EQ(path.State(k)[0], exact.State(c)[0]) << "checkpoint " << c;
  }
}

TEST(SimulateEm, SignDriftMatchesHandUnrolledRecursion) {
  const auto tableau = BrownianTableau::Generate(PathSeed{2718, 0}, 1, 4, 1.0);
  const SchemePath path = SimulateEm(Builtin("sign", 1), tableau, 4, std::vector<double>{0.0});
  auto sign = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
  double x = 0.0;
  std::vector<double> expected{x};
  for (int k = 0; k < 4; ++k) {
    x = x + sign(x) / 4.0 + tableau.Increment(k)[0];
    expected.push_back(x);
  }
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(path.State(k)[0], expected[k], 1e-15) << k;
}

TEST(SimulateEm, StepRecursionHoldsToRoundoff) {
  const auto tableau = BrownianTableau::Generate(PathSeed{8, 1}, 2, 1024, 1.0);
  const DriftSpec drift = Builtin("sin", 2);
  const SchemePath path = SimulateEm(drift, tableau, 128, std::vector<double>{0.1, 0.2});
  for (std::int64_t k = 0; k < path.steps(); ++k) {
    const auto b = drift(path.State(k));
    for (int i = 0; i < 2; ++i) {
      const double dw = tableau.ValueAtIndex((k + 1) * 8)[i] - tableau.ValueAtIndex(k * 8)[i];
      EXPECT_NEAR(path.State(k + 1)[i], path.State(k)[i] + b[i] / 128.0 + dw, 1e-13);
      EXPECT_EQ(path.DriftValue(k)[i], b[i]);
    }
  }
}

TEST(SimulateEm, ContinuousExtensionBetweenGridPoints) {
  const auto tableau = BrownianTableau::Generate(PathSeed{5, 5}, 1, 64, 1.0);
  const DriftSpec drift = Builtin("sign", 1);
  const SchemePath path = SimulateEm(drift, tableau, 8, std::vector<double>{0.0});
  double out[1];
  for (std::int64_t j = 0; j <= 64; ++j) {
    path.ValueAtFine(j, tableau, out);
    const std::int64_t k = j / 8;
    const double s = j / 64.0;
    const double expected = path.State(k)[0] + drift.Scalar(path.State(k)[0]) * (s - k / 8.0) +
                            (tableau.ValueAtIndex(j)[0] - tableau.ValueAtIndex(k * 8)[0]);
    EXPECT_NEAR(out[0], expected, 1e-14);
    if (j % 8 == 0) EXPECT_EQ(out[0], path.State(k)[0]);
  }
}

TEST(SimulateEm, RejectsMismatchedGrids) {
  const auto tableau = BrownianTableau::Generate(PathSeed{}, 1, 64, 1.0);
  EXPECT_THROW(SimulateEm(Builtin("sin", 1), tableau, 3, std::vector<double>{0.0}), InvalidArgument);
  EXPECT_THROW(SimulateEm(Builtin("sin", 1), tableau, 128, std::vector<double>{0.0}), InvalidArgument);
  EXPECT_THROW(SimulateEm(Builtin("sin", 2), tableau, 8, std::vector<double>{0.0}), InvalidArgument);
  EXPECT_THROW(SimulateEm(Builtin("sin", 1), tableau, 8, std::vector<double>{0.0, 1.0}), InvalidArgument);
}

TEST(SimulateEm, ZeroDriftLevelsCoincideAtCommonTimes) {
  const auto tableau = BrownianTableau::Generate(PathSeed{6, 6}, 3, 512, 1.0);
  const std::vector<double> x0{1.0, 2.0, 3.0};
  const SchemePath coarse = SimulateEm(Builtin("zero", 3), tableau, 8, x0);
  const SchemePath fine = SimulateEm(Builtin("zero", 3), tableau, 128, x0);
  for (std::int64_t k = 0; k <= 8; ++k) {
    for (int i = 0; i < 3; ++i) EXPECT_EQ(coarse.State(k)[i], fine.State(16 * k)[i]);
  }
}

TEST(SimulateEm, LipschitzDriftRefinementHalvesDistance) {
  // Mean over seeds of max_k |X^n - X^{2n}| at level-n grid times.
  auto distance = [](std::int64_t n) {
    RunningMoments m;
    for (std::uint64_t p = 0; p < 200; ++p) {
      const auto tableau = BrownianTableau::Generate(PathSeed{31, p}, 1, 1024, 1.0);
      const DriftSpec drift = Builtin("sin", 1);
      const SchemePath a = SimulateEm(drift, tableau, n, std::vector<double>{0.0});
      const SchemePath b = SimulateEm(drift, tableau, 2 * n, std::vector<double>{0.0});
      double worst = 0.0;
      for (std::int64_t k = 0; k <= n; ++k) {
        worst = std::max(worst, std::abs(a.State(k)[0] - b.State(2 * k)[0]));
      }
      m.Add(worst);
    }
    return m.mean();
  };
  const double d64 = distance(64), d128 = distance(128), d256 = distance(256);
  EXPECT_NEAR(d64 / d128, 2.0, 0.4);
  EXPECT_NEAR(d128 / d256, 2.0, 0.4);
}

TEST(SimulateReference, ExactKinds) {
  const auto tableau = BrownianTableau::Generate(PathSeed{12, 0}, 1, 16, 1.0);
  const std::int64_t end[] = {16};
  const double w = tableau.ValueAtIndex(16)[0];
  const ReferencePath zero = SimulateReference(Builtin("zero", 1), tableau,
                                               {ReferenceKind::kExactZeroDrift, 0, 0, 16},
                                               std::vector<double>{0.25}, end);
  EXPECT_EQ(zero.State(0)[0], 0.25 + w);
  const ReferencePath one = SimulateReference(Builtin("constant(1)", 1), tableau,
                                              {ReferenceKind::kExactConstantDrift, 0, 0, 16},
                                              std::vector<double>{0.0}, end);
  EXPECT_EQ(one.State(0)[0], 1.0 + w);
}

TEST(SimulateReference, RejectsMismatchedKindAndShortReference) {
  const auto tableau = BrownianTableau::Generate(PathSeed{}, 1, 256, 1.0);
  const std::int64_t cps[] = {0, 256};
  const std::vector<double> x0{0.0};
  EXPECT_THROW(SimulateReference(Builtin("sin", 1), tableau, {ReferenceKind::kExactZeroDrift, 0, 0, 16}, x0, cps),
               InvalidArgument);
  EXPECT_THROW(SimulateReference(Builtin("sin", 1), tableau, {ReferenceKind::kExactConstantDrift, 0, 0, 16}, x0, cps),
               InvalidArgument);
  EXPECT_THROW(SimulateReference(Builtin("sin", 1), tableau, {ReferenceKind::kFineEm, 256, 32, 16}, x0, cps),
               InvalidArgument);
  EXPECT_NO_THROW(SimulateReference(Builtin("sin", 1), tableau, {ReferenceKind::kFineEm, 256, 16, 16}, x0, cps));
}

TEST(SimulateReference, FineEmGapHalvesWhenReferenceDoubles) {
  const DriftSpec drift = Builtin("sin", 1);
  const std::vector<double> x0{0.0};
  auto gap = [&](std::int64_t n_ref) {
    RunningMoments m;
    for (std::uint64_t p = 0; p < 200; ++p) {
      const auto tableau = BrownianTableau::Generate(PathSeed{77, p}, 1, 8192, 1.0);
      const auto cps = EquispacedCheckpoints(8192, 9);
      const ReferencePath a = SimulateReference(drift, tableau, {ReferenceKind::kFineEm, n_ref, 1, 16}, x0, cps);
      const ReferencePath b = SimulateReference(drift, tableau, {ReferenceKind::kFineEm, 2 * n_ref, 1, 16}, x0, cps);
      double worst = 0.0;
      for (std::size_t c = 0; c < cps.size(); ++c) worst = std::max(worst, std::abs(a.State(c)[0] - b.State(c)[0]));
      m.Add(worst);
    }
    return m.mean();
  };
  const double ratio = gap(1024) / gap(2048);
  EXPECT_NEAR(ratio, 2.0, 0.5);
}

TEST(Checkpoints, EquispacedIncludesBothEnds) {
  EXPECT_EQ(EquispacedCheckpoints(16, 9), (std::vector<std::int64_t>{0, 2, 4, 6, 8, 10, 12, 14, 16}));
  EXPECT_THROW(EquispacedCheckpoints(10, 9), InvalidArgument);
  EXPECT_THROW(EquispacedCheckpoints(10, 1), InvalidArgument);
}

TEST(ReferenceKinds, NamesRoundTrip) {
  for (ReferenceKind kind : {ReferenceKind::kExactZeroDrift, ReferenceKind::kExactConstantDrift, ReferenceKind::kFineEm}) {
    EXPECT_EQ(ParseReferenceKind(ToString(kind)), kind);
  }
  EXPECT_THROW(ParseReferenceKind("exact"), InvalidArgument);
  EXPECT_EQ(DefaultReferenceKind(Builtin("zero", 1)), ReferenceKind::kExactZeroDrift);
  EXPECT_EQ(DefaultReferenceKind(Builtin("constant(2)", 1)), ReferenceKind::kExactConstantDrift);
  EXPECT_EQ(DefaultReferenceKind(Builtin("sign", 1)), ReferenceKind::kFineEm);
}

TEST(WritePathCsv, WritesHeaderAndRows) {
  const auto tableau = BrownianTableau::Generate(PathSeed{}, 2, 8, 1.0);
  const SchemePath path = SimulateEm(Builtin("sin", 2), tableau, 4, std::vector<double>{0.0, 0.0});
  const auto file = std::filesystem::temp_directory_path() / "emlab_path_test.csv";
  WritePathCsv(file, path);
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,X1,X2");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
  std::filesystem::remove(file);
}

}  // namespace
}  // namespace emlab

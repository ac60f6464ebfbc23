#include "emlab/em_engine.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "emlab/csv.hpp"
#include "emlab/error.hpp"

namespace emlab {
namespace {

// Error-free accumulation of a running sum as an unevaluated pair (hi, lo).
struct TwoTermSum {
  double hi = 0.0;
  double lo = 0.0;

  void Add(double v) noexcept {
    const double s = hi + v;
    const double bp = s - hi;
    const double err = (hi - (s - bp)) + (v - bp);
    hi = s;
    lo += err;
  }
  double Value() const noexcept { return hi + lo; }
};

void CheckDimension(int expected, std::size_t got, const char* what) {
  if (static_cast<std::size_t>(expected) != got) {
    throw InvalidArgument(std::string(what) + " has dimension " + std::to_string(got) +
                          ", expected " + std::to_string(expected));
  }
}

}  // namespace

void SchemePath::ValueAtFine(std::int64_t j, const BrownianTableau& tableau,
                             std::span<double> out) const {
  const std::int64_t k = j / stride_;
  const std::int64_t base = k * stride_;
  // s - k_n(s) is a dyadic multiple of the fine step, exactly representable.
  const double offset = static_cast<double>(j - base) / static_cast<double>(tableau.finest_n());
  const auto w = tableau.ValueAtIndex(j);
  const auto drift_integral = DriftIntegral(k);
  const auto drift = DriftValue(k);
  for (int i = 0; i < dimension_; ++i) {
    out[i] = (x0_[i] + (drift_integral[i] + drift[i] * offset)) + w[i];
  }
}

SchemePath SimulateEm(const DriftSpec& drift, const BrownianTableau& tableau, std::int64_t n,
                      std::span<const double> x0n) {
  CheckDimension(tableau.dimension(), x0n.size(), "initial state");
  CheckDimension(tableau.dimension(), static_cast<std::size_t>(drift.dimension), "drift");
  SchemePath path;
  path.level_ = n;
  path.dimension_ = tableau.dimension();
  path.stride_ = tableau.StrideOf(n);
  path.steps_ = tableau.steps() / path.stride_;
  const auto d = static_cast<std::size_t>(path.dimension_);
  const auto rows = static_cast<std::size_t>(path.steps_ + 1);
  path.x0_.assign(x0n.begin(), x0n.end());
  path.states_.resize(rows * d);
  path.drift_.resize(rows * d);
  path.drift_integral_.resize(rows * d);

  const double step = 1.0 / static_cast<double>(n);  // exact: n is a power of two
  std::vector<TwoTermSum> sums(d);
  for (std::int64_t k = 0;; ++k) {
    const auto w = tableau.ValueAtIndex(k * path.stride_);
    double* state = path.states_.data() + k * d;
    double* integral = path.drift_integral_.data() + k * d;
    for (std::size_t i = 0; i < d; ++i) {
      integral[i] = step * sums[i].Value();
      state[i] = (path.x0_[i] + integral[i]) + w[i];
    }
    double* b = path.drift_.data() + k * d;
    drift.evaluate(std::span<const double>(state, d), std::span<double>(b, d));
    if (k == path.steps_) break;
    for (std::size_t i = 0; i < d; ++i) sums[i].Add(b[i]);
  }
  return path;
}

std::string_view ToString(ReferenceKind kind) noexcept {
  switch (kind) {
    case ReferenceKind::kExactZeroDrift: return "exact_zero_drift";
    case ReferenceKind::kExactConstantDrift: return "exact_constant_drift";
    case ReferenceKind::kFineEm: return "fine_em";
  }
  return "unknown";
}

ReferenceKind ParseReferenceKind(std::string_view text) {
  if (text == "exact_zero_drift") return ReferenceKind::kExactZeroDrift;
  if (text == "exact_constant_drift") return ReferenceKind::kExactConstantDrift;
  if (text == "fine_em") return ReferenceKind::kFineEm;
  throw InvalidArgument("unknown reference kind '" + std::string(text) + "'");
}

ReferenceKind DefaultReferenceKind(const DriftSpec& drift) noexcept {
  if (drift.constant_value) {
    for (double c : *drift.constant_value) {
      if (c != 0.0) return ReferenceKind::kExactConstantDrift;
    }
    return ReferenceKind::kExactZeroDrift;
  }
  return ReferenceKind::kFineEm;
}

ReferencePath SimulateReference(const DriftSpec& drift, const BrownianTableau& tableau,
                                const ReferenceRequest& request, std::span<const double> x0,
                                std::span<const std::int64_t> checkpoints) {
  CheckDimension(tableau.dimension(), x0.size(), "initial state");
  ReferencePath ref;
  ref.kind = request.kind;
  ref.dimension = tableau.dimension();
  ref.checkpoints.assign(checkpoints.begin(), checkpoints.end());
  const auto d = static_cast<std::size_t>(ref.dimension);
  ref.states.resize(checkpoints.size() * d);
  for (std::int64_t j : checkpoints) {
    if (j < 0 || j > tableau.steps()) throw InvalidArgument("checkpoint outside the tableau");
  }

  switch (request.kind) {
    case ReferenceKind::kExactZeroDrift: {
      if (DefaultReferenceKind(drift) != ReferenceKind::kExactZeroDrift) {
        throw InvalidArgument("exact_zero_drift reference requires the zero drift, got '" +
                              drift.name + "'");
      }
      ref.level = tableau.finest_n();
      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const auto w = tableau.ValueAtIndex(checkpoints[c]);
        for (std::size_t i = 0; i < d; ++i) ref.states[c * d + i] = (x0[i] + 0.0) + w[i];
      }
      return ref;
    }
    case ReferenceKind::kExactConstantDrift: {
      if (!drift.constant_value) {
        throw InvalidArgument("exact_constant_drift reference requires a constant drift, got '" +
                              drift.name + "'");
      }
      ref.level = tableau.finest_n();
      const auto& c = *drift.constant_value;
      for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const double t =
            static_cast<double>(checkpoints[k]) / static_cast<double>(tableau.finest_n());
        const auto w = tableau.ValueAtIndex(checkpoints[k]);
        for (std::size_t i = 0; i < d; ++i) ref.states[k * d + i] = (x0[i] + c[i] * t) + w[i];
      }
      return ref;
    }
    case ReferenceKind::kFineEm: {
      if (request.n_ref < request.ref_factor * request.max_tested_level) {
        throw InvalidArgument("n_ref " + std::to_string(request.n_ref) + " is below ref_factor " +
                              std::to_string(request.ref_factor) + " x largest tested level " +
                              std::to_string(request.max_tested_level));
      }
      ref.level = request.n_ref;
      const SchemePath fine = SimulateEm(drift, tableau, request.n_ref, x0);
      for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        if (checkpoints[k] % fine.stride() != 0) {
          throw InvalidArgument("checkpoint not on the reference grid");
        }
        const auto state = fine.State(checkpoints[k] / fine.stride());
        std::copy(state.begin(), state.end(), ref.states.begin() + k * d);
      }
      return ref;
    }
  }
  return ref;
}

std::vector<std::int64_t> EquispacedCheckpoints(std::int64_t total_steps, int count) {
  if (count < 2) throw InvalidArgument("need at least two checkpoints (0 and T)");
  const std::int64_t intervals = count - 1;
  if (total_steps % intervals != 0) {
    throw InvalidArgument(std::to_string(count) + " equispaced checkpoints do not fall on a grid of " +
                          std::to_string(total_steps) + " steps");
  }
  std::vector<std::int64_t> out(static_cast<std::size_t>(count));
  for (std::int64_t c = 0; c < count; ++c) out[c] = c * (total_steps / intervals);
  return out;
}

void WritePathCsv(const std::filesystem::path& file, const SchemePath& path) {
  CsvWriter csv(file);
  std::vector<std::string> header{"t"};
  for (int i = 1; i <= path.dimension(); ++i) header.push_back("X" + std::to_string(i));
  csv.Header(header);
  for (std::int64_t k = 0; k <= path.steps(); ++k) {
    csv.Begin();
    csv.Field(path.Time(k));
    for (double v : path.State(k)) csv.Field(v);
    csv.End();
  }
}

}  // namespace emlab

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "emlab/drift_catalog.hpp"
#include "emlab/rng_paths.hpp"

namespace emlab {

/// Euler-Maruyama path X^n on the level-n grid, driven by a shared tableau.
///
/// States are assembled as X_k = x0n + D_k + W_{k/n}, where D_k is the drift
/// integral sum_{j<k} b(X_j)/n accumulated with an error-free (two-term)
/// summation and scaled by the exact power-of-two step. This is the
/// recursion X_{k+1} = X_k + b(X_k)/n + dW_k rewritten so that zero drift
/// gives x0n + W bit-exactly and constant drift gives x0n + c t + W.
class SchemePath {
 public:
  std::int64_t level() const noexcept { return level_; }
  int dimension() const noexcept { return dimension_; }
  std::int64_t steps() const noexcept { return steps_; }
  // Fine steps of the driving tableau per level step.
  std::int64_t stride() const noexcept { return stride_; }
  double Time(std::int64_t k) const noexcept {
    return static_cast<double>(k) / static_cast<double>(level_);
  }

  std::span<const double> State(std::int64_t k) const noexcept { return Row(states_, k); }
  std::span<const double> DriftValue(std::int64_t k) const noexcept { return Row(drift_, k); }
  std::span<const double> DriftIntegral(std::int64_t k) const noexcept {
    return Row(drift_integral_, k);
  }
  std::span<const double> Initial() const noexcept { return State(0); }
  std::span<const double> InitialOffset() const noexcept { return x0_; }

  // Continuous-time extension at fine grid index j of the driving tableau:
  // X_s = X_{k_n(s)} + b(X_{k_n(s)})(s - k_n(s)) + W_s - W_{k_n(s)}.
  void ValueAtFine(std::int64_t j, const BrownianTableau& tableau, std::span<double> out) const;

 private:
  friend SchemePath SimulateEm(const DriftSpec&, const BrownianTableau&, std::int64_t,
                               std::span<const double>);
  std::span<const double> Row(const std::vector<double>& v, std::int64_t k) const noexcept {
    return {v.data() + k * dimension_, static_cast<std::size_t>(dimension_)};
  }

  std::int64_t level_ = 0;
  int dimension_ = 0;
  std::int64_t steps_ = 0;
  std::int64_t stride_ = 0;
  std::vector<double> x0_;
  std::vector<double> states_;          // (steps + 1) x d
  std::vector<double> drift_;           // (steps + 1) x d, b(X_k)
  std::vector<double> drift_integral_;  // (steps + 1) x d, D_k
};

/// Throws InvalidArgument if n does not divide tableau.finest_n() or the
/// dimensions disagree.
SchemePath SimulateEm(const DriftSpec& drift, const BrownianTableau& tableau, std::int64_t n,
                      std::span<const double> x0n);

enum class ReferenceKind { kExactZeroDrift, kExactConstantDrift, kFineEm };

std::string_view ToString(ReferenceKind kind) noexcept;
ReferenceKind ParseReferenceKind(std::string_view text);

// Closed form when the drift allows one, fine-grid EM otherwise.
ReferenceKind DefaultReferenceKind(const DriftSpec& drift) noexcept;

/// The (proxy) true solution X at checkpoint times.
struct ReferencePath {
  ReferenceKind kind = ReferenceKind::kFineEm;
  std::int64_t level = 0;  // n_ref for kFineEm, finest_n otherwise
  int dimension = 0;
  std::vector<std::int64_t> checkpoints;  // fine grid indices
  std::vector<double> states;             // checkpoints x d

  std::span<const double> State(std::size_t i) const noexcept {
    return {states.data() + i * dimension, static_cast<std::size_t>(dimension)};
  }
};

struct ReferenceRequest {
  ReferenceKind kind = ReferenceKind::kFineEm;
  std::int64_t n_ref = 0;
  std::int64_t max_tested_level = 0;
  std::int64_t ref_factor = 16;
};

/// Throws InvalidArgument on a drift/kind mismatch or n_ref below
/// ref_factor * max_tested_level.
ReferencePath SimulateReference(const DriftSpec& drift, const BrownianTableau& tableau,
                                const ReferenceRequest& request, std::span<const double> x0,
                                std::span<const std::int64_t> checkpoints);

/// `count` equispaced fine indices from 0 to total_steps inclusive.
/// Throws if they do not land on integers.
std::vector<std::int64_t> EquispacedCheckpoints(std::int64_t total_steps, int count);

/// Debug dump of one path: columns t, X1..Xd.
void WritePathCsv(const std::filesystem::path& file, const SchemePath& path);

}  // namespace emlab

#pragma once

#include "t2ieval/warnings.hpp"

namespace t2ieval {

/// Counts produced by the atomic-task decomposition of a prompt/image pair.
struct AtomicCounts {
  int x1 = 0;  ///< objects specified in the text prompt
  int x2 = 0;  ///< of those, objects present in the image
  int y1 = 0;  ///< attributes specified in the text prompt
  int y2 = 0;  ///< of those, attributes depicted correctly

  friend bool operator==(const AtomicCounts&, const AtomicCounts&) = default;
};

/// Enforce 0 <= x2 <= x1 and 0 <= y2 <= y1 by clamping; each adjustment
/// produces a warning.
AtomicCounts clamp_counts(AtomicCounts counts, Warnings* warnings = nullptr);

/// (x2/x1)/2 + (y2/y1)/2. A zero denominator means the prompt asked for
/// nothing of that kind, and the term contributes its full 0.5.
/// Expects counts that already satisfy the clamp invariants.
double rule_enhanced_score(const AtomicCounts& counts);

/// Integer rating on a 1..n scale divided by n. Out-of-range ratings are
/// clamped into [1, n] with a warning.
struct ScaledRating {
  int rating;
  double normalized;
};
ScaledRating scale_rating(long long rating, int n, Warnings* warnings = nullptr);

inline constexpr int kMaxCountedErrors = 9;

/// Quality-oriented error score: 1 - min(e, 9)/9, so that more errors map
/// to a lower score on the same [0,1] axis as the overall rating.
double error_quality(long long error_count);

}  // namespace t2ieval

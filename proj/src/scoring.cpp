#include "t2ieval/scoring.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace t2ieval {

AtomicCounts clamp_counts(AtomicCounts c, Warnings* warnings) {
  auto non_negative = [&](int& v, const char* name) {
    if (v < 0) {
      warn(warnings, std::string("atomic count ") + name + "=" + std::to_string(v) + " clamped to 0");
      v = 0;
    }
  };
  non_negative(c.x1, "X1");
  non_negative(c.x2, "X2");
  non_negative(c.y1, "Y1");
  non_negative(c.y2, "Y2");
  if (c.x2 > c.x1) {
    warn(warnings, "X2=" + std::to_string(c.x2) + " exceeds X1=" + std::to_string(c.x1) + "; clamped");
    c.x2 = c.x1;
  }
  if (c.y2 > c.y1) {
    warn(warnings, "Y2=" + std::to_string(c.y2) + " exceeds Y1=" + std::to_string(c.y1) + "; clamped");
    c.y2 = c.y1;
  }
  return c;
}

double rule_enhanced_score(const AtomicCounts& c) {
  if (c.x1 < 0 || c.y1 < 0 || c.x2 < 0 || c.y2 < 0 || c.x2 > c.x1 || c.y2 > c.y1) {
    throw std::invalid_argument("rule_enhanced_score: counts violate 0 <= x2 <= x1, 0 <= y2 <= y1");
  }
  const double objects = c.x1 == 0 ? 0.5 : (double(c.x2) / double(c.x1)) / 2.0;
  const double attributes = c.y1 == 0 ? 0.5 : (double(c.y2) / double(c.y1)) / 2.0;
  return objects + attributes;
}

ScaledRating scale_rating(long long rating, int n, Warnings* warnings) {
  if (n < 2) throw std::invalid_argument("rating scale n must be >= 2");
  long long r = rating;
  if (r < 1 || r > n) {
    r = std::clamp<long long>(r, 1, n);
    warn(warnings, "rating " + std::to_string(rating) + " outside 1-" + std::to_string(n) +
                       "; clamped to " + std::to_string(r));
  }
  return {int(r), double(r) / double(n)};
}

double error_quality(long long error_count) {
  if (error_count < 0) throw std::invalid_argument("error count must be non-negative");
  const long long capped = std::min<long long>(error_count, kMaxCountedErrors);
  return 1.0 - double(capped) / double(kMaxCountedErrors);
}

}  // namespace t2ieval

#pragma once

#include "t2ieval/scoring.hpp"
#include "t2ieval/warnings.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace t2ieval {

/// Tags the evaluator asks the model to emit, in canonical render order.
inline constexpr std::array<std::string_view, 7> kReplyTags = {"SCORE", "ERRORS", "X1", "X2",
                                                               "Y1",    "Y2",     "RATIONALE"};

/// Tag -> raw value, keys in canonical uppercase.
struct TaggedReply {
  std::map<std::string, std::string> fields;

  std::optional<std::string> get(std::string_view tag) const;
  friend bool operator==(const TaggedReply&, const TaggedReply&) = default;
};

/// Scan `reply` for lines of the form "TAG: value" (tag case-insensitive,
/// optional whitespace around the colon, tolerant of markdown bullets and
/// bold markers). The first occurrence of a tag wins; later duplicates are
/// reported as warnings. RATIONALE also absorbs following untagged lines.
TaggedReply parse_tagged(std::string_view reply, Warnings* warnings = nullptr);

/// Inverse of parse_tagged for values without newlines.
std::string render_tagged(const TaggedReply& reply);

/// Leading numeric value of a tag value ("87", "87/100", "**8.5**"),
/// rounded half away from zero. Empty if the value does not start with a number.
std::optional<long long> parse_leading_integer(std::string_view value);

/// Recover an integer from untagged prose. Returns the first standalone
/// number in [lo, hi]; when several qualify, one in the same sentence as
/// "score", "rating", "rate" or "error(s)" and closest to that keyword wins.
std::optional<long long> parse_integer_fallback(std::string_view reply, long long lo, long long hi);

/// All four of X1, X2, Y1, Y2 as integers, or empty. Counts are returned
/// as parsed (not clamped).
std::optional<AtomicCounts> parse_atomic(std::string_view reply, Warnings* warnings = nullptr);

/// Rating from a SCORE (or other named) tag, falling back to prose.
/// Tagged values are returned unclamped; prose values are restricted to [lo, hi].
std::optional<long long> extract_rating(std::string_view reply, std::string_view tag, long long lo,
                                        long long hi, Warnings* warnings = nullptr);

/// RATIONALE tag if present, otherwise the whole reply collapsed into one
/// paragraph (whitespace runs folded to single spaces).
std::string extract_rationale(std::string_view reply);

}  // namespace t2ieval

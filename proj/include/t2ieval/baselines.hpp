#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace t2ieval::baselines {

/// max(cos(u, v), 0). Throws DegenerateEmbedding on a zero vector and
/// BackendContractViolation on a dimension mismatch.
double clip_style_score(std::span<const double> image_or_text, std::span<const double> text);

enum class MeteorMatcher { exact, exact_plus_stem };

struct MeteorParams {
  double penalty_gamma = 0.5;
  double penalty_power = 3.0;
  MeteorMatcher matcher = MeteorMatcher::exact;
};

/// Lowercase, split on whitespace, strip leading/trailing ASCII punctuation,
/// drop tokens that become empty.
std::vector<std::string> meteor_tokenize(std::string_view text);

/// Candidate index -> reference index for each matched unigram, sorted by
/// candidate index.
using Alignment = std::vector<std::pair<std::size_t, std::size_t>>;

struct MeteorBreakdown {
  double score = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  std::size_t matches = 0;
  std::size_t chunks = 0;
  Alignment alignment;
  bool search_exhausted = true;  ///< false if the alignment search hit its node budget
};

/// Number of runs of matches that are contiguous in both strings.
std::size_t count_chunks(const Alignment& alignment);

/// Alignment with the most matches, then the fewest chunks, then the
/// leftmost candidate assignments. Exact up to `node_budget` search nodes;
/// beyond that the best alignment found so far is returned.
Alignment align_unigrams(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                         MeteorMatcher matcher, bool* exhausted = nullptr, std::size_t node_budget = 2'000'000);

/// P = m/|cand|, R = m/|ref|, Fmean = 10PR/(R+9P),
/// penalty = gamma * (chunks/m)^power, score = Fmean * (1 - penalty).
/// Throws EmptyText if either side has no tokens.
MeteorBreakdown meteor_breakdown(std::string_view candidate, std::string_view reference,
                                 const MeteorParams& params = {});

double meteor(std::string_view candidate, std::string_view reference, const MeteorParams& params = {});

/// Porter (1980) suffix-stripping stemmer for lowercase ASCII words.
std::string porter_stem(std::string_view word);

enum class SourceKind { image, caption, description };
enum class MatchMethod { embed_cosine, meteor };

/// What the text prompt is matched against.
struct SimilaritySource {
  SourceKind kind = SourceKind::image;
  std::optional<std::string> text;

  static SimilaritySource image() { return {SourceKind::image, std::nullopt}; }
  static SimilaritySource caption(std::string t) { return {SourceKind::caption, std::move(t)}; }
  static SimilaritySource description(std::string t) { return {SourceKind::description, std::move(t)}; }
};

/// "CLIP", "CapCLIP", "CapMETEOR", "DescCLIP" or "DescMETEOR".
/// Throws std::invalid_argument for (image, meteor).
std::string variant_name(SourceKind kind, MatchMethod method);

std::string to_string(SourceKind kind);
std::string to_string(MatchMethod method);

}  // namespace t2ieval::baselines

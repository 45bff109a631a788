#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace t2ieval::datasets {

enum class Dataset { coco2014, coco2017, drawbench, paintskills, concept_conjunction, attribute_binding, custom };
enum class Bench { general, compositional };

std::string to_string(Dataset d);
std::string to_string(Bench b);
std::optional<Dataset> parse_dataset(const std::string& text);
Bench bench_of(Dataset d);

struct PromptRecord {
  std::string prompt_id;
  Dataset dataset = Dataset::custom;
  std::string text;

  Bench bench() const { return bench_of(dataset); }
  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

struct ImageManifestRecord {
  std::string pair_id;
  std::string prompt_id;
  std::string generator;
  std::string image_path;  ///< as written in the file
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageManifestRecord&, const ImageManifestRecord&) = default;
};

struct HumanRatingRecord {
  std::string pair_id;
  std::string annotator_id;
  int overall = 1;      ///< 1..10
  int error_count = 0;  ///< 0..9

  friend bool operator==(const HumanRatingRecord&, const HumanRatingRecord&) = default;
};

// Record <-> JSON. The *_from_json functions validate and throw
// ValidationError(line, field, ...); unknown fields are rejected.
nlohmann::json to_json(const PromptRecord& r);
nlohmann::json to_json(const ImageManifestRecord& r);
nlohmann::json to_json(const HumanRatingRecord& r);
PromptRecord prompt_from_json(const nlohmann::json& j, std::size_t line = 0);
ImageManifestRecord manifest_from_json(const nlohmann::json& j, std::size_t line = 0);
HumanRatingRecord rating_from_json(const nlohmann::json& j, std::size_t line = 0);

/// JSONL loaders. Blank lines are skipped; line numbers are 1-based.
/// Duplicate prompt_id / pair_id / (pair_id, annotator_id) -> DuplicateKey.
std::vector<PromptRecord> load_prompts(const std::filesystem::path& path);
std::vector<HumanRatingRecord> load_ratings(const std::filesystem::path& path);

/// Manifest image paths are resolved against the manifest's directory. With
/// `check_images`, each image must exist and its header must state the
/// recorded width and height.
std::vector<ImageManifestRecord> load_manifest(const std::filesystem::path& path, bool check_images = true);

/// Resolve a manifest image path against the manifest location.
std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const std::string& image_path);

/// Serialize records as JSONL (keys sorted, one record per line).
template <typename Record>
std::string to_jsonl(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

struct JoinedPair {
  std::string pair_id;
  std::string prompt_id;
  Dataset dataset = Dataset::custom;
  Bench bench = Bench::general;
  std::string generator;
  std::string prompt_text;
  std::string image_path;
  int width = 0;
  int height = 0;
  std::optional<double> human_overall;        ///< mean overall, (v-1)/9
  std::optional<double> human_error_quality;  ///< mean of 1 - min(e,9)/9
  std::size_t n_annotators = 0;
  bool missing_ratings = false;     ///< no ratings at all; excluded from correlation
  bool incomplete_ratings = false;  ///< fewer annotators than the most-rated pair
};

/// Manifest order is preserved. Throws IntegrityError for a manifest
/// prompt_id absent from prompts or a rating pair_id absent from the manifest.
std::vector<JoinedPair> join_pairs(const std::vector<PromptRecord>& prompts,
                                   const std::vector<ImageManifestRecord>& manifest,
                                   const std::vector<HumanRatingRecord>& ratings);

/// Uniform integer in [0, bound) from a 64-bit Mersenne Twister by rejection,
/// so results do not depend on the standard library's distributions.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// k records without replacement: the first k positions of a Fisher-Yates
/// shuffle driven by std::mt19937_64(seed) and uniform_below. Throws
/// InsufficientRecords when k exceeds the number of records.
std::vector<PromptRecord> sample_prompts(const std::vector<PromptRecord>& records, std::size_t k,
                                         std::uint64_t seed);

}  // namespace t2ieval::datasets

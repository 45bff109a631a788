#include "t2ieval/datasets.hpp"

#include "t2ieval/errors.hpp"
#include "t2ieval/image.hpp"
#include "t2ieval/scoring.hpp"
#include "t2ieval/stats.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace t2ieval::datasets {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<Dataset, const char*>, 7> kDatasetNames = {{
    {Dataset::coco2014, "coco2014"},
    {Dataset::coco2017, "coco2017"},
    {Dataset::drawbench, "drawbench"},
    {Dataset::paintskills, "paintskills"},
    {Dataset::concept_conjunction, "concept_conjunction"},
    {Dataset::attribute_binding, "attribute_binding"},
    {Dataset::custom, "custom"},
}};

void require_object(const json& j, std::size_t line, std::initializer_list<const char*> fields) {
  if (!j.is_object()) throw ValidationError(line, "", "record must be a JSON object");
  for (const char* f : fields) {
    if (!j.contains(f)) throw ValidationError(line, f, "missing required field");
  }
  for (const auto& item : j.items()) {
    if (std::find_if(fields.begin(), fields.end(), [&](const char* f) { return item.key() == f; }) ==
        fields.end()) {
      throw ValidationError(line, item.key(), "unknown field");
    }
  }
}

std::string get_string(const json& j, const char* field, std::size_t line) {
  const json& v = j.at(field);
  if (!v.is_string()) throw ValidationError(line, field, "must be a string");
  std::string s = v.get<std::string>();
  if (s.find_first_not_of(" \t\r\n") == std::string::npos) throw ValidationError(line, field, "must be non-empty");
  return s;
}

int get_int(const json& j, const char* field, std::size_t line, long long lo, long long hi) {
  const json& v = j.at(field);
  if (!v.is_number_integer()) throw ValidationError(line, field, "must be an integer");
  long long value = 0;
  if (v.is_number_unsigned()) {
    const auto u = v.get<unsigned long long>();
    value = u > static_cast<unsigned long long>(hi) ? hi + 1 : static_cast<long long>(u);
  } else {
    value = v.get<long long>();
  }
  if (value < lo || value > hi) {
    throw ValidationError(line, field,
                          "must be in the range " + std::to_string(lo) + "-" + std::to_string(hi) + ", got " + v.dump());
  }
  return static_cast<int>(value);
}

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(line_no, "", std::string("invalid JSON: ") + e.what());
    }
    f(j, line_no);
  }
}

}  // namespace

std::string to_string(Dataset d) {
  for (const auto& [value, name] : kDatasetNames) {
    if (value == d) return name;
  }
  return "custom";
}

std::string to_string(Bench b) { return b == Bench::compositional ? "compositional" : "general"; }

std::optional<Dataset> parse_dataset(const std::string& text) {
  for (const auto& [value, name] : kDatasetNames) {
    if (text == name) return value;
  }
  return std::nullopt;
}

Bench bench_of(Dataset d) {
  return d == Dataset::concept_conjunction || d == Dataset::attribute_binding ? Bench::compositional
                                                                               : Bench::general;
}

json to_json(const PromptRecord& r) {
  return json{{"prompt_id", r.prompt_id}, {"dataset", to_string(r.dataset)}, {"text", r.text}};
}

json to_json(const ImageManifestRecord& r) {
  return json{{"pair_id", r.pair_id},       {"prompt_id", r.prompt_id}, {"generator", r.generator},
              {"image_path", r.image_path}, {"width", r.width},         {"height", r.height}};
}

json to_json(const HumanRatingRecord& r) {
  return json{{"pair_id", r.pair_id},
              {"annotator_id", r.annotator_id},
              {"overall", r.overall},
              {"error_count", r.error_count}};
}

PromptRecord prompt_from_json(const json& j, std::size_t line) {
  require_object(j, line, {"prompt_id", "dataset", "text"});
  PromptRecord r;
  r.prompt_id = get_string(j, "prompt_id", line);
  const std::string dataset = get_string(j, "dataset", line);
  const auto parsed = parse_dataset(dataset);
  if (!parsed) throw ValidationError(line, "dataset", "unknown dataset '" + dataset + "'");
  r.dataset = *parsed;
  r.text = get_string(j, "text", line);
  return r;
}

ImageManifestRecord manifest_from_json(const json& j, std::size_t line) {
  require_object(j, line, {"pair_id", "prompt_id", "generator", "image_path", "width", "height"});
  ImageManifestRecord r;
  r.pair_id = get_string(j, "pair_id", line);
  r.prompt_id = get_string(j, "prompt_id", line);
  r.generator = get_string(j, "generator", line);
  r.image_path = get_string(j, "image_path", line);
  r.width = get_int(j, "width", line, 1, 1 << 16);
  r.height = get_int(j, "height", line, 1, 1 << 16);
  return r;
}

HumanRatingRecord rating_from_json(const json& j, std::size_t line) {
  require_object(j, line, {"pair_id", "annotator_id", "overall", "error_count"});
  HumanRatingRecord r;
  r.pair_id = get_string(j, "pair_id", line);
  r.annotator_id = get_string(j, "annotator_id", line);
  r.overall = get_int(j, "overall", line, 1, 10);
  r.error_count = get_int(j, "error_count", line, 0, kMaxCountedErrors);
  return r;
}

std::vector<PromptRecord> load_prompts(const std::filesystem::path& path) {
  std::vector<PromptRecord> out;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](const json& j, std::size_t line) {
    PromptRecord r = prompt_from_json(j, line);
    if (!seen.insert(r.prompt_id).second) {
      throw DuplicateKey("line " + std::to_string(line) + ": duplicate prompt_id '" + r.prompt_id + "'");
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<HumanRatingRecord> load_ratings(const std::filesystem::path& path) {
  std::vector<HumanRatingRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_line(path, [&](const json& j, std::size_t line) {
    HumanRatingRecord r = rating_from_json(j, line);
    if (!seen.emplace(r.pair_id, r.annotator_id).second) {
      throw DuplicateKey("line " + std::to_string(line) + ": duplicate rating for pair '" + r.pair_id +
                         "' by annotator '" + r.annotator_id + "'");
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const std::string& image_path) {
  const std::filesystem::path p(image_path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

std::vector<ImageManifestRecord> load_manifest(const std::filesystem::path& path, bool check_images) {
  std::vector<ImageManifestRecord> out;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](const json& j, std::size_t line) {
    ImageManifestRecord r = manifest_from_json(j, line);
    if (!seen.insert(r.pair_id).second) {
      throw DuplicateKey("line " + std::to_string(line) + ": duplicate pair_id '" + r.pair_id + "'");
    }
    if (check_images) {
      const auto image = resolve_image_path(path, r.image_path);
      std::error_code ec;
      if (!std::filesystem::is_regular_file(image, ec)) {
        throw ValidationError(line, "image_path", "no such file: " + image.string());
      }
      ImageInput input;
      try {
        input = load_image(image);
      } catch (const ImageDecodeError& e) {
        throw ValidationError(line, "image_path", e.what());
      }
      if (input.width != r.width || input.height != r.height) {
        throw ValidationError(line, input.width != r.width ? "width" : "height",
                              "image is " + std::to_string(input.width) + "x" + std::to_string(input.height) +
                                  ", manifest says " + std::to_string(r.width) + "x" + std::to_string(r.height));
      }
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<JoinedPair> join_pairs(const std::vector<PromptRecord>& prompts,
                                   const std::vector<ImageManifestRecord>& manifest,
                                   const std::vector<HumanRatingRecord>& ratings) {
  std::unordered_map<std::string, const PromptRecord*> by_prompt;
  for (const auto& p : prompts) by_prompt.emplace(p.prompt_id, &p);

  std::unordered_map<std::string, std::vector<const HumanRatingRecord*>> by_pair;
  for (const auto& m : manifest) by_pair[m.pair_id];
  for (const auto& r : ratings) {
    auto it = by_pair.find(r.pair_id);
    if (it == by_pair.end()) throw IntegrityError("rating references unknown pair_id '" + r.pair_id + "'");
    it->second.push_back(&r);
  }

  std::size_t most = 0;
  for (const auto& [id, rs] : by_pair) most = std::max(most, rs.size());

  std::vector<JoinedPair> out;
  out.reserve(manifest.size());
  for (const auto& m : manifest) {
    auto p = by_prompt.find(m.prompt_id);
    if (p == by_prompt.end()) {
      throw IntegrityError("pair '" + m.pair_id + "' references unknown prompt_id '" + m.prompt_id + "'");
    }
    JoinedPair jp;
    jp.pair_id = m.pair_id;
    jp.prompt_id = m.prompt_id;
    jp.dataset = p->second->dataset;
    jp.bench = p->second->bench();
    jp.generator = m.generator;
    jp.prompt_text = p->second->text;
    jp.image_path = m.image_path;
    jp.width = m.width;
    jp.height = m.height;

    const auto& rs = by_pair[m.pair_id];
    jp.n_annotators = rs.size();
    jp.missing_ratings = rs.empty();
    jp.incomplete_ratings = !rs.empty() && rs.size() < most;
    if (!rs.empty()) {
      double overall = 0.0;
      double quality = 0.0;
      for (const auto* r : rs) {
        overall += r->overall;
        quality += error_quality(r->error_count);
      }
      const double k = static_cast<double>(rs.size());
      const double mean_overall = overall / k;
      jp.human_overall = stats::normalize(std::span<const double>(&mean_overall, 1), 1.0, 10.0).front();
      jp.human_error_quality = quality / k;
    }
    out.push_back(std::move(jp));
  }
  return out;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
  // Largest multiple of bound representable in 64 bits; draws above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

std::vector<PromptRecord> sample_prompts(const std::vector<PromptRecord>& records, std::size_t k,
                                         std::uint64_t seed) {
  if (k > records.size()) {
    throw InsufficientRecords("cannot sample " + std::to_string(k) + " of " + std::to_string(records.size()) +
                              " records");
  }
  std::vector<PromptRecord> pool = records;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace t2ieval::datasets

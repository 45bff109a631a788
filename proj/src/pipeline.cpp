#include "t2ieval/pipeline.hpp"

#include "t2ieval/errors.hpp"
#include "t2ieval/image.hpp"
#include "t2ieval/sentence_match.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace t2ieval::pipeline {
namespace {

using nlohmann::json;
using evaluator::ObjectiveKind;
using evaluator::ScoreMode;
using evaluator::ScoreRecord;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

template <typename F>
void for_each_jsonl(const fs::path& path, F&& f) {
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(line_no, "", path.string() + ": invalid JSON: " + e.what());
    }
    try {
      f(j);
    } catch (const json::exception& e) {
      throw ValidationError(line_no, "", path.string() + ": " + e.what());
    }
  }
}

Failure make_failure(const std::string& pair_id, const std::string& stage, const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return {pair_id, err->stage().empty() ? stage : err->stage(), err->kind(), err->what()};
  }
  return {pair_id, stage, "InternalError", e.what()};
}

std::string sanitize(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(safe ? c : '_');
  }
  return out;
}

void dump_parse_failure(const RunConfig& cfg, const std::string& pair_id, const std::string& label,
                        const ParseFailure& e) {
  const fs::path dir = cfg.output_dir / "parse_failures";
  fs::create_directories(dir);
  std::string body = std::string(e.kind()) + ": " + e.what() + "\n";
  for (std::size_t i = 0; i < e.replies().size(); ++i) {
    body += "\n--- reply " + std::to_string(i + 1) + " ---\n" + e.replies()[i] + "\n";
  }
  write_file(dir / (sanitize(pair_id) + "." + label + ".txt"), body);
}

// Writes <out>/<stage>_failures.jsonl and <out>/<stage>_warnings.log.
void finish_stage(const RunConfig& cfg, const std::string& stage, StageSummary& summary, ModelGateway* gateway) {
  if (gateway != nullptr) {
    auto extra = gateway->warnings().drain();
    std::sort(extra.begin(), extra.end());
    summary.warnings.insert(summary.warnings.end(), extra.begin(), extra.end());
  }
  std::string failures;
  for (const auto& f : summary.failures) {
    failures += json{{"pair_id", f.pair_id}, {"stage", f.stage}, {"kind", f.kind}, {"message", f.message}}.dump();
    failures.push_back('\n');
  }
  write_file(cfg.output_dir / (stage + "_failures.jsonl"), failures);
  std::string warnings;
  for (const auto& w : summary.warnings) warnings += w + "\n";
  write_file(cfg.output_dir / (stage + "_warnings.log"), warnings);
}

std::unordered_map<std::string, const datasets::PromptRecord*> index_prompts(
    const std::vector<datasets::PromptRecord>& prompts) {
  std::unordered_map<std::string, const datasets::PromptRecord*> out;
  for (const auto& p : prompts) out.emplace(p.prompt_id, &p);
  return out;
}

const datasets::PromptRecord& prompt_for(
    const std::unordered_map<std::string, const datasets::PromptRecord*>& prompts,
    const datasets::ImageManifestRecord& m) {
  auto it = prompts.find(m.prompt_id);
  if (it == prompts.end()) {
    throw IntegrityError("pair '" + m.pair_id + "' references unknown prompt_id '" + m.prompt_id + "'");
  }
  return *it->second;
}

std::string records_jsonl(const std::vector<std::vector<ScoreRecord>>& per_pair) {
  std::string out;
  for (const auto& records : per_pair) {
    for (const auto& r : records) {
      out += to_json(r).dump();
      out.push_back('\n');
    }
  }
  return out;
}

struct PairResult {
  std::vector<ScoreRecord> records;
  std::vector<Failure> failures;
  Warnings warnings;
};

void collect(StageSummary& summary, std::vector<PairResult>& results) {
  for (auto& r : results) {
    summary.failures.insert(summary.failures.end(), r.failures.begin(), r.failures.end());
    auto w = r.warnings.drain();
    summary.warnings.insert(summary.warnings.end(), w.begin(), w.end());
  }
}

}  // namespace

// ---- records -----------------------------------------------------------------

json to_json(const DescriptionEntry& entry) {
  const auto& d = entry.description;
  json regions = json::array();
  for (const auto& r : d.source_local.regions) {
    regions.push_back({{"label", r.object_label},
                       {"caption", r.dense_caption},
                       {"bbox", {r.bbox.x_min, r.bbox.y_min, r.bbox.x_max, r.bbox.y_max}},
                       {"confidence", r.confidence}});
  }
  return json{{"pair_id", entry.pair_id},
              {"fused_text", d.text},
              {"global",
               {{"caption", d.source_global.caption},
                {"width", d.source_global.width},
                {"height", d.source_global.height}}},
              {"regions", std::move(regions)},
              {"descriptor_model_id", d.descriptor_model_id},
              {"truncated", d.truncated}};
}

DescriptionEntry description_from_json(const json& j) {
  DescriptionEntry e;
  e.pair_id = j.at("pair_id").get<std::string>();
  auto& d = e.description;
  d.text = j.at("fused_text").get<std::string>();
  const json& g = j.at("global");
  d.source_global = {g.at("caption").get<std::string>(), g.at("width").get<int>(), g.at("height").get<int>()};
  for (const json& r : j.at("regions")) {
    RegionProposal p;
    p.object_label = r.at("label").get<std::string>();
    p.dense_caption = r.at("caption").get<std::string>();
    const json& b = r.at("bbox");
    if (!b.is_array() || b.size() != 4) throw ValidationError(0, "bbox", "must have four entries");
    p.bbox = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    p.confidence = r.value("confidence", 1.0);
    d.source_local.regions.push_back(std::move(p));
  }
  d.descriptor_model_id = j.value("descriptor_model_id", "");
  d.truncated = j.value("truncated", false);
  return e;
}

json to_json(const ScoreRecord& r) {
  json j = {{"pair_id", r.pair_id},
            {"objective", r.objective ? json(evaluator::to_string(*r.objective)) : json(nullptr)},
            {"mode", evaluator::to_string(r.mode)},
            {"raw_value", r.raw_value},
            {"normalized_score", r.normalized_score},
            {"rationale", r.rationale}};
  if (r.atomic_counts) {
    const auto& c = *r.atomic_counts;
    j["atomic_counts"] = {{"x1", c.x1}, {"x2", c.x2}, {"y1", c.y1}, {"y2", c.y2}};
  }
  if (!r.variant.empty()) j["variant"] = r.variant;
  return j;
}

ScoreRecord score_from_json(const json& j) {
  ScoreRecord r;
  r.pair_id = j.at("pair_id").get<std::string>();
  if (!j.at("objective").is_null()) r.objective = evaluator::parse_objective_kind(j.at("objective").get<std::string>());
  r.mode = evaluator::parse_score_mode(j.at("mode").get<std::string>());
  r.raw_value = j.at("raw_value").get<double>();
  r.normalized_score = j.at("normalized_score").get<double>();
  r.rationale = j.value("rationale", "");
  if (j.contains("atomic_counts")) {
    const json& c = j.at("atomic_counts");
    r.atomic_counts = AtomicCounts{c.at("x1").get<int>(), c.at("x2").get<int>(), c.at("y1").get<int>(),
                                   c.at("y2").get<int>()};
  }
  r.variant = j.value("variant", "");
  if (r.mode == ScoreMode::baseline && r.variant.empty()) {
    throw ValidationError(0, "variant", "baseline records need a variant");
  }
  return r;
}

std::vector<DescriptionEntry> read_descriptions(const fs::path& path) {
  std::vector<DescriptionEntry> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const json& j) {
    auto e = description_from_json(j);
    if (!seen.insert(e.pair_id).second) throw DuplicateKey("duplicate description for pair '" + e.pair_id + "'");
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<ScoreRecord> read_scores(const std::vector<fs::path>& paths) {
  std::vector<ScoreRecord> out;
  std::set<std::string> seen;
  for (const auto& path : paths) {
    for_each_jsonl(path, [&](const json& j) {
      auto r = score_from_json(j);
      const std::string key = r.pair_id + '\x1f' + (r.objective ? evaluator::to_string(*r.objective) : "") + '\x1f' +
                              evaluator::to_string(r.mode) + '\x1f' + r.variant;
      if (!seen.insert(key).second) {
        throw DuplicateKey("duplicate score record for pair '" + r.pair_id + "' (" + metric_label(r) + ")");
      }
      out.push_back(std::move(r));
    });
  }
  return out;
}

std::string metric_label(const ScoreRecord& record) {
  switch (record.mode) {
    case ScoreMode::baseline: return record.variant;
    case ScoreMode::instruction_following: return "LLM-IF";
    case ScoreMode::rule_enhanced: return "LLM-RE";
  }
  return "unknown";
}

// ---- stage runs ----------------------------------------------------------------

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn,
                  const std::function<bool()>& stop) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      if (stop && stop()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  if (workers == 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

std::unique_ptr<ModelGateway> make_gateway(const RunConfig& config, std::shared_ptr<Transport> transport,
                                           std::shared_ptr<Clock> clock) {
  std::shared_ptr<ResponseCache> cache;
  if (config.cache_mode != CacheMode::off) cache = std::make_shared<ResponseCache>(config.cache_dir, config.cache_mode);
  return std::make_unique<ModelGateway>(config.endpoints, std::move(transport), std::move(cache), std::move(clock));
}

namespace {

// Collects the first hard error (a replay miss) and tells workers to stop.
class Abort {
 public:
  void set(std::exception_ptr e) {
    std::lock_guard lock(mutex_);
    if (!error_) error_ = std::move(e);
    stop_ = true;
  }
  bool requested() const { return stop_.load(); }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
  std::atomic<bool> stop_{false};
};

}  // namespace

StageSummary run_describe(const RunConfig& cfg, ModelGateway& gateway, const fs::path& manifest_path) {
  const auto manifest = datasets::load_manifest(manifest_path);
  fs::create_directories(cfg.output_dir);
  const fs::path out_path = cfg.output_dir / "descriptions.jsonl";

  std::map<std::string, DescriptionEntry> existing;
  std::vector<std::string> existing_order;
  if (fs::exists(out_path)) {
    for (auto& e : read_descriptions(out_path)) {
      existing_order.push_back(e.pair_id);
      existing.emplace(e.pair_id, std::move(e));
    }
  }

  StageSummary summary;
  summary.total = manifest.size();
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (existing.count(manifest[i].pair_id) != 0) {
      ++summary.skipped;
    } else {
      todo.push_back(i);
    }
  }

  std::vector<std::optional<DescriptionEntry>> results(manifest.size());
  std::vector<std::optional<Failure>> failures(manifest.size());
  Abort abort;
  parallel_for(
      todo.size(), cfg.parallelism,
      [&](std::size_t k) {
        const auto& rec = manifest[todo[k]];
        try {
          const ImageInput image = load_image(datasets::resolve_image_path(manifest_path, rec.image_path));
          results[todo[k]] = DescriptionEntry{rec.pair_id, descriptor::describe_image(image, gateway, cfg.describe)};
        } catch (const ReplayMiss&) {
          abort.set(std::current_exception());
        } catch (const std::exception& e) {
          failures[todo[k]] = make_failure(rec.pair_id, "describe", e);
        }
      },
      [&] { return abort.requested(); });

  std::string out;
  std::set<std::string> in_manifest;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    in_manifest.insert(manifest[i].pair_id);
    const DescriptionEntry* entry = nullptr;
    if (auto it = existing.find(manifest[i].pair_id); it != existing.end()) entry = &it->second;
    if (results[i]) {
      entry = &*results[i];
      ++summary.processed;
    }
    if (failures[i]) summary.failures.push_back(*failures[i]);
    if (entry != nullptr) out += to_json(*entry).dump() + "\n";
  }
  for (const auto& id : existing_order) {
    if (in_manifest.count(id) == 0) out += to_json(existing.at(id)).dump() + "\n";
  }
  write_file(out_path, out);
  finish_stage(cfg, "describe", summary, &gateway);
  abort.rethrow();
  return summary;
}

StageSummary run_score(const RunConfig& cfg, ModelGateway& gateway, const fs::path& prompts_path,
                       const fs::path& manifest_path) {
  const auto prompts = datasets::load_prompts(prompts_path);
  const auto manifest = datasets::load_manifest(manifest_path, false);
  const auto prompt_index = index_prompts(prompts);
  std::map<std::string, descriptor::ObjectCentricDescription> descriptions;
  const fs::path desc_path = cfg.output_dir / "descriptions.jsonl";
  if (fs::exists(desc_path)) {
    for (auto& e : read_descriptions(desc_path)) descriptions.emplace(e.pair_id, std::move(e.description));
  }
  for (const auto& m : manifest) prompt_for(prompt_index, m);
  fs::create_directories(cfg.output_dir);

  const evaluator::RatingScale scale(cfg.scale_n);
  StageSummary summary;
  summary.total = manifest.size();
  std::vector<PairResult> results(manifest.size());
  Abort abort;

  parallel_for(
      manifest.size(), cfg.parallelism,
      [&](std::size_t i) {
        const auto& m = manifest[i];
        PairResult& out = results[i];
        auto desc_it = descriptions.find(m.pair_id);
        if (desc_it == descriptions.end()) {
          out.failures.push_back({m.pair_id, "score", "MissingDescription", "no description for pair"});
          return;
        }
        const auto& description = desc_it->second;
        const std::string& prompt_text = prompt_for(prompt_index, m).text;

        auto attempt = [&](const evaluator::Objective& objective, const std::string& label, auto&& score) {
          try {
            ScoreRecord record = score();
            if (cfg.rationales) {
              record.rationale =
                  evaluator::generate_rationale(evaluator::rationale_value(record, scale), objective, prompt_text,
                                                description, scale, gateway, cfg.eval, &out.warnings);
            }
            out.records.push_back(std::move(record));
          } catch (const ReplayMiss&) {
            abort.set(std::current_exception());
          } catch (const ParseFailure& e) {
            dump_parse_failure(cfg, m.pair_id, label, e);
            out.failures.push_back(make_failure(m.pair_id, "score", e));
          } catch (const std::exception& e) {
            out.failures.push_back(make_failure(m.pair_id, "score", e));
          }
        };

        for (ObjectiveKind kind : cfg.objectives) {
          if (abort.requested()) return;
          if (kind == ObjectiveKind::error_counting) {
            attempt(evaluator::Objective::error_counting(), "error_counting", [&] {
              return evaluator::error_count_rate(m.pair_id, prompt_text, description, gateway, cfg.eval,
                                                 &out.warnings);
            });
            continue;
          }
          const evaluator::Objective objective = kind == ObjectiveKind::overall
                                                     ? evaluator::Objective::overall()
                                                     : evaluator::Objective::custom(cfg.custom_instruction);
          for (ScoreMode mode : cfg.modes) {
            const std::string label = evaluator::to_string(kind) + "." + evaluator::to_string(mode);
            if (mode == ScoreMode::rule_enhanced) {
              attempt(objective, label, [&] {
                return evaluator::rule_enhanced_rate(m.pair_id, prompt_text, description, objective, gateway,
                                                     cfg.eval, &out.warnings);
              });
            } else {
              attempt(objective, label, [&] {
                return evaluator::instruction_following_rate(m.pair_id, prompt_text, description, objective, scale,
                                                             gateway, cfg.eval, &out.warnings);
              });
            }
          }
        }
      },
      [&] { return abort.requested(); });

  std::vector<std::vector<ScoreRecord>> per_pair;
  for (auto& r : results) {
    if (r.failures.empty() && !r.records.empty()) ++summary.processed;
    per_pair.push_back(r.records);
  }
  collect(summary, results);
  write_file(cfg.output_dir / "scores.jsonl", records_jsonl(per_pair));
  finish_stage(cfg, "score", summary, &gateway);
  abort.rethrow();
  return summary;
}

StageSummary run_baseline(const RunConfig& cfg, ModelGateway& gateway, const fs::path& prompts_path,
                          const fs::path& manifest_path) {
  using baselines::MatchMethod;
  using baselines::SourceKind;
  const auto prompts = datasets::load_prompts(prompts_path);
  const auto manifest = datasets::load_manifest(manifest_path, false);
  const auto prompt_index = index_prompts(prompts);
  for (const auto& m : manifest) prompt_for(prompt_index, m);
  std::map<std::string, descriptor::ObjectCentricDescription> descriptions;
  const fs::path desc_path = cfg.output_dir / "descriptions.jsonl";
  if (fs::exists(desc_path)) {
    for (auto& e : read_descriptions(desc_path)) descriptions.emplace(e.pair_id, std::move(e.description));
  }
  fs::create_directories(cfg.output_dir);

  struct Variant {
    std::string name;
    SourceKind kind;
    MatchMethod method;
  };
  StageSummary summary;
  summary.total = manifest.size();
  std::vector<Variant> variants;
  for (const auto& name : cfg.baseline_variants) {
    Variant v{name, SourceKind::image, MatchMethod::embed_cosine};
    if (name == "CapCLIP" || name == "CapMETEOR") v.kind = SourceKind::caption;
    if (name == "DescCLIP" || name == "DescMETEOR") v.kind = SourceKind::description;
    if (name == "CapMETEOR" || name == "DescMETEOR") v.method = MatchMethod::meteor;
    std::vector<Role> needed;
    if (v.method == MatchMethod::embed_cosine) needed.push_back(Role::embed_text);
    if (v.kind == SourceKind::image) needed.push_back(Role::embed_image);
    bool available = true;
    for (Role r : needed) {
      if (!gateway.has_endpoint(r)) {
        summary.warnings.push_back("baseline " + name + " skipped: no " + to_string(r) + " endpoint configured");
        available = false;
        break;
      }
    }
    if (available) variants.push_back(v);
  }

  std::vector<PairResult> results(manifest.size());
  Abort abort;
  parallel_for(
      manifest.size(), cfg.parallelism,
      [&](std::size_t i) {
        const auto& m = manifest[i];
        PairResult& out = results[i];
        const std::string& prompt_text = prompt_for(prompt_index, m).text;
        std::optional<ImageInput> image;
        const auto desc_it = descriptions.find(m.pair_id);
        for (const auto& v : variants) {
          if (abort.requested()) return;
          try {
            baselines::SimilaritySource source = baselines::SimilaritySource::image();
            if (v.kind == SourceKind::image) {
              if (!image) image = load_image(datasets::resolve_image_path(manifest_path, m.image_path));
            } else if (desc_it == descriptions.end()) {
              throw IntegrityError("no description for pair (needed by " + v.name + ")");
            } else if (v.kind == SourceKind::caption) {
              source = baselines::SimilaritySource::caption(desc_it->second.source_global.caption);
            } else {
              source = baselines::SimilaritySource::description(desc_it->second.text);
            }
            auto record = baselines::sentence_match_score(m.pair_id, source, image ? &*image : nullptr, prompt_text,
                                                          v.method, gateway, cfg.meteor);
            out.records.push_back(std::move(record));
          } catch (const ReplayMiss&) {
            abort.set(std::current_exception());
          } catch (const std::exception& e) {
            out.failures.push_back(make_failure(m.pair_id, "baseline:" + v.name, e));
          }
        }
      },
      [&] { return abort.requested(); });

  std::vector<std::vector<ScoreRecord>> per_pair;
  for (auto& r : results) {
    if (r.failures.empty()) ++summary.processed;
    per_pair.push_back(r.records);
  }
  collect(summary, results);
  write_file(cfg.output_dir / "baseline_scores.jsonl", records_jsonl(per_pair));
  finish_stage(cfg, "baseline", summary, &gateway);
  abort.rethrow();
  return summary;
}

// ---- correlation report ------------------------------------------------------------

namespace {

constexpr std::array<ObjectiveKind, 2> kHumanObjectives = {ObjectiveKind::overall, ObjectiveKind::error_counting};

std::string bench_label(datasets::Bench b) { return b == datasets::Bench::compositional ? "CompBench" : "GeneralBench"; }

// Baselines first in their canonical order, then other labels, then the LLM metrics.
int metric_rank(const std::string& metric) {
  for (std::size_t i = 0; i < kBaselineVariants.size(); ++i) {
    if (metric == kBaselineVariants[i]) return static_cast<int>(i);
  }
  if (metric == "LLM-IF") return 100;
  if (metric == "LLM-RE") return 101;
  return 50;
}

std::string format_p(const std::optional<double>& p) {
  if (!p) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *p);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\";
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<ReportRow> correlation_rows(const std::vector<datasets::JoinedPair>& pairs,
                                        const std::vector<ScoreRecord>& scores, stats::TauVariant variant) {
  // metric -> objective ("" for baselines) -> pair -> score
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> values;
  for (const auto& r : scores) {
    if (r.mode != ScoreMode::baseline &&
        (!r.objective || (*r.objective != ObjectiveKind::overall && *r.objective != ObjectiveKind::error_counting))) {
      continue;
    }
    const std::string objective = r.mode == ScoreMode::baseline ? "" : evaluator::to_string(*r.objective);
    values[metric_label(r)][objective][r.pair_id] = r.normalized_score;
  }
  std::vector<std::string> metrics;
  for (const auto& [m, unused] : values) metrics.push_back(m);
  std::stable_sort(metrics.begin(), metrics.end(),
                   [](const std::string& a, const std::string& b) { return metric_rank(a) < metric_rank(b); });

  struct CellKey {
    datasets::Dataset dataset;
    std::string model;
    bool operator<(const CellKey& o) const { return std::tie(dataset, model) < std::tie(o.dataset, o.model); }
  };
  std::map<CellKey, std::vector<const datasets::JoinedPair*>> cells;
  for (const auto& p : pairs) cells[{p.dataset, p.generator}].push_back(&p);

  std::vector<ReportRow> rows;
  for (const auto& [key, members] : cells) {
    for (ObjectiveKind objective : kHumanObjectives) {
      const std::string obj_name = evaluator::to_string(objective);
      for (const auto& metric : metrics) {
        const auto& by_objective = values[metric];
        const auto it = by_objective.count("") ? by_objective.find("") : by_objective.find(obj_name);
        if (it == by_objective.end()) continue;
        std::vector<double> metric_scores;
        std::vector<double> human_scores;
        ReportRow row;
        row.dataset = datasets::to_string(key.dataset);
        row.model = key.model;
        row.objective = obj_name;
        row.metric = metric;
        for (const auto* p : members) {
          const auto& human = objective == ObjectiveKind::overall ? p->human_overall : p->human_error_quality;
          const auto s = it->second.find(p->pair_id);
          if (!human || s == it->second.end()) {
            ++row.dropped;
            continue;
          }
          metric_scores.push_back(s->second);
          human_scores.push_back(*human);
        }
        row.n = metric_scores.size();
        try {
          row.result = stats::correlate(metric_scores, human_scores, variant);
        } catch (const DegenerateSeries& e) {
          row.note = e.what();
        }
        rows.push_back(std::move(row));
      }
    }
  }

  // Per-bench aggregates, CompBench first.
  std::vector<ReportRow> aggregates;
  for (datasets::Bench bench : {datasets::Bench::compositional, datasets::Bench::general}) {
    std::map<std::tuple<std::string, int, int, std::string>, std::vector<const ReportRow*>> groups;
    for (const auto& row : rows) {
      const auto ds = datasets::parse_dataset(row.dataset);
      if (!ds || datasets::bench_of(*ds) != bench) continue;
      const int obj_rank = row.objective == "overall" ? 0 : 1;
      groups[{row.model, obj_rank, metric_rank(row.metric), row.metric}].push_back(&row);
    }
    for (const auto& [key, members] : groups) {
      ReportRow agg;
      agg.dataset = bench_label(bench);
      agg.model = members.front()->model;
      agg.objective = members.front()->objective;
      agg.metric = members.front()->metric;
      agg.aggregate = true;
      std::vector<stats::CorrelationResult> usable;
      for (const auto* r : members) {
        agg.n += r->n;
        agg.dropped += r->dropped;
        if (r->result) usable.push_back(*r->result);
      }
      if (usable.empty()) {
        agg.note = "no cell with a defined correlation";
      } else {
        agg.result = stats::aggregate(usable);
        agg.result->n = agg.n;
      }
      aggregates.push_back(std::move(agg));
    }
  }
  rows.insert(rows.end(), aggregates.begin(), aggregates.end());
  return rows;
}

std::string render_csv(const std::vector<ReportRow>& rows) {
  std::string out = "dataset,model,objective,metric,tau,rho,p_tau,p_rho,n,dropped\n";
  for (const auto& r : rows) {
    out += csv_field(r.dataset) + "," + csv_field(r.model) + "," + r.objective + "," + csv_field(r.metric) + ",";
    if (r.result) {
      out += fixed(r.result->tau, 6) + "," + fixed(r.result->rho, 6) + "," + format_p(r.result->p_tau) + "," +
             format_p(r.result->p_rho);
    } else {
      out += "n/a,n/a,n/a,n/a";
    }
    out += "," + std::to_string(r.n) + "," + std::to_string(r.dropped) + "\n";
  }
  return out;
}

std::string render_markdown(const std::vector<ReportRow>& rows, const RunConfig& cfg) {
  std::ostringstream md;
  md << "# Rank correlation with human ratings\n\n";
  md << "Assumptions:\n\n";
  md << "- Kendall's tau: "
     << (cfg.tau_variant == stats::TauVariant::b ? "tau-b (tie-corrected)" : "tau-a (no tie correction)") << ".\n";
  md << "- Human Overall: mean over annotators, mapped to [0,1] as (v - 1) / 9.\n";
  md << "- Human Error Counting: each count e mapped to 1 - min(e, 9) / 9, then averaged over annotators.\n";
  md << "- Pairs rated by fewer annotators than the most-rated pair use the ratings present.\n";
  md << "- LLM-IF: integer rating on a 1-" << cfg.scale_n << " scale divided by " << cfg.scale_n
     << "; LLM error counts use 1 - min(e, 9) / 9.\n";
  md << "- LLM-RE: (X2/X1)/2 + (Y2/Y1)/2, where an empty requirement (X1 = 0 or Y1 = 0) contributes 0.5.\n";
  md << "- p-values: exact for Kendall with n <= 20 and no ties, exact permutation for n <= 8 otherwise, "
        "asymptotic above that. Aggregates are uniform means of tau and rho without p-values.\n";
  md << "- Cells with a constant series or fewer than two usable pairs are shown as n/a.\n";

  for (const char* bench : {"CompBench", "GeneralBench"}) {
    const bool comp = std::string(bench) == "CompBench";
    std::vector<std::pair<std::string, std::string>> columns;
    std::set<std::pair<std::string, std::string>> seen_cols;
    std::vector<std::pair<std::string, std::string>> row_keys;
    std::set<std::pair<std::string, std::string>> seen_rows;
    std::map<std::tuple<std::string, std::string, std::string, std::string>, const ReportRow*> lookup;
    for (const auto& r : rows) {
      bool in_bench = false;
      if (r.aggregate) {
        in_bench = r.dataset == bench;
      } else if (const auto ds = datasets::parse_dataset(r.dataset)) {
        in_bench = (datasets::bench_of(*ds) == datasets::Bench::compositional) == comp;
      }
      if (!in_bench) continue;
      if (seen_cols.insert({r.dataset, r.model}).second) columns.emplace_back(r.dataset, r.model);
      if (seen_rows.insert({r.objective, r.metric}).second) row_keys.emplace_back(r.objective, r.metric);
      lookup[{r.dataset, r.model, r.objective, r.metric}] = &r;
    }
    if (columns.empty()) continue;
    std::stable_sort(row_keys.begin(), row_keys.end(), [](const auto& a, const auto& b) {
      const int oa = a.first == "overall" ? 0 : 1;
      const int ob = b.first == "overall" ? 0 : 1;
      return std::make_pair(oa, metric_rank(a.second)) < std::make_pair(ob, metric_rank(b.second));
    });

    md << "\n## " << (comp ? "Compositional bench" : "General bench") << "\n\n";
    md << "Each cell is tau / rho.\n\n| Objective | Metric |";
    for (const auto& [dataset, model] : columns) md << " " << md_cell(dataset) << " (" << md_cell(model) << ") |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& [objective, metric] : row_keys) {
      md << "| " << objective << " | " << md_cell(metric) << " |";
      for (const auto& [dataset, model] : columns) {
        auto it = lookup.find({dataset, model, objective, metric});
        if (it == lookup.end()) {
          md << " |";
        } else if (!it->second->result) {
          md << " n/a |";
        } else {
          md << " " << fixed(it->second->result->tau, 4) << " / " << fixed(it->second->result->rho, 4) << " |";
        }
      }
      md << "\n";
    }
  }

  md << "\n## Cells\n\n";
  md << "| Dataset | Model | Objective | Metric | tau | rho | p_tau | p_rho | n | dropped | tied pairs (metric) | "
        "tied pairs (human) |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    md << "| " << md_cell(r.dataset) << " | " << md_cell(r.model) << " | " << r.objective << " | " << md_cell(r.metric)
       << " | ";
    if (r.result) {
      md << fixed(r.result->tau, 4) << " | " << fixed(r.result->rho, 4) << " | " << format_p(r.result->p_tau) << " | "
         << format_p(r.result->p_rho) << " | ";
    } else {
      md << "n/a | n/a | n/a | n/a | ";
    }
    md << r.n << " | " << r.dropped << " | ";
    if (r.result && !r.aggregate) {
      md << (r.result->pairs.tied_x_only + r.result->pairs.tied_both) << " | "
         << (r.result->pairs.tied_y_only + r.result->pairs.tied_both) << " |\n";
    } else {
      md << " |  |\n";
    }
  }
  return md.str();
}

StageSummary run_correlate(const RunConfig& cfg, const std::vector<fs::path>& score_paths,
                           const fs::path& prompts_path, const fs::path& manifest_path, const fs::path& ratings_path) {
  const auto prompts = datasets::load_prompts(prompts_path);
  const auto manifest = datasets::load_manifest(manifest_path, false);
  const auto ratings = datasets::load_ratings(ratings_path);
  const auto joined = datasets::join_pairs(prompts, manifest, ratings);
  const auto scores = read_scores(score_paths);

  StageSummary summary;
  summary.total = joined.size();
  std::set<std::string> known;
  for (const auto& p : joined) {
    known.insert(p.pair_id);
    if (p.missing_ratings) summary.warnings.push_back("pair " + p.pair_id + " has no human ratings");
    if (p.incomplete_ratings) {
      summary.warnings.push_back("pair " + p.pair_id + " rated by " + std::to_string(p.n_annotators) +
                                 " annotator(s) only");
    }
  }
  for (const auto& s : scores) {
    if (known.count(s.pair_id) == 0) throw IntegrityError("score for unknown pair_id '" + s.pair_id + "'");
  }
  const auto rows = correlation_rows(joined, scores, cfg.tau_variant);
  for (const auto& r : rows) {
    if (!r.result && !r.aggregate) {
      summary.warnings.push_back(r.dataset + "/" + r.model + "/" + r.objective + "/" + r.metric + ": n/a (" +
                                 r.note + ")");
    }
  }
  summary.processed = joined.size();
  fs::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "report.csv", render_csv(rows));
  write_file(cfg.output_dir / "report.md", render_markdown(rows, cfg));
  finish_stage(cfg, "correlate", summary, nullptr);
  return summary;
}

// ---- showcase --------------------------------------------------------------------------

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::vector<ShowcaseItem> showcase_items(const std::vector<ScoreRecord>& scores,
                                         const std::vector<DescriptionEntry>& descriptions,
                                         const std::vector<datasets::PromptRecord>& prompts,
                                         const std::vector<datasets::ImageManifestRecord>& manifest) {
  std::map<std::string, std::vector<ScoreRecord>> by_pair;
  for (const auto& s : scores) by_pair[s.pair_id].push_back(s);
  std::map<std::string, const descriptor::ObjectCentricDescription*> desc;
  for (const auto& d : descriptions) desc.emplace(d.pair_id, &d.description);
  const auto prompt_index = index_prompts(prompts);

  std::vector<ShowcaseItem> items;
  auto make = [&](const std::string& pair_id, const datasets::ImageManifestRecord* m) {
    ShowcaseItem item;
    item.pair_id = pair_id;
    if (m != nullptr) {
      item.generator = m->generator;
      if (auto it = prompt_index.find(m->prompt_id); it != prompt_index.end()) item.prompt_text = it->second->text;
    }
    if (auto it = desc.find(pair_id); it != desc.end()) item.description = it->second->text;
    item.records = std::move(by_pair[pair_id]);
    by_pair.erase(pair_id);
    items.push_back(std::move(item));
  };
  for (const auto& m : manifest) {
    if (by_pair.count(m.pair_id) != 0) make(m.pair_id, &m);
  }
  std::vector<std::string> rest;
  for (const auto& [id, unused] : by_pair) rest.push_back(id);
  for (const auto& id : rest) make(id, nullptr);
  return items;
}

std::string render_showcase(const std::vector<ShowcaseItem>& items) {
  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Score showcase</title>\n"
       << "<style>\nbody{font-family:sans-serif;max-width:60em;margin:2em auto;padding:0 1em;color:#222}\n"
       << "section{border-top:1px solid #ccc;padding:1em 0}\ntable{border-collapse:collapse;width:100%}\n"
       << "th,td{border:1px solid #ddd;padding:.3em .5em;text-align:left;vertical-align:top}\n"
       << ".meta{color:#666}\n</style>\n</head>\n<body>\n<h1>Score showcase</h1>\n";
  html << "<p class=\"meta\">" << items.size() << " scored pair" << (items.size() == 1 ? "" : "s") << "</p>\n";
  if (items.empty()) html << "<p>No scored pairs.</p>\n";
  std::size_t index = 0;
  for (const auto& item : items) {
    html << "<section id=\"pair-" << ++index << "\">\n<h2>" << html_escape(item.pair_id) << "</h2>\n";
    if (!item.generator.empty()) html << "<p class=\"meta\">Generator: " << html_escape(item.generator) << "</p>\n";
    if (!item.prompt_text.empty()) html << "<p><b>Prompt:</b> " << html_escape(item.prompt_text) << "</p>\n";
    if (!item.description.empty()) html << "<p><b>Description:</b> " << html_escape(item.description) << "</p>\n";
    html << "<table>\n<tr><th>Metric</th><th>Objective</th><th>Score</th><th>Raw</th><th>Rationale</th></tr>\n";
    for (const auto& r : item.records) {
      const bool integral = r.mode == ScoreMode::instruction_following;
      html << "<tr><td>" << html_escape(metric_label(r)) << "</td><td>"
           << (r.objective ? evaluator::to_string(*r.objective) : std::string("-")) << "</td><td>"
           << fixed(r.normalized_score, 4) << "</td><td>"
           << (integral ? std::to_string(std::llround(r.raw_value)) : fixed(r.raw_value, 4));
      if (r.atomic_counts) {
        const auto& c = *r.atomic_counts;
        html << " (X1=" << c.x1 << ", X2=" << c.x2 << ", Y1=" << c.y1 << ", Y2=" << c.y2 << ")";
      }
      html << "</td><td>" << html_escape(r.rationale) << "</td></tr>\n";
    }
    html << "</table>\n</section>\n";
  }
  html << "</body>\n</html>\n";
  return html.str();
}

StageSummary run_report(const RunConfig& cfg, const std::vector<fs::path>& score_paths, const fs::path& prompts_path,
                        const fs::path& manifest_path) {
  const auto scores = read_scores(score_paths);
  std::vector<DescriptionEntry> descriptions;
  const fs::path desc_path = cfg.output_dir / "descriptions.jsonl";
  if (fs::exists(desc_path)) descriptions = read_descriptions(desc_path);
  std::vector<datasets::PromptRecord> prompts;
  std::vector<datasets::ImageManifestRecord> manifest;
  if (!prompts_path.empty()) prompts = datasets::load_prompts(prompts_path);
  if (!manifest_path.empty()) manifest = datasets::load_manifest(manifest_path, false);

  const auto items = showcase_items(scores, descriptions, prompts, manifest);
  StageSummary summary;
  summary.total = summary.processed = items.size();
  fs::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "showcase.html", render_showcase(items));
  return summary;
}

// ---- output helpers ----------------------------------------------------------------------

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace t2ieval::pipeline

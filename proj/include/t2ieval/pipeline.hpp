#pragma once

#include "t2ieval/config.hpp"
#include "t2ieval/datasets.hpp"
#include "t2ieval/descriptor.hpp"
#include "t2ieval/evaluator.hpp"
#include "t2ieval/gateway.hpp"
#include "t2ieval/stats.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace t2ieval::pipeline {

namespace fs = std::filesystem;

// ---- records ---------------------------------------------------------------

struct DescriptionEntry {
  std::string pair_id;
  descriptor::ObjectCentricDescription description;
};

nlohmann::json to_json(const DescriptionEntry& entry);
DescriptionEntry description_from_json(const nlohmann::json& j);
nlohmann::json to_json(const evaluator::ScoreRecord& record);
evaluator::ScoreRecord score_from_json(const nlohmann::json& j);

std::vector<DescriptionEntry> read_descriptions(const fs::path& path);
/// Concatenation of several score files. A repeated (pair, objective, mode,
/// variant) key is a DuplicateKey.
std::vector<evaluator::ScoreRecord> read_scores(const std::vector<fs::path>& paths);

/// Report column label: the baseline variant, or LLM-IF / LLM-RE.
std::string metric_label(const evaluator::ScoreRecord& record);

// ---- stage runs ------------------------------------------------------------

struct Failure {
  std::string pair_id;
  std::string stage;
  std::string kind;
  std::string message;
};

struct StageSummary {
  std::size_t total = 0;
  std::size_t processed = 0;
  std::size_t skipped = 0;  ///< already done (resume) or not applicable
  std::vector<Failure> failures;
  std::vector<std::string> warnings;

  bool ok() const { return failures.empty(); }
};

/// Run fn(i) for i in [0, n) on up to `threads` workers. Stops handing out
/// new indices once `stop` returns true.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn,
                  const std::function<bool()>& stop = {});

std::unique_ptr<ModelGateway> make_gateway(const RunConfig& config, std::shared_ptr<Transport> transport,
                                           std::shared_ptr<Clock> clock = system_clock());

/// <out>/descriptions.jsonl, one entry per manifest pair in manifest order.
/// Pairs already present in an existing file are kept and not recomputed.
StageSummary run_describe(const RunConfig& config, ModelGateway& gateway, const fs::path& manifest_path);

/// <out>/scores.jsonl: every requested (objective x mode) record per pair,
/// with rationales. Error counting always uses the error-count prompt, so it
/// yields one record per pair whatever the modes.
StageSummary run_score(const RunConfig& config, ModelGateway& gateway, const fs::path& prompts_path,
                       const fs::path& manifest_path);

/// <out>/baseline_scores.jsonl: one record per (pair x available variant).
/// Variants whose endpoints are not configured are skipped with a warning.
StageSummary run_baseline(const RunConfig& config, ModelGateway& gateway, const fs::path& prompts_path,
                          const fs::path& manifest_path);

// ---- correlation report ------------------------------------------------------

struct ReportRow {
  std::string dataset;    ///< dataset name, or GeneralBench / CompBench for aggregates
  std::string model;      ///< generator
  std::string objective;  ///< overall / error_counting
  std::string metric;
  std::optional<stats::CorrelationResult> result;  ///< empty when degenerate
  std::size_t n = 0;
  std::size_t dropped = 0;
  std::string note;       ///< reason the cell is n/a
  bool aggregate = false;
};

/// One row per (dataset x generator x objective x metric) with human ratings
/// available, followed by per-bench aggregates (uniform mean over the
/// non-degenerate cells of that bench).
std::vector<ReportRow> correlation_rows(const std::vector<datasets::JoinedPair>& pairs,
                                        const std::vector<evaluator::ScoreRecord>& scores,
                                        stats::TauVariant variant = stats::TauVariant::b);

std::string render_csv(const std::vector<ReportRow>& rows);
std::string render_markdown(const std::vector<ReportRow>& rows, const RunConfig& config);

StageSummary run_correlate(const RunConfig& config, const std::vector<fs::path>& score_paths,
                           const fs::path& prompts_path, const fs::path& manifest_path,
                           const fs::path& ratings_path);

// ---- showcase ----------------------------------------------------------------

struct ShowcaseItem {
  std::string pair_id;
  std::string generator;
  std::string prompt_text;
  std::string description;
  std::vector<evaluator::ScoreRecord> records;
};

/// Pairs that have scores, in manifest order (unknown pairs last, by id).
std::vector<ShowcaseItem> showcase_items(const std::vector<evaluator::ScoreRecord>& scores,
                                         const std::vector<DescriptionEntry>& descriptions,
                                         const std::vector<datasets::PromptRecord>& prompts,
                                         const std::vector<datasets::ImageManifestRecord>& manifest);

std::string render_showcase(const std::vector<ShowcaseItem>& items);
std::string html_escape(std::string_view text);

/// <out>/showcase.html. Prompts and manifest are optional (empty paths).
StageSummary run_report(const RunConfig& config, const std::vector<fs::path>& score_paths,
                        const fs::path& prompts_path, const fs::path& manifest_path);

// ---- output helpers ------------------------------------------------------------

/// Write through a temp file and rename.
void write_file(const fs::path& path, const std::string& content);

/// "%.<digits>f" formatting that never prints "-0.0000".
std::string fixed(double value, int digits);

}  // namespace t2ieval::pipeline

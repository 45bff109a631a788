#include "t2ieval/config.hpp"
#include "t2ieval/datasets.hpp"
#include "t2ieval/errors.hpp"
#include "t2ieval/pipeline.hpp"
#include "t2ieval/transport.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace t2ieval;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct GlobalFlags {
  std::string config;
  std::string cache_mode;
  std::string cache_dir;
  std::string mode;
  std::string objectives;
  std::string custom_instruction;
  int scale_n = 0;
  int parallelism = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool no_rationales = false;
};

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (!g.cache_mode.empty()) cfg.cache_mode = parse_cache_mode(g.cache_mode);
  if (!g.cache_dir.empty()) cfg.cache_dir = g.cache_dir;
  if (!g.mode.empty()) {
    cfg.modes.clear();
    for (const auto& m : split_list(g.mode)) {
      if (m == "both") {
        cfg.modes = {evaluator::ScoreMode::instruction_following, evaluator::ScoreMode::rule_enhanced};
        break;
      }
      const auto parsed = evaluator::parse_score_mode(m);
      if (parsed == evaluator::ScoreMode::baseline) throw ConfigError("--mode takes LLM scoring modes only");
      cfg.modes.push_back(parsed);
    }
  }
  if (!g.objectives.empty()) {
    cfg.objectives.clear();
    for (const auto& o : split_list(g.objectives)) cfg.objectives.push_back(evaluator::parse_objective_kind(o));
  }
  if (!g.custom_instruction.empty()) cfg.custom_instruction = g.custom_instruction;
  if (g.scale_n != 0) cfg.scale_n = g.scale_n;
  if (g.parallelism != 0) cfg.parallelism = g.parallelism;
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (g.no_rationales) cfg.rationales = false;
  cfg.validate();
  return cfg;
}

int report(const std::string& stage, const pipeline::StageSummary& s) {
  std::cerr << stage << ": " << s.total << " pairs, " << s.processed << " processed, " << s.skipped << " skipped, "
            << s.failures.size() << " failed, " << s.warnings.size() << " warnings\n";
  for (const auto& f : s.failures) {
    std::cerr << "  " << f.pair_id << " [" << f.stage << "] " << f.kind << ": " << f.message << "\n";
  }
  return s.ok() ? 0 : 1;
}

std::vector<fs::path> default_scores(const RunConfig& cfg, const std::vector<std::string>& given) {
  std::vector<fs::path> out(given.begin(), given.end());
  if (!out.empty()) return out;
  for (const char* name : {"scores.jsonl", "baseline_scores.jsonl"}) {
    if (fs::exists(cfg.output_dir / name)) out.push_back(cfg.output_dir / name);
  }
  if (out.empty()) throw ConfigError("no score files given and none found in " + cfg.output_dir.string());
  return out;
}

void print_gateway_stats(const ModelGateway& gateway) {
  const auto st = gateway.stats();
  std::cerr << "gateway: " << st.network_attempts << " network attempts, " << st.cache_hits << " cache hits, "
            << st.cache_misses << " cache misses\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-to-image alignment evaluation with LLM judges and baseline metrics", "t2ieval"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--cache", g.cache_mode, "Cache mode: off, record or replay");
  app.add_option("--cache-dir", g.cache_dir, "Cache directory");
  app.add_option("--mode", g.mode, "instruction_following, rule_enhanced or both (comma list accepted)");
  app.add_option("--scale-n", g.scale_n, "Rating scale upper bound N");
  app.add_option("--objectives", g.objectives, "Comma list of overall, error_counting, custom");
  app.add_option("--custom-instruction", g.custom_instruction, "Instruction text for the custom objective");
  app.add_option("--parallelism", g.parallelism, "Concurrent pairs per stage");
  app.add_option("--seed", g.seed, "Seed for prompt sampling");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--no-rationales", g.no_rationales, "Skip rationale generation");

  std::string manifest;
  std::string prompts;
  std::string ratings;
  std::vector<std::string> scores;
  std::vector<std::string> variants;

  auto* describe = app.add_subcommand("describe", "Produce object-centric descriptions for every manifest pair");
  describe->add_option("--manifest", manifest, "Image manifest JSONL")->required();

  auto* score = app.add_subcommand("score", "Score described pairs with the LLM evaluator");
  score->add_option("--prompts", prompts, "Prompt JSONL")->required();
  score->add_option("--manifest", manifest, "Image manifest JSONL")->required();

  auto* baseline = app.add_subcommand("baseline", "Compute baseline similarity metrics");
  baseline->add_option("--prompts", prompts, "Prompt JSONL")->required();
  baseline->add_option("--manifest", manifest, "Image manifest JSONL")->required();
  baseline->add_option("--variants", variants, "Subset of CLIP, CapCLIP, CapMETEOR, DescCLIP, DescMETEOR")
      ->delimiter(',');

  auto* correlate = app.add_subcommand("correlate", "Rank-correlate scores with human ratings");
  correlate->add_option("--prompts", prompts, "Prompt JSONL")->required();
  correlate->add_option("--manifest", manifest, "Image manifest JSONL")->required();
  correlate->add_option("--ratings", ratings, "Human rating JSONL")->required();
  correlate->add_option("--scores", scores, "Score JSONL files (default: the ones in --out)");

  auto* showcase = app.add_subcommand("report", "Write a static HTML page of scores and rationales");
  showcase->add_option("--prompts", prompts, "Prompt JSONL");
  showcase->add_option("--manifest", manifest, "Image manifest JSONL");
  showcase->add_option("--scores", scores, "Score JSONL files (default: the ones in --out)");

  std::string sample_dataset;
  std::size_t sample_k = 0;
  auto* sample = app.add_subcommand("sample", "Seeded sample of prompts without replacement");
  sample->add_option("--prompts", prompts, "Prompt JSONL")->required();
  sample->add_option("-k", sample_k, "Prompts to draw per dataset")->required();
  sample->add_option("--dataset", sample_dataset, "Restrict to one dataset");

  auto* cache = app.add_subcommand("cache", "Inspect or clean the response cache");
  cache->require_subcommand(1);
  auto* cache_ls = cache->add_subcommand("ls", "List cache entries");
  std::string older_than;
  auto* cache_gc = cache->add_subcommand("gc", "Remove temp files, corrupt entries and optionally old entries");
  cache_gc->add_option("--older-than", older_than, "Also remove entries created before this UTC timestamp");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = resolve_config(g);
    if (!variants.empty()) {
      cfg.baseline_variants = variants;
      cfg.validate();
    }

    auto gateway_for = [&] { return pipeline::make_gateway(cfg, std::make_shared<HttpTransport>()); };

    if (describe->parsed()) {
      auto gw = gateway_for();
      const int rc = report("describe", pipeline::run_describe(cfg, *gw, manifest));
      print_gateway_stats(*gw);
      return rc;
    }
    if (score->parsed()) {
      auto gw = gateway_for();
      const int rc = report("score", pipeline::run_score(cfg, *gw, prompts, manifest));
      print_gateway_stats(*gw);
      return rc;
    }
    if (baseline->parsed()) {
      auto gw = gateway_for();
      const auto summary = pipeline::run_baseline(cfg, *gw, prompts, manifest);
      for (const auto& w : summary.warnings) {
        if (w.rfind("baseline ", 0) == 0) std::cerr << "warning: " << w << "\n";
      }
      const int rc = report("baseline", summary);
      print_gateway_stats(*gw);
      return rc;
    }
    if (correlate->parsed()) {
      return report("correlate",
                    pipeline::run_correlate(cfg, default_scores(cfg, scores), prompts, manifest, ratings));
    }
    if (showcase->parsed()) {
      return report("report", pipeline::run_report(cfg, default_scores(cfg, scores), prompts, manifest));
    }
    if (sample->parsed()) {
      const auto records = datasets::load_prompts(prompts);
      std::vector<datasets::PromptRecord> drawn;
      for (const auto& [value, name] :
           std::initializer_list<std::pair<datasets::Dataset, const char*>>{
               {datasets::Dataset::coco2014, "coco2014"},
               {datasets::Dataset::coco2017, "coco2017"},
               {datasets::Dataset::drawbench, "drawbench"},
               {datasets::Dataset::paintskills, "paintskills"},
               {datasets::Dataset::concept_conjunction, "concept_conjunction"},
               {datasets::Dataset::attribute_binding, "attribute_binding"},
               {datasets::Dataset::custom, "custom"}}) {
        if (!sample_dataset.empty() && sample_dataset != name) continue;
        std::vector<datasets::PromptRecord> subset;
        for (const auto& r : records) {
          if (r.dataset == value) subset.push_back(r);
        }
        if (subset.empty()) continue;
        auto part = datasets::sample_prompts(subset, sample_k, cfg.seed);
        drawn.insert(drawn.end(), part.begin(), part.end());
      }
      pipeline::write_file(cfg.output_dir / "sampled_prompts.jsonl", datasets::to_jsonl(drawn));
      std::cerr << "sample: " << drawn.size() << " prompts written to "
                << (cfg.output_dir / "sampled_prompts.jsonl").string() << "\n";
      return 0;
    }
    if (cache_ls->parsed() || cache_gc->parsed()) {
      ResponseCache store(cfg.cache_dir, CacheMode::record);
      if (cache_ls->parsed()) {
        for (const auto& e : store.list()) {
          std::cout << e.role << "\t" << e.key << "\t" << e.created_at << "\t" << e.bytes << "\n";
        }
        return 0;
      }
      const auto r = store.gc(older_than.empty() ? std::nullopt : std::optional<std::string>(older_than));
      std::cout << "removed " << r.removed_temp << " temp, " << r.removed_corrupt << " corrupt, "
                << r.removed_expired << " expired; kept " << r.kept << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind();
    if (!e.stage().empty()) std::cerr << " [" << e.stage() << "]";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

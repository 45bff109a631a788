#pragma once

#include "t2ieval/baselines.hpp"
#include "t2ieval/cache.hpp"
#include "t2ieval/descriptor.hpp"
#include "t2ieval/evaluator.hpp"
#include "t2ieval/gateway.hpp"
#include "t2ieval/stats.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace t2ieval {

inline constexpr std::array<std::string_view, 5> kBaselineVariants = {"CLIP", "CapCLIP", "CapMETEOR", "DescCLIP",
                                                                      "DescMETEOR"};

struct RunConfig {
  std::vector<BackendEndpoint> endpoints;
  CacheMode cache_mode = CacheMode::off;
  std::filesystem::path cache_dir = "cache";
  int scale_n = 100;
  std::vector<evaluator::ScoreMode> modes = {evaluator::ScoreMode::instruction_following};
  std::vector<evaluator::ObjectiveKind> objectives = {evaluator::ObjectiveKind::overall,
                                                      evaluator::ObjectiveKind::error_counting};
  std::string custom_instruction;  ///< required when objectives contains custom
  bool rationales = true;
  int parallelism = 4;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  evaluator::EvalOptions eval;
  descriptor::DescribeOptions describe;
  std::vector<std::string> baseline_variants{kBaselineVariants.begin(), kBaselineVariants.end()};
  baselines::MeteorParams meteor;
  stats::TauVariant tau_variant = stats::TauVariant::b;

  /// Throws ConfigError on invalid combinations.
  void validate() const;
};

/// Replace ${NAME} with the environment variable's value. An unset variable
/// is a ConfigError; "$${" escapes a literal "${".
std::string interpolate_env(const std::string& text);

/// Parse a JSON config document. Relative paths inside it resolve against
/// `base_dir`. Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Read, interpolate and parse a config file.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace t2ieval

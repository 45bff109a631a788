#pragma once

#include "t2ieval/descriptor.hpp"
#include "t2ieval/gateway.hpp"
#include "t2ieval/scoring.hpp"
#include "t2ieval/warnings.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace t2ieval::evaluator {

inline constexpr std::string_view kOverallInstruction =
    "Rate the overall quality of the image in terms of matching the text prompt.";
inline constexpr std::string_view kErrorCountingInstruction =
    "Provide the number of compositional errors in the image compared to the text prompt.";

enum class ObjectiveKind { overall, error_counting, custom };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::overall;
  std::string instruction_text;

  static Objective overall();
  static Objective error_counting();
  static Objective custom(std::string instruction);
};

std::string to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(const std::string& text);

struct RatingScale {
  int n = 100;
  explicit RatingScale(int n_ = 100);
};

enum class ScoreMode { instruction_following, rule_enhanced, baseline };

std::string to_string(ScoreMode mode);
ScoreMode parse_score_mode(const std::string& text);

struct ScoreRecord {
  std::string pair_id;
  std::optional<ObjectiveKind> objective;  ///< empty for baselines
  ScoreMode mode = ScoreMode::instruction_following;
  double raw_value = 0.0;
  double normalized_score = 0.0;
  std::string rationale;
  std::optional<AtomicCounts> atomic_counts;
  std::string variant;                     ///< baseline name, empty otherwise
};

struct EvalOptions {
  double temperature = 0.7;
  int max_tokens = 256;
  DecodeMode decode_mode = DecodeMode::greedy;
  std::size_t max_prompt_tokens = 8000;
};

/// Evaluation prompt. user_text holds, in order: the text prompt block, the
/// visual description block, the error-type guidance, and the objective's
/// instruction (for overall, completed with the 1-n integer scale clause),
/// so the prompt ends with the instruction. system_text states the tagged
/// reply format. Throws PromptTooLong.
ChatRequest build_eval_prompt(std::string_view prompt_text, const descriptor::ObjectCentricDescription& description,
                              const Objective& objective, const RatingScale& scale,
                              const EvalOptions& options = {});

/// Prompt for the four atomic counts X1, X2, Y1, Y2.
ChatRequest build_atomic_prompt(std::string_view prompt_text, const descriptor::ObjectCentricDescription& description,
                                const EvalOptions& options = {});

/// Re-ask after an unparseable reply (one attempt, deterministic wording).
ChatRequest build_repair_prompt(const ChatRequest& original, std::string_view bad_reply);

/// The explanation request that follows a score: "Explain the overall
/// rating X within one paragraph." / "Explain the error counting within one
/// paragraph."
ChatRequest build_rationale_prompt(const ChatRequest& scoring_request, const Objective& objective,
                                   long long value, const EvalOptions& options = {});

/// Ask for an integer rating and divide by n. Accepts overall and custom
/// objectives. One repair re-ask on an unparseable reply, then
/// RatingParseFailure. The rationale is left empty (see generate_rationale).
ScoreRecord instruction_following_rate(std::string_view pair_id, std::string_view prompt_text,
                                       const descriptor::ObjectCentricDescription& description,
                                       const Objective& objective, const RatingScale& scale, ModelGateway& gateway,
                                       const EvalOptions& options = {}, Warnings* warnings = nullptr);

/// Atomic counts, clamped to 0 <= x2 <= x1 and 0 <= y2 <= y1 (with warnings).
/// One repair re-ask, then AtomicParseFailure.
AtomicCounts extract_atomic_counts(std::string_view prompt_text, const descriptor::ObjectCentricDescription& description,
                                   ModelGateway& gateway, const EvalOptions& options = {},
                                   Warnings* warnings = nullptr);

/// Rule-enhanced record: raw_value and normalized_score are both the rule score.
ScoreRecord rule_enhanced_rate(std::string_view pair_id, std::string_view prompt_text,
                               const descriptor::ObjectCentricDescription& description, const Objective& objective,
                               ModelGateway& gateway, const EvalOptions& options = {}, Warnings* warnings = nullptr);

/// Error count e with normalized_score = 1 - min(e, 9)/9.
ScoreRecord error_count_rate(std::string_view pair_id, std::string_view prompt_text,
                             const descriptor::ObjectCentricDescription& description, ModelGateway& gateway,
                             const EvalOptions& options = {}, Warnings* warnings = nullptr);

/// One-paragraph explanation of a score. Gateway failures yield an empty
/// string (with a warning) instead of an error.
std::string generate_rationale(long long value, const Objective& objective, std::string_view prompt_text,
                               const descriptor::ObjectCentricDescription& description, const RatingScale& scale,
                               ModelGateway& gateway, const EvalOptions& options = {}, Warnings* warnings = nullptr);

/// The integer the rationale prompt quotes for a record: the parsed rating
/// or error count, or round(score * n) for rule-enhanced records.
long long rationale_value(const ScoreRecord& record, const RatingScale& scale);

}  // namespace t2ieval::evaluator

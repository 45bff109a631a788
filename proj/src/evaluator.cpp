#include "t2ieval/evaluator.hpp"

#include "t2ieval/errors.hpp"
#include "t2ieval/response_parser.hpp"

#include <cmath>
#include <stdexcept>

namespace t2ieval::evaluator {
namespace {

constexpr const char* kStage = "evaluator";

template <typename F>
auto tagged(F&& f) {
  try {
    return f();
  } catch (Error& e) {
    if (e.stage().empty()) e.set_stage(kStage);
    throw;
  }
}

constexpr std::string_view kOverallGuidance =
    "Treat every object-level difference between the image and the text prompt as one error, for example "
    "a difference in counting, shape, color or size.";

constexpr std::string_view kErrorGuidance =
    "Treat every object-level difference between the image and the text prompt as one error. Error types: "
    "wrong attributes of an object (counting, color, shape, size, material, spatial position); wrong "
    "relationships among objects; objects mentioned in the text prompt that are missing from the image; "
    "irrelevant objects in the image that the text prompt does not specify.";

constexpr std::string_view kAtomicInstruction =
    "Answer the following four questions with non-negative integers.\n"
    "X1: the number of objects specified in the text prompt.\n"
    "X2: the number of those objects that are present in the image.\n"
    "Y1: the number of attributes specified in the text prompt.\n"
    "Y2: the number of those attributes that are depicted correctly in the image.";

constexpr std::string_view kScoreFormat = "Reply with one line of the form \"SCORE: <integer>\".";
constexpr std::string_view kErrorFormat = "Reply with one line of the form \"ERRORS: <integer>\".";
constexpr std::string_view kAtomicFormat =
    "Reply with exactly four lines of the form \"X1: <integer>\", \"X2: <integer>\", \"Y1: <integer>\" and "
    "\"Y2: <integer>\".";

std::string strip_final_period(std::string_view text) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\n' || text.back() == '.')) text.remove_suffix(1);
  return std::string(text);
}

std::string context_blocks(std::string_view prompt_text, const descriptor::ObjectCentricDescription& description) {
  std::string text = "Text prompt: ";
  text.append(prompt_text);
  text.append("\n\nImage description:\n");
  text.append(description.text);
  while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
  return text;
}

ChatRequest make_request(std::string system_text, std::string user_text, const EvalOptions& options) {
  const std::size_t tokens = estimate_tokens(system_text) + estimate_tokens(user_text);
  if (tokens > options.max_prompt_tokens) {
    throw PromptTooLong("evaluation prompt is ~" + std::to_string(tokens) + " tokens, over the budget of " +
                        std::to_string(options.max_prompt_tokens));
  }
  ChatRequest request;
  request.system_text = std::move(system_text);
  request.user_text = std::move(user_text);
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  request.decode_mode = options.decode_mode;
  return request;
}

std::string objective_name(const Objective& objective) { return to_string(objective.kind); }

}  // namespace

Objective Objective::overall() { return {ObjectiveKind::overall, std::string(kOverallInstruction)}; }

Objective Objective::error_counting() {
  return {ObjectiveKind::error_counting, std::string(kErrorCountingInstruction)};
}

Objective Objective::custom(std::string instruction) {
  if (instruction.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw std::invalid_argument("custom objective needs a non-empty instruction");
  }
  return {ObjectiveKind::custom, std::move(instruction)};
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::overall: return "overall";
    case ObjectiveKind::error_counting: return "error_counting";
    case ObjectiveKind::custom: return "custom";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(const std::string& text) {
  if (text == "overall") return ObjectiveKind::overall;
  if (text == "error_counting") return ObjectiveKind::error_counting;
  if (text == "custom") return ObjectiveKind::custom;
  throw std::invalid_argument("unknown objective '" + text + "'");
}

RatingScale::RatingScale(int n_) : n(n_) {
  if (n < 2) throw std::invalid_argument("rating scale n must be >= 2, got " + std::to_string(n));
}

std::string to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::instruction_following: return "instruction_following";
    case ScoreMode::rule_enhanced: return "rule_enhanced";
    case ScoreMode::baseline: return "baseline";
  }
  return "unknown";
}

ScoreMode parse_score_mode(const std::string& text) {
  if (text == "instruction_following") return ScoreMode::instruction_following;
  if (text == "rule_enhanced") return ScoreMode::rule_enhanced;
  if (text == "baseline") return ScoreMode::baseline;
  throw std::invalid_argument("unknown score mode '" + text + "'");
}

ChatRequest build_eval_prompt(std::string_view prompt_text, const descriptor::ObjectCentricDescription& description,
                              const Objective& objective, const RatingScale& scale, const EvalOptions& options) {
  std::string user = context_blocks(prompt_text, description);
  user.append("\n\n");
  std::string system;
  if (objective.kind == ObjectiveKind::error_counting) {
    user.append(kErrorGuidance);
    user.append("\n\n");
    user.append(objective.instruction_text);
    system = kErrorFormat;
  } else {
    user.append(kOverallGuidance);
    user.append("\n\n");
    user.append(strip_final_period(objective.instruction_text));
    user.append(" on a scale of 1-" + std::to_string(scale.n) + " (integer only).");
    system = kScoreFormat;
  }
  return make_request(std::move(system), std::move(user), options);
}

ChatRequest build_atomic_prompt(std::string_view prompt_text, const descriptor::ObjectCentricDescription& description,
                                const EvalOptions& options) {
  std::string user = context_blocks(prompt_text, description);
  user.append("\n\n");
  user.append(kAtomicInstruction);
  return make_request(std::string(kAtomicFormat), std::move(user), options);
}

ChatRequest build_repair_prompt(const ChatRequest& original, std::string_view bad_reply) {
  ChatRequest repair = original;
  repair.user_text.append("\n\nYour previous reply was:\n");
  repair.user_text.append(bad_reply);
  repair.user_text.append("\n\nThat reply could not be read. ");
  repair.user_text.append(original.system_text);
  return repair;
}

ChatRequest build_rationale_prompt(const ChatRequest& scoring_request, const Objective& objective, long long value,
                                   const EvalOptions& options) {
  std::string user = scoring_request.user_text;
  user.append("\n\n");
  switch (objective.kind) {
    case ObjectiveKind::overall:
      user.append("Explain the overall rating " + std::to_string(value) + " within one paragraph.");
      break;
    case ObjectiveKind::error_counting:
      user.append("Number of errors: " + std::to_string(value) + ". Explain the error counting within one paragraph.");
      break;
    case ObjectiveKind::custom:
      user.append("Explain the rating " + std::to_string(value) + " within one paragraph.");
      break;
  }
  return make_request("", std::move(user), options);
}

ScoreRecord instruction_following_rate(std::string_view pair_id, std::string_view prompt_text,
                                       const descriptor::ObjectCentricDescription& description,
                                       const Objective& objective, const RatingScale& scale, ModelGateway& gateway,
                                       const EvalOptions& options, Warnings* warnings) {
  if (objective.kind == ObjectiveKind::error_counting) {
    throw std::invalid_argument("instruction_following_rate takes overall or custom objectives");
  }
  return tagged([&] {
    const ChatRequest request = build_eval_prompt(prompt_text, description, objective, scale, options);
    std::vector<std::string> replies{gateway.chat(request).text};
    auto rating = extract_rating(replies.back(), "SCORE", 1, scale.n, warnings);
    if (!rating) {
      replies.push_back(gateway.chat(build_repair_prompt(request, replies.back())).text);
      rating = extract_rating(replies.back(), "SCORE", 1, scale.n, warnings);
    }
    if (!rating) {
      throw RatingParseFailure("no rating in reply for pair '" + std::string(pair_id) + "'", std::move(replies));
    }
    const ScaledRating scaled = scale_rating(*rating, scale.n, warnings);
    ScoreRecord record;
    record.pair_id = std::string(pair_id);
    record.objective = objective.kind;
    record.mode = ScoreMode::instruction_following;
    record.raw_value = scaled.rating;
    record.normalized_score = scaled.normalized;
    return record;
  });
}

AtomicCounts extract_atomic_counts(std::string_view prompt_text, const descriptor::ObjectCentricDescription& description,
                                   ModelGateway& gateway, const EvalOptions& options, Warnings* warnings) {
  return tagged([&] {
    const ChatRequest request = build_atomic_prompt(prompt_text, description, options);
    std::vector<std::string> replies{gateway.chat(request).text};
    auto counts = parse_atomic(replies.back(), warnings);
    if (!counts) {
      replies.push_back(gateway.chat(build_repair_prompt(request, replies.back())).text);
      counts = parse_atomic(replies.back(), warnings);
    }
    if (!counts) throw AtomicParseFailure("atomic counts missing from reply", std::move(replies));
    return clamp_counts(*counts, warnings);
  });
}

ScoreRecord rule_enhanced_rate(std::string_view pair_id, std::string_view prompt_text,
                               const descriptor::ObjectCentricDescription& description, const Objective& objective,
                               ModelGateway& gateway, const EvalOptions& options, Warnings* warnings) {
  const AtomicCounts counts = extract_atomic_counts(prompt_text, description, gateway, options, warnings);
  ScoreRecord record;
  record.pair_id = std::string(pair_id);
  record.objective = objective.kind;
  record.mode = ScoreMode::rule_enhanced;
  record.raw_value = rule_enhanced_score(counts);
  record.normalized_score = record.raw_value;
  record.atomic_counts = counts;
  return record;
}

ScoreRecord error_count_rate(std::string_view pair_id, std::string_view prompt_text,
                             const descriptor::ObjectCentricDescription& description, ModelGateway& gateway,
                             const EvalOptions& options, Warnings* warnings) {
  return tagged([&] {
    const ChatRequest request =
        build_eval_prompt(prompt_text, description, Objective::error_counting(), RatingScale{}, options);
    std::vector<std::string> replies{gateway.chat(request).text};
    auto count = extract_rating(replies.back(), "ERRORS", 0, 99, warnings);
    if (!count) {
      replies.push_back(gateway.chat(build_repair_prompt(request, replies.back())).text);
      count = extract_rating(replies.back(), "ERRORS", 0, 99, warnings);
    }
    if (!count) {
      throw RatingParseFailure("no error count in reply for pair '" + std::string(pair_id) + "'",
                               std::move(replies));
    }
    long long e = *count;
    if (e < 0) {
      warn(warnings, "error count " + std::to_string(e) + " clamped to 0");
      e = 0;
    }
    ScoreRecord record;
    record.pair_id = std::string(pair_id);
    record.objective = ObjectiveKind::error_counting;
    record.mode = ScoreMode::instruction_following;
    record.raw_value = static_cast<double>(e);
    record.normalized_score = error_quality(e);
    return record;
  });
}

std::string generate_rationale(long long value, const Objective& objective, std::string_view prompt_text,
                               const descriptor::ObjectCentricDescription& description, const RatingScale& scale,
                               ModelGateway& gateway, const EvalOptions& options, Warnings* warnings) {
  try {
    const ChatRequest scoring = build_eval_prompt(prompt_text, description, objective, scale, options);
    const ChatRequest request = build_rationale_prompt(scoring, objective, value, options);
    return extract_rationale(gateway.chat(request).text);
  } catch (const Error& e) {
    warn(warnings, "rationale for " + objective_name(objective) + " left empty: " + e.kind() + ": " + e.what());
    return {};
  }
}

long long rationale_value(const ScoreRecord& record, const RatingScale& scale) {
  if (record.mode == ScoreMode::rule_enhanced) return std::llround(record.normalized_score * scale.n);
  return std::llround(record.raw_value);
}

}  // namespace t2ieval::evaluator

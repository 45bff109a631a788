#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace t2ieval {

/// Base class for every error raised by the harness. `kind()` is a stable
/// identifier used in logs and failure records; `stage()` names the pipeline
/// stage that was running when the error surfaced (empty if not tagged).
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  void set_stage(std::string stage) { stage_ = std::move(stage); }

 private:
  std::string kind_;
  std::string stage_;
};

#define T2IEVAL_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  };

// gateway
T2IEVAL_DEFINE_ERROR(BackendUnavailable)
T2IEVAL_DEFINE_ERROR(MalformedBackendReply)
T2IEVAL_DEFINE_ERROR(BackendContractViolation)
T2IEVAL_DEFINE_ERROR(PromptTooLong)
T2IEVAL_DEFINE_ERROR(ReplayMiss)
T2IEVAL_DEFINE_ERROR(ImageDecodeError)
T2IEVAL_DEFINE_ERROR(ConfigError)

// baselines
T2IEVAL_DEFINE_ERROR(DegenerateEmbedding)
T2IEVAL_DEFINE_ERROR(EmptyText)

// stats
T2IEVAL_DEFINE_ERROR(InvalidRange)
T2IEVAL_DEFINE_ERROR(DegenerateSeries)
T2IEVAL_DEFINE_ERROR(InsufficientOverlap)

// datasets
T2IEVAL_DEFINE_ERROR(DuplicateKey)
T2IEVAL_DEFINE_ERROR(IntegrityError)
T2IEVAL_DEFINE_ERROR(InsufficientRecords)

#undef T2IEVAL_DEFINE_ERROR

/// An LLM reply that could not be parsed, even after the repair re-ask.
/// Carries every raw reply so the failure can be dumped for inspection.
class ParseFailure : public Error {
 public:
  ParseFailure(std::string kind, const std::string& what, std::vector<std::string> replies)
      : Error(std::move(kind), what), replies_(std::move(replies)) {}

  const std::vector<std::string>& replies() const noexcept { return replies_; }

 private:
  std::vector<std::string> replies_;
};

class RatingParseFailure : public ParseFailure {
 public:
  RatingParseFailure(const std::string& what, std::vector<std::string> replies = {})
      : ParseFailure("RatingParseFailure", what, std::move(replies)) {}
};

class AtomicParseFailure : public ParseFailure {
 public:
  AtomicParseFailure(const std::string& what, std::vector<std::string> replies = {})
      : ParseFailure("AtomicParseFailure", what, std::move(replies)) {}
};

/// A record-level validation failure while loading a JSONL file.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t line, std::string field, const std::string& message)
      : Error("ValidationError", "line " + std::to_string(line) + ", field '" + field +
                                     "': " + message),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace t2ieval

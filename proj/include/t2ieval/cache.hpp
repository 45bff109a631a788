#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace t2ieval {

enum class CacheMode { off, record, replay };

CacheMode parse_cache_mode(const std::string& text);
std::string to_string(CacheMode mode);

/// Content-addressed store of backend responses:
///   <root>/<role>/<sha256 hex>.json  ->  {"request", "response", "created_at"}
///
/// off:    never read or written.
/// record: hits are served from disk; misses go to the network and are stored.
/// replay: hits are served from disk; a miss is a hard error (ReplayMiss).
class ResponseCache {
 public:
  ResponseCache(std::filesystem::path root, CacheMode mode);

  CacheMode mode() const noexcept { return mode_; }
  const std::filesystem::path& root() const noexcept { return root_; }

  /// SHA-256 over role, model id and the canonical (sorted-key, compact)
  /// serialization of the request.
  static std::string make_key(const std::string& role, const std::string& model_id,
                              const nlohmann::json& canonical_request);

  std::filesystem::path entry_path(const std::string& role, const std::string& key) const;

  /// Stored response for the key, if any. Always empty in mode off.
  std::optional<nlohmann::json> lookup(const std::string& role, const std::string& key) const;

  /// Atomically write an entry (temp file + rename). No-op unless recording.
  void store(const std::string& role, const std::string& key, const nlohmann::json& request,
             const nlohmann::json& response);

  struct EntryInfo {
    std::string role;
    std::string key;
    std::string created_at;
    std::uintmax_t bytes = 0;
  };

  /// All entries sorted by (role, key).
  std::vector<EntryInfo> list() const;

  struct GcReport {
    std::size_t removed_temp = 0;
    std::size_t removed_corrupt = 0;
    std::size_t removed_expired = 0;
    std::size_t kept = 0;
  };

  /// Remove stray temp files and unreadable entries, plus entries created
  /// before `older_than` (ISO-8601 UTC string compare) when given.
  GcReport gc(const std::optional<std::string>& older_than = std::nullopt);

 private:
  std::mutex& stripe_for(const std::string& key) const;

  std::filesystem::path root_;
  CacheMode mode_;
  mutable std::array<std::mutex, 64> stripes_;
};

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

}  // namespace t2ieval

#include "t2ieval/cache.hpp"

#include "t2ieval/codec.hpp"
#include "t2ieval/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <tuple>

namespace t2ieval {
namespace fs = std::filesystem;

CacheMode parse_cache_mode(const std::string& text) {
  if (text == "off") return CacheMode::off;
  if (text == "record") return CacheMode::record;
  if (text == "replay") return CacheMode::replay;
  throw ConfigError("cache mode must be off, record or replay, got '" + text + "'");
}

std::string to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::off:
      return "off";
    case CacheMode::record:
      return "record";
    case CacheMode::replay:
      return "replay";
  }
  return "?";
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ResponseCache::ResponseCache(fs::path root, CacheMode mode) : root_(std::move(root)), mode_(mode) {}

std::string ResponseCache::make_key(const std::string& role, const std::string& model_id,
                                    const nlohmann::json& canonical_request) {
  // nlohmann::json objects keep keys sorted, so dump() is field-order independent.
  std::string material = role;
  material.push_back('\n');
  material.append(model_id);
  material.push_back('\n');
  material.append(canonical_request.dump());
  return sha256_hex(material);
}

fs::path ResponseCache::entry_path(const std::string& role, const std::string& key) const {
  return root_ / role / (key + ".json");
}

std::mutex& ResponseCache::stripe_for(const std::string& key) const {
  return stripes_[std::hash<std::string>{}(key) % stripes_.size()];
}

std::optional<nlohmann::json> ResponseCache::lookup(const std::string& role, const std::string& key) const {
  if (mode_ == CacheMode::off) return std::nullopt;
  const fs::path path = entry_path(role, key);
  std::lock_guard lock(stripe_for(key));
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    nlohmann::json entry = nlohmann::json::parse(in);
    if (!entry.contains("response")) throw MalformedBackendReply("cache entry without response: " + path.string());
    return entry.at("response");
  } catch (const nlohmann::json::exception& e) {
    throw MalformedBackendReply("corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void ResponseCache::store(const std::string& role, const std::string& key, const nlohmann::json& request,
                          const nlohmann::json& response) {
  if (mode_ != CacheMode::record) return;
  static std::atomic<std::uint64_t> counter{0};
  const fs::path path = entry_path(role, key);
  nlohmann::json entry = {{"request", request}, {"response", response}, {"created_at", utc_timestamp()}};

  std::lock_guard lock(stripe_for(key));
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache entry " + tmp.string());
    out << entry.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

std::vector<ResponseCache::EntryInfo> ResponseCache::list() const {
  std::vector<EntryInfo> out;
  if (!fs::exists(root_)) return out;
  for (const auto& role_dir : fs::directory_iterator(root_)) {
    if (!role_dir.is_directory()) continue;
    for (const auto& file : fs::directory_iterator(role_dir.path())) {
      if (file.path().extension() != ".json") continue;
      EntryInfo info;
      info.role = role_dir.path().filename().string();
      info.key = file.path().stem().string();
      info.bytes = file.file_size();
      try {
        std::ifstream in(file.path());
        info.created_at = nlohmann::json::parse(in).value("created_at", "");
      } catch (const nlohmann::json::exception&) {
        info.created_at = "corrupt";
      }
      out.push_back(std::move(info));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const EntryInfo& a, const EntryInfo& b) { return std::tie(a.role, a.key) < std::tie(b.role, b.key); });
  return out;
}

ResponseCache::GcReport ResponseCache::gc(const std::optional<std::string>& older_than) {
  GcReport report;
  if (!fs::exists(root_)) return report;
  for (const auto& role_dir : fs::directory_iterator(root_)) {
    if (!role_dir.is_directory()) continue;
    std::vector<fs::path> doomed_temp, doomed_corrupt, doomed_expired;
    for (const auto& file : fs::directory_iterator(role_dir.path())) {
      const std::string name = file.path().filename().string();
      if (name.find(".tmp.") != std::string::npos) {
        doomed_temp.push_back(file.path());
        continue;
      }
      if (file.path().extension() != ".json") continue;
      try {
        std::ifstream in(file.path());
        const auto entry = nlohmann::json::parse(in);
        if (!entry.contains("response")) {
          doomed_corrupt.push_back(file.path());
        } else if (older_than && entry.value("created_at", "") < *older_than) {
          doomed_expired.push_back(file.path());
        } else {
          ++report.kept;
        }
      } catch (const nlohmann::json::exception&) {
        doomed_corrupt.push_back(file.path());
      }
    }
    for (const auto& p : doomed_temp) report.removed_temp += fs::remove(p) ? 1 : 0;
    for (const auto& p : doomed_corrupt) report.removed_corrupt += fs::remove(p) ? 1 : 0;
    for (const auto& p : doomed_expired) report.removed_expired += fs::remove(p) ? 1 : 0;
  }
  return report;
}

}  // namespace t2ieval

#pragma once

#include "t2ieval/cache.hpp"
#include "t2ieval/image.hpp"
#include "t2ieval/throttle.hpp"
#include "t2ieval/transport.hpp"
#include "t2ieval/warnings.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace t2ieval {

/// The four model roles behind the wire protocol (embedding split by payload).
enum class Role { caption, dense_caption, embed_text, embed_image, chat };

inline constexpr std::array<Role, 5> kAllRoles = {Role::caption, Role::dense_caption, Role::embed_text,
                                                  Role::embed_image, Role::chat};

std::string to_string(Role role);
Role parse_role(const std::string& text);

/// Default request path per role: /caption, /dense, /embed, /chat.
std::string default_path(Role role);

struct BackendEndpoint {
  Role role = Role::chat;
  std::string base_url;
  std::string model_id;
  std::string path;                      ///< empty means default_path(role)
  std::string name;                      ///< API key is read from <NAME>_API_KEY; empty means the role name
  Seconds timeout{60.0};
  int max_retries = 2;
  int requests_per_minute = 60;
  int max_in_flight = 4;

  // chat
  std::size_t max_prompt_tokens = 8000;  ///< estimated tokens; see estimate_tokens
  bool send_decode_mode = true;          ///< include the non-standard "decode_mode" field on the wire

  // dense_caption
  double min_confidence = 0.5;
  std::optional<std::size_t> max_regions;

  // embed_*
  std::optional<std::size_t> embedding_dim;
  std::string variant_label;             ///< baseline name for embed_image (default "CLIP")

  /// Throws ConfigError when the invariants (timeout > 0, max_retries >= 0,
  /// requests_per_minute > 0) or required fields are violated.
  void validate() const;
  std::string effective_path() const { return path.empty() ? default_path(role) : path; }
};

enum class DecodeMode { greedy, sampled };

std::string to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& text);

struct ChatRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.7;
  int max_tokens = 512;
  DecodeMode decode_mode = DecodeMode::greedy;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct ChatReply {
  std::string text;
  bool truncated = false;  ///< the backend stopped at max_tokens
};

struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct RegionProposal {
  std::string object_label;
  std::string dense_caption;
  BoundingBox bbox;
  double confidence = 1.0;

  friend bool operator==(const RegionProposal&, const RegionProposal&) = default;
};

struct DenseResult {
  std::vector<RegionProposal> regions;
  std::vector<std::string> warnings;
};

/// Rough prompt size estimate: ceil(bytes / 4).
std::size_t estimate_tokens(std::string_view text);

struct GatewayOptions {
  Seconds retry_base_delay{0.5};
  Seconds retry_max_delay{8.0};
};

struct GatewayStats {
  std::size_t network_attempts = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

/// Uniform client for the caption, dense-caption, embedding and chat
/// backends with retries, per-endpoint rate limiting and in-flight bounds,
/// and the record/replay response cache. Safe for concurrent use.
class ModelGateway {
 public:
  ModelGateway(std::vector<BackendEndpoint> endpoints, std::shared_ptr<Transport> transport,
               std::shared_ptr<ResponseCache> cache = nullptr, std::shared_ptr<Clock> clock = system_clock(),
               GatewayOptions options = {});
  ~ModelGateway();

  ModelGateway(const ModelGateway&) = delete;
  ModelGateway& operator=(const ModelGateway&) = delete;

  bool has_endpoint(Role role) const;
  const BackendEndpoint& endpoint(Role role) const;

  /// Non-empty single-paragraph caption.
  std::string caption(const ImageInput& image);

  /// Region proposals in backend order, bboxes clamped to the image,
  /// filtered by the endpoint's confidence threshold and region cap.
  DenseResult dense_regions(const ImageInput& image);

  std::vector<double> embed_text(std::string_view text);
  std::vector<double> embed_image(const ImageInput& image);

  /// Raw completion text. Throws PromptTooLong before any cache lookup or
  /// network call when the estimated prompt exceeds the endpoint budget.
  ChatReply chat(const ChatRequest& request);

  GatewayStats stats() const;
  Warnings& warnings() noexcept { return warnings_; }

  /// Wire body for a chat request (exposed for protocol tests).
  nlohmann::json chat_wire_body(const ChatRequest& request) const;

 private:
  struct EndpointState;

  EndpointState& state(Role role) const;
  nlohmann::json call(Role role, const nlohmann::json& wire_body, const nlohmann::json& canonical_body);
  nlohmann::json send_with_retries(EndpointState& state, const nlohmann::json& wire_body);
  std::vector<double> parse_embedding(const BackendEndpoint& ep, const nlohmann::json& reply);

  std::map<Role, std::unique_ptr<EndpointState>> endpoints_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  std::shared_ptr<Clock> clock_;
  GatewayOptions options_;
  Warnings warnings_;

  std::mutex dims_mutex_;
  std::map<std::string, std::size_t> embedding_dims_;

  std::atomic<std::size_t> network_attempts_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> cache_misses_{0};
};

}  // namespace t2ieval

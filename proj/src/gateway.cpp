#include "t2ieval/gateway.hpp"

#include "t2ieval/codec.hpp"
#include "t2ieval/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace t2ieval {

using nlohmann::json;

std::string to_string(Role role) {
  switch (role) {
    case Role::caption:
      return "caption";
    case Role::dense_caption:
      return "dense_caption";
    case Role::embed_text:
      return "embed_text";
    case Role::embed_image:
      return "embed_image";
    case Role::chat:
      return "chat";
  }
  return "?";
}

Role parse_role(const std::string& text) {
  for (Role r : kAllRoles) {
    if (to_string(r) == text) return r;
  }
  throw ConfigError("unknown backend role '" + text + "'");
}

std::string default_path(Role role) {
  switch (role) {
    case Role::caption:
      return "/caption";
    case Role::dense_caption:
      return "/dense";
    case Role::embed_text:
    case Role::embed_image:
      return "/embed";
    case Role::chat:
      return "/chat";
  }
  return "/";
}

std::string to_string(DecodeMode mode) { return mode == DecodeMode::greedy ? "greedy" : "sampled"; }

DecodeMode parse_decode_mode(const std::string& text) {
  if (text == "greedy") return DecodeMode::greedy;
  if (text == "sampled") return DecodeMode::sampled;
  throw ConfigError("decode_mode must be greedy or sampled, got '" + text + "'");
}

void BackendEndpoint::validate() const {
  const std::string where = "endpoint " + to_string(role) + ": ";
  if (base_url.empty()) throw ConfigError(where + "base_url is required");
  if (model_id.empty()) throw ConfigError(where + "model_id is required");
  if (!(timeout.count() > 0)) throw ConfigError(where + "timeout must be positive");
  if (max_retries < 0) throw ConfigError(where + "max_retries must be >= 0");
  if (requests_per_minute < 1) throw ConfigError(where + "requests_per_minute must be positive");
  if (max_in_flight < 1) throw ConfigError(where + "max_in_flight must be positive");
  if (min_confidence < 0.0 || min_confidence > 1.0) throw ConfigError(where + "min_confidence must lie in [0,1]");
  split_url(base_url);
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

struct ModelGateway::EndpointState {
  EndpointState(BackendEndpoint ep, std::shared_ptr<Clock> clock)
      : endpoint(std::move(ep)), limiter(endpoint.requests_per_minute, std::move(clock)),
        gate(endpoint.max_in_flight) {}

  BackendEndpoint endpoint;
  RateLimiter limiter;
  InFlightGate gate;
};

ModelGateway::ModelGateway(std::vector<BackendEndpoint> endpoints, std::shared_ptr<Transport> transport,
                           std::shared_ptr<ResponseCache> cache, std::shared_ptr<Clock> clock, GatewayOptions options)
    : transport_(std::move(transport)), cache_(std::move(cache)), clock_(std::move(clock)), options_(options) {
  for (auto& ep : endpoints) {
    ep.validate();
    const Role role = ep.role;
    if (endpoints_.count(role) != 0) throw ConfigError("duplicate endpoint for role " + to_string(role));
    endpoints_.emplace(role, std::make_unique<EndpointState>(std::move(ep), clock_));
  }
}

ModelGateway::~ModelGateway() = default;

bool ModelGateway::has_endpoint(Role role) const { return endpoints_.count(role) != 0; }

ModelGateway::EndpointState& ModelGateway::state(Role role) const {
  auto it = endpoints_.find(role);
  if (it == endpoints_.end()) throw ConfigError("no endpoint configured for role " + to_string(role));
  return *it->second;
}

const BackendEndpoint& ModelGateway::endpoint(Role role) const { return state(role).endpoint; }

GatewayStats ModelGateway::stats() const {
  return {network_attempts_.load(), cache_hits_.load(), cache_misses_.load()};
}

json ModelGateway::send_with_retries(EndpointState& st, const json& wire_body) {
  const BackendEndpoint& ep = st.endpoint;
  Headers headers;
  std::string key_name = ep.name.empty() ? to_string(ep.role) : ep.name;
  std::transform(key_name.begin(), key_name.end(), key_name.begin(),
                 [](unsigned char c) { return std::isalnum(c) ? char(std::toupper(c)) : '_'; });
  if (const char* key = std::getenv((key_name + "_API_KEY").c_str()); key != nullptr && *key != '\0') {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = wire_body.dump();
  const int attempts = 1 + ep.max_retries;
  std::string last_error;

  auto permit = st.gate.acquire();
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const double delay = std::min(options_.retry_max_delay.count(),
                                    options_.retry_base_delay.count() * std::pow(2.0, attempt - 1));
      clock_->sleep_for(Seconds(delay));
    }
    st.limiter.acquire();
    ++network_attempts_;
    HttpResponse response;
    try {
      response = transport_->post(ep.base_url, ep.effective_path(), body, headers, ep.timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    const bool retryable = response.status == 408 || response.status == 429 || response.status >= 500;
    if (retryable) {
      last_error = "HTTP " + std::to_string(response.status);
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      throw BackendUnavailable(to_string(ep.role) + " backend answered HTTP " + std::to_string(response.status) +
                               ": " + response.body.substr(0, 512));
    }
    try {
      return json::parse(response.body);
    } catch (const json::exception& e) {
      throw MalformedBackendReply(to_string(ep.role) + " backend returned invalid JSON: " + e.what());
    }
  }
  throw BackendUnavailable(to_string(ep.role) + " backend at " + ep.base_url + " unavailable after " +
                           std::to_string(attempts) + " attempt(s): " + last_error);
}

json ModelGateway::call(Role role, const json& wire_body, const json& canonical_body) {
  EndpointState& st = state(role);
  const std::string role_name = to_string(role);
  const std::string key = ResponseCache::make_key(role_name, st.endpoint.model_id, canonical_body);
  if (cache_ && cache_->mode() != CacheMode::off) {
    if (auto hit = cache_->lookup(role_name, key)) {
      ++cache_hits_;
      return *hit;
    }
    ++cache_misses_;
    if (cache_->mode() == CacheMode::replay) {
      throw ReplayMiss("replay cache has no entry for " + role_name + " key " + key + " (" +
                       cache_->entry_path(role_name, key).string() + ")");
    }
  }
  json reply = send_with_retries(st, wire_body);
  if (cache_) cache_->store(role_name, key, canonical_body, reply);
  return reply;
}

namespace {

std::pair<json, json> image_bodies(const std::string& model, const ImageInput& image) {
  json wire = {{"model", model}, {"image_b64", base64_encode(image.bytes)}};
  json canonical = {{"model", model},
                    {"image_sha256", sha256_hex(image.bytes)},
                    {"width", image.width},
                    {"height", image.height}};
  return {std::move(wire), std::move(canonical)};
}

std::string one_paragraph(const std::string& text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

const json& require_field(const json& reply, const char* field, Role role) {
  if (!reply.is_object() || !reply.contains(field)) {
    throw MalformedBackendReply(to_string(role) + " reply lacks '" + field + "'");
  }
  return reply.at(field);
}

}  // namespace

std::string ModelGateway::caption(const ImageInput& image) {
  const auto& ep = endpoint(Role::caption);
  auto [wire, canonical] = image_bodies(ep.model_id, image);
  const json reply = call(Role::caption, wire, canonical);
  const json& caption = require_field(reply, "caption", Role::caption);
  if (!caption.is_string()) throw MalformedBackendReply("caption is not a string");
  std::string text = one_paragraph(caption.get<std::string>());
  if (text.empty()) throw MalformedBackendReply("caption backend returned an empty caption");
  return text;
}

DenseResult ModelGateway::dense_regions(const ImageInput& image) {
  const auto& ep = endpoint(Role::dense_caption);
  auto [wire, canonical] = image_bodies(ep.model_id, image);
  const json reply = call(Role::dense_caption, wire, canonical);
  const json& regions = require_field(reply, "regions", Role::dense_caption);
  if (!regions.is_array()) throw MalformedBackendReply("regions is not an array");

  DenseResult out;
  std::size_t index = 0;
  for (const json& r : regions) {
    const std::string where = "region " + std::to_string(index++);
    if (!r.is_object()) throw MalformedBackendReply(where + " is not an object");
    const json& label = require_field(r, "label", Role::dense_caption);
    const json& caption = require_field(r, "caption", Role::dense_caption);
    const json& bbox = require_field(r, "bbox", Role::dense_caption);
    if (!label.is_string() || label.get<std::string>().empty()) throw MalformedBackendReply(where + ": empty label");
    if (!caption.is_string() || caption.get<std::string>().empty()) {
      throw MalformedBackendReply(where + ": empty caption");
    }
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(), [](const json& v) { return v.is_number(); })) {
      throw MalformedBackendReply(where + ": bbox must be [x0, y0, x1, y1]");
    }

    RegionProposal proposal;
    proposal.object_label = one_paragraph(label.get<std::string>());
    proposal.dense_caption = one_paragraph(caption.get<std::string>());

    std::array<long long, 4> raw{};
    for (std::size_t k = 0; k < 4; ++k) raw[k] = std::llround(bbox[k].get<double>());
    std::array<long long, 4> clamped{std::clamp<long long>(raw[0], 0, image.width),
                                     std::clamp<long long>(raw[1], 0, image.height),
                                     std::clamp<long long>(raw[2], 0, image.width),
                                     std::clamp<long long>(raw[3], 0, image.height)};
    if (clamped != raw) {
      out.warnings.push_back(where + " (" + proposal.object_label + "): bbox clamped to " +
                             std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
    }
    if (clamped[0] > clamped[2] || clamped[1] > clamped[3]) {
      out.warnings.push_back(where + " (" + proposal.object_label + "): inverted bbox corners reordered");
      if (clamped[0] > clamped[2]) std::swap(clamped[0], clamped[2]);
      if (clamped[1] > clamped[3]) std::swap(clamped[1], clamped[3]);
    }
    proposal.bbox = {int(clamped[0]), int(clamped[1]), int(clamped[2]), int(clamped[3])};

    if (r.contains("confidence")) {
      if (!r["confidence"].is_number()) throw MalformedBackendReply(where + ": confidence is not a number");
      const double c = r["confidence"].get<double>();
      proposal.confidence = std::clamp(c, 0.0, 1.0);
      if (proposal.confidence != c) out.warnings.push_back(where + ": confidence clamped to [0,1]");
    }
    if (proposal.confidence < ep.min_confidence) continue;
    if (ep.max_regions && out.regions.size() >= *ep.max_regions) {
      out.warnings.push_back(where + ": dropped by max_regions=" + std::to_string(*ep.max_regions));
      continue;
    }
    out.regions.push_back(std::move(proposal));
  }
  for (const auto& w : out.warnings) warnings_.add(w);
  return out;
}

std::vector<double> ModelGateway::parse_embedding(const BackendEndpoint& ep, const json& reply) {
  const json& embedding = require_field(reply, "embedding", ep.role);
  if (!embedding.is_array() || embedding.empty()) throw MalformedBackendReply("embedding must be a non-empty array");
  std::vector<double> out;
  out.reserve(embedding.size());
  for (const json& v : embedding) {
    if (!v.is_number()) throw MalformedBackendReply("embedding contains a non-number");
    out.push_back(v.get<double>());
  }
  if (ep.embedding_dim && out.size() != *ep.embedding_dim) {
    throw BackendContractViolation(ep.model_id + " returned " + std::to_string(out.size()) +
                                   "-dim embedding, configured dimension is " + std::to_string(*ep.embedding_dim));
  }
  std::lock_guard lock(dims_mutex_);
  auto [it, inserted] = embedding_dims_.emplace(ep.model_id, out.size());
  if (!inserted && it->second != out.size()) {
    throw BackendContractViolation(ep.model_id + " returned " + std::to_string(out.size()) +
                                   "-dim embedding after earlier " + std::to_string(it->second) + "-dim ones");
  }
  return out;
}

std::vector<double> ModelGateway::embed_text(std::string_view text) {
  const auto& ep = endpoint(Role::embed_text);
  const json body = {{"model", ep.model_id}, {"text", std::string(text)}};
  return parse_embedding(ep, call(Role::embed_text, body, body));
}

std::vector<double> ModelGateway::embed_image(const ImageInput& image) {
  const auto& ep = endpoint(Role::embed_image);
  auto [wire, canonical] = image_bodies(ep.model_id, image);
  return parse_embedding(ep, call(Role::embed_image, wire, canonical));
}

json ModelGateway::chat_wire_body(const ChatRequest& request) const {
  const auto& ep = endpoint(Role::chat);
  json messages = json::array();
  if (!request.system_text.empty()) messages.push_back({{"role", "system"}, {"content", request.system_text}});
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  json body = {{"model", ep.model_id},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  if (ep.send_decode_mode) body["decode_mode"] = to_string(request.decode_mode);
  return body;
}

ChatReply ModelGateway::chat(const ChatRequest& request) {
  const auto& ep = endpoint(Role::chat);
  const std::size_t tokens = estimate_tokens(request.system_text) + estimate_tokens(request.user_text);
  if (tokens > ep.max_prompt_tokens) {
    throw PromptTooLong("prompt of ~" + std::to_string(tokens) + " tokens exceeds the chat budget of " +
                        std::to_string(ep.max_prompt_tokens));
  }
  json wire = chat_wire_body(request);
  json canonical = wire;
  canonical["decode_mode"] = to_string(request.decode_mode);
  const json reply = call(Role::chat, wire, canonical);

  const json& choices = require_field(reply, "choices", Role::chat);
  if (!choices.is_array() || choices.empty() || !choices[0].is_object()) {
    throw MalformedBackendReply("chat reply has no choices");
  }
  const json& choice = choices[0];
  if (!choice.contains("message") || !choice["message"].is_object() || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    throw MalformedBackendReply("chat reply lacks choices[0].message.content");
  }
  ChatReply out;
  out.text = choice["message"]["content"].get<std::string>();
  out.truncated = choice.contains("finish_reason") && choice["finish_reason"] == "length";
  return out;
}

}  // namespace t2ieval

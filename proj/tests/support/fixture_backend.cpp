#include "fixture_backend.hpp"

#include "t2ieval/codec.hpp"
#include "t2ieval/descriptor.hpp"
#include "t2ieval/errors.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace t2ieval::testing {
namespace {

using nlohmann::json;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

HttpResponse ok(const json& j) { return {200, j.dump()}; }

HttpResponse chat_reply(const std::string& content) {
  return ok({{"choices", {{{"index", 0},
                           {"message", {{"role", "assistant"}, {"content", content}}},
                           {"finish_reason", "stop"}}}}});
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

FixtureBackend::FixtureBackend(const std::filesystem::path& world_path) {
  const json world = json::parse(slurp(world_path));
  for (const auto& e : world.at("images")) {
    Entry entry;
    entry.caption = e.at("caption").get<std::string>();
    entry.regions = e.at("regions");
    entry.description = e.at("description").get<std::string>();
    entry.score = e.at("score").get<int>();
    entry.errors = e.at("errors").get<int>();
    entry.atomic = e.at("atomic").get<std::vector<int>>();
    entry.style = e.value("style", "tagged");
    const std::string bytes = slurp(world_path.parent_path() / e.at("image").get<std::string>());
    by_sha_.emplace(sha256_hex(bytes), std::move(entry));
  }
}

std::vector<double> FixtureBackend::embed(const std::string& text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::string h = sha256_hex(token);
    const std::size_t bucket = std::stoul(h.substr(0, 8), nullptr, 16) % dim;
    v[bucket] += (std::stoul(h.substr(8, 2), nullptr, 16) % 2 == 0) ? 1.0 : 0.5;
    token.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  // Constant offset keeps every vector non-zero.
  v[0] += 0.25;
  return v;
}

const FixtureBackend::Entry* FixtureBackend::by_image(const json& body, std::string& sha) const {
  sha = sha256_hex(base64_decode(body.at("image_b64").get<std::string>()));
  auto it = by_sha_.find(sha);
  return it == by_sha_.end() ? nullptr : &it->second;
}

HttpResponse FixtureBackend::post(const std::string&, const std::string& path, const std::string& body_text,
                                  const Headers&, std::chrono::duration<double>) {
  ++calls_;
  const json body = json::parse(body_text);
  std::string sha;
  if (path == "/caption" || path == "/dense") {
    const Entry* e = by_image(body, sha);
    if (e == nullptr) return {404, json{{"error", "unknown image"}, {"hash", sha}}.dump()};
    if (path == "/caption") return ok({{"caption", e->caption}});
    return ok({{"regions", e->regions}});
  }
  if (path == "/embed") {
    if (body.contains("text")) return ok({{"embedding", embed(body.at("text").get<std::string>())}});
    const Entry* e = by_image(body, sha);
    if (e == nullptr) return {404, json{{"error", "unknown image"}, {"hash", sha}}.dump()};
    return ok({{"embedding", embed(e->caption)}});
  }
  if (path == "/chat") return chat(body);
  return {404, json{{"error", "unknown path " + path}}.dump()};
}

HttpResponse FixtureBackend::chat(const json& body) const {
  std::string system;
  std::string user;
  for (const auto& m : body.at("messages")) {
    (m.at("role") == "system" ? system : user) += m.at("content").get<std::string>();
  }
  if (contains(user, std::string(descriptor::kDescriptionInstruction))) {
    for (const auto& [sha, e] : by_sha_) {
      if (contains(user, "Image caption: " + e.caption)) return chat_reply(e.description);
    }
    return {404, json{{"error", "no fixture for description request"}}.dump()};
  }
  const Entry* entry = nullptr;
  for (const auto& [sha, e] : by_sha_) {
    if (contains(user, e.description)) entry = &e;
  }
  if (entry == nullptr) return {404, json{{"error", "no fixture for evaluation request"}}.dump()};
  const Entry& e = *entry;

  if (contains(user, "Explain the overall rating") || contains(user, "Explain the rating")) {
    return chat_reply("The description matches the prompt's objects. " + e.caption +
                      " Some attributes differ from the prompt, which lowers the rating.");
  }
  if (contains(user, "Explain the error counting")) {
    return chat_reply("Counted " + std::to_string(e.errors) + " object-level differences between the image and "
                      "the prompt, judged from the description.\n\nEach one is a wrong or missing attribute.");
  }
  if (contains(system, "X1")) {
    const auto& a = e.atomic;
    if (e.style == "prose") {
      return chat_reply("Counts: X1 = " + std::to_string(a[0]) + ", X2 = " + std::to_string(a[1]) +
                        ", Y1 = " + std::to_string(a[2]) + ", Y2 = " + std::to_string(a[3]) + ".");
    }
    return chat_reply("X1: " + std::to_string(a[0]) + "\nX2: " + std::to_string(a[1]) + "\nY1: " +
                      std::to_string(a[2]) + "\nY2: " + std::to_string(a[3]));
  }
  if (contains(system, "ERRORS")) {
    if (e.style == "prose") return chat_reply("I count " + std::to_string(e.errors) + " errors in this image.");
    if (e.style == "markdown") return chat_reply("**Errors:** " + std::to_string(e.errors));
    return chat_reply("ERRORS: " + std::to_string(e.errors));
  }
  if (contains(system, "SCORE")) {
    if (e.style == "prose") {
      return chat_reply("Considering the prompt, I would rate the image " + std::to_string(e.score) +
                        " out of 100.");
    }
    if (e.style == "markdown") return chat_reply("**Score:** " + std::to_string(e.score) + "/100");
    return chat_reply("SCORE: " + std::to_string(e.score));
  }
  return {404, json{{"error", "unrecognised chat request"}}.dump()};
}

}  // namespace t2ieval::testing

#include "t2ieval/config.hpp"

#include "t2ieval/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace t2ieval {
namespace {

using nlohmann::json;

// Typed field access over one JSON object that remembers which keys were
// read, so leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const char* key, T& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (seen_.count(item.key()) == 0) throw ConfigError("unknown key " + where_ + "." + item.key());
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

BackendEndpoint parse_endpoint(Role role, const json& j) {
  BackendEndpoint ep;
  ep.role = role;
  Fields f(j, "endpoints." + to_string(role));
  f.read("base_url", ep.base_url);
  f.read("model_id", ep.model_id);
  f.read("path", ep.path);
  f.read("name", ep.name);
  double timeout = ep.timeout.count();
  f.read("timeout_s", timeout);
  ep.timeout = Seconds(timeout);
  f.read("max_retries", ep.max_retries);
  f.read("requests_per_minute", ep.requests_per_minute);
  f.read("max_in_flight", ep.max_in_flight);
  f.read("max_prompt_tokens", ep.max_prompt_tokens);
  f.read("send_decode_mode", ep.send_decode_mode);
  f.read("min_confidence", ep.min_confidence);
  if (const json* v = f.find("max_regions"); v != nullptr && !v->is_null()) {
    if (!v->is_number_integer() || v->get<long long>() < 0) {
      throw ConfigError(f.where() + ".max_regions must be a non-negative integer");
    }
    ep.max_regions = v->get<std::size_t>();
  }
  if (const json* v = f.find("embedding_dim"); v != nullptr && !v->is_null()) {
    if (!v->is_number_integer() || v->get<long long>() <= 0) {
      throw ConfigError(f.where() + ".embedding_dim must be a positive integer");
    }
    ep.embedding_dim = v->get<std::size_t>();
  }
  f.read("variant_label", ep.variant_label);
  f.finish();
  ep.validate();
  return ep;
}

template <typename Enum, typename Parse>
std::vector<Enum> parse_list(const json& v, const std::string& where, Parse parse) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of strings");
  std::vector<Enum> out;
  for (const auto& item : v) {
    if (!item.is_string()) throw ConfigError(where + " must be an array of strings");
    try {
      const Enum e = parse(item.get<std::string>());
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return out;
}

void interpolate_strings(json& j) {
  if (j.is_string()) {
    j = interpolate_env(j.get<std::string>());
  } else if (j.is_array() || j.is_object()) {
    for (auto& child : j) interpolate_strings(child);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void RunConfig::validate() const {
  if (scale_n < 2) throw ConfigError("scale_n must be >= 2");
  if (parallelism < 1) throw ConfigError("parallelism must be positive");
  if (modes.empty()) throw ConfigError("at least one scoring mode is required");
  if (objectives.empty()) throw ConfigError("at least one objective is required");
  const bool has_custom =
      std::find(objectives.begin(), objectives.end(), evaluator::ObjectiveKind::custom) != objectives.end();
  if (has_custom && custom_instruction.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError("objective 'custom' needs custom_instruction");
  }
  for (const auto& v : baseline_variants) {
    if (std::find(kBaselineVariants.begin(), kBaselineVariants.end(), v) == kBaselineVariants.end()) {
      throw ConfigError("unknown baseline variant '" + v + "'");
    }
  }
  if (meteor.penalty_gamma < 0.0 || meteor.penalty_gamma > 1.0) throw ConfigError("meteor.gamma must lie in [0,1]");
  if (!(meteor.penalty_power > 0.0)) throw ConfigError("meteor.power must be positive");
}

std::string interpolate_env(const std::string& text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 3, "$${") == 0) {
      out += "${";
      i += 3;
      continue;
    }
    if (text.compare(i, 2, "${") == 0) {
      const auto close = text.find('}', i + 2);
      if (close == std::string::npos) throw ConfigError("unterminated ${ in config value");
      const std::string name = text.substr(i + 2, close - i - 2);
      const char* value = std::getenv(name.c_str());
      if (name.empty() || value == nullptr) throw ConfigError("environment variable '" + name + "' is not set");
      out += value;
      i = close + 1;
      continue;
    }
    out.push_back(text[i++]);
  }
  return out;
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  Fields top(doc, "config");

  if (const json* eps = top.find("endpoints")) {
    Fields ef(*eps, "endpoints");
    for (Role role : kAllRoles) {
      if (const json* e = ef.find(to_string(role).c_str())) cfg.endpoints.push_back(parse_endpoint(role, *e));
    }
    ef.finish();
  }

  if (const json* c = top.find("cache")) {
    Fields cf(*c, "cache");
    std::string mode = to_string(cfg.cache_mode);
    std::string dir = cfg.cache_dir.string();
    cf.read("mode", mode);
    cf.read("dir", dir);
    cf.finish();
    try {
      cfg.cache_mode = parse_cache_mode(mode);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cache.mode: ") + e.what());
    }
    cfg.cache_dir = resolve(base_dir, dir);
  }

  top.read("scale_n", cfg.scale_n);
  if (const json* m = top.find("modes")) {
    cfg.modes = parse_list<evaluator::ScoreMode>(*m, "modes", [](const std::string& s) {
      const auto mode = evaluator::parse_score_mode(s);
      if (mode == evaluator::ScoreMode::baseline) throw std::invalid_argument("baseline is not an LLM scoring mode");
      return mode;
    });
  }
  if (const json* o = top.find("objectives")) {
    cfg.objectives = parse_list<evaluator::ObjectiveKind>(*o, "objectives", evaluator::parse_objective_kind);
  }
  top.read("custom_instruction", cfg.custom_instruction);
  top.read("rationales", cfg.rationales);
  top.read("parallelism", cfg.parallelism);
  if (const json* o = top.find("output_dir")) cfg.output_dir = resolve(base_dir, o->get<std::string>());
  top.read("seed", cfg.seed);

  if (const json* e = top.find("eval")) {
    Fields f(*e, "eval");
    f.read("temperature", cfg.eval.temperature);
    f.read("max_tokens", cfg.eval.max_tokens);
    f.read("max_prompt_tokens", cfg.eval.max_prompt_tokens);
    std::string mode = to_string(cfg.eval.decode_mode);
    f.read("decode_mode", mode);
    cfg.eval.decode_mode = parse_decode_mode(mode);
    f.finish();
  }
  if (const json* d = top.find("describe")) {
    Fields f(*d, "describe");
    f.read("temperature", cfg.describe.temperature);
    f.read("max_tokens", cfg.describe.max_tokens);
    f.read("max_prompt_tokens", cfg.describe.max_prompt_tokens);
    std::string mode = to_string(cfg.describe.decode_mode);
    f.read("decode_mode", mode);
    cfg.describe.decode_mode = parse_decode_mode(mode);
    f.finish();
  }
  if (const json* b = top.find("baselines")) {
    Fields f(*b, "baselines");
    f.read("variants", cfg.baseline_variants);
    if (const json* m = f.find("meteor")) {
      Fields mf(*m, "baselines.meteor");
      mf.read("gamma", cfg.meteor.penalty_gamma);
      mf.read("power", cfg.meteor.penalty_power);
      std::string matcher = cfg.meteor.matcher == baselines::MeteorMatcher::exact ? "exact" : "exact_plus_stem";
      mf.read("matcher", matcher);
      if (matcher == "exact") {
        cfg.meteor.matcher = baselines::MeteorMatcher::exact;
      } else if (matcher == "exact_plus_stem") {
        cfg.meteor.matcher = baselines::MeteorMatcher::exact_plus_stem;
      } else {
        throw ConfigError("baselines.meteor.matcher must be exact or exact_plus_stem");
      }
      mf.finish();
    }
    f.finish();
  }
  std::string tau = cfg.tau_variant == stats::TauVariant::b ? "b" : "a";
  top.read("tau_variant", tau);
  if (tau == "b") {
    cfg.tau_variant = stats::TauVariant::b;
  } else if (tau == "a") {
    cfg.tau_variant = stats::TauVariant::a;
  } else {
    throw ConfigError("tau_variant must be \"a\" or \"b\"");
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  interpolate_strings(doc);
  return parse_config(doc, path.parent_path());
}

}  // namespace t2ieval

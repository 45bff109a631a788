#include "t2ieval/descriptor.hpp"

#include "t2ieval/errors.hpp"

#include <cctype>
#include <charconv>
#include <stdexcept>

namespace t2ieval::descriptor {
namespace {

constexpr const char* kStage = "descriptor";

template <typename F>
auto tagged(F&& f) {
  try {
    return f();
  } catch (Error& e) {
    if (e.stage().empty()) e.set_stage(kStage);
    throw;
  }
}

bool parse_int(std::string_view text, int& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::string format_global(const GlobalDescription& g) {
  if (g.width <= 0 || g.height <= 0) throw std::invalid_argument("image dimensions must be positive");
  std::string_view caption = g.caption;
  while (!caption.empty() && (caption.back() == '.' || std::isspace(static_cast<unsigned char>(caption.back())))) {
    caption.remove_suffix(1);
  }
  while (!caption.empty() && std::isspace(static_cast<unsigned char>(caption.front()))) caption.remove_prefix(1);
  if (caption.empty()) throw std::invalid_argument("global caption is empty");
  return "Image caption: " + std::string(caption) + ". Image resolution: " + std::to_string(g.width) + "x" +
         std::to_string(g.height) + ".";
}

std::string format_region(const RegionProposal& r) {
  const auto& b = r.bbox;
  return r.object_label + ": " + r.dense_caption + ": [" + std::to_string(b.x_min) + ", " +
         std::to_string(b.y_min) + ", " + std::to_string(b.x_max) + ", " + std::to_string(b.y_max) + "]";
}

std::optional<RegionProposal> parse_region_line(std::string_view line) {
  if (line.empty() || line.back() != ']') return std::nullopt;
  const auto bracket = line.rfind(": [");
  const auto first_sep = line.find(": ");
  if (bracket == std::string_view::npos || first_sep == std::string_view::npos || first_sep >= bracket) {
    return std::nullopt;
  }
  RegionProposal r;
  r.object_label = std::string(line.substr(0, first_sep));
  r.dense_caption = std::string(line.substr(first_sep + 2, bracket - first_sep - 2));
  std::string_view coords = line.substr(bracket + 3, line.size() - bracket - 4);
  int values[4];
  for (int k = 0; k < 4; ++k) {
    const auto comma = coords.find(',');
    const std::string_view field = k < 3 ? coords.substr(0, comma) : coords;
    if ((k < 3 && comma == std::string_view::npos) || !parse_int(field, values[k])) return std::nullopt;
    if (k < 3) coords.remove_prefix(comma + 1);
  }
  r.bbox = {values[0], values[1], values[2], values[3]};
  if (r.object_label.empty() || r.dense_caption.empty()) return std::nullopt;
  return r;
}

ChatRequest compose_description_prompt(const GlobalDescription& g, const LocalDescription& l,
                                       const DescribeOptions& options) {
  std::string text = format_global(g);
  text.push_back('\n');
  if (l.regions.empty()) {
    text.append(kNoRegionsSentinel);
    text.push_back('\n');
  }
  for (const auto& region : l.regions) {
    text.append(format_region(region));
    text.push_back('\n');
  }
  text.append(kDescriptionInstruction);

  const std::size_t tokens = estimate_tokens(text);
  if (tokens > options.max_prompt_tokens) {
    throw PromptTooLong("description prompt with " + std::to_string(l.regions.size()) + " regions is ~" +
                        std::to_string(tokens) + " tokens, over the budget of " +
                        std::to_string(options.max_prompt_tokens));
  }
  ChatRequest request;
  request.user_text = std::move(text);
  request.temperature = options.temperature;
  request.max_tokens = options.max_tokens;
  request.decode_mode = options.decode_mode;
  return request;
}

ObjectCentricDescription synthesize_description(const GlobalDescription& g, const LocalDescription& l,
                                                ModelGateway& gateway, const DescribeOptions& options) {
  return tagged([&] {
    ChatRequest request = compose_description_prompt(g, l, options);
    ChatReply reply = gateway.chat(request);
    if (reply.truncated) {
      request.max_tokens *= 2;
      reply = gateway.chat(request);
    }
    ObjectCentricDescription out;
    out.text = reply.text;
    out.source_global = g;
    out.source_local = l;
    out.descriptor_model_id = gateway.endpoint(Role::chat).model_id;
    out.truncated = reply.truncated;
    if (out.truncated) gateway.warnings().add("object-centric description still truncated after re-ask");
    if (out.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw MalformedBackendReply("chat backend returned an empty description");
    }
    return out;
  });
}

ObjectCentricDescription describe_image(const ImageInput& image, ModelGateway& gateway,
                                        const DescribeOptions& options) {
  return tagged([&] {
    GlobalDescription g{gateway.caption(image), image.width, image.height};
    LocalDescription l{gateway.dense_regions(image).regions};
    return synthesize_description(g, l, gateway, options);
  });
}

}  // namespace t2ieval::descriptor

#pragma once

#include "t2ieval/gateway.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace t2ieval::descriptor {

/// Instruction appended after the global and local blocks.
inline constexpr std::string_view kDescriptionInstruction =
    "Based on the above information of the image, generate the object-centric visual description regarding the "
    "numerical counting, shape, color, size, location, materials of the object and the spatial and interaction "
    "relationships among the objects.";

inline constexpr std::string_view kNoRegionsSentinel = "No regions detected.";

/// Image-level caption plus resolution.
struct GlobalDescription {
  std::string caption;
  int width = 0;
  int height = 0;
};

struct LocalDescription {
  std::vector<RegionProposal> regions;
};

struct ObjectCentricDescription {
  std::string text;
  GlobalDescription source_global;
  LocalDescription source_local;
  std::string descriptor_model_id;
  bool truncated = false;  ///< still truncated after the enlarged re-ask
};

/// "Image caption: {caption}. Image resolution: {w}x{h}." Trailing periods
/// and whitespace on the caption are dropped so the sentence ends once.
std::string format_global(const GlobalDescription& g);

/// "{label}: {caption}: [{x0}, {y0}, {x1}, {y1}]"
std::string format_region(const RegionProposal& r);

/// Inverse of format_region. The label runs to the first ": " and the
/// caption to the last ": [", so round-tripping requires labels without ": ".
/// Confidence is not part of the line and comes back as 1.0.
std::optional<RegionProposal> parse_region_line(std::string_view line);

struct DescribeOptions {
  double temperature = 0.7;
  int max_tokens = 512;
  DecodeMode decode_mode = DecodeMode::greedy;
  std::size_t max_prompt_tokens = 8000;
};

/// Global line, one region line per region (or the empty sentinel), then
/// the description instruction, separated by newlines. Throws PromptTooLong
/// (naming the region count) when the estimate exceeds the budget.
ChatRequest compose_description_prompt(const GlobalDescription& g, const LocalDescription& l,
                                       const DescribeOptions& options = {});

/// Fuse the two descriptions through the chat backend. A truncated reply is
/// re-asked once with twice the token budget. Gateway errors propagate with
/// stage "descriptor".
ObjectCentricDescription synthesize_description(const GlobalDescription& g, const LocalDescription& l,
                                                ModelGateway& gateway, const DescribeOptions& options = {});

/// caption + dense_regions + synthesize_description for one image.
ObjectCentricDescription describe_image(const ImageInput& image, ModelGateway& gateway,
                                        const DescribeOptions& options = {});

}  // namespace t2ieval::descriptor

#pragma once

#include "t2ieval/baselines.hpp"
#include "t2ieval/evaluator.hpp"
#include "t2ieval/gateway.hpp"

#include <string_view>

namespace t2ieval::baselines {

/// Baseline score for one pair. Image sources compare the image embedding
/// with the prompt embedding (variant "CLIP", or the embed_image endpoint's
/// variant_label); caption and description sources compare their text with
/// the prompt by embedding cosine or METEOR (candidate = source text,
/// reference = prompt). `image` is required only for image sources.
evaluator::ScoreRecord sentence_match_score(std::string_view pair_id, const SimilaritySource& source,
                                            const ImageInput* image, std::string_view prompt_text,
                                            MatchMethod method, ModelGateway& gateway,
                                            const MeteorParams& params = {});

/// The variant label a (source, method) pair will be recorded under, given
/// the configured endpoints.
std::string resolved_variant(SourceKind kind, MatchMethod method, const ModelGateway& gateway);

}  // namespace t2ieval::baselines

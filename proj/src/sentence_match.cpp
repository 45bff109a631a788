#include "t2ieval/sentence_match.hpp"

#include "t2ieval/errors.hpp"

#include <stdexcept>

namespace t2ieval::baselines {

std::string resolved_variant(SourceKind kind, MatchMethod method, const ModelGateway& gateway) {
  if (kind == SourceKind::image && gateway.has_endpoint(Role::embed_image)) {
    const auto& label = gateway.endpoint(Role::embed_image).variant_label;
    if (!label.empty()) return label;
  }
  return variant_name(kind, method);
}

evaluator::ScoreRecord sentence_match_score(std::string_view pair_id, const SimilaritySource& source,
                                            const ImageInput* image, std::string_view prompt_text,
                                            MatchMethod method, ModelGateway& gateway, const MeteorParams& params) {
  evaluator::ScoreRecord record;
  record.pair_id = std::string(pair_id);
  record.mode = evaluator::ScoreMode::baseline;
  record.variant = resolved_variant(source.kind, method, gateway);

  double score = 0.0;
  try {
    if (source.kind == SourceKind::image) {
      if (image == nullptr) throw std::invalid_argument("image source needs image bytes");
      const auto image_vec = gateway.embed_image(*image);
      const auto text_vec = gateway.embed_text(prompt_text);
      score = clip_style_score(image_vec, text_vec);
    } else {
      if (!source.text || source.text->empty()) throw EmptyText(to_string(source.kind) + " text is empty");
      if (method == MatchMethod::meteor) {
        score = meteor(*source.text, prompt_text, params);
      } else {
        const auto source_vec = gateway.embed_text(*source.text);
        const auto prompt_vec = gateway.embed_text(prompt_text);
        score = clip_style_score(source_vec, prompt_vec);
      }
    }
  } catch (Error& e) {
    if (e.stage().empty()) e.set_stage("baseline:" + record.variant);
    throw;
  }
  record.raw_value = score;
  record.normalized_score = score;
  return record;
}

}  // namespace t2ieval::baselines

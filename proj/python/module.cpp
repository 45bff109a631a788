#include "t2ieval/baselines.hpp"
#include "t2ieval/cache.hpp"
#include "t2ieval/config.hpp"
#include "t2ieval/datasets.hpp"
#include "t2ieval/descriptor.hpp"
#include "t2ieval/errors.hpp"
#include "t2ieval/evaluator.hpp"
#include "t2ieval/pipeline.hpp"
#include "t2ieval/response_parser.hpp"
#include "t2ieval/scoring.hpp"
#include "t2ieval/stats.hpp"
#include "t2ieval/transport.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace t2ieval;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<long long>());
    case json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return out;
    }
    default: return py::none();
  }
}

template <typename Records>
py::list records_to_py(const Records& records) {
  py::list out;
  for (const auto& r : records) out.append(to_py(datasets::to_json(r)));
  return out;
}

py::dict pairs_to_py(const stats::PairCounts& p) {
  py::dict d;
  d["concordant"] = p.concordant;
  d["discordant"] = p.discordant;
  d["tied_x_only"] = p.tied_x_only;
  d["tied_y_only"] = p.tied_y_only;
  d["tied_both"] = p.tied_both;
  return d;
}

py::dict request_to_py(const ChatRequest& r) {
  py::dict d;
  d["system"] = r.system_text;
  d["user"] = r.user_text;
  d["temperature"] = r.temperature;
  d["max_tokens"] = r.max_tokens;
  d["decode_mode"] = to_string(r.decode_mode);
  return d;
}

py::dict summary_to_py(const pipeline::StageSummary& s) {
  py::dict d;
  d["total"] = s.total;
  d["processed"] = s.processed;
  d["skipped"] = s.skipped;
  d["warnings"] = s.warnings;
  py::list failures;
  for (const auto& f : s.failures) {
    py::dict fd;
    fd["pair_id"] = f.pair_id;
    fd["stage"] = f.stage;
    fd["kind"] = f.kind;
    fd["message"] = f.message;
    failures.append(fd);
  }
  d["failures"] = failures;
  return d;
}

descriptor::ObjectCentricDescription description_of(const std::string& text) {
  descriptor::ObjectCentricDescription d;
  d.text = text;
  return d;
}

evaluator::Objective objective_of(const std::string& kind, const std::string& instruction) {
  switch (evaluator::parse_objective_kind(kind)) {
    case evaluator::ObjectiveKind::overall: return evaluator::Objective::overall();
    case evaluator::ObjectiveKind::error_counting: return evaluator::Objective::error_counting();
    case evaluator::ObjectiveKind::custom: break;
  }
  return evaluator::Objective::custom(instruction);
}

stats::TauVariant tau_variant(const std::string& v) {
  if (v == "b") return stats::TauVariant::b;
  if (v == "a") return stats::TauVariant::a;
  throw std::invalid_argument("tau variant must be 'a' or 'b'");
}

pipeline::StageSummary run_stage(const std::string& stage, const std::filesystem::path& config_path,
                                 const std::optional<std::filesystem::path>& out,
                                 const std::filesystem::path& prompts, const std::filesystem::path& manifest,
                                 const std::filesystem::path& ratings) {
  RunConfig cfg = load_config(config_path);
  if (out) cfg.output_dir = *out;
  cfg.validate();
  const std::vector<std::filesystem::path> scores = {cfg.output_dir / "scores.jsonl",
                                                     cfg.output_dir / "baseline_scores.jsonl"};
  auto existing = [&] {
    std::vector<std::filesystem::path> found;
    for (const auto& p : scores) {
      if (std::filesystem::exists(p)) found.push_back(p);
    }
    return found;
  };
  if (stage == "correlate") return pipeline::run_correlate(cfg, existing(), prompts, manifest, ratings);
  if (stage == "report") return pipeline::run_report(cfg, existing(), prompts, manifest);
  auto gateway = pipeline::make_gateway(cfg, std::make_shared<HttpTransport>());
  if (stage == "describe") return pipeline::run_describe(cfg, *gateway, manifest);
  if (stage == "score") return pipeline::run_score(cfg, *gateway, prompts, manifest);
  if (stage == "baseline") return pipeline::run_baseline(cfg, *gateway, prompts, manifest);
  throw ConfigError("unknown stage '" + stage + "'");
}

}  // namespace

PYBIND11_MODULE(_t2ieval, m) {
  m.doc() = "Core of the t2ieval text-to-image alignment evaluator";

  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
#define T2IEVAL_PY_ERROR(Name) py::register_exception<Name>(m, #Name, base.ptr());
  T2IEVAL_PY_ERROR(BackendUnavailable)
  T2IEVAL_PY_ERROR(MalformedBackendReply)
  T2IEVAL_PY_ERROR(BackendContractViolation)
  T2IEVAL_PY_ERROR(PromptTooLong)
  T2IEVAL_PY_ERROR(ReplayMiss)
  T2IEVAL_PY_ERROR(ImageDecodeError)
  T2IEVAL_PY_ERROR(ConfigError)
  T2IEVAL_PY_ERROR(DegenerateEmbedding)
  T2IEVAL_PY_ERROR(EmptyText)
  T2IEVAL_PY_ERROR(InvalidRange)
  T2IEVAL_PY_ERROR(DegenerateSeries)
  T2IEVAL_PY_ERROR(InsufficientOverlap)
  T2IEVAL_PY_ERROR(DuplicateKey)
  T2IEVAL_PY_ERROR(IntegrityError)
  T2IEVAL_PY_ERROR(InsufficientRecords)
  T2IEVAL_PY_ERROR(ParseFailure)
  T2IEVAL_PY_ERROR(ValidationError)
#undef T2IEVAL_PY_ERROR

  // scoring
  m.def(
      "rule_enhanced_score",
      [](int x1, int x2, int y1, int y2) { return rule_enhanced_score(clamp_counts({x1, x2, y1, y2})); },
      py::arg("x1"), py::arg("x2"), py::arg("y1"), py::arg("y2"),
      "(x2/x1)/2 + (y2/y1)/2 after clamping x2 <= x1 and y2 <= y1.");
  m.def(
      "scale_rating",
      [](long long rating, int n) {
        const auto s = scale_rating(rating, n);
        return py::make_tuple(s.rating, s.normalized);
      },
      py::arg("rating"), py::arg("n") = 100, "Clamped rating and rating/n.");
  m.def("error_quality", &error_quality, py::arg("error_count"), "1 - min(e, 9)/9.");

  // stats
  m.def(
      "kendall_tau",
      [](const std::vector<double>& x, const std::vector<double>& y, const std::string& variant) {
        const auto r = tau_variant(variant) == stats::TauVariant::b ? stats::kendall_tau_b(x, y)
                                                                     : stats::kendall_tau_a(x, y);
        py::dict d;
        d["tau"] = r.tau;
        d["p_value"] = r.p_value;
        d["pairs"] = pairs_to_py(r.pairs);
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("variant") = "b");
  m.def(
      "spearman_rho",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = stats::spearman_rho(x, y);
        py::dict d;
        d["rho"] = r.rho;
        d["p_value"] = r.p_value;
        return d;
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "krippendorff_alpha",
      [](const stats::RatingMatrix& ratings, const std::string& level) {
        const auto r = stats::krippendorff_alpha(
            ratings, level == "ordinal" ? stats::AgreementLevel::ordinal : stats::AgreementLevel::interval);
        py::dict d;
        d["alpha"] = r.alpha;
        d["n_items"] = r.n_items;
        d["n_raters"] = r.n_raters;
        d["n_pairable"] = r.n_pairable;
        d["level"] = stats::to_string(r.level);
        return d;
      },
      py::arg("ratings"), py::arg("level") = "interval", "ratings[rater][item]; None marks a missing cell.");

  // baselines
  m.def(
      "clip_style_score",
      [](const std::vector<double>& a, const std::vector<double>& b) { return baselines::clip_style_score(a, b); },
      py::arg("a"), py::arg("b"), "max(cos(a, b), 0).");
  m.def(
      "meteor",
      [](const std::string& candidate, const std::string& reference, double gamma, double power, bool stem) {
        baselines::MeteorParams p;
        p.penalty_gamma = gamma;
        p.penalty_power = power;
        p.matcher = stem ? baselines::MeteorMatcher::exact_plus_stem : baselines::MeteorMatcher::exact;
        return baselines::meteor(candidate, reference, p);
      },
      py::arg("candidate"), py::arg("reference"), py::arg("gamma") = 0.5, py::arg("power") = 3.0,
      py::arg("stem") = false);
  m.def("meteor_tokenize", &baselines::meteor_tokenize, py::arg("text"));
  m.def("porter_stem", &baselines::porter_stem, py::arg("word"));

  // response parsing
  m.def(
      "parse_tagged", [](const std::string& reply) { return parse_tagged(reply).fields; }, py::arg("reply"));
  m.def(
      "render_tagged",
      [](const std::map<std::string, std::string>& fields) { return render_tagged(TaggedReply{fields}); },
      py::arg("fields"));
  m.def(
      "extract_rating",
      [](const std::string& reply, const std::string& tag, long long lo, long long hi) {
        return extract_rating(reply, tag, lo, hi);
      },
      py::arg("reply"), py::arg("tag"), py::arg("lo"), py::arg("hi"));
  m.def(
      "parse_atomic",
      [](const std::string& reply) -> std::optional<std::tuple<int, int, int, int>> {
        const auto c = parse_atomic(reply);
        if (!c) return std::nullopt;
        return std::make_tuple(c->x1, c->x2, c->y1, c->y2);
      },
      py::arg("reply"), "(X1, X2, Y1, Y2) or None.");

  // prompts
  m.def(
      "description_prompt",
      [](const std::string& caption, int width, int height, const std::vector<py::dict>& regions) {
        descriptor::LocalDescription local;
        for (const auto& r : regions) {
          RegionProposal p;
          p.object_label = r["label"].cast<std::string>();
          p.dense_caption = r["caption"].cast<std::string>();
          const auto b = r["bbox"].cast<std::array<int, 4>>();
          p.bbox = {b[0], b[1], b[2], b[3]};
          if (r.contains("confidence")) p.confidence = r["confidence"].cast<double>();
          local.regions.push_back(p);
        }
        return request_to_py(descriptor::compose_description_prompt({caption, width, height}, local));
      },
      py::arg("caption"), py::arg("width"), py::arg("height"), py::arg("regions") = std::vector<py::dict>{});
  m.def(
      "eval_prompt",
      [](const std::string& prompt, const std::string& description, const std::string& objective, int n,
         const std::string& instruction) {
        return request_to_py(evaluator::build_eval_prompt(prompt, description_of(description),
                                                          objective_of(objective, instruction),
                                                          evaluator::RatingScale(n)));
      },
      py::arg("prompt"), py::arg("description"), py::arg("objective") = "overall", py::arg("n") = 100,
      py::arg("instruction") = "");
  m.def(
      "atomic_prompt",
      [](const std::string& prompt, const std::string& description) {
        return request_to_py(evaluator::build_atomic_prompt(prompt, description_of(description)));
      },
      py::arg("prompt"), py::arg("description"));

  // datasets
  m.def(
      "load_prompts", [](const std::filesystem::path& p) { return records_to_py(datasets::load_prompts(p)); },
      py::arg("path"));
  m.def(
      "load_manifest",
      [](const std::filesystem::path& p, bool check_images) {
        return records_to_py(datasets::load_manifest(p, check_images));
      },
      py::arg("path"), py::arg("check_images") = true);
  m.def(
      "load_ratings", [](const std::filesystem::path& p) { return records_to_py(datasets::load_ratings(p)); },
      py::arg("path"));
  m.def(
      "sample_prompts",
      [](const std::filesystem::path& p, std::size_t k, std::uint64_t seed) {
        return records_to_py(datasets::sample_prompts(datasets::load_prompts(p), k, seed));
      },
      py::arg("path"), py::arg("k"), py::arg("seed") = 0);

  // cache and pipeline
  m.def(
      "cache_key",
      [](const std::string& role, const std::string& model_id, const std::string& canonical_request) {
        return ResponseCache::make_key(role, model_id, json::parse(canonical_request));
      },
      py::arg("role"), py::arg("model_id"), py::arg("canonical_request"));
  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& config, const std::optional<std::filesystem::path>& out,
         const std::filesystem::path& prompts, const std::filesystem::path& manifest,
         const std::filesystem::path& ratings) {
        pipeline::StageSummary s;
        {
          py::gil_scoped_release release;
          s = run_stage(stage, config, out, prompts, manifest, ratings);
        }
        return summary_to_py(s);
      },
      py::arg("stage"), py::arg("config"), py::arg("out") = py::none(), py::arg("prompts") = "",
      py::arg("manifest") = "", py::arg("ratings") = "",
      "Run describe, score, baseline, correlate or report and return the stage summary.");
}

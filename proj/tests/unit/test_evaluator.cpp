#include "fakes.hpp"
#include "fixture_backend.hpp"

#include "t2ieval/errors.hpp"
#include "t2ieval/evaluator.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <fstream>

using namespace t2ieval;
using namespace t2ieval::evaluator;
using namespace t2ieval::testing;
using nlohmann::json;

namespace {

descriptor::ObjectCentricDescription describe(std::string text) {
  descriptor::ObjectCentricDescription d;
  d.text = std::move(text);
  d.source_global = {"a caption", 512, 512};
  d.descriptor_model_id = "m-chat";
  return d;
}

const auto kDesc = describe("One red book lies on a table next to one yellow vase.");
constexpr std::string_view kPrompt = "A red book and a yellow vase";

std::vector<BackendEndpoint> endpoints() {
  std::vector<BackendEndpoint> eps;
  for (Role r : kAllRoles) {
    BackendEndpoint ep;
    ep.role = r;
    ep.base_url = "http://backend.test";
    ep.model_id = "m-" + to_string(r);
    ep.max_retries = 0;
    ep.requests_per_minute = 6000;
    eps.push_back(ep);
  }
  return eps;
}

std::string chat_body(const std::string& content) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}}}}}
      .dump();
}

struct Scripted {
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  ModelGateway gw{endpoints(), transport};

  Scripted& reply(const std::string& content) {
    transport->push_ok(chat_body(content));
    return *this;
  }
  std::string user(std::size_t call) const {
    const auto body = json::parse(transport->calls().at(call).body);
    return body.at("messages").back().at("content");
  }
};

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

TEST_CASE("objective instructions") {
  CHECK(Objective::overall().instruction_text ==
        "Rate the overall quality of the image in terms of matching the text prompt.");
  CHECK(Objective::error_counting().instruction_text ==
        "Provide the number of compositional errors in the image compared to the text prompt.");
  CHECK(Objective::custom("Rate the colours.").kind == ObjectiveKind::custom);
  CHECK_THROWS_AS(Objective::custom("  "), std::invalid_argument);
  CHECK_THROWS_AS(RatingScale(1), std::invalid_argument);
  CHECK(parse_objective_kind(to_string(ObjectiveKind::error_counting)) == ObjectiveKind::error_counting);
  CHECK(parse_score_mode("rule_enhanced") == ScoreMode::rule_enhanced);
}

TEST_CASE("overall prompt layout") {
  const auto req = build_eval_prompt(kPrompt, kDesc, Objective::overall(), RatingScale(100));
  const std::string& u = req.user_text;
  CHECK(ends_with(u, "Rate the overall quality of the image in terms of matching the text prompt on a scale of "
                     "1-100 (integer only)."));
  const auto p = u.find("Text prompt: A red book and a yellow vase");
  const auto d = u.find(kDesc.text);
  const auto g = u.find("counting, shape, color or size");
  const auto i = u.find("Rate the overall quality");
  REQUIRE(p != std::string::npos);
  REQUIRE(d != std::string::npos);
  REQUIRE(g != std::string::npos);
  CHECK(p < d);
  CHECK(d < g);
  CHECK(g < i);
  CHECK(req.system_text.find("SCORE") != std::string::npos);
  CHECK(req.temperature == 0.7);
  CHECK(req.decode_mode == DecodeMode::greedy);
  CHECK(build_eval_prompt(kPrompt, kDesc, Objective::overall(), RatingScale(100)) == req);
  CHECK(ends_with(build_eval_prompt(kPrompt, kDesc, Objective::overall(), RatingScale(10)).user_text,
                  "on a scale of 1-10 (integer only)."));
}

TEST_CASE("error counting prompt layout") {
  const auto req = build_eval_prompt(kPrompt, kDesc, Objective::error_counting(), RatingScale(100));
  CHECK(ends_with(req.user_text,
                  "Provide the number of compositional errors in the image compared to the text prompt."));
  CHECK(req.user_text.find("on a scale of") == std::string::npos);
  for (const char* t : {"counting", "color", "shape", "size", "material", "spatial position", "missing", "irrelevant"}) {
    CHECK(req.user_text.find(t) != std::string::npos);
  }
  CHECK(req.system_text.find("ERRORS") != std::string::npos);
}

TEST_CASE("custom objective prompt") {
  const auto req = build_eval_prompt(kPrompt, kDesc, Objective::custom("Rate how well the colours match."),
                                     RatingScale(5));
  CHECK(ends_with(req.user_text, "Rate how well the colours match on a scale of 1-5 (integer only)."));
}

TEST_CASE("prompt budget") {
  EvalOptions o;
  o.max_prompt_tokens = 30;
  CHECK_THROWS_AS(build_eval_prompt(kPrompt, kDesc, Objective::overall(), RatingScale(100), o), PromptTooLong);
}

TEST_CASE("rationale prompts") {
  const auto scoring = build_eval_prompt(kPrompt, kDesc, Objective::overall(), RatingScale(100));
  const auto r = build_rationale_prompt(scoring, Objective::overall(), 87);
  CHECK(ends_with(r.user_text, "Explain the overall rating 87 within one paragraph."));
  CHECK(r.user_text.rfind(scoring.user_text, 0) == 0);
  CHECK(r.system_text.empty());
  const auto e = build_rationale_prompt(scoring, Objective::error_counting(), 3);
  CHECK(e.user_text.find("Explain the error counting within one paragraph.") != std::string::npos);
}

TEST_CASE("instruction following rating") {
  Scripted s;
  s.reply("SCORE: 87");
  const auto r = instruction_following_rate("p1", kPrompt, kDesc, Objective::overall(), RatingScale(100), s.gw);
  CHECK(r.raw_value == 87);
  CHECK(r.normalized_score == 0.87);
  CHECK(r.mode == ScoreMode::instruction_following);
  CHECK(r.objective == ObjectiveKind::overall);
  CHECK(r.rationale.empty());

  s.reply("I would rate it 1 out of 100.");
  CHECK(instruction_following_rate("p1", kPrompt, kDesc, Objective::overall(), RatingScale(100), s.gw)
            .normalized_score == 0.01);

  Warnings w;
  s.reply("SCORE: 250");
  const auto clamped =
      instruction_following_rate("p1", kPrompt, kDesc, Objective::overall(), RatingScale(100), s.gw, {}, &w);
  CHECK(clamped.raw_value == 100);
  CHECK(clamped.normalized_score == 1.0);
  CHECK(w.size() == 1);

  CHECK_THROWS_AS(
      instruction_following_rate("p1", kPrompt, kDesc, Objective::error_counting(), RatingScale(100), s.gw),
      std::invalid_argument);
}

TEST_CASE("one repair re-ask, then failure with both replies") {
  Scripted ok;
  ok.reply("I cannot say.").reply("SCORE: 40");
  CHECK(instruction_following_rate("p", kPrompt, kDesc, Objective::overall(), RatingScale(100), ok.gw).raw_value ==
        40);
  CHECK(ok.user(1).find("Your previous reply was:\nI cannot say.") != std::string::npos);
  CHECK(ends_with(ok.user(1), "That reply could not be read. Reply with one line of the form \"SCORE: <integer>\"."));

  Scripted bad;
  bad.reply("no idea").reply("still no idea").reply("SCORE: 3");
  try {
    instruction_following_rate("p", kPrompt, kDesc, Objective::overall(), RatingScale(100), bad.gw);
    FAIL("expected RatingParseFailure");
  } catch (const RatingParseFailure& e) {
    CHECK(e.replies() == std::vector<std::string>{"no idea", "still no idea"});
    CHECK(e.stage() == "evaluator");
  }
  CHECK(bad.transport->remaining() == 1);
}

TEST_CASE("atomic counts") {
  Scripted s;
  s.reply("X1: 2\nX2: 2\nY1: 2\nY2: 2");
  CHECK(extract_atomic_counts(kPrompt, kDesc, s.gw) == AtomicCounts{2, 2, 2, 2});
  Warnings w;
  s.reply("X1: 2\nX2: 3\nY1: 1\nY2: 1");
  CHECK(extract_atomic_counts(kPrompt, kDesc, s.gw, {}, &w) == AtomicCounts{2, 2, 1, 1});
  CHECK(w.size() == 1);
  s.reply("X1: 2").reply("X1: 2\nX2: 1");
  CHECK_THROWS_AS(extract_atomic_counts(kPrompt, kDesc, s.gw), AtomicParseFailure);
  const auto atomic = build_atomic_prompt(kPrompt, kDesc);
  for (const char* t : {"X1", "X2", "Y1", "Y2"}) CHECK(atomic.system_text.find(t) != std::string::npos);
}

TEST_CASE("rule enhanced record") {
  Scripted s;
  s.reply("X1: 2\nX2: 2\nY1: 4\nY2: 3");
  const auto r = rule_enhanced_rate("p", kPrompt, kDesc, Objective::overall(), s.gw);
  CHECK(r.mode == ScoreMode::rule_enhanced);
  CHECK(r.normalized_score == 0.875);
  CHECK(r.raw_value == 0.875);
  REQUIRE(r.atomic_counts.has_value());
  CHECK(*r.atomic_counts == AtomicCounts{2, 2, 4, 3});
  CHECK(rationale_value(r, RatingScale(100)) == 88);
}

TEST_CASE("error count record") {
  Scripted s;
  s.reply("ERRORS: 0").reply("ERRORS: 9").reply("There are 3 errors.").reply("ERRORS: 14").reply("ERRORS: -2");
  CHECK(error_count_rate("p", kPrompt, kDesc, s.gw).normalized_score == 1.0);
  CHECK(error_count_rate("p", kPrompt, kDesc, s.gw).normalized_score == 0.0);
  const auto three = error_count_rate("p", kPrompt, kDesc, s.gw);
  CHECK(three.raw_value == 3);
  CHECK(three.normalized_score == doctest::Approx(1.0 - 3.0 / 9.0).epsilon(1e-12));
  CHECK(three.objective == ObjectiveKind::error_counting);
  const auto many = error_count_rate("p", kPrompt, kDesc, s.gw);
  CHECK(many.raw_value == 14);
  CHECK(many.normalized_score == 0.0);
  Warnings w;
  CHECK(error_count_rate("p", kPrompt, kDesc, s.gw, {}, &w).raw_value == 0);
  CHECK(w.size() == 1);
}

TEST_CASE("rationale generation") {
  Scripted s;
  s.reply("The book and vase are right.\n\nColours match.");
  const auto text = generate_rationale(87, Objective::overall(), kPrompt, kDesc, RatingScale(100), s.gw);
  CHECK(text == "The book and vase are right. Colours match.");
  CHECK(ends_with(s.user(0), "Explain the overall rating 87 within one paragraph."));

  Scripted down;
  down.transport->push_failure("refused");
  Warnings w;
  CHECK(generate_rationale(3, Objective::error_counting(), kPrompt, kDesc, RatingScale(100), down.gw, {}, &w)
            .empty());
  CHECK(w.size() == 1);
}

TEST_CASE("hand-annotated atomic counts agree with the fixture judge") {
  FixtureBackend backend(T2IEVAL_FIXTURES "/e2e/world.json");
  auto shared = std::shared_ptr<Transport>(&backend, [](Transport*) {});
  ModelGateway fixture_gw(endpoints(), shared);

  std::ifstream in(T2IEVAL_FIXTURES "/atomic_annotations.jsonl");
  std::string line;
  int checked = 0;
  while (std::getline(in, line)) {
    const auto a = json::parse(line);
    const auto want = a.at("counts").get<std::vector<int>>();
    const AtomicCounts expected{want[0], want[1], want[2], want[3]};
    const auto desc = describe(a.at("description"));
    const std::string id = a.at("pair_id");
    CAPTURE(id);
    if (id.rfind("x_", 0) == 0) {
      // Not in the fixture world: a judge that answers with the annotation.
      Scripted s;
      s.reply("X1: " + std::to_string(want[0]) + "\nX2: " + std::to_string(want[1]) + "\nY1: " +
              std::to_string(want[2]) + "\nY2: " + std::to_string(want[3]));
      CHECK(extract_atomic_counts(a.at("prompt").get<std::string>(), desc, s.gw) == expected);
    } else {
      CHECK(extract_atomic_counts(a.at("prompt").get<std::string>(), desc, fixture_gw) == expected);
    }
    ++checked;
  }
  CHECK(checked == 10);
}

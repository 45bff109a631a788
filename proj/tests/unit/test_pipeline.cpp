#include "e2e.hpp"
#include "oracles.hpp"

#include "t2ieval/errors.hpp"
#include "t2ieval/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <random>
#include <set>

using namespace t2ieval;
using namespace t2ieval::pipeline;
using evaluator::ObjectiveKind;
using evaluator::ScoreMode;
using evaluator::ScoreRecord;

namespace {

datasets::JoinedPair pair_of(const std::string& id, datasets::Dataset ds, const std::string& gen, double overall,
                             double errq) {
  datasets::JoinedPair p;
  p.pair_id = id;
  p.prompt_id = id;
  p.dataset = ds;
  p.bench = datasets::bench_of(ds);
  p.generator = gen;
  p.human_overall = overall;
  p.human_error_quality = errq;
  p.n_annotators = 1;
  return p;
}

ScoreRecord if_overall(const std::string& id, double v) {
  ScoreRecord r;
  r.pair_id = id;
  r.objective = ObjectiveKind::overall;
  r.mode = ScoreMode::instruction_following;
  r.raw_value = v * 100;
  r.normalized_score = v;
  return r;
}

ScoreRecord baseline(const std::string& id, const std::string& variant, double v) {
  ScoreRecord r;
  r.pair_id = id;
  r.mode = ScoreMode::baseline;
  r.variant = variant;
  r.raw_value = v;
  r.normalized_score = v;
  return r;
}

const ReportRow& find_row(const std::vector<ReportRow>& rows, const std::string& dataset, const std::string& objective,
                          const std::string& metric) {
  for (const auto& r : rows) {
    if (r.dataset == dataset && r.objective == objective && r.metric == metric) return r;
  }
  FAIL("row not found: " << dataset << "/" << objective << "/" << metric);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("perfect and reversed rankings correlate at exactly +1 and -1") {
  std::vector<datasets::JoinedPair> pairs;
  std::vector<ScoreRecord> scores;
  for (int i = 0; i < 6; ++i) {
    const std::string id = "p" + std::to_string(i);
    pairs.push_back(pair_of(id, datasets::Dataset::drawbench, "sd2", i / 10.0, i / 10.0));
    scores.push_back(if_overall(id, 0.1 + i * 0.1));
    scores.push_back(baseline(id, "CLIP", 1.0 - i * 0.1));
  }
  const auto rows = correlation_rows(pairs, scores);
  const auto& up = find_row(rows, "drawbench", "overall", "LLM-IF");
  REQUIRE(up.result);
  CHECK(up.result->tau == 1.0);
  CHECK(up.result->rho == 1.0);
  CHECK(up.n == 6);
  const auto& down = find_row(rows, "drawbench", "overall", "CLIP");
  REQUIRE(down.result);
  CHECK(down.result->tau == -1.0);
  CHECK(down.result->rho == -1.0);

  // Baselines are correlated against both human objectives.
  CHECK(find_row(rows, "drawbench", "error_counting", "CLIP").result);

  const std::string csv = render_csv(rows);
  CHECK(csv.rfind("dataset,model,objective,metric,tau,rho,p_tau,p_rho,n,dropped\n", 0) == 0);
  CHECK(csv.find("drawbench,sd2,overall,LLM-IF,1.000000,1.000000,") != std::string::npos);
  CHECK(csv.find("drawbench,sd2,overall,CLIP,-1.000000,-1.000000,") != std::string::npos);
}

TEST_CASE("cells with ties match the oracle definitions") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> level(1, 4);
  std::vector<datasets::JoinedPair> pairs;
  std::vector<ScoreRecord> scores;
  std::vector<double> metric, human;
  for (int i = 0; i < 9; ++i) {
    const std::string id = "q" + std::to_string(i);
    const double h = level(rng) / 4.0;
    const double m = level(rng) / 4.0;
    pairs.push_back(pair_of(id, datasets::Dataset::paintskills, "dalle2", h, 0.5));
    scores.push_back(if_overall(id, m));
    metric.push_back(m);
    human.push_back(h);
  }
  const auto rows = correlation_rows(pairs, scores);
  const auto& row = find_row(rows, "paintskills", "overall", "LLM-IF");
  REQUIRE(row.result);
  CHECK(row.result->tau == doctest::Approx(oracle::tau_b(metric, human)).epsilon(1e-12));
  CHECK(row.result->rho == doctest::Approx(oracle::spearman(metric, human)).epsilon(1e-12));
}

TEST_CASE("degenerate cells are n/a and aggregates skip them") {
  std::vector<datasets::JoinedPair> pairs;
  std::vector<ScoreRecord> scores;
  for (int i = 0; i < 4; ++i) {
    const std::string a = "a" + std::to_string(i);
    const std::string b = "b" + std::to_string(i);
    pairs.push_back(pair_of(a, datasets::Dataset::coco2014, "sd2", i / 4.0, 0.5));
    pairs.push_back(pair_of(b, datasets::Dataset::drawbench, "sd2", i / 4.0, 0.5));
    scores.push_back(if_overall(a, 0.5));  // constant metric
    scores.push_back(if_overall(b, i / 4.0));  // perfect
    for (const auto& id : {a, b}) {
      ScoreRecord e = if_overall(id, i / 9.0);
      e.objective = ObjectiveKind::error_counting;
      scores.push_back(e);
    }
  }
  const auto rows = correlation_rows(pairs, scores);
  const auto& flat = find_row(rows, "coco2014", "overall", "LLM-IF");
  CHECK_FALSE(flat.result);
  CHECK_FALSE(flat.note.empty());
  // Human error quality is constant too.
  CHECK_FALSE(find_row(rows, "drawbench", "error_counting", "LLM-IF").result);

  const auto& agg = find_row(rows, "GeneralBench", "overall", "LLM-IF");
  CHECK(agg.aggregate);
  REQUIRE(agg.result);
  CHECK(agg.result->tau == 1.0);
  CHECK(agg.n == 8);
  const auto& none = find_row(rows, "GeneralBench", "error_counting", "LLM-IF");
  CHECK_FALSE(none.result);
  CHECK(none.note == "no cell with a defined correlation");

  const std::string csv = render_csv(rows);
  CHECK(csv.find("coco2014,sd2,overall,LLM-IF,n/a,n/a,n/a,n/a,4,0\n") != std::string::npos);
}

TEST_CASE("unrated pairs and custom-objective records are left out") {
  std::vector<datasets::JoinedPair> pairs;
  std::vector<ScoreRecord> scores;
  for (int i = 0; i < 4; ++i) {
    const std::string id = "c" + std::to_string(i);
    auto p = pair_of(id, datasets::Dataset::attribute_binding, "sd2", i / 4.0, i / 4.0);
    if (i == 3) {
      p.human_overall.reset();
      p.human_error_quality.reset();
    }
    pairs.push_back(p);
    scores.push_back(if_overall(id, i / 4.0));
    ScoreRecord custom = if_overall(id, 0.3);
    custom.objective = ObjectiveKind::custom;
    scores.push_back(custom);
  }
  const auto rows = correlation_rows(pairs, scores);
  const auto& row = find_row(rows, "attribute_binding", "overall", "LLM-IF");
  CHECK(row.n == 3);
  CHECK(row.dropped == 1);
  for (const auto& r : rows) CHECK(r.objective != "custom");
}

TEST_CASE("metric labels") {
  ScoreRecord r = if_overall("x", 0.5);
  CHECK(metric_label(r) == "LLM-IF");
  r.mode = ScoreMode::rule_enhanced;
  CHECK(metric_label(r) == "LLM-RE");
  CHECK(metric_label(baseline("x", "DescMETEOR", 0.1)) == "DescMETEOR");
}

TEST_CASE("fixed never prints negative zero") {
  CHECK(fixed(-0.0, 4) == "0.0000");
  CHECK(fixed(-0.00001, 4) == "0.0000");
  CHECK(fixed(-0.5, 2) == "-0.50");
  CHECK(fixed(1.0, 6) == "1.000000");
}

TEST_CASE("html escaping") {
  CHECK(html_escape("<b>\"Tom\" & 'Jerry'</b>") == "&lt;b&gt;&quot;Tom&quot; &amp; &#39;Jerry&#39;&lt;/b&gt;");
  CHECK(html_escape("plain") == "plain");
}

TEST_CASE("showcase lists each scored pair once in manifest order") {
  std::vector<datasets::ImageManifestRecord> manifest(3);
  manifest[0].pair_id = "m2";
  manifest[0].prompt_id = "pr";
  manifest[0].generator = "sd2";
  manifest[1].pair_id = "m1";
  manifest[1].prompt_id = "pr";
  manifest[1].generator = "dalle2";
  manifest[2].pair_id = "unscored";
  manifest[2].prompt_id = "pr";
  std::vector<datasets::PromptRecord> prompts(1);
  prompts[0].prompt_id = "pr";
  prompts[0].text = "A <red> book";
  prompts[0].dataset = datasets::Dataset::custom;

  std::vector<ScoreRecord> scores = {if_overall("m1", 0.4), baseline("m1", "CLIP", 0.2), if_overall("m2", 0.9),
                                     if_overall("zz", 0.1)};
  const auto items = showcase_items(scores, {}, prompts, manifest);
  REQUIRE(items.size() == 3);
  CHECK(items[0].pair_id == "m2");
  CHECK(items[1].pair_id == "m1");
  CHECK(items[1].records.size() == 2);
  CHECK(items[2].pair_id == "zz");
  CHECK(items[2].generator.empty());

  const std::string html = render_showcase(items);
  for (const char* id : {"m1", "m2", "zz"}) {
    const std::string h2 = std::string("<h2>") + id + "</h2>";
    const auto first = html.find(h2);
    CHECK(first != std::string::npos);
    CHECK(html.find(h2, first + 1) == std::string::npos);
  }
  CHECK(html.find("unscored") == std::string::npos);
  CHECK(html.find("A &lt;red&gt; book") != std::string::npos);
  CHECK(html == render_showcase(showcase_items(scores, {}, prompts, manifest)));

  const std::string empty = render_showcase({});
  CHECK(empty.find("No scored pairs.") != std::string::npos);
  CHECK(empty.find("</html>") != std::string::npos);
}

TEST_CASE("read_scores rejects a repeated key across files") {
  testing::TempDir dir;
  const auto a = dir / "a.jsonl";
  const auto b = dir / "b.jsonl";
  write_file(a, to_json(if_overall("p", 0.5)).dump() + "\n");
  write_file(b, to_json(if_overall("p", 0.6)).dump() + "\n");
  CHECK(read_scores({a}).size() == 1);
  CHECK_THROWS_AS(read_scores({a, b}), DuplicateKey);
}

TEST_CASE("score records round-trip through JSON") {
  ScoreRecord r = if_overall("p", 0.75);
  r.mode = ScoreMode::rule_enhanced;
  r.atomic_counts = AtomicCounts{2, 1, 4, 3};
  r.rationale = "one of two objects";
  const auto back = score_from_json(to_json(r));
  CHECK(back.pair_id == r.pair_id);
  CHECK(back.mode == r.mode);
  CHECK(back.normalized_score == r.normalized_score);
  REQUIRE(back.atomic_counts);
  CHECK(back.atomic_counts->y2 == 3);
  CHECK(back.rationale == r.rationale);
}

TEST_CASE("parallel_for visits every index once and honours stop") {
  for (int threads : {1, 3, 8}) {
    std::mutex m;
    std::multiset<std::size_t> seen;
    parallel_for(100, threads, [&](std::size_t i) {
      std::lock_guard lock(m);
      seen.insert(i);
    });
    CHECK(seen.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) CHECK(seen.count(i) == 1);
  }
  std::atomic<int> done{0};
  parallel_for(
      1000, 1, [&](std::size_t) { ++done; }, [&] { return done.load() >= 10; });
  CHECK(done.load() == 10);
  parallel_for(0, 4, [&](std::size_t) { FAIL("called"); });
}

TEST_CASE("describe resumes from existing output without network") {
  testing::E2eWorkspace ws;
  RunConfig cfg = ws.config("out");
  auto replay = std::make_shared<testing::RefusingTransport>();
  {
    auto gw = make_gateway(cfg, replay);
    const auto first = run_describe(cfg, *gw, ws.manifest());
    CHECK(first.ok());
    CHECK(first.processed == 8);
  }
  const std::string before = testing::slurp(cfg.output_dir / "descriptions.jsonl");

  cfg.cache_mode = CacheMode::off;
  auto offline = std::make_shared<testing::RefusingTransport>();
  auto gw = make_gateway(cfg, offline);
  const auto second = run_describe(cfg, *gw, ws.manifest());
  CHECK(second.ok());
  CHECK(second.skipped == 8);
  CHECK(offline->calls() == 0);
  CHECK(testing::slurp(cfg.output_dir / "descriptions.jsonl") == before);
  CHECK(replay->calls() == 0);
}

TEST_CASE("a replay miss aborts the stage and keeps completed output") {
  testing::E2eWorkspace ws;
  RunConfig cfg = ws.config("out");
  cfg.cache_dir = ws.dir / "empty-cache";
  auto transport = std::make_shared<testing::RefusingTransport>();
  auto gw = make_gateway(cfg, transport);
  CHECK_THROWS_AS(run_describe(cfg, *gw, ws.manifest()), ReplayMiss);
  CHECK(transport->calls() == 0);
}

#include "oracles.hpp"

#include "t2ieval/errors.hpp"
#include "t2ieval/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace t2ieval;
using V = std::vector<double>;

namespace {

V random_ints(std::mt19937_64& rng, std::size_t n, int hi) {
  V v(n);
  for (auto& x : v) x = double(rng() % std::uint64_t(hi + 1));
  return v;
}

bool constant(const V& v) { return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; }); }

// Strictly increasing map built from random positive steps over the distinct values.
V monotone_map(const V& v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> step(0.01, 5.0);
  std::map<double, double> image;
  double acc = std::uniform_real_distribution<double>(-50, 50)(rng);
  for (double x : std::set<double>(v.begin(), v.end())) {
    acc += step(rng);
    image[x] = std::exp(acc / 20.0) - 3.0;
  }
  V out;
  for (double x : v) out.push_back(image[x]);
  return out;
}

}  // namespace

TEST_CASE("normalize") {
  CHECK(stats::normalize(V{1, 10}, 1, 10) == V{0.0, 1.0});
  CHECK(stats::normalize(V{5.5}, 1, 10) == V{0.5});
  Warnings w;
  CHECK(stats::normalize(V{12}, 1, 10, &w) == V{1.0});
  CHECK(w.size() == 1);
  CHECK_THROWS_AS(stats::normalize(V{1}, 3, 3), InvalidRange);
  CHECK_THROWS_AS(stats::normalize(V{1}, 4, 3), InvalidRange);
}

TEST_CASE("normalize preserves ranks") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const V v = random_ints(rng, 9, 20);
    CHECK(oracle::ranks(stats::normalize(v, 0, 20)) == oracle::ranks(v));
  }
}

TEST_CASE("kendall spot values") {
  CHECK(stats::kendall_tau_b(V{1, 2, 3, 4}, V{1, 2, 3, 4}).tau == 1.0);
  CHECK(stats::kendall_tau_b(V{1, 2, 3, 4}, V{4, 3, 2, 1}).tau == -1.0);
  const V x{1, 2, 2, 3}, y{1, 3, 2, 3};
  const auto r = stats::kendall_tau_b(x, y);
  CHECK(r.tau == doctest::Approx(oracle::tau_b(x, y)).epsilon(1e-12));
  // pairs: (1,2) C, (1,3) C, (1,4) C, (2,3) tied x, (2,4) tied y, (3,4) C
  CHECK(r.pairs.concordant == 4);
  CHECK(r.pairs.discordant == 0);
  CHECK(r.pairs.tied_x_only == 1);
  CHECK(r.pairs.tied_y_only == 1);
  CHECK(r.tau == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
}

TEST_CASE("spearman spot values") {
  CHECK(stats::spearman_rho(V{1, 2, 3, 4, 5}, V{2, 4, 6, 8, 10}).rho == 1.0);
  CHECK(stats::spearman_rho(V{1, 2, 3, 4, 5}, V{5, 4, 3, 2, 1}).rho == -1.0);
  // ranks x = [1, 2.5, 2.5, 4], y = [2, 1, 3.5, 3.5]
  const V x{1, 2, 2, 3}, y{2, 1, 3, 3};
  const double hand = 2.25 / std::sqrt(4.5 * 4.5);
  CHECK(stats::spearman_rho(x, y).rho == doctest::Approx(hand).epsilon(1e-12));
  CHECK(oracle::spearman(x, y) == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("average ranks") {
  CHECK(stats::average_ranks(V{10, 20, 20, 5}) == V{2, 3.5, 3.5, 1});
}

TEST_CASE("degenerate series") {
  CHECK_THROWS_AS(stats::kendall_tau_b(V{1, 1, 1}, V{1, 2, 3}), DegenerateSeries);
  CHECK_THROWS_AS(stats::spearman_rho(V{1, 2, 3}, V{2, 2, 2}), DegenerateSeries);
  CHECK_THROWS_AS(stats::kendall_tau_b(V{1}, V{1}), DegenerateSeries);
  CHECK_THROWS_AS(stats::pearson(V{1, 1}, V{1, 2}), DegenerateSeries);
}

TEST_CASE("random integer vectors match the brute-force oracles") {
  std::mt19937_64 rng(1);
  int checked = 0;
  while (checked < 1000) {
    const std::size_t n = 3 + rng() % 8;
    const V x = random_ints(rng, n, 5), y = random_ints(rng, n, 5);
    if (constant(x) || constant(y)) continue;
    REQUIRE(std::fabs(stats::kendall_tau_b(x, y).tau - oracle::tau_b(x, y)) <= 1e-12);
    REQUIRE(std::fabs(stats::kendall_tau_a(x, y).tau - oracle::tau_a(x, y)) <= 1e-12);
    REQUIRE(std::fabs(stats::spearman_rho(x, y).rho - oracle::spearman(x, y)) <= 1e-12);
    ++checked;
  }
}

TEST_CASE("symmetry, bounds and tau-b equals tau-a without ties") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 12;
    const V x = random_ints(rng, n, 6), y = random_ints(rng, n, 6);
    if (constant(x) || constant(y)) continue;
    const auto a = stats::correlate(x, y), b = stats::correlate(y, x);
    REQUIRE(a.tau == doctest::Approx(b.tau).epsilon(1e-12));
    REQUIRE(a.rho == doctest::Approx(b.rho).epsilon(1e-12));
    REQUIRE(std::fabs(a.tau) <= 1.0);
    REQUIRE(std::fabs(a.rho) <= 1.0 + 1e-15);
    REQUIRE(*a.p_tau >= 0.0);
    REQUIRE(*a.p_tau <= 1.0);
    REQUIRE(*a.p_rho >= 0.0);
    REQUIRE(*a.p_rho <= 1.0);
  }
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 15;
    V x(n), y(n);
    std::iota(x.begin(), x.end(), 0.0);
    std::iota(y.begin(), y.end(), 0.0);
    std::shuffle(y.begin(), y.end(), rng);
    REQUIRE(stats::kendall_tau_b(x, y).tau == stats::kendall_tau_a(x, y).tau);
  }
}

TEST_CASE("monotone invariance") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 4 + rng() % 20;
    const V x = random_ints(rng, n, 8), y = random_ints(rng, n, 8);
    if (constant(x) || constant(y)) continue;
    const auto base = stats::correlate(x, y);
    const auto fx = stats::correlate(monotone_map(x, rng), y);
    const auto fy = stats::correlate(x, monotone_map(y, rng));
    REQUIRE(std::fabs(fx.tau - base.tau) <= 1e-12);
    REQUIRE(std::fabs(fy.tau - base.tau) <= 1e-12);
    REQUIRE(std::fabs(fx.rho - base.rho) <= 1e-12);
    REQUIRE(std::fabs(fy.rho - base.rho) <= 1e-12);
  }
}

TEST_CASE("exact kendall p-value without ties") {
  // n = 4, tau = 1: one of 24 permutations reaches |tau| >= 1 in each tail.
  CHECK(stats::kendall_tau_b(V{1, 2, 3, 4}, V{1, 2, 3, 4}).p_value == doctest::Approx(2.0 / 24.0));
  // n = 5 identity: 2/120.
  CHECK(stats::kendall_tau_b(V{1, 2, 3, 4, 5}, V{1, 2, 3, 4, 5}).p_value == doctest::Approx(2.0 / 120.0));
  // Spearman permutation p for n = 4 perfect agreement is also 2/24.
  CHECK(stats::spearman_rho(V{1, 2, 3, 4}, V{1, 2, 3, 4}).p_value == doctest::Approx(2.0 / 24.0));
}

TEST_CASE("large-sample p-values shrink with n") {
  V x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(i);
    y.push_back(i + (i % 3 == 0 ? 2.5 : 0.0));
  }
  const auto r = stats::correlate(x, y);
  CHECK(r.tau > 0.9);
  CHECK(*r.p_tau < 1e-6);
  CHECK(*r.p_rho < 1e-6);
}

TEST_CASE("aggregate") {
  stats::CorrelationResult a, b;
  a.tau = 0.2;
  a.rho = 0.1;
  b.tau = 0.4;
  b.rho = 0.5;
  const std::vector<stats::CorrelationResult> both{a, b};
  const auto m = stats::aggregate(both);
  CHECK(m.tau == doctest::Approx(0.3));
  CHECK(m.rho == doctest::Approx(0.3));
  CHECK_FALSE(m.p_tau.has_value());
  const std::vector<stats::CorrelationResult> one{a};
  CHECK(stats::aggregate(one).tau == 0.2);

  std::mt19937_64 rng(5);
  std::vector<stats::CorrelationResult> cells;
  double tau_sum = 0, rho_sum = 0;
  for (int c = 0; c < 4; ++c) {
    V x = random_ints(rng, 8, 9), y = random_ints(rng, 8, 9);
    x[0] = 0;
    x[1] = 9;
    y[0] = 0;
    y[1] = 9;
    cells.push_back(stats::correlate(x, y));
    tau_sum += oracle::tau_b(x, y);
    rho_sum += oracle::spearman(x, y);
  }
  const auto agg = stats::aggregate(cells);
  CHECK(agg.tau == doctest::Approx(tau_sum / 4).epsilon(1e-12));
  CHECK(agg.rho == doctest::Approx(rho_sum / 4).epsilon(1e-12));
}

TEST_CASE("krippendorff alpha") {
  using R = stats::RatingMatrix;
  const R identical{{1, 4, 2, 5, 3}, {1, 4, 2, 5, 3}};
  CHECK(stats::krippendorff_alpha(identical).alpha == 1.0);

  const R hand{{1, 2, 3, 3}, {1, 3, 3, 4}};
  CHECK(oracle::krippendorff_interval(hand) == doctest::Approx(0.78125).epsilon(1e-12));
  CHECK(std::fabs(stats::krippendorff_alpha(hand).alpha - 0.78125) <= 1e-9);

  const R missing{{1, 2, std::nullopt, 4, 5}, {2, 2, 3, std::nullopt, 5}, {1, 3, 3, 4, std::nullopt}};
  const auto r = stats::krippendorff_alpha(missing);
  CHECK(r.alpha == doctest::Approx(oracle::krippendorff_interval(missing)).epsilon(1e-12));
  CHECK(r.n_items == 5);
  CHECK(r.n_raters == 3);
  CHECK(r.n_pairable == 12);

  CHECK_THROWS_AS(stats::krippendorff_alpha(R{{1, std::nullopt}, {std::nullopt, 2}}), InsufficientOverlap);
  CHECK_THROWS_AS(stats::krippendorff_alpha(R{{3, 3}, {3, 3}}), DegenerateSeries);
}

TEST_CASE("krippendorff ordinal level treats equal ranks alike") {
  using R = stats::RatingMatrix;
  const R a{{1, 2, 3, 3}, {1, 3, 3, 4}};
  const R b{{10, 20, 30, 30}, {10, 30, 30, 99}};
  CHECK(stats::krippendorff_alpha(a, stats::AgreementLevel::ordinal).alpha ==
        doctest::Approx(stats::krippendorff_alpha(b, stats::AgreementLevel::ordinal).alpha).epsilon(1e-12));
  CHECK(stats::krippendorff_alpha(a, stats::AgreementLevel::ordinal).alpha < 1.0);
}

TEST_CASE("krippendorff alpha near zero for independent raters") {
  std::mt19937_64 rng(42);
  stats::RatingMatrix m(2, std::vector<std::optional<double>>(500));
  for (auto& rater : m)
    for (auto& cell : rater) cell = double(1 + rng() % 10);
  const double alpha = stats::krippendorff_alpha(m).alpha;
  MESSAGE("alpha = " << alpha);
  CHECK(alpha == doctest::Approx(oracle::krippendorff_interval(m)).epsilon(1e-9));
  CHECK(alpha >= -0.05);
  CHECK(alpha <= 0.05);
}

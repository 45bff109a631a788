#include "t2ieval/stats.hpp"

#include "t2ieval/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace t2ieval::stats {
namespace {

constexpr std::size_t kExactNoTiesMaxN = 20;
constexpr std::size_t kExactPermutationMaxN = 8;

int sign(double v) { return (v > 0) - (v < 0); }

void check_series(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("series lengths differ: " + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()));
  }
  if (x.size() < 2) throw DegenerateSeries("need at least 2 paired values, got " + std::to_string(x.size()));
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x)) throw DegenerateSeries("first series is constant");
  if (constant(y)) throw DegenerateSeries("second series is constant");
}

// Sizes of groups of equal values.
std::vector<long long> tie_groups(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<long long> groups;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > 1) groups.push_back(static_cast<long long>(j - i));
    i = j;
  }
  return groups;
}

// Two-sided P(|S| >= |s|) for S = C - D under independence without ties,
// from the distribution of inversion counts of a uniform permutation.
double kendall_exact_no_ties(std::size_t n, long long s) {
  const long long total_pairs = static_cast<long long>(n * (n - 1) / 2);
  std::vector<double> dist{1.0};
  for (std::size_t k = 2; k <= n; ++k) {
    std::vector<double> next(dist.size() + k - 1, 0.0);
    for (std::size_t i = 0; i < dist.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) next[i + j] += dist[i] / double(k);
    }
    dist = std::move(next);
  }
  const long long target = std::llabs(s);
  double p = 0.0;
  for (std::size_t inversions = 0; inversions < dist.size(); ++inversions) {
    const long long stat = total_pairs - 2 * static_cast<long long>(inversions);
    if (std::llabs(stat) >= target) p += dist[inversions];
  }
  return std::min(1.0, p);
}

long long concordance_statistic(std::span<const double> x, std::span<const double> y) {
  long long s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
  }
  return s;
}

double kendall_exact_permutation(std::span<const double> x, std::span<const double> y, long long s) {
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> permuted(y.size());
  long long hits = 0;
  long long total = 0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = y[perm[i]];
    if (std::llabs(concordance_statistic(x, permuted)) >= std::llabs(s)) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return double(hits) / double(total);
}

double kendall_asymptotic(std::span<const double> x, std::span<const double> y, long long s) {
  const double n = double(x.size());
  const double m = n * (n - 1.0);
  double x_pairs = 0, x_cubic = 0, x_var = 0;
  for (long long t : tie_groups(x)) {
    x_pairs += double(t * (t - 1)) / 2.0;
    x_cubic += double(t * (t - 1) * (t - 2));
    x_var += double(t * (t - 1) * (2 * t + 5));
  }
  double y_pairs = 0, y_cubic = 0, y_var = 0;
  for (long long u : tie_groups(y)) {
    y_pairs += double(u * (u - 1)) / 2.0;
    y_cubic += double(u * (u - 1) * (u - 2));
    y_var += double(u * (u - 1) * (2 * u + 5));
  }
  double var = (m * (2.0 * n + 5.0) - x_var - y_var) / 18.0 + (2.0 * x_pairs * y_pairs) / m;
  if (n > 2) var += x_cubic * y_cubic / (9.0 * m * (n - 2.0));
  if (var <= 0) return 1.0;
  const double z = double(s) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double kendall_p_value(std::span<const double> x, std::span<const double> y, const PairCounts& pc) {
  const long long s = pc.concordant - pc.discordant;
  const bool has_ties = pc.tied_x_only + pc.tied_y_only + pc.tied_both > 0;
  if (!has_ties && x.size() <= kExactNoTiesMaxN) return kendall_exact_no_ties(x.size(), s);
  if (x.size() <= kExactPermutationMaxN) return kendall_exact_permutation(x, y, s);
  return kendall_asymptotic(x, y, s);
}

// Ranks are multiples of 1/2, so doubled ranks give exact integer statistics.
double spearman_exact_permutation(const std::vector<double>& rx, const std::vector<double>& ry) {
  const std::size_t n = rx.size();
  std::vector<long long> ax(n), ay(n);
  for (std::size_t i = 0; i < n; ++i) {
    ax[i] = std::llround(2.0 * rx[i]);
    ay[i] = std::llround(2.0 * ry[i]);
  }
  const long long offset = static_cast<long long>(n) * static_cast<long long>((n + 1) * (n + 1));
  auto centered = [&](const std::vector<std::size_t>& perm) {
    long long t = 0;
    for (std::size_t i = 0; i < n; ++i) t += ax[i] * ay[perm[i]];
    return std::llabs(t - offset);
  };
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const long long observed = centered(perm);
  long long hits = 0;
  long long total = 0;
  do {
    if (centered(perm) >= observed) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return double(hits) / double(total);
}

double spearman_asymptotic(double rho, std::size_t n) {
  const double df = double(n) - 2.0;
  if (df <= 0) return 1.0;
  const double denom = (1.0 - rho) * (1.0 + rho);
  if (denom <= 0) return 0.0;
  const double t = rho * std::sqrt(df / denom);
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

}  // namespace

std::vector<double> normalize(std::span<const double> values, double lo, double hi, Warnings* warnings) {
  if (!(lo < hi)) {
    std::ostringstream msg;
    msg << "normalize: expected lo < hi, got lo=" << lo << " hi=" << hi;
    throw InvalidRange(msg.str());
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (v < lo || v > hi) {
      std::ostringstream msg;
      msg << "value " << v << " outside [" << lo << ", " << hi << "]; clamped";
      warn(warnings, msg.str());
      v = std::clamp(v, lo, hi);
    }
    out.push_back((v - lo) / (hi - lo));
  }
  return out;
}

PairCounts count_pairs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("series lengths differ");
  PairCounts pc;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const int sx = sign(x[i] - x[j]);
      const int sy = sign(y[i] - y[j]);
      if (sx == 0 && sy == 0) {
        ++pc.tied_both;
      } else if (sx == 0) {
        ++pc.tied_x_only;
      } else if (sy == 0) {
        ++pc.tied_y_only;
      } else if (sx == sy) {
        ++pc.concordant;
      } else {
        ++pc.discordant;
      }
    }
  }
  return pc;
}

TauResult kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_series(x, y);
  const PairCounts pc = count_pairs(x, y);
  const double cd = double(pc.concordant + pc.discordant);
  const double denom = std::sqrt((cd + double(pc.tied_x_only)) * (cd + double(pc.tied_y_only)));
  TauResult r;
  r.pairs = pc;
  r.tau = std::clamp(double(pc.concordant - pc.discordant) / denom, -1.0, 1.0);
  r.p_value = kendall_p_value(x, y, pc);
  return r;
}

TauResult kendall_tau_a(std::span<const double> x, std::span<const double> y) {
  check_series(x, y);
  const PairCounts pc = count_pairs(x, y);
  const double n = double(x.size());
  TauResult r;
  r.pairs = pc;
  r.tau = double(pc.concordant - pc.discordant) / (n * (n - 1.0) / 2.0);
  r.p_value = kendall_p_value(x, y, pc);
  return r;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double mid = (double(i + 1) + double(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("pearson: bad series lengths");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw DegenerateSeries("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

RhoResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  check_series(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  RhoResult r;
  r.rho = pearson(rx, ry);
  r.p_value = x.size() <= kExactPermutationMaxN ? spearman_exact_permutation(rx, ry)
                                                : spearman_asymptotic(r.rho, x.size());
  return r;
}

CorrelationResult correlate(std::span<const double> metric, std::span<const double> human, TauVariant variant) {
  const TauResult tau = variant == TauVariant::b ? kendall_tau_b(metric, human) : kendall_tau_a(metric, human);
  const RhoResult rho = spearman_rho(metric, human);
  CorrelationResult r;
  r.tau = tau.tau;
  r.rho = rho.rho;
  r.p_tau = tau.p_value;
  r.p_rho = rho.p_value;
  r.n = metric.size();
  r.pairs = tau.pairs;
  return r;
}

CorrelationResult aggregate(std::span<const CorrelationResult> results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no results");
  CorrelationResult out;
  for (const auto& r : results) {
    out.tau += r.tau;
    out.rho += r.rho;
    out.n += r.n;
  }
  out.tau /= double(results.size());
  out.rho /= double(results.size());
  return out;
}

AgreementResult krippendorff_alpha(const RatingMatrix& ratings, AgreementLevel level) {
  AgreementResult result;
  result.level = level;
  result.n_raters = ratings.size();
  for (const auto& row : ratings) result.n_items = std::max(result.n_items, row.size());

  // Pairable values per item.
  std::vector<std::vector<double>> units;
  for (std::size_t item = 0; item < result.n_items; ++item) {
    std::vector<double> values;
    for (const auto& row : ratings) {
      if (item < row.size() && row[item]) values.push_back(*row[item]);
    }
    if (values.size() >= 2) units.push_back(std::move(values));
  }

  std::map<double, std::size_t> index;
  for (const auto& u : units) {
    for (double v : u) index.emplace(v, 0);
  }
  std::vector<double> categories;
  for (auto& [value, idx] : index) {
    idx = categories.size();
    categories.push_back(value);
  }
  const std::size_t k = categories.size();

  // Coincidence matrix: each ordered pair within a unit weighs 1/(m_u - 1).
  std::vector<std::vector<double>> coincidence(k, std::vector<double>(k, 0.0));
  for (const auto& u : units) {
    const double weight = 1.0 / double(u.size() - 1);
    for (std::size_t a = 0; a < u.size(); ++a) {
      for (std::size_t b = 0; b < u.size(); ++b) {
        if (a != b) coincidence[index[u[a]]][index[u[b]]] += weight;
      }
    }
  }
  std::vector<double> marginals(k, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) marginals[c] += coincidence[c][d];
    total += marginals[c];
  }
  std::size_t pairable = 0;
  for (const auto& u : units) pairable += u.size();
  result.n_pairable = pairable;
  if (pairable < 2) throw InsufficientOverlap("fewer than 2 pairable ratings");

  auto distance = [&](std::size_t c, std::size_t d) {
    if (level == AgreementLevel::interval) {
      const double diff = categories[c] - categories[d];
      return diff * diff;
    }
    const auto [lo, hi] = std::minmax(c, d);
    double between = 0.0;
    for (std::size_t g = lo; g <= hi; ++g) between += marginals[g];
    const double v = between - (marginals[c] + marginals[d]) / 2.0;
    return v * v;
  };

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      if (c == d) continue;
      const double delta = distance(c, d);
      observed += coincidence[c][d] * delta;
      expected += marginals[c] * marginals[d] * delta;
    }
  }
  if (expected == 0.0) throw DegenerateSeries("all pairable ratings are identical; alpha is undefined");
  result.alpha = 1.0 - (total - 1.0) * observed / expected;
  return result;
}

std::string to_string(AgreementLevel level) {
  return level == AgreementLevel::interval ? "interval" : "ordinal";
}

}  // namespace t2ieval::stats

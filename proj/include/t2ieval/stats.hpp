#pragma once

#include "t2ieval/warnings.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace t2ieval::stats {

/// Affine map of [lo, hi] onto [0, 1]. Values outside the range are clamped
/// with a warning. Throws InvalidRange if lo >= hi.
std::vector<double> normalize(std::span<const double> values, double lo, double hi,
                              Warnings* warnings = nullptr);

/// Pair counts over all i < j.
struct PairCounts {
  long long concordant = 0;
  long long discordant = 0;
  long long tied_x_only = 0;
  long long tied_y_only = 0;
  long long tied_both = 0;
};

PairCounts count_pairs(std::span<const double> x, std::span<const double> y);

/// Kendall correlation with its two-sided p-value.
struct TauResult {
  double tau = 0.0;
  double p_value = 1.0;
  PairCounts pairs;
};

/// Tie-corrected Kendall's tau-b.
/// p-value: exact when n <= 20 and there are no ties (inversion-count
/// distribution), exact by full permutation when n <= 8 with ties, and the
/// tie-corrected normal approximation otherwise.
/// Throws DegenerateSeries when either vector is constant or n < 2.
TauResult kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Kendall's tau-a, (C - D) / C(n, 2), sharing tau-b's p-value.
TauResult kendall_tau_a(std::span<const double> x, std::span<const double> y);

struct RhoResult {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Spearman's rho: Pearson correlation of mid-ranks. p-value by full
/// permutation when n <= 8, Student t with n-2 degrees of freedom otherwise.
RhoResult spearman_rho(std::span<const double> x, std::span<const double> y);

/// Ranks starting at 1, ties receive the mean of the positions they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Plain Pearson correlation. Throws DegenerateSeries on zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

enum class TauVariant { b, a };

struct CorrelationResult {
  double tau = 0.0;
  double rho = 0.0;
  std::optional<double> p_tau;
  std::optional<double> p_rho;
  std::size_t n = 0;
  PairCounts pairs;
};

/// Both rank correlations for one aligned series.
CorrelationResult correlate(std::span<const double> metric, std::span<const double> human,
                            TauVariant variant = TauVariant::b);

/// Uniform mean of tau and rho across cells; p-values are not combined.
CorrelationResult aggregate(std::span<const CorrelationResult> results);

enum class AgreementLevel { interval, ordinal };

struct AgreementResult {
  double alpha = 0.0;
  std::size_t n_items = 0;
  std::size_t n_raters = 0;
  std::size_t n_pairable = 0;
  AgreementLevel level = AgreementLevel::interval;
};

/// ratings[rater][item]; std::nullopt marks a missing cell.
using RatingMatrix = std::vector<std::vector<std::optional<double>>>;

/// Krippendorff's alpha from the coincidence matrix of pairable values.
/// Items rated by fewer than two raters are ignored. Throws
/// InsufficientOverlap when fewer than two pairable values remain and
/// DegenerateSeries when all pairable values are identical.
AgreementResult krippendorff_alpha(const RatingMatrix& ratings, AgreementLevel level = AgreementLevel::interval);

std::string to_string(AgreementLevel level);

}  // namespace t2ieval::stats

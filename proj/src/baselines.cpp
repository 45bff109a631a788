#include "t2ieval/baselines.hpp"

#include "t2ieval/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

namespace t2ieval::baselines {

double clip_style_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw BackendContractViolation("embedding dimensions differ: " + std::to_string(a.size()) + " vs " +
                                   std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateEmbedding("cosine similarity of a zero vector");
  const double cosine = dot / std::sqrt(na * nb);
  return std::clamp(cosine, 0.0, 1.0);
}

std::vector<std::string> meteor_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view raw = text.substr(i, j - i);
    while (!raw.empty() && std::ispunct(static_cast<unsigned char>(raw.front()))) raw.remove_prefix(1);
    while (!raw.empty() && std::ispunct(static_cast<unsigned char>(raw.back()))) raw.remove_suffix(1);
    if (!raw.empty()) {
      std::string token(raw);
      std::transform(token.begin(), token.end(), token.begin(),
                     [](unsigned char c) { return char(std::tolower(c)); });
      tokens.push_back(std::move(token));
    }
    i = j;
  }
  return tokens;
}

std::size_t count_chunks(const Alignment& alignment) {
  std::size_t chunks = 0;
  for (std::size_t k = 0; k < alignment.size(); ++k) {
    const bool continues = k > 0 && alignment[k].first == alignment[k - 1].first + 1 &&
                           alignment[k].second == alignment[k - 1].second + 1;
    if (!continues) ++chunks;
  }
  return chunks;
}

namespace {

// Depth-first branch and bound over candidate positions. Every maximum
// alignment matches exactly min(count_cand, count_ref) tokens of each match
// key, so the search only decides *which* occurrences pair up. It maximizes
// links (adjacent matches contiguous in both strings), i.e. minimizes chunks.
class AlignmentSearch {
 public:
  AlignmentSearch(std::vector<int> cand_keys, std::vector<int> ref_keys, std::size_t budget)
      : cand_(std::move(cand_keys)), ref_(std::move(ref_keys)), budget_(budget) {
    int max_key = -1;
    for (int k : cand_) max_key = std::max(max_key, k);
    for (int k : ref_) max_key = std::max(max_key, k);
    std::vector<int> count_c(std::size_t(max_key + 1), 0), count_r(std::size_t(max_key + 1), 0);
    for (int k : cand_) ++count_c[std::size_t(k)];
    for (int k : ref_) ++count_r[std::size_t(k)];
    skips_left_.resize(count_c.size());
    for (std::size_t k = 0; k < count_c.size(); ++k) skips_left_[k] = std::max(0, count_c[k] - count_r[k]);
    ref_positions_.resize(count_c.size());
    for (std::size_t j = 0; j < ref_.size(); ++j) ref_positions_[std::size_t(ref_[j])].push_back(j);
    used_.assign(ref_.size(), false);
    assignment_.assign(cand_.size(), kUnmatched);

    // link_possible[i]: some reference bigram equals (cand[i-1], cand[i]).
    std::vector<int> link_possible(cand_.size(), 0);
    for (std::size_t i = 1; i < cand_.size(); ++i) {
      for (std::size_t j = 1; j < ref_.size(); ++j) {
        if (ref_[j - 1] == cand_[i - 1] && ref_[j] == cand_[i]) {
          link_possible[i] = 1;
          break;
        }
      }
    }
    future_links_.assign(cand_.size() + 1, 0);
    for (std::size_t i = cand_.size(); i-- > 0;) future_links_[i] = future_links_[i + 1] + link_possible[i];
  }

  Alignment run(bool* exhausted) {
    dfs(0, 0);
    if (exhausted != nullptr) *exhausted = !out_of_budget_;
    Alignment out;
    for (std::size_t i = 0; i < best_.size(); ++i) {
      if (best_[i] != kUnmatched) out.emplace_back(i, best_[i]);
    }
    return out;
  }

 private:
  static constexpr std::size_t kUnmatched = static_cast<std::size_t>(-1);

  void dfs(std::size_t i, int links) {
    if (out_of_budget_) return;
    if (++nodes_ > budget_) {
      out_of_budget_ = true;
      return;
    }
    if (i == cand_.size()) {
      if (links > best_links_) {
        best_links_ = links;
        best_ = assignment_;
      }
      return;
    }
    // Upper bound: every remaining position could still add one link.
    if (best_links_ >= 0 && links + future_links_[i] <= best_links_) return;

    const auto key = std::size_t(cand_[i]);
    const std::size_t prev = i > 0 ? assignment_[i - 1] : kUnmatched;
    for (std::size_t j : ref_positions_[key]) {
      if (used_[j]) continue;
      used_[j] = true;
      assignment_[i] = j;
      const int gained = (prev != kUnmatched && prev + 1 == j) ? 1 : 0;
      dfs(i + 1, links + gained);
      assignment_[i] = kUnmatched;
      used_[j] = false;
      if (out_of_budget_) return;
    }
    if (skips_left_[key] > 0) {
      --skips_left_[key];
      dfs(i + 1, links);
      ++skips_left_[key];
    }
  }

  std::vector<int> cand_;
  std::vector<int> ref_;
  std::size_t budget_;
  std::vector<int> skips_left_;
  std::vector<std::vector<std::size_t>> ref_positions_;
  std::vector<bool> used_;
  std::vector<std::size_t> assignment_;
  std::vector<int> future_links_;
  std::vector<std::size_t> best_;
  int best_links_ = -1;
  std::size_t nodes_ = 0;
  bool out_of_budget_ = false;
};

}  // namespace

Alignment align_unigrams(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                         MeteorMatcher matcher, bool* exhausted, std::size_t node_budget) {
  std::map<std::string, int> key_ids;
  auto key_of = [&](const std::string& token) {
    const std::string key = matcher == MeteorMatcher::exact_plus_stem ? porter_stem(token) : token;
    auto [it, inserted] = key_ids.emplace(key, int(key_ids.size()));
    return it->second;
  };
  std::vector<int> cand_keys, ref_keys;
  for (const auto& t : candidate) cand_keys.push_back(key_of(t));
  for (const auto& t : reference) ref_keys.push_back(key_of(t));
  return AlignmentSearch(std::move(cand_keys), std::move(ref_keys), node_budget).run(exhausted);
}

MeteorBreakdown meteor_breakdown(std::string_view candidate, std::string_view reference, const MeteorParams& params) {
  if (params.penalty_gamma < 0.0 || params.penalty_gamma > 1.0) {
    throw std::invalid_argument("METEOR penalty_gamma must lie in [0, 1]");
  }
  if (!(params.penalty_power > 0.0)) throw std::invalid_argument("METEOR penalty_power must be positive");
  const auto cand = meteor_tokenize(candidate);
  const auto ref = meteor_tokenize(reference);
  if (cand.empty()) throw EmptyText("candidate has no tokens after normalization");
  if (ref.empty()) throw EmptyText("reference has no tokens after normalization");

  MeteorBreakdown out;
  out.alignment = align_unigrams(cand, ref, params.matcher, &out.search_exhausted);
  out.matches = out.alignment.size();
  if (out.matches == 0) return out;
  out.chunks = count_chunks(out.alignment);
  const double m = double(out.matches);
  out.precision = m / double(cand.size());
  out.recall = m / double(ref.size());
  out.fmean = 10.0 * out.precision * out.recall / (out.recall + 9.0 * out.precision);
  out.penalty = params.penalty_gamma * std::pow(double(out.chunks) / m, params.penalty_power);
  out.score = out.fmean * (1.0 - out.penalty);
  return out;
}

double meteor(std::string_view candidate, std::string_view reference, const MeteorParams& params) {
  return meteor_breakdown(candidate, reference, params).score;
}

std::string variant_name(SourceKind kind, MatchMethod method) {
  switch (kind) {
    case SourceKind::image:
      if (method == MatchMethod::embed_cosine) return "CLIP";
      throw std::invalid_argument("METEOR needs a text source, not an image");
    case SourceKind::caption:
      return method == MatchMethod::embed_cosine ? "CapCLIP" : "CapMETEOR";
    case SourceKind::description:
      return method == MatchMethod::embed_cosine ? "DescCLIP" : "DescMETEOR";
  }
  throw std::invalid_argument("unknown similarity source");
}

std::string to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::image:
      return "image";
    case SourceKind::caption:
      return "caption";
    case SourceKind::description:
      return "description";
  }
  return "?";
}

std::string to_string(MatchMethod method) { return method == MatchMethod::embed_cosine ? "embed_cosine" : "meteor"; }

}  // namespace t2ieval::baselines

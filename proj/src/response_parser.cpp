#include "t2ieval/response_parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <tuple>
#include <vector>

namespace t2ieval {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
         });
}

bool is_decoration(char c) { return c == '*' || c == '#' || c == '-' || c == '>' || c == '`' || c == '_'; }

struct TagLine {
  std::string tag;
  std::string value;
};

// Recognize "TAG: value" after optional markdown decoration. The tag may be
// followed by a parenthetical before the separator, e.g. "X1 (objects): 2".
std::optional<TagLine> match_tag_line(std::string_view line) {
  std::size_t i = 0;
  bool decorated = false;
  while (i < line.size() && (is_space(line[i]) || is_decoration(line[i]))) {
    decorated = decorated || line[i] == '*' || line[i] == '_';
    ++i;
  }
  for (std::string_view tag : kReplyTags) {
    if (line.size() - i < tag.size() || !iequals(line.substr(i, tag.size()), tag)) continue;
    std::size_t j = i + tag.size();
    if (j < line.size() && (is_alnum(line[j]))) continue;  // "SCORES", "X12"
    while (j < line.size() && (is_space(line[j]) || line[j] == '*' || line[j] == '_')) ++j;
    if (j < line.size() && line[j] == '(') {
      const auto close = line.find(')', j);
      if (close == std::string_view::npos) continue;
      j = close + 1;
      while (j < line.size() && is_space(line[j])) ++j;
    }
    if (j >= line.size() || (line[j] != ':' && line[j] != '=')) continue;
    ++j;
    if (decorated) {
      while (j < line.size() && (line[j] == '*' || line[j] == '_')) ++j;
    }
    std::string_view value = trim(line.substr(j));
    if (decorated) {
      while (!value.empty() && (value.back() == '*' || value.back() == '_')) value.remove_suffix(1);
      value = trim(value);
    }
    return TagLine{std::string(tag), std::string(value)};
  }
  return std::nullopt;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

// Leading number of `value` after skipping quote/markdown characters.
std::optional<double> parse_leading_number(std::string_view value) {
  std::size_t i = 0;
  while (i < value.size() && (is_space(value[i]) || value[i] == '*' || value[i] == '_' || value[i] == '"' ||
                              value[i] == '\'' || value[i] == '`' || value[i] == '[' || value[i] == '(')) {
    ++i;
  }
  std::size_t j = i;
  if (j < value.size() && (value[j] == '+' || value[j] == '-')) ++j;
  const std::size_t digits_start = j;
  while (j < value.size() && is_digit(value[j])) ++j;
  if (j == digits_start) return std::nullopt;
  if (j + 1 < value.size() && value[j] == '.' && is_digit(value[j + 1])) {
    ++j;
    while (j < value.size() && is_digit(value[j])) ++j;
  }
  if (j < value.size() && (std::isalpha(static_cast<unsigned char>(value[j])) || value[j] == '_')) {
    return std::nullopt;  // "2nd", "3x"
  }
  const std::string token(value.substr(i, j - i));
  return std::strtod(token.c_str(), nullptr);
}

struct NumberToken {
  double value;
  std::size_t word_index;
  std::size_t sentence;
  std::size_t position;
};

struct Keyword {
  std::size_t word_index;
  std::size_t sentence;
};

bool is_rating_keyword(const std::string& w) {
  static const char* const kWords[] = {"score", "scores", "scored", "rating", "ratings", "rate",
                                       "rated", "error",  "errors", "mistake", "mistakes"};
  return std::any_of(std::begin(kWords), std::end(kWords), [&](const char* k) { return w == k; });
}

}  // namespace

std::optional<std::string> TaggedReply::get(std::string_view tag) const {
  auto it = fields.find(std::string(tag));
  if (it == fields.end()) return std::nullopt;
  return it->second;
}

TaggedReply parse_tagged(std::string_view reply, Warnings* warnings) {
  TaggedReply out;
  std::string* open_rationale = nullptr;
  for (std::string_view line : split_lines(reply)) {
    auto tagged = match_tag_line(line);
    if (!tagged) {
      const auto text = trim(line);
      if (open_rationale != nullptr && !text.empty()) {
        if (!open_rationale->empty()) open_rationale->push_back(' ');
        open_rationale->append(text);
      }
      continue;
    }
    open_rationale = nullptr;
    auto [it, inserted] = out.fields.emplace(tagged->tag, tagged->value);
    if (!inserted) {
      warn(warnings, "duplicate tag " + tagged->tag + " ignored (first occurrence wins)");
      continue;
    }
    if (tagged->tag == "RATIONALE") open_rationale = &it->second;
  }
  return out;
}

std::string render_tagged(const TaggedReply& reply) {
  std::string out;
  for (std::string_view tag : kReplyTags) {
    auto it = reply.fields.find(std::string(tag));
    if (it == reply.fields.end()) continue;
    out.append(tag);
    out.append(": ");
    out.append(it->second);
    out.push_back('\n');
  }
  return out;
}

std::optional<long long> parse_leading_integer(std::string_view value) {
  auto number = parse_leading_number(value);
  if (!number) return std::nullopt;
  return std::llround(*number);  // half away from zero
}

std::optional<long long> parse_integer_fallback(std::string_view reply, long long lo, long long hi) {
  if (lo > hi) return std::nullopt;

  std::vector<NumberToken> numbers;
  std::vector<Keyword> keywords;
  std::size_t word_index = 0;
  std::size_t sentence = 0;
  std::size_t i = 0;
  const std::size_t n = reply.size();

  auto ends_sentence = [&](std::size_t k) {
    const char c = reply[k];
    if (c == '\n' || c == '!' || c == '?' || c == ';') return true;
    if (c == '.') return k + 1 >= n || is_space(reply[k + 1]);
    return false;
  };

  while (i < n) {
    const char c = reply[i];
    if (is_digit(c)) {
      const bool glued = i > 0 && (is_alnum(reply[i - 1]) || reply[i - 1] == '_');
      std::size_t start = i;
      if (i > 0 && (reply[i - 1] == '-' || reply[i - 1] == '+') && (i < 2 || !is_alnum(reply[i - 2]))) start = i - 1;
      std::size_t j = i;
      while (j < n && is_digit(reply[j])) ++j;
      if (j + 1 < n && reply[j] == '.' && is_digit(reply[j + 1])) {
        ++j;
        while (j < n && is_digit(reply[j])) ++j;
      }
      const bool glued_after = j < n && (std::isalpha(static_cast<unsigned char>(reply[j])) || reply[j] == '_');
      if (!glued && !glued_after) {
        const std::string token(reply.substr(start, j - start));
        numbers.push_back({std::strtod(token.c_str(), nullptr), word_index, sentence, start});
      }
      ++word_index;
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < n && (is_alnum(reply[j]) || reply[j] == '\'')) ++j;
      if (is_rating_keyword(lower(reply.substr(i, j - i)))) keywords.push_back({word_index, sentence});
      ++word_index;
      i = j;
      continue;
    }
    if (ends_sentence(i)) ++sentence;
    ++i;
  }

  struct Candidate {
    long long value;
    const NumberToken* token;
  };
  std::vector<Candidate> candidates;
  for (const auto& tok : numbers) {
    const long long v = std::llround(tok.value);
    if (v >= lo && v <= hi) candidates.push_back({v, &tok});
  }
  if (candidates.empty()) return std::nullopt;
  if (candidates.size() == 1) return candidates.front().value;

  // Rank by (distance to a same-sentence keyword, number-before-keyword, position).
  std::optional<std::tuple<std::size_t, int, std::size_t, long long>> best;
  for (const auto& cand : candidates) {
    for (const auto& kw : keywords) {
      if (kw.sentence != cand.token->sentence) continue;
      const auto w = cand.token->word_index;
      const std::size_t distance = w > kw.word_index ? w - kw.word_index : kw.word_index - w;
      const int before = w < kw.word_index ? 1 : 0;
      std::tuple<std::size_t, int, std::size_t, long long> key{distance, before, cand.token->position, cand.value};
      if (!best || key < *best) best = key;
    }
  }
  if (best) return std::get<3>(*best);
  return candidates.front().value;
}

std::optional<AtomicCounts> parse_atomic(std::string_view reply, Warnings* warnings) {
  auto as_count = [](std::string_view value) -> std::optional<int> {
    auto number = parse_leading_number(value);
    if (!number || *number != std::floor(*number) || std::abs(*number) > 1e6) return std::nullopt;
    return int(*number);
  };

  const TaggedReply tagged = parse_tagged(reply, warnings);
  std::array<std::optional<int>, 4> values;
  const std::array<std::string_view, 4> names = {"X1", "X2", "Y1", "Y2"};
  bool any_tag = false;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (auto raw = tagged.get(names[k])) {
      any_tag = true;
      values[k] = as_count(*raw);
      if (!values[k]) return std::nullopt;  // present but not an integer
    }
  }

  // Single-line replies such as "X1 = 2, X2 = 1, Y1 = 2, Y2 = 1".
  if (!std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); })) {
    static const std::regex inline_tag(R"((?:^|[^A-Za-z0-9])([XxYy][12])\s*[:=]\s*([^\s,;]+))");
    const std::string text(reply);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), inline_tag); it != std::sregex_iterator(); ++it) {
      std::string name = (*it)[1].str();
      name[0] = char(std::toupper(static_cast<unsigned char>(name[0])));
      const auto k = std::size_t(std::find(names.begin(), names.end(), name) - names.begin());
      if (k >= names.size() || values[k]) continue;
      values[k] = as_count((*it)[2].str());
      if (!values[k]) return std::nullopt;
      any_tag = true;
    }
  }
  if (!any_tag) return std::nullopt;
  for (const auto& v : values) {
    if (!v) return std::nullopt;
  }
  return AtomicCounts{*values[0], *values[1], *values[2], *values[3]};
}

std::optional<long long> extract_rating(std::string_view reply, std::string_view tag, long long lo, long long hi,
                                        Warnings* warnings) {
  const TaggedReply tagged = parse_tagged(reply, warnings);
  if (auto raw = tagged.get(tag)) {
    if (auto value = parse_leading_integer(*raw)) return value;
  }
  return parse_integer_fallback(reply, lo, hi);
}

std::string extract_rationale(std::string_view reply) {
  const TaggedReply tagged = parse_tagged(reply);
  if (auto rationale = tagged.get("RATIONALE"); rationale && !rationale->empty()) return *rationale;
  std::string out;
  bool pending_space = false;
  for (char c : trim(reply)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace t2ieval

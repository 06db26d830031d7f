#include <algorithm>
#include <set>

#include "vicsim/error.hpp"
#include "vicsim/keyinfo.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {
constexpr std::array<std::string_view, 9> kEntityNames = {"PERSON",       "LOCATION", "TIME",   "DATE", "ORDINAL",
                                                          "ORGANIZATION", "TITLE",    "NUMBER", "MISC"};
}  // namespace

std::string_view to_string(EntityType type) { return kEntityNames[static_cast<std::size_t>(type)]; }

std::optional<EntityType> parse_entity_type(std::string_view s) {
  for (std::size_t i = 0; i < kEntityNames.size(); ++i) {
    if (kEntityNames[i] == s) return kAllEntityTypes[i];
  }
  return std::nullopt;
}

std::string normalize_keyword(std::string_view surface) {
  std::string out;
  out.reserve(surface.size());
  for (char c : surface) {
    if (text::is_alnum(c)) out.push_back(text::is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

TypedKeyword::TypedKeyword(EntityType t, std::string s)
    : type(t), surface(std::move(s)), normalized(normalize_keyword(surface)) {}

bool operator==(const TypedKeyword& a, const TypedKeyword& b) {
  return a.type == b.type && a.surface == b.surface && a.normalized == b.normalized;
}

bool TypedKeywordSet::insert(TypedKeyword keyword) {
  if (keyword.normalized.empty()) return false;
  for (const auto& k : items_) {
    if (k.type == keyword.type && k.normalized == keyword.normalized) return false;
  }
  items_.push_back(std::move(keyword));
  return true;
}

std::vector<std::string> TypedKeywordSet::normalized_strings() const {
  std::vector<std::string> out;
  for (const auto& k : items_) {
    if (std::find(out.begin(), out.end(), k.normalized) == out.end()) out.push_back(k.normalized);
  }
  return out;
}

TypedKeywordSet extract_keywords(std::string_view text, const NerBackend& backend, KeywordSource source) {
  TypedKeywordSet set(source);
  if (text::trim(text).empty()) return set;
  for (auto& k : backend.recognize(text)) set.insert(std::move(k));
  return set;
}

Scenario make_scenario(std::string summary, const NerBackend& backend) {
  Scenario s;
  s.keywords = extract_keywords(summary, backend, KeywordSource::scenario);
  s.summary = std::move(summary);
  return s;
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

OverlapScore score_from_counts(const OverlapCounts& counts) {
  OverlapScore s;
  s.counts = counts;
  s.precision = counts.predicted == 0 ? 0.0 : static_cast<double>(counts.matched) / static_cast<double>(counts.predicted);
  s.recall = counts.truth == 0 ? 0.0 : static_cast<double>(counts.matched) / static_cast<double>(counts.truth);
  s.f1 = f1_score(s.precision, s.recall);
  return s;
}

namespace {

std::vector<std::string> match_keys(const TypedKeywordSet& set, MatchMode mode) {
  if (mode == MatchMode::untyped) return set.normalized_strings();
  std::vector<std::string> keys;
  for (const auto& k : set) keys.push_back(std::string(to_string(k.type)) + '\x1f' + k.normalized);
  return keys;
}

}  // namespace

OverlapScore match_keywords(const TypedKeywordSet& utterance, const TypedKeywordSet& truth, MatchMode mode) {
  const auto u = match_keys(utterance, mode);
  const auto t = match_keys(truth, mode);
  const std::set<std::string> truth_keys(t.begin(), t.end());
  std::vector<std::string> matched;
  for (const auto& key : u) {
    if (truth_keys.count(key) != 0) matched.push_back(key.substr(key.find('\x1f') + 1));
  }
  auto score = score_from_counts({matched.size(), u.size(), t.size()});
  score.matched = std::move(matched);
  return score;
}

FaithfulnessSummary aggregate_overlap(const std::vector<OverlapCounts>& counts) {
  FaithfulnessSummary summary;
  OverlapCounts total;
  double p_sum = 0.0;
  double r_sum = 0.0;
  double f_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total.matched += counts[i].matched;
    total.predicted += counts[i].predicted;
    total.truth += counts[i].truth;
    auto s = score_from_counts(counts[i]);
    p_sum += s.precision;
    r_sum += s.recall;
    f_sum += s.f1;
    summary.items.push_back({i, false, std::move(s)});
  }
  summary.micro = score_from_counts(total);
  if (!counts.empty()) {
    const double n = static_cast<double>(counts.size());
    summary.macro.precision = p_sum / n;
    summary.macro.recall = r_sum / n;
    summary.macro.f1 = f_sum / n;
    summary.macro.counts = total;
  }
  return summary;
}

FaithfulnessSummary corpus_faithfulness(const std::vector<ResponsePair>& responses, const NerBackend& backend,
                                        MatchMode mode) {
  if (responses.empty()) throw InvalidArgument("corpus_faithfulness needs at least one response");
  std::vector<OverlapCounts> counts;
  std::vector<FaithfulnessItem> items;
  std::vector<std::size_t> kept;
  std::vector<OverlapScore> scores;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    auto truth = extract_keywords(responses[i].scenario, backend, KeywordSource::scenario);
    if (truth.empty()) {
      items.push_back({i, true, {}});
      continue;
    }
    auto utt = extract_keywords(responses[i].utterance, backend);
    auto score = match_keywords(utt, truth, mode);
    counts.push_back(score.counts);
    items.push_back({i, false, std::move(score)});
  }
  if (counts.empty()) throw InvalidArgument("no scenario produced any keywords");
  auto summary = aggregate_overlap(counts);
  summary.items = std::move(items);
  summary.skipped = responses.size() - counts.size();
  return summary;
}

bool is_low_precision(const OverlapScore& score, double threshold) {
  const bool introduces_new = score.counts.predicted > score.counts.matched;
  return score.precision < threshold && introduces_new;
}

std::vector<std::size_t> low_precision_flags(const std::vector<KeywordPair>& responses, double threshold,
                                             MatchMode mode) {
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (is_low_precision(match_keywords(responses[i].utterance, responses[i].truth, mode), threshold)) {
      flagged.push_back(i);
    }
  }
  return flagged;
}

}  // namespace vicsim

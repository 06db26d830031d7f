#include <sstream>

#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/judges.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::positive: return "positive";
    case Emotion::negative: return "negative";
    case Emotion::neutral: return "neutral";
  }
  return "neutral";
}

std::optional<Emotion> parse_emotion(std::string_view s) {
  if (s == "positive") return Emotion::positive;
  if (s == "negative") return Emotion::negative;
  if (s == "neutral") return Emotion::neutral;
  return std::nullopt;
}

ValenceLexicon::ValenceLexicon(std::unordered_map<std::string, int> entries) : entries_(std::move(entries)) {}

ValenceLexicon ValenceLexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

ValenceLexicon ValenceLexicon::parse(std::string_view text) {
  std::unordered_map<std::string, int> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream fields{std::string(t)};
    std::string word;
    int valence = 0;
    if (!(fields >> word >> valence)) {
      throw InvalidArgument("lexicon line " + std::to_string(line_no) + ": expected 'word valence'");
    }
    entries[text::strip_token(word)] = valence;
  }
  return ValenceLexicon(std::move(entries));
}

const ValenceLexicon& ValenceLexicon::bundled() {
  static const ValenceLexicon lexicon = load(asset_path("lexicon/valence.txt"));
  return lexicon;
}

int ValenceLexicon::valence(std::string_view token) const {
  auto it = entries_.find(std::string(token));
  return it == entries_.end() ? 0 : it->second;
}

SentimentCounts count_sentiment_words(std::string_view text, const ValenceLexicon& lexicon) {
  SentimentCounts c;
  for (auto tok : text::split_whitespace(text)) {
    ++c.tokens;
    const int v = lexicon.valence(text::strip_token(tok));
    if (v > 0) ++c.positive_words;
    if (v < 0) ++c.negative_words;
  }
  return c;
}

EmotionLabel LexiconEmotionJudge::classify(std::string_view text) const {
  const auto c = count_sentiment_words(text, *lexicon_);
  if (c.positive_words > c.negative_words) return {Emotion::positive, 1.0};
  if (c.positive_words < c.negative_words) return {Emotion::negative, 1.0};
  return {Emotion::neutral, 1.0};
}

FineEmotionMap FineEmotionMap::parse(std::string_view text) {
  FineEmotionMap m;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream fields{std::string(t)};
    std::string fine, group;
    if (!(fields >> fine >> group)) throw InvalidArgument("bad emotion mapping line: " + std::string(t));
    Emotion e;
    if (group == "ambiguous") {
      e = Emotion::neutral;
    } else if (auto parsed = parse_emotion(group)) {
      e = *parsed;
    } else {
      throw InvalidArgument("unknown sentiment group '" + group + "'");
    }
    m.table_[fine] = e;
  }
  return m;
}

const FineEmotionMap& FineEmotionMap::bundled() {
  static const FineEmotionMap m = parse(read_file(asset_path("goemotions_sentiment.txt")));
  return m;
}

Emotion FineEmotionMap::map(std::string_view fine_label) const {
  auto it = table_.find(fine_label);
  if (it == table_.end()) throw InvalidArgument("unknown fine emotion '" + std::string(fine_label) + "'");
  return it->second;
}

std::vector<std::string> FineEmotionMap::labels() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : table_) out.push_back(k);
  return out;
}

Emotion map_fine_emotions(std::string_view fine_label) { return FineEmotionMap::bundled().map(fine_label); }

}  // namespace vicsim

#include <algorithm>
#include <map>

#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"
#include "vicsim/judges.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

std::string_view to_string(DistillTask t) { return t == DistillTask::emotion ? "emotion" : "grammar"; }

std::vector<InstructionPair> distillation_dataset(const std::vector<EmotionExample>& emotion_corpus,
                                                  const std::vector<GrammarExample>& grammar_corpus,
                                                  std::uint64_t seed, const GrammarRegistry& registry) {
  if (emotion_corpus.empty() && grammar_corpus.empty()) throw InvalidArgument("distillation corpora are empty");
  std::vector<InstructionPair> out;
  out.reserve(emotion_corpus.size() + grammar_corpus.size());
  for (const auto& e : emotion_corpus) {
    out.push_back({std::string(kEmotionInstruction) + e.text, std::string(to_string(e.label)), DistillTask::emotion});
  }
  for (const auto& g : grammar_corpus) {
    if (!registry.contains(g.label)) throw InvalidArgument("grammar label '" + g.label + "' is not registered");
    out.push_back({std::string(kGrammarInstruction) + g.text, grammar_label_text(g.label), DistillTask::grammar});
  }
  Rng rng(seed);
  rng.shuffle(out);
  return out;
}

namespace {

const std::vector<std::pair<std::string, std::string>>& abbreviations() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"you", "u"},       {"your", "ur"},    {"please", "pls"}, {"because", "cuz"}, {"thanks", "thx"},
      {"are", "r"},       {"people", "ppl"}, {"about", "abt"},  {"with", "w/"},     {"minutes", "mins"},
      {"tonight", "tonite"}, {"know", "kno"}, {"okay", "ok"},   {"someone", "some1"}, {"before", "b4"},
      {"see", "c"},       {"going", "goin"}, {"really", "rly"}, {"probably", "prob"}, {"something", "smth"},
  };
  return table;
}

std::optional<std::string> abbreviate(const std::string& s, Rng& rng) {
  auto words = text::split_whitespace(s);
  std::vector<std::pair<std::size_t, std::string>> options;  // word index, replacement
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string w(words[i]);
    std::string tail;
    while (!w.empty() && !text::is_alnum(w.back())) {
      tail.insert(tail.begin(), w.back());
      w.pop_back();
    }
    const auto lower = text::to_lower(w);
    for (const auto& [full, abbr] : abbreviations()) {
      if (lower == full) options.push_back({i, abbr + tail});
    }
  }
  if (options.empty()) return std::nullopt;
  const auto& [idx, repl] = options[rng.index(options.size())];
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += i == idx ? repl : std::string(words[i]);
  }
  if (idx == 0 && !out.empty() && text::is_lower(out[0])) out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

std::optional<std::string> repeat_word(const std::string& s, Rng& rng) {
  auto words = text::split_whitespace(s);
  if (words.size() < 2) return std::nullopt;
  // Repeat a word that carries no trailing punctuation.
  std::vector<std::size_t> options;
  for (std::size_t i = 0; i + 1 < words.size(); ++i)
    if (text::is_alnum(words[i].back())) options.push_back(i);
  if (options.empty()) return std::nullopt;
  const auto idx = options[rng.index(options.size())];
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
    if (i == idx) {
      out += ' ';
      out += text::to_lower(words[i]);
    }
  }
  return out;
}

std::optional<std::string> inject_class(const std::string& clean, std::string_view cls, Rng& rng) {
  if (cls == kNoError) return clean;
  if (cls == kPunctuationError) return inject_error(clean, InjectedError::missing_end_punctuation, rng);
  if (cls == kCapitalizationError) return inject_error(clean, InjectedError::lowercase_start, rng);
  if (cls == kSpacingError) return inject_error(clean, InjectedError::double_space, rng);
  if (cls == kUnbalancedDelimiter) return inject_error(clean, InjectedError::unclosed_bracket, rng);
  if (cls == kAbbreviationError) return abbreviate(clean, rng);
  if (cls == kRedundancyRepetition) return repeat_word(clean, rng);
  throw InvalidArgument("no injector for grammar class '" + std::string(cls) + "'");
}

std::vector<std::string> clean_sentences(std::uint64_t seed) {
  std::vector<std::string> out;
  for (const auto& d : synthesize_corpus(400, seed, SynthesisProfile::error_free())) {
    for (const auto& u : d.utterances) {
      if (u.role == Role::user && find_mask_tags(u.text).empty()) out.push_back(u.text);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<std::string> injectable_grammar_classes() {
  return {std::string(kNoError),          std::string(kPunctuationError),   std::string(kCapitalizationError),
          std::string(kSpacingError),     std::string(kUnbalancedDelimiter), std::string(kAbbreviationError),
          std::string(kRedundancyRepetition)};
}

std::vector<GrammarExample> synthesize_grammar_corpus(std::size_t n, std::uint64_t seed,
                                                      const std::vector<std::string>& classes) {
  if (classes.empty()) throw InvalidArgument("no grammar classes requested");
  for (const auto& c : classes) {
    const auto all = injectable_grammar_classes();
    if (std::find(all.begin(), all.end(), c) == all.end())
      throw InvalidArgument("no injector for grammar class '" + c + "'");
  }
  const auto pool = clean_sentences(Rng::derive(seed, 1).next_u64());
  Rng rng(seed);
  std::vector<GrammarExample> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto& cls = classes[out.size() % classes.size()];
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      if (auto s = inject_class(pool[rng.index(pool.size())], cls, rng)) {
        out.push_back({std::move(*s), cls});
        done = true;
      }
    }
    if (!done) throw InvalidArgument("could not inject '" + cls + "'");
  }
  rng.shuffle(out);
  return out;
}

std::vector<EmotionExample> synthesize_emotion_corpus(std::size_t n, std::uint64_t seed) {
  auto profile = SynthesisProfile::error_free();
  const auto pool = clean_sentences(Rng::derive(seed, 2).next_u64());
  LexiconEmotionJudge judge;
  Rng rng(seed);
  std::vector<EmotionExample> out;
  out.reserve(n);
  while (out.size() < n) {
    std::string s = pool[rng.index(pool.size())];
    if (rng.bernoulli(0.5)) {
      s += ' ';
      s += profile.emotional_phrases[rng.index(profile.emotional_phrases.size())];
    }
    auto label = judge.classify(s).value;
    out.push_back({std::move(s), label});
  }
  return out;
}

}  // namespace vicsim

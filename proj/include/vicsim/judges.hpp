#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vicsim/rng.hpp"

namespace vicsim {

enum class Emotion { positive, negative, neutral };

std::string_view to_string(Emotion e);
std::optional<Emotion> parse_emotion(std::string_view s);

struct EmotionLabel {
  Emotion value = Emotion::neutral;
  double confidence = 1.0;
};

// Word -> signed valence. Lookups use the same token normalization as
// count_sentiment_words.
class ValenceLexicon {
 public:
  ValenceLexicon() = default;
  explicit ValenceLexicon(std::unordered_map<std::string, int> entries);

  // "word valence" per line; '#' starts a comment. Throws IoError /
  // InvalidArgument.
  static ValenceLexicon load(const std::filesystem::path& path);
  static ValenceLexicon parse(std::string_view text);
  // Bundled lexicon/valence.txt, loaded once.
  static const ValenceLexicon& bundled();

  int valence(std::string_view token) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, int> entries_;
};

struct SentimentCounts {
  std::size_t positive_words = 0;
  std::size_t negative_words = 0;
  std::size_t tokens = 0;
};

// Whitespace tokens, lowercased and edge-punctuation stripped. Repeated words
// count each time. No negation handling.
SentimentCounts count_sentiment_words(std::string_view text, const ValenceLexicon& lexicon);

class EmotionJudge {
 public:
  virtual ~EmotionJudge() = default;
  virtual std::string name() const = 0;
  virtual EmotionLabel classify(std::string_view text) const = 0;
  // Concurrent calls the backend tolerates; 0 means unlimited.
  virtual std::size_t max_concurrency() const { return 0; }
};

// positive iff more positive than negative words, negative iff fewer,
// neutral otherwise. Confidence is always 1.
class LexiconEmotionJudge : public EmotionJudge {
 public:
  explicit LexiconEmotionJudge(const ValenceLexicon& lexicon = ValenceLexicon::bundled()) : lexicon_(&lexicon) {}
  std::string name() const override { return "lexicon"; }
  EmotionLabel classify(std::string_view text) const override;

 private:
  const ValenceLexicon* lexicon_;
};

// Returns the same label for every input.
class ConstantEmotionJudge : public EmotionJudge {
 public:
  explicit ConstantEmotionJudge(Emotion e) : label_{e, 1.0} {}
  std::string name() const override { return "constant"; }
  EmotionLabel classify(std::string_view) const override { return label_; }

 private:
  EmotionLabel label_;
};

// Grouping of the 28 fine-grained emotions into three classes. The
// "ambiguous" group of the source table folds into neutral.
class FineEmotionMap {
 public:
  static FineEmotionMap parse(std::string_view text);
  static const FineEmotionMap& bundled();

  // Throws InvalidArgument for an unknown label.
  Emotion map(std::string_view fine_label) const;
  std::vector<std::string> labels() const;

 private:
  std::map<std::string, Emotion, std::less<>> table_;
};

Emotion map_fine_emotions(std::string_view fine_label);

// ---------------------------------------------------------------------------
// Grammar

// Closed, ordered list of grammar categories. Index 0 is NoError.
class GrammarRegistry {
 public:
  static constexpr std::size_t kSize = 37;

  // Throws InvalidArgument unless the list holds exactly kSize distinct ids
  // including NoError.
  explicit GrammarRegistry(std::vector<std::string> ids);
  static GrammarRegistry parse(std::string_view text);
  static const GrammarRegistry& bundled();

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::size_t> index_of(std::string_view id) const;
  bool contains(std::string_view id) const { return index_of(id).has_value(); }

 private:
  std::vector<std::string> ids_;
};

inline constexpr std::string_view kNoError = "NoError";
inline constexpr std::string_view kPunctuationError = "PunctuationError";
inline constexpr std::string_view kCapitalizationError = "CapitalizationError";
inline constexpr std::string_view kSpacingError = "SpacingError";
inline constexpr std::string_view kUnbalancedDelimiter = "UnbalancedDelimiter";
inline constexpr std::string_view kAbbreviationError = "AbbreviationError";
inline constexpr std::string_view kRedundancyRepetition = "RedundancyRepetition";

// CamelCase id to lowercase words: "NoError" -> "no error".
std::string grammar_label_text(std::string_view id);

struct GrammarLabel {
  std::string value{kNoError};
  double confidence = 1.0;
};

class GrammarJudge {
 public:
  virtual ~GrammarJudge() = default;
  virtual std::string name() const = 0;
  virtual GrammarLabel classify(std::string_view text) const = 0;
  virtual std::size_t max_concurrency() const { return 0; }
};

// Surface checks shared by the rule judge and the style features. Text is
// trimmed first.
struct StyleFlags {
  bool missing_end_punctuation = false;
  bool lowercase_start = false;
  bool double_space = false;
  bool unbalanced_delimiter = false;
};

StyleFlags style_flags(std::string_view text);

// First matching rule wins:
//   1. no ending . ? ! (a closing quote or bracket may follow it)  PunctuationError
//   2. first letter lowercase                                       CapitalizationError
//   3. two consecutive spaces                                       SpacingError
//   4. unbalanced () [] {} or an odd number of double quotes        UnbalancedDelimiter
// Anything else, and empty text, is NoError.
class RuleGrammarJudge : public GrammarJudge {
 public:
  std::string name() const override { return "rule"; }
  GrammarLabel classify(std::string_view text) const override;
};

// ---------------------------------------------------------------------------
// Distillation data

struct EmotionExample {
  std::string text;
  Emotion label = Emotion::neutral;
};

struct GrammarExample {
  std::string text;
  std::string label;  // registry id
};

enum class DistillTask { emotion, grammar };

std::string_view to_string(DistillTask t);

struct InstructionPair {
  std::string instruction;
  std::string label;
  DistillTask task = DistillTask::emotion;
};

inline constexpr std::string_view kEmotionInstruction = "Classify the emotion: ";
inline constexpr std::string_view kGrammarInstruction = "Identify the grammar error: ";

// Instruction-formatted pairs from both corpora, shuffled together with a
// seeded permutation. Throws InvalidArgument when both corpora are empty or a
// grammar label is outside the registry.
std::vector<InstructionPair> distillation_dataset(const std::vector<EmotionExample>& emotion_corpus,
                                                  const std::vector<GrammarExample>& grammar_corpus,
                                                  std::uint64_t seed,
                                                  const GrammarRegistry& registry = GrammarRegistry::bundled());

// Clean sentences with rule-injected errors. classes lists the registry ids to
// draw from uniformly; supported: NoError, PunctuationError,
// CapitalizationError, SpacingError, UnbalancedDelimiter, AbbreviationError,
// RedundancyRepetition.
std::vector<GrammarExample> synthesize_grammar_corpus(std::size_t n, std::uint64_t seed,
                                                      const std::vector<std::string>& classes);
std::vector<std::string> injectable_grammar_classes();

// Sentences labeled by the lexicon judge, drawn from a small phrase bank.
std::vector<EmotionExample> synthesize_emotion_corpus(std::size_t n, std::uint64_t seed);

}  // namespace vicsim

#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vicsim {

enum class EntityType { PERSON, LOCATION, TIME, DATE, ORDINAL, ORGANIZATION, TITLE, NUMBER, MISC };

inline constexpr std::array<EntityType, 9> kAllEntityTypes = {
    EntityType::PERSON,       EntityType::LOCATION, EntityType::TIME,   EntityType::DATE, EntityType::ORDINAL,
    EntityType::ORGANIZATION, EntityType::TITLE,    EntityType::NUMBER, EntityType::MISC};

std::string_view to_string(EntityType type);
std::optional<EntityType> parse_entity_type(std::string_view s);

// Case-folded with every non-alphanumeric character removed.
std::string normalize_keyword(std::string_view surface);

struct TypedKeyword {
  EntityType type = EntityType::MISC;
  std::string surface;
  std::string normalized;

  TypedKeyword() = default;
  TypedKeyword(EntityType t, std::string s);
};

bool operator==(const TypedKeyword& a, const TypedKeyword& b);

enum class KeywordSource { scenario, utterance };

// Insertion-ordered keyword set, unique on (type, normalized).
class TypedKeywordSet {
 public:
  explicit TypedKeywordSet(KeywordSource source = KeywordSource::utterance) : source_(source) {}

  // Returns false when an equal (type, normalized) item is already present
  // or the surface normalizes to nothing.
  bool insert(TypedKeyword keyword);
  bool insert(EntityType type, std::string surface) { return insert(TypedKeyword(type, std::move(surface))); }

  const std::vector<TypedKeyword>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  KeywordSource source() const { return source_; }

  // Distinct normalized strings, in first-seen order.
  std::vector<std::string> normalized_strings() const;

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  KeywordSource source_;
  std::vector<TypedKeyword> items_;
};

// Pluggable named-entity recognizer.
class NerBackend {
 public:
  virtual ~NerBackend() = default;
  virtual std::string name() const = 0;
  // Raw (type, surface) mentions in text order; dedup happens in
  // extract_keywords.
  virtual std::vector<TypedKeyword> recognize(std::string_view text) const = 0;
};

// Deterministic lexicon-and-capitalization recognizer.
//
// Rules, in order, per token (mask tags are skipped entirely):
//   stopword or role word          -> skipped
//   clock pattern (10:30am, 2:00)  -> TIME
//   ordinal word or 2nd/3rd/...    -> ORDINAL
//   date word, weekday, month,
//   year or m/d date               -> DATE
//   digits or number word          -> NUMBER
//   time-of-day / duration word    -> TIME
//   title word                     -> TITLE, unless it is an honorific directly
//                                     before a capitalized name
//   ALL-CAPS token (>= 2 letters)  -> ORGANIZATION
//   mixed case starting lowercase  -> MISC (iPhone)
//   capitalized, not sentence-initial: grouped into runs; a run ending in a
//   location suffix is LOCATION, an organization suffix ORGANIZATION, else
//   PERSON. Every token of a run is emitted on its own.
class RuleBasedNer : public NerBackend {
 public:
  std::string name() const override { return "rule"; }
  std::vector<TypedKeyword> recognize(std::string_view text) const override;
};

// Runs an external command per text: the text goes to stdin, and each output
// line "TYPE<TAB>surface" is one mention. The command comes from
// VICSIM_NER_COMMAND unless given explicitly.
class ExternalNer : public NerBackend {
 public:
  explicit ExternalNer(std::string command = {});
  std::string name() const override { return "external"; }
  std::vector<TypedKeyword> recognize(std::string_view text) const override;

 private:
  std::string command_;
};

// "rule" or "external"; throws BackendUnavailable otherwise or when the
// external backend has no command configured.
std::unique_ptr<NerBackend> make_ner_backend(std::string_view name);

TypedKeywordSet extract_keywords(std::string_view text, const NerBackend& backend,
                                 KeywordSource source = KeywordSource::utterance);

// Prose case summary with its extracted ground-truth keywords.
struct Scenario {
  std::string summary;
  TypedKeywordSet keywords{KeywordSource::scenario};
};

Scenario make_scenario(std::string summary, const NerBackend& backend);

// ---------------------------------------------------------------------------
// Overlap metrics

struct OverlapCounts {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t truth = 0;
};

struct OverlapScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::string> matched;  // normalized strings, utterance order
  OverlapCounts counts;
};

enum class MatchMode {
  untyped,  // normalized string equality, entity type ignored
  typed,    // (type, normalized) equality
};

// Precision is 0 for an empty utterance set. Recall is 0 for an empty truth
// set; callers that aggregate skip those (see corpus_faithfulness).
OverlapScore match_keywords(const TypedKeywordSet& utterance, const TypedKeywordSet& truth,
                            MatchMode mode = MatchMode::untyped);

OverlapScore score_from_counts(const OverlapCounts& counts);

double f1_score(double precision, double recall);

struct ResponsePair {
  std::string utterance;
  std::string scenario;
};

struct FaithfulnessItem {
  std::size_t index = 0;
  bool skipped = false;  // scenario had no keywords
  OverlapScore score;
};

enum class Averaging { micro, macro };

struct FaithfulnessSummary {
  OverlapScore micro;
  OverlapScore macro;
  std::vector<FaithfulnessItem> items;
  std::size_t skipped = 0;

  const OverlapScore& aggregate(Averaging a = Averaging::micro) const { return a == Averaging::micro ? micro : macro; }
};

// Micro- and macro-averaged overlap of precomputed counts. Items with an empty
// truth set must already be excluded.
FaithfulnessSummary aggregate_overlap(const std::vector<OverlapCounts>& counts);

// Throws InvalidArgument on empty input or when every scenario lacks keywords.
FaithfulnessSummary corpus_faithfulness(const std::vector<ResponsePair>& responses, const NerBackend& backend,
                                        MatchMode mode = MatchMode::untyped);

struct KeywordPair {
  TypedKeywordSet utterance;
  TypedKeywordSet truth{KeywordSource::scenario};
};

// A response is flagged when its precision is strictly below threshold and
// it mentions at least one entity absent from the truth set.
bool is_low_precision(const OverlapScore& score, double threshold = 0.4);
std::vector<std::size_t> low_precision_flags(const std::vector<KeywordPair>& responses, double threshold = 0.4,
                                             MatchMode mode = MatchMode::untyped);

}  // namespace vicsim

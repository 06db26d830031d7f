#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vicsim/rng.hpp"

namespace vicsim {

enum class Role { user, dispatcher };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view s);

// The nine incident categories retained for study.
enum class EventType {
  SuspiciousActivity,
  AccidentTrafficParking,
  DrugsAlcohol,
  EmergencyMessage,
  FacilitiesMaintenance,
  HarassmentAbuse,
  MentalHealth,
  NoiseDisturbance,
  TheftLostItem,
};

inline constexpr std::array<EventType, 9> kAllEventTypes = {
    EventType::SuspiciousActivity, EventType::AccidentTrafficParking, EventType::DrugsAlcohol,
    EventType::EmergencyMessage,   EventType::FacilitiesMaintenance,  EventType::HarassmentAbuse,
    EventType::MentalHealth,       EventType::NoiseDisturbance,       EventType::TheftLostItem,
};

std::string_view to_string(EventType type);
std::optional<EventType> parse_event_type(std::string_view s);

// Calendar date at day resolution.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static std::optional<Date> parse(std::string_view iso);  // "YYYY-MM-DD"
  std::string to_string() const;
  auto operator<=>(const Date&) const = default;
};

struct Utterance {
  Role role = Role::user;
  std::string text;
  std::size_t index = 0;
};

struct Dialogue {
  std::string id;
  EventType event_type = EventType::SuspiciousActivity;
  Date timestamp;
  std::optional<std::string> scenario;
  std::vector<Utterance> utterances;

  std::size_t user_count() const;
  std::size_t dispatcher_count() const;
  // At least one user and one dispatcher utterance.
  bool training_eligible() const;
};

bool operator==(const Utterance& a, const Utterance& b);
bool operator==(const Dialogue& a, const Dialogue& b);

// Checks the per-dialogue invariants; returns a description of the first
// violation, or nullopt.
std::optional<std::string> validate(const Dialogue& dialogue);

// ---------------------------------------------------------------------------
// JSONL ingestion

enum class RejectionRule {
  malformed_json,
  schema_violation,
  unknown_event_type,
  test_entry,  // "Test" tip types are eliminated from the corpus
  invalid_utterance,
};

std::string_view to_string(RejectionRule rule);

struct Rejection {
  std::size_t line = 0;  // 1-based
  RejectionRule rule = RejectionRule::schema_violation;
  std::string reason;
};

struct LoadResult {
  std::vector<Dialogue> dialogues;
  std::vector<Rejection> rejections;
};

enum class CorpusFormat { jsonl };

// Throws IoError when the file cannot be read. Invalid records land in the
// rejection report.
LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::jsonl);
LoadResult parse_corpus(std::string_view jsonl);

// Canonical single-line JSON for one dialogue (no trailing newline).
std::string serialize_dialogue(const Dialogue& dialogue);
std::string serialize_corpus(const std::vector<Dialogue>& dialogues);
void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);

// ---------------------------------------------------------------------------
// Filtering

struct FilterOptions {
  std::size_t min_utterances = 3;
  Date from{2018, 1, 1};
  Date to{2019, 12, 31};
};

// Keeps dialogues with at least min_utterances utterances dated within
// [from, to]. Throws InvalidArgument for an inverted range.
std::vector<Dialogue> filter_corpus(const std::vector<Dialogue>& dialogues,
                                    const FilterOptions& options = {});

// ---------------------------------------------------------------------------
// Turn counting

enum class TurnCounting {
  utterance,  // the utterance index itself
  exchange,   // index of the maximal same-role run containing the utterance
};

std::size_t turn_number(const Dialogue& dialogue, std::size_t utterance_index,
                        TurnCounting counting = TurnCounting::utterance);

// ---------------------------------------------------------------------------
// Mask tags

struct Span {
  std::size_t begin = 0;  // half-open character range
  std::size_t end = 0;
  auto operator<=>(const Span&) const = default;
};

struct MaskTag {
  std::size_t utterance = 0;
  std::string tag;  // including brackets, e.g. "[FAC]"
  Span span;
};

bool is_mask_tag(std::string_view s);
std::vector<MaskTag> find_mask_tags(std::string_view text, std::size_t utterance = 0);
std::vector<MaskTag> enumerate_mask_tags(const Dialogue& dialogue);

// Supplies replacement text for a tag. Implementations throw when a tag has
// no filler entry.
class MaskFiller {
 public:
  virtual ~MaskFiller() = default;
  // occurrence counts prior fills of the same tag in the dialogue.
  virtual std::string fill(std::string_view tag, std::size_t occurrence) = 0;
};

// Deterministic lookup table keyed by the bare tag name ("LOCATION").
// Multiple candidates rotate with each occurrence.
class TableFiller : public MaskFiller {
 public:
  TableFiller() = default;
  explicit TableFiller(std::map<std::string, std::vector<std::string>> table);
  TableFiller& add(std::string tag, std::string replacement);
  std::string fill(std::string_view tag, std::size_t occurrence) override;

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

// Wraps any text-producing callback, e.g. a generator adapter.
class CallbackFiller : public MaskFiller {
 public:
  using Callback = std::function<std::string(std::string_view tag, std::size_t occurrence)>;
  explicit CallbackFiller(Callback callback) : callback_(std::move(callback)) {}
  std::string fill(std::string_view tag, std::size_t occurrence) override {
    return callback_(tag, occurrence);
  }

 private:
  Callback callback_;
};

struct FillOptions {
  // Same tag gets the same replacement everywhere in a dialogue.
  bool consistent = true;
};

struct FillResult {
  Dialogue dialogue;
  // (utterance index, original span) -> replacement
  std::map<std::pair<std::size_t, Span>, std::string> provenance;
};

FillResult fill_masks(const Dialogue& dialogue, MaskFiller& filler, const FillOptions& options = {});

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
  double train = 0.8;
  double eval = 0.2;
};

struct CorpusSplit {
  std::vector<Dialogue> train;
  std::vector<Dialogue> eval;
};

// Stratified by event type, deterministic given seed. Input order is kept
// within each side.
CorpusSplit split_corpus(const std::vector<Dialogue>& dialogues, SplitRatios ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic corpora

enum class InjectedError {
  none,
  missing_end_punctuation,
  lowercase_start,
  double_space,
  unclosed_bracket,
};

inline constexpr std::array<InjectedError, 5> kAllInjectedErrors = {
    InjectedError::none, InjectedError::missing_end_punctuation, InjectedError::lowercase_start,
    InjectedError::double_space, InjectedError::unclosed_bracket};

std::string_view to_string(InjectedError e);

struct EventTemplates {
  std::vector<std::string> scenarios;  // may contain {PERSON} {PLACE} {TIME} ... slots
  std::vector<std::string> openings;   // first user message
};

struct SynthesisProfile {
  std::map<EventType, EventTemplates> events;
  // Slot value pools.
  std::map<std::string, std::vector<std::string>> slots;
  // Slot-specific user answers keyed by slot name, and the dispatcher
  // questions that elicit them.
  std::map<std::string, std::vector<std::string>> answers;
  std::map<std::string, std::vector<std::string>> questions;
  std::vector<std::string> fillers;           // slot-free user replies
  std::vector<std::string> emotional_phrases;  // appended when emotion fires
  std::vector<std::string> dispatcher_closers;

  // Per-utterance injection probabilities; at most one error per utterance.
  double p_missing_end_punctuation = 0.0;
  double p_lowercase_start = 0.0;
  double p_double_space = 0.0;
  double p_unclosed_bracket = 0.0;
  double emotion_word_rate = 0.2;
  double mask_tag_rate = 0.05;
  double consecutive_user_rate = 0.15;
  double answer_rate = 0.75;  // user answers the dispatcher's slot question
  double target_mean_words = 6.48;
  std::size_t min_utterances = 3;
  std::size_t max_utterances = 12;
  Date from{2018, 1, 1};
  Date to{2019, 12, 31};

  static SynthesisProfile default_profile();
  // Same templates, every error rate zero.
  static SynthesisProfile error_free();
};

struct InjectionRecord {
  std::string dialogue_id;
  std::size_t utterance = 0;
  InjectedError error = InjectedError::none;
};

// Throws InvalidArgument when n_dialogues < 1. When log is non-null, one
// record per user utterance is appended.
std::vector<Dialogue> synthesize_corpus(std::size_t n_dialogues, std::uint64_t seed,
                                        const SynthesisProfile& profile = SynthesisProfile::default_profile(),
                                        std::vector<InjectionRecord>* log = nullptr);

// Applies a single error to a clean sentence. Returns nullopt when the
// sentence offers no place for that error.
std::optional<std::string> inject_error(std::string_view clean, InjectedError error, Rng& rng);

}  // namespace vicsim

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vicsim/corpus.hpp"
#include "vicsim/judges.hpp"
#include "vicsim/keyinfo.hpp"
#include "vicsim/prompting.hpp"

namespace vicsim {

// ---------------------------------------------------------------------------
// Statistics

// Two-sided p-value of a Student t statistic.
double student_t_two_sided_p(double t, double df);

struct Correlation {
  std::size_t n = 0;
  bool zero_variance = false;  // r and p_value unset when true
  std::optional<double> r;
  std::optional<double> p_value;  // t test on n - 2 degrees of freedom; unset for n < 3
};

// Throws InvalidArgument on a length mismatch or fewer than 2 points.
Correlation pearson(const std::vector<double>& x, const std::vector<double>& y);

struct PairedTest {
  std::size_t n = 0;
  double mean_difference = 0.0;
  bool zero_variance = false;  // t and p_value unset when true
  std::optional<double> t;
  std::optional<double> p_value;
};

// Paired t test on a - b. Throws InvalidArgument on a length mismatch or
// n < 2.
PairedTest paired_rating_test(const std::vector<double>& a, const std::vector<double>& b);

// Whitespace tokens after trimming.
std::size_t word_count(std::string_view text);

// ---------------------------------------------------------------------------
// Emotion trajectories

enum class ResponseSource { human, model };
std::string_view to_string(ResponseSource s);

// index / (total - 1); 0 for single-utterance dialogues.
double utterance_progress(std::size_t index, std::size_t total);
// Equal-width bins over [0, 1] with the last bin closed.
std::size_t progress_bin(double progress, std::size_t n_bins);

struct TrajectoryRecord {
  std::string dialogue_id;
  std::size_t utterance = 0;
  double progress = 0.0;
  std::size_t bin = 0;
  Emotion emotion = Emotion::neutral;
};

struct TrajectoryBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
  double negative_rate = 0.0;
  double positive_rate = 0.0;
  double neutral_rate = 0.0;
};

struct EmotionTrajectory {
  ResponseSource source = ResponseSource::human;
  std::vector<TrajectoryBin> bins;
  std::vector<TrajectoryRecord> records;
};

// User utterances of every dialogue, labelled by judge. Throws
// InvalidArgument when n_bins is 0.
EmotionTrajectory emotion_trajectory(const std::vector<Dialogue>& dialogues, const EmotionJudge& judge,
                                     ResponseSource source = ResponseSource::human, std::size_t n_bins = 5);
std::vector<TrajectoryBin> aggregate_trajectory(const std::vector<TrajectoryRecord>& records, std::size_t n_bins);

// ---------------------------------------------------------------------------
// Length and emotion words

struct LengthRecord {
  std::size_t words = 0;
  std::size_t positive_words = 0;
  std::size_t negative_words = 0;
};

// Word-count buckets 1-5, 6-10, 11-15, 16-20, 21+ and emotion-word counts
// 0, 1, 2, 3+.
inline constexpr std::size_t kLengthBuckets = 5;
inline constexpr std::size_t kEmotionWordBuckets = 4;
std::size_t length_bucket(std::size_t words);
std::string length_bucket_label(std::size_t bucket);

struct LengthEmotionStats {
  std::size_t n = 0;
  double mean_words = 0.0;
  // Length against positive + negative word count.
  Correlation length_vs_emotion_words;
  // [length bucket][emotion-word bucket] utterance counts.
  std::vector<std::vector<std::size_t>> histogram;
  std::vector<LengthRecord> records;
};

// Utterances shorter than min_words are left out. Throws InvalidArgument
// when nothing remains.
LengthEmotionStats length_emotion_stats(const std::vector<std::string>& utterances, const ValenceLexicon& lexicon,
                                        std::size_t min_words = 0);

// ---------------------------------------------------------------------------
// Successive responses

struct SuccessiveRecord {
  std::string dialogue_id;
  std::size_t utterance = 0;
  std::size_t positive_words = 0;
  std::size_t negative_words = 0;
};

struct SuccessiveStats {
  std::size_t n = 0;  // 0 means no successive utterance was found
  std::optional<double> avg_positive;
  std::optional<double> avg_negative;
  std::vector<SuccessiveRecord> records;
};

// User utterances whose predecessor is also a user utterance.
SuccessiveStats successive_emotion_stats(const std::vector<Dialogue>& dialogues, const ValenceLexicon& lexicon);

// ---------------------------------------------------------------------------
// Hallucination and emotion

struct HallucinationStats {
  std::size_t n_responses = 0;
  std::size_t n_flagged = 0;
  std::size_t n_flagged_negative = 0;
  std::optional<double> negative_fraction;  // unset when nothing is flagged
  std::vector<std::size_t> flagged;
};

// flags are indices into responses, as from low_precision_flags. Throws
// InvalidArgument on an out-of-range index.
HallucinationStats hallucination_emotion_association(const std::vector<std::string>& responses,
                                                     const std::vector<std::size_t>& flags,
                                                     const EmotionJudge& judge);

// ---------------------------------------------------------------------------
// Grammar distributions

struct GrammarDistribution {
  std::vector<std::string> labels;  // registry order
  std::vector<std::size_t> counts;
  std::vector<double> proportions;
  std::size_t n = 0;
  double no_error = 0.0;
  std::vector<std::string> records;  // label per utterance
};

// Throws InvalidArgument on empty input or a label outside the registry.
GrammarDistribution grammar_distribution(const std::vector<std::string>& utterances, const GrammarJudge& judge,
                                         const GrammarRegistry& registry = GrammarRegistry::bundled());
GrammarDistribution grammar_distribution_from_labels(const std::vector<std::string>& labels,
                                                     const GrammarRegistry& registry = GrammarRegistry::bundled());

// Pearson over paired category proportions. Throws InvalidArgument when the
// label lists differ or there are fewer than 3 categories.
Correlation distribution_correlation(const GrammarDistribution& a, const GrammarDistribution& b);

// ---------------------------------------------------------------------------
// Human evaluation survey

inline constexpr std::size_t kSurveySources = 3;
inline const std::vector<std::string> kSurveyScales = {"coherency", "consistency", "level_of_detail",
                                                       "human_likeness"};

struct SurveyIncident {
  std::string id;
  std::vector<Turn> history;
  std::map<std::string, std::string> responses;  // source -> response
};

struct SurveyExport {
  std::string form_csv;          // rater-facing, no provenance
  nlohmann::ordered_json answer_key;
  std::vector<std::vector<std::size_t>> orders;  // per item, source index shown at each position
};

// sources must name exactly kSurveySources distinct providers, each present
// in every incident. Throws InvalidArgument otherwise.
SurveyExport export_survey(const std::vector<SurveyIncident>& incidents, const std::vector<std::string>& sources,
                           std::uint64_t seed);
// Writes survey_form.csv and survey_key.json.
void write_survey(const SurveyExport& survey, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Reports

struct RunMetadata {
  std::string source = "human";
  std::string config_hash;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> backends;
};

class ReportBuilder {
 public:
  explicit ReportBuilder(RunMetadata metadata) : metadata_(std::move(metadata)) {}

  ReportBuilder& faithfulness(const FaithfulnessSummary& f);
  ReportBuilder& trajectory(const EmotionTrajectory& t);
  ReportBuilder& length(const LengthEmotionStats& s);
  ReportBuilder& successive(const SuccessiveStats& s);
  ReportBuilder& hallucination(const HallucinationStats& h);
  ReportBuilder& grammar(const GrammarDistribution& g);
  ReportBuilder& grammar_correlation(const std::string& reference, const Correlation& c);

  bool empty() const;
  // Throws InvalidArgument when no metric was added. timestamp goes into
  // generated_at; leave it empty for a null field.
  nlohmann::ordered_json build(const std::string& timestamp = "") const;
  // report.json plus trajectory.csv, grammar_dist.csv and len_emotion.csv for
  // the sections present.
  void write(const std::filesystem::path& dir, const std::string& timestamp = "") const;

 private:
  RunMetadata metadata_;
  std::optional<FaithfulnessSummary> faithfulness_;
  std::optional<EmotionTrajectory> trajectory_;
  std::optional<LengthEmotionStats> length_;
  std::optional<SuccessiveStats> successive_;
  std::optional<HallucinationStats> hallucination_;
  std::optional<GrammarDistribution> grammar_;
  std::optional<std::pair<std::string, Correlation>> grammar_correlation_;
};

std::string trajectory_csv(const EmotionTrajectory& t);
std::string grammar_csv(const GrammarDistribution& g);
std::string length_csv(const LengthEmotionStats& s);

nlohmann::ordered_json to_json(const Correlation& c);
nlohmann::ordered_json to_json(const OverlapScore& s);

// Bundled documentation numbers from the original study.
const nlohmann::json& reference_card();

// UTC now as ISO-8601.
std::string utc_timestamp();

}  // namespace vicsim

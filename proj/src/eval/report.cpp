#include <cstdio>
#include <ctime>

#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/eval.hpp"

namespace vicsim {

namespace {

using ojson = nlohmann::ordered_json;

template <typename T>
ojson opt(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

ojson faithfulness_json(const FaithfulnessSummary& f) {
  ojson j;
  j["micro"] = to_json(f.micro);
  j["macro"] = to_json(f.macro);
  j["skipped"] = f.skipped;
  auto& items = j["records"] = ojson::array();
  for (const auto& it : f.items) {
    items.push_back({{"index", it.index},
                     {"skipped", it.skipped},
                     {"matched", it.score.counts.matched},
                     {"predicted", it.score.counts.predicted},
                     {"truth", it.score.counts.truth}});
  }
  return j;
}

ojson trajectory_json(const EmotionTrajectory& t) {
  ojson j;
  j["source"] = std::string(to_string(t.source));
  j["n_bins"] = t.bins.size();
  auto& bins = j["bins"] = ojson::array();
  for (const auto& b : t.bins) {
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"n", b.n},
                    {"negative_rate", b.negative_rate},
                    {"positive_rate", b.positive_rate},
                    {"neutral_rate", b.neutral_rate}});
  }
  auto& recs = j["records"] = ojson::array();
  for (const auto& r : t.records) {
    recs.push_back({{"dialogue", r.dialogue_id},
                    {"utterance", r.utterance},
                    {"progress", r.progress},
                    {"bin", r.bin},
                    {"emotion", std::string(to_string(r.emotion))}});
  }
  return j;
}

ojson length_json(const LengthEmotionStats& s) {
  ojson j;
  j["n"] = s.n;
  j["mean_words"] = s.mean_words;
  j["length_vs_emotion_words"] = to_json(s.length_vs_emotion_words);
  auto& hist = j["histogram"] = ojson::array();
  for (std::size_t b = 0; b < s.histogram.size(); ++b)
    hist.push_back({{"length", length_bucket_label(b)}, {"emotion_word_counts", s.histogram[b]}});
  auto& recs = j["records"] = ojson::array();
  for (const auto& r : s.records)
    recs.push_back({{"words", r.words}, {"positive_words", r.positive_words}, {"negative_words", r.negative_words}});
  return j;
}

ojson successive_json(const SuccessiveStats& s) {
  ojson j;
  j["n"] = s.n;
  j["avg_positive"] = opt(s.avg_positive);
  j["avg_negative"] = opt(s.avg_negative);
  auto& recs = j["records"] = ojson::array();
  for (const auto& r : s.records) {
    recs.push_back({{"dialogue", r.dialogue_id},
                    {"utterance", r.utterance},
                    {"positive_words", r.positive_words},
                    {"negative_words", r.negative_words}});
  }
  return j;
}

ojson hallucination_json(const HallucinationStats& h) {
  return {{"n_responses", h.n_responses},
          {"n_flagged", h.n_flagged},
          {"n_flagged_negative", h.n_flagged_negative},
          {"negative_fraction", opt(h.negative_fraction)},
          {"flagged", h.flagged}};
}

ojson grammar_json(const GrammarDistribution& g) {
  ojson j;
  j["n"] = g.n;
  j["no_error"] = g.no_error;
  j["labels"] = g.labels;
  j["counts"] = g.counts;
  j["proportions"] = g.proportions;
  j["records"] = g.records;
  return j;
}

}  // namespace

ojson to_json(const Correlation& c) {
  return {{"n", c.n}, {"zero_variance", c.zero_variance}, {"r", opt(c.r)}, {"p_value", opt(c.p_value)}};
}

ojson to_json(const OverlapScore& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"matched", s.counts.matched},
          {"predicted", s.counts.predicted},
          {"truth", s.counts.truth}};
}

ReportBuilder& ReportBuilder::faithfulness(const FaithfulnessSummary& f) {
  faithfulness_ = f;
  return *this;
}
ReportBuilder& ReportBuilder::trajectory(const EmotionTrajectory& t) {
  trajectory_ = t;
  return *this;
}
ReportBuilder& ReportBuilder::length(const LengthEmotionStats& s) {
  length_ = s;
  return *this;
}
ReportBuilder& ReportBuilder::successive(const SuccessiveStats& s) {
  successive_ = s;
  return *this;
}
ReportBuilder& ReportBuilder::hallucination(const HallucinationStats& h) {
  hallucination_ = h;
  return *this;
}
ReportBuilder& ReportBuilder::grammar(const GrammarDistribution& g) {
  grammar_ = g;
  return *this;
}
ReportBuilder& ReportBuilder::grammar_correlation(const std::string& reference, const Correlation& c) {
  grammar_correlation_ = std::make_pair(reference, c);
  return *this;
}

bool ReportBuilder::empty() const {
  return !faithfulness_ && !trajectory_ && !length_ && !successive_ && !hallucination_ && !grammar_ &&
         !grammar_correlation_;
}

ojson ReportBuilder::build(const std::string& timestamp) const {
  if (empty()) throw InvalidArgument("report has no metrics");
  ojson j;
  j["schema_version"] = 1;
  j["generated_at"] = timestamp.empty() ? ojson(nullptr) : ojson(timestamp);
  j["source"] = metadata_.source;
  j["provenance"] = {{"config_hash", metadata_.config_hash},
                     {"seeds", metadata_.seeds},
                     {"backends", metadata_.backends}};
  j["faithfulness"] = faithfulness_ ? faithfulness_json(*faithfulness_) : ojson(nullptr);
  j["emotion_trajectory"] = trajectory_ ? trajectory_json(*trajectory_) : ojson(nullptr);
  j["length_emotion"] = length_ ? length_json(*length_) : ojson(nullptr);
  j["successive"] = successive_ ? successive_json(*successive_) : ojson(nullptr);
  j["hallucination"] = hallucination_ ? hallucination_json(*hallucination_) : ojson(nullptr);
  j["grammar"] = grammar_ ? grammar_json(*grammar_) : ojson(nullptr);
  if (grammar_correlation_) {
    auto c = to_json(grammar_correlation_->second);
    c["reference"] = grammar_correlation_->first;
    j["grammar_correlation"] = std::move(c);
  } else {
    j["grammar_correlation"] = nullptr;
  }
  return j;
}

void ReportBuilder::write(const std::filesystem::path& dir, const std::string& timestamp) const {
  const auto report = build(timestamp);
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  if (trajectory_) write_file_atomic(dir / "trajectory.csv", trajectory_csv(*trajectory_));
  if (grammar_) write_file_atomic(dir / "grammar_dist.csv", grammar_csv(*grammar_));
  if (length_) write_file_atomic(dir / "len_emotion.csv", length_csv(*length_));
}

std::string trajectory_csv(const EmotionTrajectory& t) {
  std::string out = "source,bin,lo,hi,n,negative_rate,positive_rate,neutral_rate\n";
  for (std::size_t b = 0; b < t.bins.size(); ++b) {
    const auto& x = t.bins[b];
    out += std::string(to_string(t.source)) + "," + std::to_string(b) + "," + fmt(x.lo) + "," + fmt(x.hi) + "," +
           std::to_string(x.n) + "," + fmt(x.negative_rate) + "," + fmt(x.positive_rate) + "," +
           fmt(x.neutral_rate) + "\n";
  }
  return out;
}

std::string grammar_csv(const GrammarDistribution& g) {
  std::string out = "label,count,proportion\n";
  for (std::size_t i = 0; i < g.labels.size(); ++i)
    out += g.labels[i] + "," + std::to_string(g.counts[i]) + "," + fmt(g.proportions[i]) + "\n";
  return out;
}

std::string length_csv(const LengthEmotionStats& s) {
  std::string out = "length_bucket";
  for (std::size_t e = 0; e < kEmotionWordBuckets; ++e)
    out += ",emotion_words_" + std::to_string(e) + (e + 1 == kEmotionWordBuckets ? "+" : "");
  out += "\n";
  for (std::size_t b = 0; b < s.histogram.size(); ++b) {
    out += length_bucket_label(b);
    for (auto c : s.histogram[b]) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

const nlohmann::json& reference_card() {
  static const nlohmann::json card = nlohmann::json::parse(read_file(asset_path("reference_card.json")));
  return card;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace vicsim

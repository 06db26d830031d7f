#include <algorithm>
#include <array>
#include <cmath>

#include "vicsim/error.hpp"
#include "vicsim/eval.hpp"

namespace vicsim {

std::string_view to_string(ResponseSource s) { return s == ResponseSource::human ? "human" : "model"; }

double utterance_progress(std::size_t index, std::size_t total) {
  if (total <= 1) return 0.0;
  if (index >= total) throw InvalidArgument("utterance index out of range");
  return static_cast<double>(index) / static_cast<double>(total - 1);
}

std::size_t progress_bin(double progress, std::size_t n_bins) {
  if (n_bins == 0) throw InvalidArgument("n_bins must be positive");
  if (!(progress >= 0.0 && progress <= 1.0)) throw InvalidArgument("progress must be in [0, 1]");
  return std::min(n_bins - 1, static_cast<std::size_t>(std::floor(progress * static_cast<double>(n_bins))));
}

namespace {

// floor(index * n_bins / (total - 1)) without rounding error.
std::size_t exact_bin(std::size_t index, std::size_t total, std::size_t n_bins) {
  if (total <= 1) return 0;
  return std::min(n_bins - 1, index * n_bins / (total - 1));
}

}  // namespace

std::vector<TrajectoryBin> aggregate_trajectory(const std::vector<TrajectoryRecord>& records, std::size_t n_bins) {
  if (n_bins == 0) throw InvalidArgument("n_bins must be positive");
  std::vector<TrajectoryBin> bins(n_bins);
  std::vector<std::array<std::size_t, 3>> counts(n_bins, {0, 0, 0});
  for (const auto& r : records) {
    if (r.bin >= n_bins) throw InvalidArgument("trajectory record bin out of range");
    ++counts[r.bin][static_cast<std::size_t>(r.emotion)];
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& bin = bins[b];
    bin.lo = static_cast<double>(b) / static_cast<double>(n_bins);
    bin.hi = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    const auto& c = counts[b];
    bin.n = c[0] + c[1] + c[2];
    if (bin.n == 0) continue;
    const double n = static_cast<double>(bin.n);
    bin.positive_rate = static_cast<double>(c[static_cast<std::size_t>(Emotion::positive)]) / n;
    bin.negative_rate = static_cast<double>(c[static_cast<std::size_t>(Emotion::negative)]) / n;
    bin.neutral_rate = static_cast<double>(c[static_cast<std::size_t>(Emotion::neutral)]) / n;
  }
  return bins;
}

EmotionTrajectory emotion_trajectory(const std::vector<Dialogue>& dialogues, const EmotionJudge& judge,
                                     ResponseSource source, std::size_t n_bins) {
  if (n_bins == 0) throw InvalidArgument("n_bins must be positive");
  EmotionTrajectory t;
  t.source = source;
  for (const auto& d : dialogues) {
    const auto total = d.utterances.size();
    for (const auto& u : d.utterances) {
      if (u.role != Role::user) continue;
      t.records.push_back({d.id, u.index, utterance_progress(u.index, total), exact_bin(u.index, total, n_bins),
                           judge.classify(u.text).value});
    }
  }
  t.bins = aggregate_trajectory(t.records, n_bins);
  return t;
}

std::size_t length_bucket(std::size_t words) {
  if (words == 0) return 0;
  return std::min(kLengthBuckets - 1, (words - 1) / 5);
}

std::string length_bucket_label(std::size_t bucket) {
  if (bucket >= kLengthBuckets) throw InvalidArgument("length bucket out of range");
  if (bucket + 1 == kLengthBuckets) return std::to_string(bucket * 5 + 1) + "+";
  return std::to_string(bucket * 5 + 1) + "-" + std::to_string(bucket * 5 + 5);
}

LengthEmotionStats length_emotion_stats(const std::vector<std::string>& utterances, const ValenceLexicon& lexicon,
                                        std::size_t min_words) {
  LengthEmotionStats s;
  s.histogram.assign(kLengthBuckets, std::vector<std::size_t>(kEmotionWordBuckets, 0));
  std::vector<double> len, emo;
  double total_words = 0;
  for (const auto& u : utterances) {
    const auto words = word_count(u);
    if (words < min_words) continue;
    const auto c = count_sentiment_words(u, lexicon);
    s.records.push_back({words, c.positive_words, c.negative_words});
    const auto emotional = c.positive_words + c.negative_words;
    ++s.histogram[length_bucket(words)][std::min(kEmotionWordBuckets - 1, emotional)];
    len.push_back(static_cast<double>(words));
    emo.push_back(static_cast<double>(emotional));
    total_words += static_cast<double>(words);
  }
  if (s.records.empty()) throw InvalidArgument("length_emotion_stats: no utterances");
  s.n = s.records.size();
  s.mean_words = total_words / static_cast<double>(s.n);
  if (s.n >= 2) {
    s.length_vs_emotion_words = pearson(len, emo);
  } else {
    s.length_vs_emotion_words.n = s.n;
    s.length_vs_emotion_words.zero_variance = true;
  }
  return s;
}

SuccessiveStats successive_emotion_stats(const std::vector<Dialogue>& dialogues, const ValenceLexicon& lexicon) {
  SuccessiveStats s;
  double pos = 0, neg = 0;
  for (const auto& d : dialogues) {
    for (std::size_t i = 1; i < d.utterances.size(); ++i) {
      const auto& u = d.utterances[i];
      if (u.role != Role::user || d.utterances[i - 1].role != Role::user) continue;
      const auto c = count_sentiment_words(u.text, lexicon);
      s.records.push_back({d.id, u.index, c.positive_words, c.negative_words});
      pos += static_cast<double>(c.positive_words);
      neg += static_cast<double>(c.negative_words);
    }
  }
  s.n = s.records.size();
  if (s.n) {
    s.avg_positive = pos / static_cast<double>(s.n);
    s.avg_negative = neg / static_cast<double>(s.n);
  }
  return s;
}

HallucinationStats hallucination_emotion_association(const std::vector<std::string>& responses,
                                                     const std::vector<std::size_t>& flags,
                                                     const EmotionJudge& judge) {
  HallucinationStats h;
  h.n_responses = responses.size();
  std::vector<bool> seen(responses.size(), false);
  for (auto i : flags) {
    if (i >= responses.size()) throw InvalidArgument("flag index out of range");
    if (seen[i]) continue;
    seen[i] = true;
    h.flagged.push_back(i);
    h.n_flagged_negative += judge.classify(responses[i]).value == Emotion::negative;
  }
  std::sort(h.flagged.begin(), h.flagged.end());
  h.n_flagged = h.flagged.size();
  if (h.n_flagged)
    h.negative_fraction = static_cast<double>(h.n_flagged_negative) / static_cast<double>(h.n_flagged);
  return h;
}

GrammarDistribution grammar_distribution_from_labels(const std::vector<std::string>& labels,
                                                     const GrammarRegistry& registry) {
  if (labels.empty()) throw InvalidArgument("grammar_distribution: no utterances");
  GrammarDistribution g;
  g.labels = registry.ids();
  g.counts.assign(registry.size(), 0);
  for (const auto& l : labels) {
    auto i = registry.index_of(l);
    if (!i) throw InvalidArgument("grammar label '" + l + "' is not in the registry");
    ++g.counts[*i];
  }
  g.n = labels.size();
  for (auto c : g.counts) g.proportions.push_back(static_cast<double>(c) / static_cast<double>(g.n));
  g.no_error = g.proportions[*registry.index_of(kNoError)];
  g.records = labels;
  return g;
}

GrammarDistribution grammar_distribution(const std::vector<std::string>& utterances, const GrammarJudge& judge,
                                         const GrammarRegistry& registry) {
  std::vector<std::string> labels;
  labels.reserve(utterances.size());
  for (const auto& u : utterances) labels.push_back(judge.classify(u).value);
  return grammar_distribution_from_labels(labels, registry);
}

Correlation distribution_correlation(const GrammarDistribution& a, const GrammarDistribution& b) {
  if (a.labels != b.labels) throw InvalidArgument("distributions use different registries");
  if (a.labels.size() < 3) throw InvalidArgument("need at least 3 categories");
  return pearson(a.proportions, b.proportions);
}

}  // namespace vicsim

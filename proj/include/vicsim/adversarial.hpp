#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vicsim/config.hpp"
#include "vicsim/judges.hpp"
#include "vicsim/keyinfo.hpp"
#include "vicsim/losses.hpp"
#include "vicsim/prompting.hpp"

namespace vicsim {

struct DecodeParams {
  double temperature = 1.0;
  double top_p = 0.9;
  std::size_t max_tokens = 32;
  bool greedy = false;
  std::uint64_t seed = 0;
};

// What a generator conditions on: the structured bundle and its rendering.
struct GenerationContext {
  PromptBundle bundle;
  std::string prompt;
};

GenerationContext make_context(PromptBundle bundle, const PromptTemplate& tmpl);

struct TrainingExample {
  GenerationContext context;
  std::string target;
};

struct ExampleOptions {
  bool keywords = false;
  bool error_style = false;
  std::string template_name = "default";
};

// Training pairs for every user utterance of every dialogue with a scenario.
std::vector<TrainingExample> build_examples(const std::vector<Dialogue>& dialogues, const NerBackend& ner,
                                            const ExampleOptions& options = {});

struct GeneratedSample {
  GenerationContext context;
  std::string text;
  std::vector<std::string> tokens;  // including the end marker when emitted
  std::vector<double> log_probs;     // one per token, temperature 1

  double sum_log_prob() const;
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string name() const = 0;
  // Reproducible given (context, params) including params.seed.
  virtual GeneratedSample sample(const GenerationContext& context, const DecodeParams& params) const = 0;
  // Teacher-forced update; weight scales the step (0 leaves parameters
  // untouched). Returns the mean per-token negative log-likelihood.
  virtual double supervised_step(const std::vector<TrainingExample>& batch, double weight = 1.0) = 0;
  // Policy-gradient step on -a_i * sum log p_i. Returns the surrogate loss.
  virtual double apply_reward_update(const std::vector<GeneratedSample>& samples,
                                     const std::vector<double>& advantages) = 0;
  virtual nlohmann::json save_state() const = 0;
  virtual void load_state(const nlohmann::json& state) = 0;
  // Concurrent sample() calls tolerated; 0 means unlimited.
  virtual std::size_t max_concurrency() const { return 0; }
};

struct DiscriminatorExample {
  std::string context;
  std::string candidate;
  bool real = true;
};

class DiscriminatorBackend {
 public:
  virtual ~DiscriminatorBackend() = default;
  virtual std::string name() const = 0;
  // Probability that candidate is human-written. Callers clamp before logs.
  virtual double score(std::string_view context, std::string_view candidate) const = 0;
  // One update on a labeled batch; returns the batch discriminator loss
  // measured before the update.
  virtual double train_step(const std::vector<DiscriminatorExample>& batch) = 0;
  // Keeps shared representation weights fixed; heads still train.
  virtual void set_encoder_frozen(bool frozen) { encoder_frozen_ = frozen; }
  bool encoder_frozen() const { return encoder_frozen_; }
  virtual nlohmann::json save_state() const = 0;
  virtual void load_state(const nlohmann::json& state) = 0;

 protected:
  bool encoder_frozen_ = false;
};

// Task named by an instruction prefix; throws InvalidArgument otherwise.
DistillTask instruction_task(std::string_view instruction);
// The instruction with its task prefix removed.
std::string_view instruction_body(std::string_view instruction);

// Learns instruction -> label text mappings; the distillation target.
class InstructionLearner {
 public:
  virtual ~InstructionLearner() = default;
  virtual std::string learner_name() const = 0;
  virtual double instruction_step(const std::vector<InstructionPair>& batch) = 0;
  virtual std::string predict_label(std::string_view instruction) const = 0;
};

// ---------------------------------------------------------------------------
// Scripted and stub backends

// Draws whole responses from a fixed weighted pool, ignoring the context.
// Token log-probabilities split log p(response) evenly over its words.
// Updates change nothing.
class ScriptedGenerator : public GeneratorBackend {
 public:
  explicit ScriptedGenerator(std::vector<std::pair<std::string, double>> pool);
  std::string name() const override { return "scripted"; }
  GeneratedSample sample(const GenerationContext& context, const DecodeParams& params) const override;
  double supervised_step(const std::vector<TrainingExample>& batch, double weight = 1.0) override;
  double apply_reward_update(const std::vector<GeneratedSample>& samples,
                             const std::vector<double>& advantages) override;
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

 private:
  std::vector<std::pair<std::string, double>> pool_;
  double total_ = 0.0;
};

// Replies "<prefix><last dispatcher message>", or the prefix alone when the
// history has no dispatcher turn.
class EchoGenerator : public GeneratorBackend {
 public:
  explicit EchoGenerator(std::string prefix = "echo: ") : prefix_(std::move(prefix)) {}
  std::string name() const override { return "echo"; }
  GeneratedSample sample(const GenerationContext& context, const DecodeParams& params) const override;
  double supervised_step(const std::vector<TrainingExample>&, double = 1.0) override { return 0.0; }
  double apply_reward_update(const std::vector<GeneratedSample>&, const std::vector<double>&) override { return 0.0; }
  nlohmann::json save_state() const override { return {{"backend", "echo"}, {"prefix", prefix_}}; }
  void load_state(const nlohmann::json& state) override;

 private:
  std::string prefix_;
};

class ConstantDiscriminator : public DiscriminatorBackend {
 public:
  explicit ConstantDiscriminator(double value = 0.5) : value_(value) {}
  std::string name() const override { return "constant"; }
  double score(std::string_view, std::string_view) const override { return value_; }
  double train_step(const std::vector<DiscriminatorExample>& batch) override;
  nlohmann::json save_state() const override { return {{"backend", "constant"}, {"value", value_}}; }
  void load_state(const nlohmann::json& state) override { value_ = state.at("value").get<double>(); }

 private:
  double value_;
};

// Dense hand-built style features of the candidate.
std::vector<std::string> style_feature_names();
Eigen::VectorXd style_features(std::string_view candidate);

// Logistic regression on style_features, trained by plain SGD.
class LogisticDiscriminator : public DiscriminatorBackend {
 public:
  explicit LogisticDiscriminator(double learning_rate = 0.5);
  std::string name() const override { return "logistic"; }
  double score(std::string_view context, std::string_view candidate) const override;
  double train_step(const std::vector<DiscriminatorExample>& batch) override;
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

  const Eigen::VectorXd& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  double learning_rate_;
  Eigen::VectorXd w_;
  double b_ = 0.0;
};

// Predicts the most frequent training label per task.
class MajorityLabelLearner : public InstructionLearner {
 public:
  std::string learner_name() const override { return "majority"; }
  double instruction_step(const std::vector<InstructionPair>& batch) override;
  std::string predict_label(std::string_view instruction) const override;

 private:
  std::map<DistillTask, std::map<std::string, std::size_t>> counts_;
};

// ---------------------------------------------------------------------------
// Trainable backends

struct StyleDiscriminatorOptions {
  std::size_t hash_bits = 14;
  std::size_t hidden = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

// One tanh hidden layer over hashed character n-grams (1-3, case kept, with
// boundary markers), lowercased word unigrams, the dense style features and a
// context-overlap feature. Three heads share it: real/fake, 3-way emotion and
// registry-wide grammar. Adagrad updates.
class StyleDiscriminator : public DiscriminatorBackend, public InstructionLearner {
 public:
  explicit StyleDiscriminator(StyleDiscriminatorOptions options = {},
                              const GrammarRegistry& registry = GrammarRegistry::bundled());

  std::string name() const override { return "style"; }
  double score(std::string_view context, std::string_view candidate) const override;
  double train_step(const std::vector<DiscriminatorExample>& batch) override;

  std::string learner_name() const override { return "style"; }
  double instruction_step(const std::vector<InstructionPair>& batch) override;
  std::string predict_label(std::string_view instruction) const override;

  EmotionLabel classify_emotion(std::string_view text) const;
  GrammarLabel classify_grammar(std::string_view text) const;

  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

  std::size_t parameter_count() const;

 private:
  struct Features {
    std::vector<std::pair<std::size_t, double>> entries;
  };

  Features featurize(std::string_view context, std::string_view candidate) const;
  Eigen::VectorXd hidden(const Features& f) const;
  void adagrad(Eigen::Ref<Eigen::MatrixXd> param, Eigen::Ref<Eigen::MatrixXd> accum,
               const Eigen::Ref<const Eigen::MatrixXd>& grad);

  StyleDiscriminatorOptions options_;
  std::vector<std::string> grammar_ids_;
  std::vector<std::string> grammar_labels_;  // label texts, registry order
  std::size_t dim_;
  Eigen::MatrixXd w1_, w1_acc_;  // hidden x dim, one column per feature
  Eigen::VectorXd b1_, b1_acc_;
  Eigen::MatrixXd rf_, rf_acc_;    // (hidden + 1) x 1
  Eigen::MatrixXd emo_, emo_acc_;  // (hidden + 1) x 3
  Eigen::MatrixXd gram_, gram_acc_;  // (hidden + 1) x registry size
};

// Judge adapters over a distilled StyleDiscriminator.
class ModelEmotionJudge : public EmotionJudge {
 public:
  explicit ModelEmotionJudge(std::shared_ptr<const StyleDiscriminator> model) : model_(std::move(model)) {}
  std::string name() const override { return "model"; }
  EmotionLabel classify(std::string_view text) const override { return model_->classify_emotion(text); }

 private:
  std::shared_ptr<const StyleDiscriminator> model_;
};

class ModelGrammarJudge : public GrammarJudge {
 public:
  explicit ModelGrammarJudge(std::shared_ptr<const StyleDiscriminator> model) : model_(std::move(model)) {}
  std::string name() const override { return "model"; }
  GrammarLabel classify(std::string_view text) const override { return model_->classify_grammar(text); }

 private:
  std::shared_ptr<const StyleDiscriminator> model_;
};

// Words and punctuation marks as separate tokens; detokenize reattaches them.
std::vector<std::string> tokenize_response(std::string_view text);
std::string detokenize_response(const std::vector<std::string>& tokens);

struct CopyGeneratorOptions {
  std::size_t embedding = 32;
  std::size_t context_buckets = 1024;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

// Small next-word model with copy features.
//
// The state is h = tanh(E[prev] + P[position] + mean Q[hash(w)] over the last
// dispatcher turn). The score of a candidate word w is
//   b_w + U_w . h + sum_k f_k(w) (alpha_k + beta_k . h)
// where f_k are indicator features tying w to the prompt: one per entity type
// of the keyword block, scenario membership, scenario words the user already
// said, user and dispatcher history membership, last dispatcher turn membership and
// "already generated". Candidates are the vocabulary plus every prompt word,
// so unseen names can be copied. Adam updates.
class CopyGenerator : public GeneratorBackend {
 public:
  static constexpr std::size_t kCopyFeatures = 15;

  // Vocabulary comes from the training targets.
  CopyGenerator(const std::vector<TrainingExample>& vocabulary_source, CopyGeneratorOptions options = {});
  // Restores a saved state.
  explicit CopyGenerator(const nlohmann::json& state);

  std::string name() const override { return "copy"; }
  GeneratedSample sample(const GenerationContext& context, const DecodeParams& params) const override;
  double supervised_step(const std::vector<TrainingExample>& batch, double weight = 1.0) override;
  double apply_reward_update(const std::vector<GeneratedSample>& samples,
                             const std::vector<double>& advantages) override;
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

  std::size_t parameter_count() const;
  std::size_t vocabulary_size() const { return vocab_.size(); }

  // Mean per-token negative log-likelihood without updating.
  double evaluate_nll(const std::vector<TrainingExample>& examples) const;

 private:
  struct Prepared;
  struct Grad;

  Prepared prepare(const GenerationContext& context) const;
  void init_params();
  void init_adam();
  // Accumulates d(weight * -log p(tokens)) into grad; returns -log p summed.
  double accumulate(const Prepared& prep, const std::vector<std::string>& tokens, double weight, Grad& grad) const;
  void adam_step(const Grad& grad, double scale);

  CopyGeneratorOptions options_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  Eigen::MatrixXd E_, U_, P_, Q_, beta_;
  Eigen::VectorXd b_, alpha_;
  // Adam moments, in the order E U P Q beta b alpha.
  std::vector<Eigen::MatrixXd> m_, v_;
  std::size_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Adversarial loop

struct GanConfig {
  std::size_t d_steps_per_round = 1;
  std::size_t g_steps_per_round = 1;
  double supervised_mix_weight = 1.0;
  std::size_t batch_size = 16;
  std::size_t max_rounds = 10;
  std::uint64_t seed = 0;
  RewardBaseline reward_baseline = RewardBaseline::batch_mean;
  double score_clamp = kDefaultScoreClamp;
  std::size_t checkpoint_every = 1;  // rounds; 0 keeps only the final one
  bool freeze_discriminator = false;
  DecodeParams decode;

  // Keys: d_steps_per_round, g_steps_per_round, supervised_mix_weight,
  // batch_size, max_rounds, seed, reward_baseline ("batch_mean" | "none"),
  // score_clamp, checkpoint_every, freeze_discriminator, and
  // decode.{temperature, top_p, max_tokens, greedy}. Unknown keys are
  // rejected.
  static GanConfig from_config(const Config& config);
  Config to_config() const;
  // Throws InvalidArgument.
  void validate() const;
  // SHA-256 of the canonical config text.
  std::string hash() const;
};

struct TrainingMetrics {
  std::size_t round = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double supervised_loss = 0.0;
  double d_accuracy_real = 0.0;
  double d_accuracy_fake = 0.0;
  double mean_reward = 0.0;
  std::optional<double> heldout_accuracy;
};

nlohmann::ordered_json to_json(const TrainingMetrics& m);

struct GanRunOptions {
  // Checkpoints, manifest.json and metrics.jsonl go here when set.
  std::optional<std::filesystem::path> run_dir;
  // Real/fake accuracy on these is reported per round when non-empty.
  std::vector<TrainingExample> heldout;
  std::function<void(const TrainingMetrics&)> on_round;
};

struct GanResult {
  std::vector<TrainingMetrics> metrics;
  std::vector<std::filesystem::path> checkpoints;
};

// Alternates d_steps discriminator updates (real targets vs sampled
// generations) with g_steps generator updates (reinforce on log D plus the
// lambda-weighted supervised step). Throws TrainingAborted on a non-finite
// loss after keeping the last good checkpoint.
GanResult train_gan(GeneratorBackend& generator, DiscriminatorBackend& discriminator,
                    const std::vector<TrainingExample>& train_pairs, const GanConfig& config,
                    const GanRunOptions& options = {});

// Fraction of heldout items classified correctly, counting each real target
// and one generated sample per item (score > 0.5 means real).
double heldout_accuracy(const GeneratorBackend& generator, const DiscriminatorBackend& discriminator,
                        const std::vector<TrainingExample>& heldout, const DecodeParams& decode,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Distillation

struct DistillOptions {
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  double heldout_fraction = 0.2;
  std::size_t batch_size = 32;
};

struct TaskAccuracy {
  std::size_t n = 0;
  double baseline = 0.0;  // before training
  double accuracy = 0.0;
};

struct DistillReport {
  std::string learner;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::map<std::string, TaskAccuracy> tasks;  // "emotion", "grammar"
  double overall_accuracy = 0.0;
};

nlohmann::ordered_json to_json(const DistillReport& r);

// Seeded held-out split, then epochs of shuffled mini-batches. Throws
// InvalidArgument when either side of the split would be empty.
DistillReport distill_discriminator(InstructionLearner& learner, const std::vector<InstructionPair>& dataset,
                                    const DistillOptions& options = {});

// ---------------------------------------------------------------------------
// Cue analysis

struct CuePair {
  std::string context;
  std::string human;
  std::string generated;
};

struct CueGroup {
  std::string label;
  std::size_t n = 0;
  std::optional<double> accuracy;  // nullopt when n == 0
};

struct CueReport {
  std::vector<CueGroup> groups;  // registry order
  std::size_t n = 0;
  double overall_accuracy = 0.0;
};

// The generated member counts as identified when it scores strictly below
// the human one. Groups follow the grammar label of the human utterance.
CueReport discriminate_cue_report(const DiscriminatorBackend& discriminator, const std::vector<CuePair>& pairs,
                                  const GrammarJudge& judge,
                                  const GrammarRegistry& registry = GrammarRegistry::bundled());

}  // namespace vicsim

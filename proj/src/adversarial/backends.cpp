#include <cmath>

#include "vicsim/adversarial.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

GenerationContext make_context(PromptBundle bundle, const PromptTemplate& tmpl) {
  bundle.target.reset();
  GenerationContext ctx;
  ctx.prompt = assemble_prompt(bundle, tmpl);
  ctx.bundle = std::move(bundle);
  return ctx;
}

std::vector<TrainingExample> build_examples(const std::vector<Dialogue>& dialogues, const NerBackend& ner,
                                            const ExampleOptions& options) {
  const auto tmpl = PromptTemplate::load(options.template_name);
  std::vector<TrainingExample> out;
  for (const auto& d : dialogues) {
    if (!d.scenario || text::trim(*d.scenario).empty()) continue;
    std::optional<TypedKeywordSet> keywords;
    if (options.keywords) keywords = extract_keywords(*d.scenario, ner, KeywordSource::scenario);
    for (auto& bundle : make_training_pairs(d)) {
      auto target = *bundle.target;
      if (keywords) bundle = augment_with_keywords(std::move(bundle), *keywords);
      bundle = error_style_suffix(std::move(bundle), options.error_style);
      out.push_back({make_context(std::move(bundle), tmpl), std::move(target)});
    }
  }
  return out;
}

double GeneratedSample::sum_log_prob() const {
  double s = 0.0;
  for (double lp : log_probs) s += lp;
  return s;
}

std::vector<std::string> tokenize_response(std::string_view text) {
  static const std::string_view kTrailing = ".,!?;:)]\"";
  static const std::string_view kLeading = "([\"";
  std::vector<std::string> out;
  for (auto word : text::split_whitespace(text)) {
    std::vector<std::string> tail;
    while (!word.empty() && kLeading.find(word.front()) != std::string_view::npos && word.size() > 1) {
      out.emplace_back(1, word.front());
      word.remove_prefix(1);
    }
    while (word.size() > 1 && kTrailing.find(word.back()) != std::string_view::npos) {
      tail.emplace_back(1, word.back());
      word.remove_suffix(1);
    }
    out.emplace_back(word);
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

std::string detokenize_response(const std::vector<std::string>& tokens) {
  static const std::string_view kAttachLeft = ".,!?;:)]\"";
  std::string out;
  bool glue_next = false;
  for (const auto& t : tokens) {
    const bool attach = t.size() == 1 && kAttachLeft.find(t[0]) != std::string_view::npos;
    if (!out.empty() && !attach && !glue_next) out += ' ';
    out += t;
    glue_next = t == "(" || t == "[";
  }
  return out;
}

// ---------------------------------------------------------------------------

ScriptedGenerator::ScriptedGenerator(std::vector<std::pair<std::string, double>> pool) : pool_(std::move(pool)) {
  if (pool_.empty()) throw InvalidArgument("scripted generator needs a non-empty pool");
  for (const auto& [text, w] : pool_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("scripted generator weights must be non-negative");
    total_ += w;
  }
  if (total_ <= 0.0) throw InvalidArgument("scripted generator weights sum to zero");
}

GeneratedSample ScriptedGenerator::sample(const GenerationContext& context, const DecodeParams& params) const {
  Rng rng(params.seed);
  std::vector<double> weights;
  for (const auto& p : pool_) weights.push_back(p.second);
  const auto& [text, w] = pool_[rng.weighted(weights)];
  GeneratedSample s;
  s.context = context;
  s.text = text;
  for (auto tok : text::split_whitespace(text)) s.tokens.emplace_back(tok);
  const double lp = std::log(w / total_);
  const auto n = std::max<std::size_t>(1, s.tokens.size());
  s.log_probs.assign(n, lp / static_cast<double>(n));
  if (s.tokens.empty()) s.tokens.emplace_back("");
  return s;
}

double ScriptedGenerator::supervised_step(const std::vector<TrainingExample>& batch, double) {
  if (batch.empty()) return 0.0;
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    double p = 0.0;
    for (const auto& [text, w] : pool_)
      if (text == ex.target) p += w / total_;
    const auto n = std::max<std::size_t>(1, text::word_count(ex.target));
    nll += -std::log(std::max(p, 1e-12));
    tokens += n;
  }
  return nll / static_cast<double>(tokens);
}

double ScriptedGenerator::apply_reward_update(const std::vector<GeneratedSample>& samples,
                                              const std::vector<double>& advantages) {
  if (samples.size() != advantages.size()) throw InvalidArgument("apply_reward_update: length mismatch");
  if (samples.empty()) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) loss += -advantages[i] * samples[i].sum_log_prob();
  return loss / static_cast<double>(samples.size());
}

nlohmann::json ScriptedGenerator::save_state() const {
  nlohmann::json pool = nlohmann::json::array();
  for (const auto& [text, w] : pool_) pool.push_back({text, w});
  return {{"backend", "scripted"}, {"pool", pool}};
}

void ScriptedGenerator::load_state(const nlohmann::json& state) {
  std::vector<std::pair<std::string, double>> pool;
  for (const auto& item : state.at("pool")) pool.emplace_back(item.at(0).get<std::string>(), item.at(1).get<double>());
  *this = ScriptedGenerator(std::move(pool));
}

GeneratedSample EchoGenerator::sample(const GenerationContext& context, const DecodeParams&) const {
  GeneratedSample s;
  s.context = context;
  s.text = prefix_;
  const auto& h = context.bundle.history;
  for (auto it = h.rbegin(); it != h.rend(); ++it) {
    if (it->role == Role::dispatcher) {
      s.text += it->text;
      break;
    }
  }
  s.text = std::string(text::trim(s.text));
  for (auto tok : text::split_whitespace(s.text)) s.tokens.emplace_back(tok);
  s.log_probs.assign(s.tokens.size(), 0.0);
  return s;
}

void EchoGenerator::load_state(const nlohmann::json& state) { prefix_ = state.at("prefix").get<std::string>(); }

double ConstantDiscriminator::train_step(const std::vector<DiscriminatorExample>& batch) {
  std::vector<double> real, fake;
  for (const auto& ex : batch) (ex.real ? real : fake).push_back(value_);
  double loss = 0.0;
  if (!real.empty()) loss += -std::log(clamp_score(value_));
  if (!fake.empty()) loss += -std::log(1.0 - clamp_score(value_));
  return loss;
}

// ---------------------------------------------------------------------------

std::vector<std::string> style_feature_names() {
  return {"ends_with_terminal", "lowercase_start", "double_space",   "unbalanced_delimiter", "adjacent_repeat",
          "has_digit",          "words_over_10",   "positive_words", "negative_words",       "question"};
}

Eigen::VectorXd style_features(std::string_view candidate) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(10);
  const auto flags = style_flags(candidate);
  const auto t = text::trim(candidate);
  f(0) = !t.empty() && !flags.missing_end_punctuation;
  f(1) = flags.lowercase_start;
  f(2) = flags.double_space;
  f(3) = flags.unbalanced_delimiter;
  const auto words = text::split_whitespace(t);
  for (std::size_t i = 1; i < words.size(); ++i)
    if (text::strip_token(words[i]) == text::strip_token(words[i - 1]) && !text::strip_token(words[i]).empty())
      f(4) = 1.0;
  for (char c : t)
    if (text::is_digit(c)) f(5) = 1.0;
  f(6) = static_cast<double>(words.size()) / 10.0;
  const auto counts = count_sentiment_words(t, ValenceLexicon::bundled());
  f(7) = static_cast<double>(counts.positive_words);
  f(8) = static_cast<double>(counts.negative_words);
  f(9) = t.find('?') != std::string_view::npos;
  return f;
}

LogisticDiscriminator::LogisticDiscriminator(double learning_rate)
    : learning_rate_(learning_rate), w_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(style_feature_names().size()))) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
}

double LogisticDiscriminator::score(std::string_view, std::string_view candidate) const {
  return 1.0 / (1.0 + std::exp(-(w_.dot(style_features(candidate)) + b_)));
}

double LogisticDiscriminator::train_step(const std::vector<DiscriminatorExample>& batch) {
  if (batch.empty()) throw InvalidArgument("empty discriminator batch");
  std::vector<double> real, fake;
  Eigen::VectorXd gw = Eigen::VectorXd::Zero(w_.size());
  double gb = 0.0;
  for (const auto& ex : batch) {
    const auto x = style_features(ex.candidate);
    const double p = 1.0 / (1.0 + std::exp(-(w_.dot(x) + b_)));
    (ex.real ? real : fake).push_back(p);
    const double err = p - (ex.real ? 1.0 : 0.0);
    gw += err * x;
    gb += err;
  }
  double loss = 0.0;
  if (!real.empty()) loss += -clamp_scores(as_vector(real)).log().mean();
  if (!fake.empty()) loss += -(1.0 - clamp_scores(as_vector(fake))).log().mean();
  if (!encoder_frozen_) {
    const double n = static_cast<double>(batch.size());
    w_ -= learning_rate_ * gw / n;
    b_ -= learning_rate_ * gb / n;
  }
  return loss;
}

nlohmann::json LogisticDiscriminator::save_state() const {
  return {{"backend", "logistic"},
          {"learning_rate", learning_rate_},
          {"weights", std::vector<double>(w_.data(), w_.data() + w_.size())},
          {"bias", b_}};
}

void LogisticDiscriminator::load_state(const nlohmann::json& state) {
  learning_rate_ = state.at("learning_rate").get<double>();
  auto w = state.at("weights").get<std::vector<double>>();
  if (w.size() != static_cast<std::size_t>(w_.size())) throw InvalidArgument("logistic state has wrong width");
  w_ = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  b_ = state.at("bias").get<double>();
}

DistillTask instruction_task(std::string_view instruction) {
  if (instruction.rfind(kGrammarInstruction, 0) == 0) return DistillTask::grammar;
  if (instruction.rfind(kEmotionInstruction, 0) == 0) return DistillTask::emotion;
  throw InvalidArgument("unrecognized instruction prefix");
}

std::string_view instruction_body(std::string_view instruction) {
  const auto task = instruction_task(instruction);
  return instruction.substr(task == DistillTask::grammar ? kGrammarInstruction.size() : kEmotionInstruction.size());
}

double MajorityLabelLearner::instruction_step(const std::vector<InstructionPair>& batch) {
  for (const auto& p : batch) ++counts_[instruction_task(p.instruction)][p.label];
  return 0.0;
}

std::string MajorityLabelLearner::predict_label(std::string_view instruction) const {
  auto it = counts_.find(instruction_task(instruction));
  if (it == counts_.end() || it->second.empty()) return {};
  const std::pair<const std::string, std::size_t>* best = nullptr;
  for (const auto& kv : it->second)
    if (!best || kv.second > best->second) best = &kv;
  return best->first;
}

}  // namespace vicsim

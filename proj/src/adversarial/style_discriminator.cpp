#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "matrix_io.hpp"
#include "vicsim/adversarial.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {

constexpr std::size_t kStyleDims = 10;
constexpr std::array<Emotion, 3> kEmotions = {Emotion::positive, Emotion::negative, Emotion::neutral};

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

StyleDiscriminator::StyleDiscriminator(StyleDiscriminatorOptions options, const GrammarRegistry& registry)
    : options_(options) {
  if (options_.hash_bits < 4 || options_.hash_bits > 22) throw InvalidArgument("hash_bits out of range");
  if (options_.hidden == 0) throw InvalidArgument("hidden size must be positive");
  if (!(options_.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  grammar_ids_ = registry.ids();
  for (const auto& id : grammar_ids_) grammar_labels_.push_back(grammar_label_text(id));
  dim_ = (std::size_t{1} << options_.hash_bits) + kStyleDims + 1;
  const auto H = static_cast<Eigen::Index>(options_.hidden);
  Rng rng(options_.seed);
  w1_ = random_matrix(H, static_cast<Eigen::Index>(dim_), 0.1, rng);
  b1_ = Eigen::VectorXd::Zero(H);
  rf_ = random_matrix(H + 1, 1, 0.1, rng);
  emo_ = random_matrix(H + 1, 3, 0.1, rng);
  gram_ = random_matrix(H + 1, static_cast<Eigen::Index>(grammar_labels_.size()), 0.1, rng);
  w1_acc_ = Eigen::MatrixXd::Zero(w1_.rows(), w1_.cols());
  b1_acc_ = Eigen::VectorXd::Zero(H);
  rf_acc_ = Eigen::MatrixXd::Zero(rf_.rows(), rf_.cols());
  emo_acc_ = Eigen::MatrixXd::Zero(emo_.rows(), emo_.cols());
  gram_acc_ = Eigen::MatrixXd::Zero(gram_.rows(), gram_.cols());
}

std::size_t StyleDiscriminator::parameter_count() const {
  return static_cast<std::size_t>(w1_.size() + b1_.size() + rf_.size() + emo_.size() + gram_.size());
}

StyleDiscriminator::Features StyleDiscriminator::featurize(std::string_view context,
                                                           std::string_view candidate) const {
  const std::size_t mask = (std::size_t{1} << options_.hash_bits) - 1;
  std::unordered_map<std::size_t, double> chars, words;

  const std::string s = "^" + std::string(candidate) + "$";
  for (std::size_t n = 1; n <= 3; ++n)
    for (std::size_t i = 0; i + n <= s.size(); ++i)
      chars[text::fnv1a(std::string_view(s).substr(i, n), 0x100 + n) & mask] += 1.0;

  const auto toks = text::split_whitespace(candidate);
  std::set<std::string> cand_words;
  for (auto t : toks) {
    auto w = text::strip_token(t);
    if (w.empty()) w = std::string(t);
    words[text::fnv1a(w, 0x200) & mask] += 1.0;
    cand_words.insert(std::move(w));
  }

  std::unordered_map<std::size_t, double> merged;
  double norm = 0.0;
  for (const auto& [k, v] : chars) norm += v * v;
  for (const auto& [k, v] : chars) merged[k] += v / std::sqrt(norm);
  if (!words.empty()) {
    double wn = 0.0;
    for (const auto& [k, v] : words) wn += v * v;
    for (const auto& [k, v] : words) merged[k] += v / std::sqrt(wn);
  }

  Features f;
  f.entries.assign(merged.begin(), merged.end());
  std::sort(f.entries.begin(), f.entries.end());
  const auto style = style_features(candidate);
  const std::size_t base = mask + 1;
  for (Eigen::Index i = 0; i < style.size(); ++i)
    if (style(i) != 0.0) f.entries.emplace_back(base + static_cast<std::size_t>(i), style(i));

  if (!cand_words.empty() && !context.empty()) {
    std::set<std::string> ctx_words;
    for (auto t : text::split_whitespace(context)) ctx_words.insert(text::strip_token(t));
    std::size_t overlap = 0;
    for (const auto& w : cand_words) overlap += ctx_words.count(w);
    if (overlap) f.entries.emplace_back(base + kStyleDims, static_cast<double>(overlap) / cand_words.size());
  }
  return f;
}

Eigen::VectorXd StyleDiscriminator::hidden(const Features& f) const {
  Eigen::VectorXd z = b1_;
  for (const auto& [i, v] : f.entries) z += v * w1_.col(static_cast<Eigen::Index>(i));
  return z.array().tanh();
}

void StyleDiscriminator::adagrad(Eigen::Ref<Eigen::MatrixXd> param, Eigen::Ref<Eigen::MatrixXd> accum,
                                 const Eigen::Ref<const Eigen::MatrixXd>& grad) {
  accum.array() += grad.array().square();
  param.array() -= options_.learning_rate * grad.array() / (accum.array().sqrt() + 1e-8);
}

namespace {

Eigen::VectorXd augment(const Eigen::VectorXd& h) {
  Eigen::VectorXd a(h.size() + 1);
  a << h, 1.0;
  return a;
}

}  // namespace

double StyleDiscriminator::score(std::string_view context, std::string_view candidate) const {
  const auto h = augment(hidden(featurize(context, candidate)));
  return sigmoid(rf_.col(0).dot(h));
}

double StyleDiscriminator::train_step(const std::vector<DiscriminatorExample>& batch) {
  if (batch.empty()) throw InvalidArgument("empty discriminator batch");
  const auto H = static_cast<Eigen::Index>(options_.hidden);
  Eigen::MatrixXd g_rf = Eigen::MatrixXd::Zero(rf_.rows(), 1);
  Eigen::VectorXd g_b1 = Eigen::VectorXd::Zero(H);
  std::unordered_map<std::size_t, Eigen::VectorXd> g_w1;
  std::vector<double> real, fake;
  const double n = static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    auto f = featurize(ex.context, ex.candidate);
    const Eigen::VectorXd h = hidden(f);
    const auto ha = augment(h);
    const double p = sigmoid(rf_.col(0).dot(ha));
    (ex.real ? real : fake).push_back(p);
    const double d = (p - (ex.real ? 1.0 : 0.0)) / n;
    g_rf.col(0) += d * ha;
    const Eigen::VectorXd dz = (d * rf_.col(0).head(H)).array() * (1.0 - h.array().square());
    g_b1 += dz;
    for (const auto& [i, v] : f.entries) {
      auto [it, inserted] = g_w1.try_emplace(i, Eigen::VectorXd::Zero(H));
      it->second += v * dz;
    }
  }
  double loss = 0.0;
  if (!real.empty()) loss += -clamp_scores(as_vector(real)).log().mean();
  if (!fake.empty()) loss += -(1.0 - clamp_scores(as_vector(fake))).log().mean();
  adagrad(rf_, rf_acc_, g_rf);
  if (!encoder_frozen_) {
    adagrad(b1_, b1_acc_, g_b1);
    for (const auto& [i, g] : g_w1) {
      const auto r = static_cast<Eigen::Index>(i);
      adagrad(w1_.col(r), w1_acc_.col(r), g);
    }
  }
  return loss;
}

double StyleDiscriminator::instruction_step(const std::vector<InstructionPair>& batch) {
  if (batch.empty()) return 0.0;
  const auto H = static_cast<Eigen::Index>(options_.hidden);
  Eigen::MatrixXd g_emo = Eigen::MatrixXd::Zero(emo_.rows(), emo_.cols());
  Eigen::MatrixXd g_gram = Eigen::MatrixXd::Zero(gram_.rows(), gram_.cols());
  Eigen::VectorXd g_b1 = Eigen::VectorXd::Zero(H);
  std::unordered_map<std::size_t, Eigen::VectorXd> g_w1;
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& pair : batch) {
    const auto task = instruction_task(pair.instruction);
    const auto body = instruction_body(pair.instruction);
    auto f = featurize({}, body);
    const Eigen::VectorXd h = hidden(f);
    const auto ha = augment(h);
    const Eigen::MatrixXd& head = task == DistillTask::emotion ? emo_ : gram_;
    std::size_t target = 0;
    if (task == DistillTask::emotion) {
      auto e = parse_emotion(pair.label);
      if (!e) throw InvalidArgument("unknown emotion label '" + pair.label + "'");
      target = static_cast<std::size_t>(std::find(kEmotions.begin(), kEmotions.end(), *e) - kEmotions.begin());
    } else {
      auto it = std::find(grammar_labels_.begin(), grammar_labels_.end(), pair.label);
      if (it == grammar_labels_.end()) throw InvalidArgument("unknown grammar label '" + pair.label + "'");
      target = static_cast<std::size_t>(it - grammar_labels_.begin());
    }
    Eigen::VectorXd p = softmax(head.transpose() * ha);
    loss += -std::log(std::max(p(static_cast<Eigen::Index>(target)), 1e-300)) / n;
    p(static_cast<Eigen::Index>(target)) -= 1.0;
    p /= n;
    (task == DistillTask::emotion ? g_emo : g_gram) += ha * p.transpose();
    const Eigen::VectorXd dz = (head.topRows(H) * p).array() * (1.0 - h.array().square());
    g_b1 += dz;
    for (const auto& [i, v] : f.entries) {
      auto [it, inserted] = g_w1.try_emplace(i, Eigen::VectorXd::Zero(H));
      it->second += v * dz;
    }
  }
  adagrad(emo_, emo_acc_, g_emo);
  adagrad(gram_, gram_acc_, g_gram);
  if (!encoder_frozen_) {
    adagrad(b1_, b1_acc_, g_b1);
    for (const auto& [i, g] : g_w1) {
      const auto r = static_cast<Eigen::Index>(i);
      adagrad(w1_.col(r), w1_acc_.col(r), g);
    }
  }
  return loss;
}

std::string StyleDiscriminator::predict_label(std::string_view instruction) const {
  const auto task = instruction_task(instruction);
  const auto body = instruction_body(instruction);
  if (task == DistillTask::emotion) return std::string(to_string(classify_emotion(body).value));
  return grammar_label_text(classify_grammar(body).value);
}

EmotionLabel StyleDiscriminator::classify_emotion(std::string_view text) const {
  const auto ha = augment(hidden(featurize({}, text)));
  const Eigen::VectorXd p = softmax(emo_.transpose() * ha);
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return {kEmotions[static_cast<std::size_t>(best)], p(best)};
}

GrammarLabel StyleDiscriminator::classify_grammar(std::string_view text) const {
  const auto ha = augment(hidden(featurize({}, text)));
  const Eigen::VectorXd p = softmax(gram_.transpose() * ha);
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return {grammar_ids_[static_cast<std::size_t>(best)], p(best)};
}

nlohmann::json StyleDiscriminator::save_state() const {
  return {{"backend", "style"},
          {"hash_bits", options_.hash_bits},
          {"hidden", options_.hidden},
          {"learning_rate", options_.learning_rate},
          {"seed", options_.seed},
          {"encoder_frozen", encoder_frozen_},
          {"grammar_ids", grammar_ids_},
          {"w1", detail::encode_matrix(w1_)},
          {"b1", detail::encode_matrix(b1_)},
          {"rf", detail::encode_matrix(rf_)},
          {"emo", detail::encode_matrix(emo_)},
          {"gram", detail::encode_matrix(gram_)},
          {"w1_acc", detail::encode_matrix(w1_acc_)},
          {"b1_acc", detail::encode_matrix(b1_acc_)},
          {"rf_acc", detail::encode_matrix(rf_acc_)},
          {"emo_acc", detail::encode_matrix(emo_acc_)},
          {"gram_acc", detail::encode_matrix(gram_acc_)}};
}

void StyleDiscriminator::load_state(const nlohmann::json& state) {
  if (state.at("backend") != "style") throw InvalidArgument("not a style discriminator state");
  options_.hash_bits = state.at("hash_bits").get<std::size_t>();
  options_.hidden = state.at("hidden").get<std::size_t>();
  options_.learning_rate = state.at("learning_rate").get<double>();
  options_.seed = state.at("seed").get<std::uint64_t>();
  encoder_frozen_ = state.at("encoder_frozen").get<bool>();
  grammar_ids_ = state.at("grammar_ids").get<std::vector<std::string>>();
  grammar_labels_.clear();
  for (const auto& id : grammar_ids_) grammar_labels_.push_back(grammar_label_text(id));
  dim_ = (std::size_t{1} << options_.hash_bits) + kStyleDims + 1;
  w1_ = detail::decode_matrix(state.at("w1"));
  b1_ = detail::decode_matrix(state.at("b1"));
  rf_ = detail::decode_matrix(state.at("rf"));
  emo_ = detail::decode_matrix(state.at("emo"));
  gram_ = detail::decode_matrix(state.at("gram"));
  w1_acc_ = detail::decode_matrix(state.at("w1_acc"));
  b1_acc_ = detail::decode_matrix(state.at("b1_acc"));
  rf_acc_ = detail::decode_matrix(state.at("rf_acc"));
  emo_acc_ = detail::decode_matrix(state.at("emo_acc"));
  gram_acc_ = detail::decode_matrix(state.at("gram_acc"));
  if (static_cast<std::size_t>(w1_.cols()) != dim_ || static_cast<std::size_t>(w1_.rows()) != options_.hidden)
    throw InvalidArgument("style discriminator state has inconsistent shapes");
}

}  // namespace vicsim

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_set>

#include "matrix_io.hpp"
#include "vicsim/adversarial.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {

constexpr std::size_t kBos = 0;
constexpr std::size_t kEos = 1;
constexpr std::size_t kUnk = 2;
constexpr std::size_t kPositions = 8;
constexpr std::size_t kGeneratedFeature = 13;
const char* const kSpecials[] = {"<s>", "</s>", "<unk>"};

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

std::vector<std::string> context_words(std::string_view s) {
  std::vector<std::string> out;
  for (auto t : text::split_whitespace(s)) {
    auto w = text::strip_token(t);
    if (!w.empty()) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

struct CopyGenerator::Prepared {
  std::vector<std::size_t> buckets;
  Eigen::VectorXd ctx;
  std::vector<std::string> extras;                    // prompt words outside the vocabulary
  std::vector<std::pair<std::size_t, std::uint32_t>> features;  // candidate id -> static feature mask
  std::unordered_map<std::string, std::size_t> extra_index;
};

struct CopyGenerator::Grad {
  Eigen::MatrixXd E, U, P, Q, beta, b, alpha;
  double weight_sum = 0.0;
};

CopyGenerator::CopyGenerator(const std::vector<TrainingExample>& vocabulary_source, CopyGeneratorOptions options)
    : options_(options) {
  if (options_.embedding == 0 || options_.context_buckets == 0) throw InvalidArgument("bad generator dimensions");
  std::set<std::string> words;
  for (const auto& ex : vocabulary_source)
    for (auto& t : tokenize_response(ex.target)) words.insert(std::move(t));
  for (const char* s : kSpecials) {
    index_[s] = vocab_.size();
    vocab_.emplace_back(s);
  }
  for (const auto& w : words) {
    if (index_.count(w)) continue;
    index_[w] = vocab_.size();
    vocab_.push_back(w);
  }
  init_params();
  init_adam();
}

CopyGenerator::CopyGenerator(const nlohmann::json& state) { load_state(state); }

void CopyGenerator::init_params() {
  const auto d = static_cast<Eigen::Index>(options_.embedding);
  const auto V = static_cast<Eigen::Index>(vocab_.size());
  Rng rng(options_.seed);
  E_ = random_matrix(d, V, 0.1, rng);
  U_ = random_matrix(d, V, 0.1, rng);
  P_ = random_matrix(d, kPositions, 0.1, rng);
  Q_ = random_matrix(d, static_cast<Eigen::Index>(options_.context_buckets), 0.1, rng);
  beta_ = Eigen::MatrixXd::Zero(d, kCopyFeatures);
  b_ = Eigen::VectorXd::Zero(V);
  alpha_ = Eigen::VectorXd::Zero(kCopyFeatures);
}

void CopyGenerator::init_adam() {
  m_.clear();
  v_.clear();
  for (const Eigen::MatrixXd* p : {&E_, &U_, &P_, &Q_, &beta_}) {
    m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
  for (const Eigen::VectorXd* p : {&b_, &alpha_}) {
    m_.push_back(Eigen::MatrixXd::Zero(p->size(), 1));
    v_.push_back(Eigen::MatrixXd::Zero(p->size(), 1));
  }
  step_ = 0;
}

std::size_t CopyGenerator::parameter_count() const {
  return static_cast<std::size_t>(E_.size() + U_.size() + P_.size() + Q_.size() + beta_.size() + b_.size() +
                                  alpha_.size());
}

CopyGenerator::Prepared CopyGenerator::prepare(const GenerationContext& context) const {
  Prepared prep;
  const auto& bundle = context.bundle;
  const auto d = static_cast<Eigen::Index>(options_.embedding);

  const Turn* last_dispatcher = nullptr;
  for (auto it = bundle.history.rbegin(); it != bundle.history.rend(); ++it) {
    if (it->role == Role::dispatcher) {
      last_dispatcher = &*it;
      break;
    }
  }
  prep.ctx = Eigen::VectorXd::Zero(d);
  if (last_dispatcher) {
    for (const auto& w : context_words(last_dispatcher->text))
      prep.buckets.push_back(text::fnv1a(w, 0x300) % options_.context_buckets);
    for (auto bkt : prep.buckets) prep.ctx += Q_.col(static_cast<Eigen::Index>(bkt));
    if (!prep.buckets.empty()) prep.ctx /= static_cast<double>(prep.buckets.size());
  }

  std::map<std::string, std::uint32_t> masks;
  auto mark = [&](const std::string& tok, std::size_t k) { masks[tok] |= std::uint32_t{1} << k; };
  for (const auto& tok : tokenize_response(bundle.scenario_text)) mark(tok, 9);
  for (const auto& turn : bundle.history)
    for (const auto& tok : tokenize_response(turn.text)) {
      mark(tok, turn.role == Role::user ? 11 : 12);
      if (turn.role == Role::user && masks[tok] >> 9 & 1u) mark(tok, 10);
    }
  if (last_dispatcher)
    for (const auto& tok : tokenize_response(last_dispatcher->text)) mark(tok, 14);
  if (bundle.keyword_block) {
    for (const auto& kw : *bundle.keyword_block) {
      const auto k = static_cast<std::size_t>(kw.type);
      std::set<std::string> parts;
      for (const auto& tok : tokenize_response(kw.surface)) {
        masks[tok];
        auto n = normalize_keyword(tok);
        if (!n.empty()) parts.insert(std::move(n));
      }
      // Prompt tokens that are part of the keyword carry its type.
      for (auto& [tok, mask] : masks)
        if (parts.count(normalize_keyword(tok))) mask |= std::uint32_t{1} << k;
    }
  }
  for (const auto& [tok, mask] : masks) {
    std::size_t id;
    auto it = index_.find(tok);
    if (it != index_.end()) {
      id = it->second;
      if (id < 3) continue;
    } else {
      id = vocab_.size() + prep.extras.size();
      prep.extra_index[tok] = id;
      prep.extras.push_back(tok);
    }
    prep.features.emplace_back(id, mask);
  }
  return prep;
}

namespace {

struct StepState {
  Eigen::VectorXd h;
  Eigen::VectorXd logits;  // vocab then extras
};

}  // namespace

double CopyGenerator::accumulate(const Prepared& prep, const std::vector<std::string>& tokens, double weight,
                                 Grad& grad) const {
  const auto V = static_cast<Eigen::Index>(vocab_.size());
  const auto X = static_cast<Eigen::Index>(prep.extras.size());
  std::size_t prev = kBos;
  std::vector<std::uint32_t> dyn(static_cast<std::size_t>(V + X), 0);
  std::vector<std::uint32_t> static_mask(static_cast<std::size_t>(V + X), 0);
  for (const auto& [id, mask] : prep.features) static_mask[id] = mask;
  std::vector<std::size_t> active;
  for (const auto& [id, mask] : prep.features) active.push_back(id);
  std::unordered_set<std::size_t> generated;

  double nll = 0.0;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    std::size_t target;
    if (t == tokens.size()) {
      target = kEos;
    } else if (auto it = index_.find(tokens[t]); it != index_.end() && it->second >= 3) {
      target = it->second;
    } else if (auto ex = prep.extra_index.find(tokens[t]); ex != prep.extra_index.end()) {
      target = ex->second;
    } else {
      target = kUnk;
    }
    const std::size_t pos = std::min(t, kPositions - 1);
    const std::size_t prev_row = prev < vocab_.size() ? prev : kUnk;
    const Eigen::VectorXd z =
        E_.col(static_cast<Eigen::Index>(prev_row)) + P_.col(static_cast<Eigen::Index>(pos)) + prep.ctx;
    const Eigen::VectorXd h = z.array().tanh();

    Eigen::VectorXd logits(V + X);
    logits.head(V) = b_ + U_.transpose() * h;
    if (X) logits.tail(X).setConstant(b_(kUnk) + U_.col(kUnk).dot(h));
    const Eigen::VectorXd bh = beta_.transpose() * h;
    auto feature_mask = [&](std::size_t c) {
      return static_mask[c] | (generated.count(c) ? std::uint32_t{1} << kGeneratedFeature : 0u);
    };
    std::vector<std::size_t> touched = active;
    for (auto c : generated)
      if (!static_mask[c]) touched.push_back(c);
    for (auto c : touched) {
      const auto mask = feature_mask(c);
      for (std::size_t k = 0; k < kCopyFeatures; ++k)
        if (mask >> k & 1u) logits(static_cast<Eigen::Index>(c)) += alpha_(k) + bh(k);
    }
    logits(kBos) = -std::numeric_limits<double>::infinity();
    logits(kUnk) = -std::numeric_limits<double>::infinity();
    if (t == 0) logits(kEos) = -std::numeric_limits<double>::infinity();

    if (target != kUnk) {
      const double mx = logits.maxCoeff();
      Eigen::VectorXd p = (logits.array() - mx).exp();
      const double sum = p.sum();
      p /= sum;
      nll += -(logits(static_cast<Eigen::Index>(target)) - mx - std::log(sum));
      grad.weight_sum += weight;

      Eigen::VectorXd dl = weight * p;
      dl(static_cast<Eigen::Index>(target)) -= weight;
      grad.b.col(0) += dl.head(V);
      grad.U.noalias() += h * dl.head(V).transpose();
      Eigen::VectorXd dh = U_ * dl.head(V);
      if (X) {
        const double extra_sum = dl.tail(X).sum();
        grad.b(kUnk, 0) += extra_sum;
        grad.U.col(kUnk) += extra_sum * h;
        dh += extra_sum * U_.col(kUnk);
      }
      for (auto c : touched) {
        const auto mask = feature_mask(c);
        const double g = dl(static_cast<Eigen::Index>(c));
        for (std::size_t k = 0; k < kCopyFeatures; ++k) {
          if (!(mask >> k & 1u)) continue;
          grad.alpha(static_cast<Eigen::Index>(k), 0) += g;
          grad.beta.col(static_cast<Eigen::Index>(k)) += g * h;
          dh += g * beta_.col(static_cast<Eigen::Index>(k));
        }
      }
      const Eigen::VectorXd dz = dh.array() * (1.0 - h.array().square());
      grad.E.col(static_cast<Eigen::Index>(prev_row)) += dz;
      grad.P.col(static_cast<Eigen::Index>(pos)) += dz;
      if (!prep.buckets.empty()) {
        const Eigen::VectorXd share = dz / static_cast<double>(prep.buckets.size());
        for (auto bkt : prep.buckets) grad.Q.col(static_cast<Eigen::Index>(bkt)) += share;
      }
    }
    generated.insert(target);
    prev = target;
  }
  return nll;
}

void CopyGenerator::adam_step(const Grad& grad, double scale) {
  if (scale <= 0.0 || grad.weight_sum == 0.0) return;
  ++step_;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double lr = options_.learning_rate * scale * std::sqrt(1.0 - std::pow(b2, static_cast<double>(step_))) /
                    (1.0 - std::pow(b1, static_cast<double>(step_)));
  const double norm = std::abs(grad.weight_sum);
  auto update = [&](Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& g, std::size_t slot) {
    const Eigen::MatrixXd gn = g / norm;
    m_[slot] = b1 * m_[slot] + (1.0 - b1) * gn;
    v_[slot] = b2 * v_[slot] + (1.0 - b2) * gn.array().square().matrix();
    param.array() -= lr * m_[slot].array() / (v_[slot].array().sqrt() + eps);
  };
  update(E_, grad.E, 0);
  update(U_, grad.U, 1);
  update(P_, grad.P, 2);
  update(Q_, grad.Q, 3);
  update(beta_, grad.beta, 4);
  Eigen::Map<Eigen::MatrixXd> bmap(b_.data(), b_.size(), 1);
  update(bmap, grad.b, 5);
  Eigen::Map<Eigen::MatrixXd> amap(alpha_.data(), alpha_.size(), 1);
  update(amap, grad.alpha, 6);
}

double CopyGenerator::supervised_step(const std::vector<TrainingExample>& batch, double weight) {
  if (batch.empty()) return 0.0;
  Grad g{Eigen::MatrixXd::Zero(E_.rows(), E_.cols()),       Eigen::MatrixXd::Zero(U_.rows(), U_.cols()),
         Eigen::MatrixXd::Zero(P_.rows(), P_.cols()),       Eigen::MatrixXd::Zero(Q_.rows(), Q_.cols()),
         Eigen::MatrixXd::Zero(beta_.rows(), beta_.cols()), Eigen::MatrixXd::Zero(b_.size(), 1),
         Eigen::MatrixXd::Zero(alpha_.size(), 1)};
  double nll = 0.0;
  for (const auto& ex : batch) nll += accumulate(prepare(ex.context), tokenize_response(ex.target), 1.0, g);
  const double tokens = g.weight_sum;
  adam_step(g, weight);
  return tokens > 0 ? nll / tokens : 0.0;
}

double CopyGenerator::apply_reward_update(const std::vector<GeneratedSample>& samples,
                                          const std::vector<double>& advantages) {
  if (samples.size() != advantages.size()) throw InvalidArgument("apply_reward_update: length mismatch");
  if (samples.empty()) return 0.0;
  Grad g{Eigen::MatrixXd::Zero(E_.rows(), E_.cols()),       Eigen::MatrixXd::Zero(U_.rows(), U_.cols()),
         Eigen::MatrixXd::Zero(P_.rows(), P_.cols()),       Eigen::MatrixXd::Zero(Q_.rows(), Q_.cols()),
         Eigen::MatrixXd::Zero(beta_.rows(), beta_.cols()), Eigen::MatrixXd::Zero(b_.size(), 1),
         Eigen::MatrixXd::Zero(alpha_.size(), 1)};
  double loss = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<std::string> toks = samples[i].tokens;
    if (!toks.empty() && toks.back() == kSpecials[kEos]) toks.pop_back();
    accumulate(prepare(samples[i].context), toks, advantages[i], g);
    tokens += toks.size() + 1;
    loss += -advantages[i] * samples[i].sum_log_prob();
  }
  // The weights are signed, so normalize by token count instead.
  g.weight_sum = static_cast<double>(tokens);
  adam_step(g, 1.0);
  return loss / static_cast<double>(samples.size());
}

double CopyGenerator::evaluate_nll(const std::vector<TrainingExample>& examples) const {
  Grad g{Eigen::MatrixXd::Zero(E_.rows(), E_.cols()),       Eigen::MatrixXd::Zero(U_.rows(), U_.cols()),
         Eigen::MatrixXd::Zero(P_.rows(), P_.cols()),       Eigen::MatrixXd::Zero(Q_.rows(), Q_.cols()),
         Eigen::MatrixXd::Zero(beta_.rows(), beta_.cols()), Eigen::MatrixXd::Zero(b_.size(), 1),
         Eigen::MatrixXd::Zero(alpha_.size(), 1)};
  double nll = 0.0;
  for (const auto& ex : examples) nll += accumulate(prepare(ex.context), tokenize_response(ex.target), 1.0, g);
  return g.weight_sum > 0 ? nll / g.weight_sum : 0.0;
}

GeneratedSample CopyGenerator::sample(const GenerationContext& context, const DecodeParams& params) const {
  if (!(params.temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (!(params.top_p > 0.0 && params.top_p <= 1.0)) throw InvalidArgument("top_p must be in (0, 1]");
  const auto prep = prepare(context);
  const auto V = static_cast<Eigen::Index>(vocab_.size());
  const auto X = static_cast<Eigen::Index>(prep.extras.size());
  std::vector<std::uint32_t> static_mask(static_cast<std::size_t>(V + X), 0);
  for (const auto& [id, mask] : prep.features) static_mask[id] = mask;
  std::unordered_set<std::size_t> generated;
  Rng rng(params.seed);

  GeneratedSample out;
  out.context = context;
  std::vector<std::string> words;
  std::size_t prev = kBos;
  for (std::size_t t = 0; t < params.max_tokens; ++t) {
    const std::size_t pos = std::min(t, kPositions - 1);
    const std::size_t prev_row = prev < vocab_.size() ? prev : kUnk;
    const Eigen::VectorXd h = (E_.col(static_cast<Eigen::Index>(prev_row)) +
                               P_.col(static_cast<Eigen::Index>(pos)) + prep.ctx)
                                  .array()
                                  .tanh();
    Eigen::VectorXd logits(V + X);
    logits.head(V) = b_ + U_.transpose() * h;
    if (X) logits.tail(X).setConstant(b_(kUnk) + U_.col(kUnk).dot(h));
    const Eigen::VectorXd bh = beta_.transpose() * h;
    for (std::size_t c = 0; c < static_mask.size(); ++c) {
      const auto mask = static_mask[c] | (generated.count(c) ? std::uint32_t{1} << kGeneratedFeature : 0u);
      if (!mask) continue;
      for (std::size_t k = 0; k < kCopyFeatures; ++k)
        if (mask >> k & 1u) logits(static_cast<Eigen::Index>(c)) += alpha_(k) + bh(k);
    }
    logits(kBos) = -std::numeric_limits<double>::infinity();
    logits(kUnk) = -std::numeric_limits<double>::infinity();
    if (t == 0) logits(kEos) = -std::numeric_limits<double>::infinity();

    const double mx = logits.maxCoeff();
    const Eigen::VectorXd base = (logits.array() - mx).exp();
    const double log_z = std::log(base.sum()) + mx;

    std::size_t choice = 0;
    if (params.greedy) {
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      choice = static_cast<std::size_t>(best);
    } else {
      Eigen::VectorXd p = ((logits.array() - mx) / params.temperature).exp();
      p /= p.sum();
      std::vector<std::size_t> order(static_cast<std::size_t>(p.size()));
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p(static_cast<Eigen::Index>(a)) > p(static_cast<Eigen::Index>(b));
      });
      std::vector<double> weights;
      double cum = 0.0;
      for (auto i : order) {
        weights.push_back(p(static_cast<Eigen::Index>(i)));
        cum += weights.back();
        if (cum >= params.top_p) break;
      }
      choice = order[rng.weighted(weights)];
    }
    const std::string& tok = choice < vocab_.size() ? vocab_[choice] : prep.extras[choice - vocab_.size()];
    out.tokens.push_back(tok);
    out.log_probs.push_back(logits(static_cast<Eigen::Index>(choice)) - log_z);
    if (choice == kEos) break;
    words.push_back(tok);
    generated.insert(choice);
    prev = choice;
  }
  out.text = detokenize_response(words);
  return out;
}

nlohmann::json CopyGenerator::save_state() const {
  return {{"backend", "copy"},
          {"embedding", options_.embedding},
          {"context_buckets", options_.context_buckets},
          {"learning_rate", options_.learning_rate},
          {"seed", options_.seed},
          {"vocab", vocab_},
          {"E", detail::encode_matrix(E_)},
          {"U", detail::encode_matrix(U_)},
          {"P", detail::encode_matrix(P_)},
          {"Q", detail::encode_matrix(Q_)},
          {"beta", detail::encode_matrix(beta_)},
          {"b", detail::encode_matrix(b_)},
          {"alpha", detail::encode_matrix(alpha_)}};
}

void CopyGenerator::load_state(const nlohmann::json& state) {
  if (state.at("backend") != "copy") throw InvalidArgument("not a copy generator state");
  options_.embedding = state.at("embedding").get<std::size_t>();
  options_.context_buckets = state.at("context_buckets").get<std::size_t>();
  options_.learning_rate = state.at("learning_rate").get<double>();
  options_.seed = state.at("seed").get<std::uint64_t>();
  vocab_ = state.at("vocab").get<std::vector<std::string>>();
  index_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i;
  E_ = detail::decode_matrix(state.at("E"));
  U_ = detail::decode_matrix(state.at("U"));
  P_ = detail::decode_matrix(state.at("P"));
  Q_ = detail::decode_matrix(state.at("Q"));
  beta_ = detail::decode_matrix(state.at("beta"));
  b_ = detail::decode_matrix(state.at("b"));
  alpha_ = detail::decode_matrix(state.at("alpha"));
  const auto V = static_cast<Eigen::Index>(vocab_.size());
  if (E_.cols() != V || U_.cols() != V || b_.size() != V || beta_.cols() != static_cast<Eigen::Index>(kCopyFeatures))
    throw InvalidArgument("copy generator state has inconsistent shapes");
  init_adam();
}

}  // namespace vicsim

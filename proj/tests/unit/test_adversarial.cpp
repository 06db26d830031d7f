#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support/fixtures.hpp"
#include "vicsim/adversarial.hpp"
#include "vicsim/assets.hpp"
#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

using namespace vicsim;
using namespace vicsim::testing;

namespace {

long double oracle_generator_loss(const std::vector<double>& fake) {
  long double sum = 0;
  for (double s : fake) sum += -std::log(static_cast<long double>(s));
  return sum / static_cast<long double>(fake.size());
}

long double oracle_discriminator_loss(const std::vector<double>& real, const std::vector<double>& fake) {
  long double a = 0, b = 0;
  for (double s : real) a += -std::log(static_cast<long double>(s));
  for (double s : fake) b += -std::log1p(-static_cast<long double>(s));
  return a / static_cast<long double>(real.size()) + b / static_cast<long double>(fake.size());
}

std::vector<double> random_scores(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = 0.001 + 0.998 * rng.uniform();
  return v;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("vicsim_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("loss examples") {
  CHECK(discriminator_loss({0.5}, {0.5}) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(generator_loss({0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(discriminator_loss({0.9, 0.8}, {0.3}) == doctest::Approx(0.5209).epsilon(1e-4));
  CHECK(generator_loss({0.25, 0.75}) == doctest::Approx(0.8370).epsilon(1e-4));
  CHECK(discriminator_loss({1 - 1e-6}, {1e-6}) < 1e-5);
  CHECK(generator_loss({1 - 1e-6}) < 1e-5);
  CHECK_THROWS_AS(generator_loss(std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(discriminator_loss({0.5}, {}), InvalidArgument);
}

TEST_CASE("losses match a long double oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    auto real = random_scores(rng, 1 + rng.index(20));
    auto fake = random_scores(rng, 1 + rng.index(20));
    CHECK(std::abs(generator_loss(fake) - static_cast<double>(oracle_generator_loss(fake))) < 1e-10);
    CHECK(std::abs(discriminator_loss(real, fake) - static_cast<double>(oracle_discriminator_loss(real, fake))) <
          1e-10);
  }
}

TEST_CASE("clamping bounds every score") {
  const double eps = kDefaultScoreClamp;
  CHECK(generator_loss({0.0}) == doctest::Approx(-std::log(eps)));
  CHECK(generator_loss({1.5}) == doctest::Approx(-std::log1p(-eps)));
  CHECK(std::isfinite(discriminator_loss({0.0}, {1.0})));
  CHECK(clamp_score(-3.0) == eps);
  CHECK(clamp_score(2.0) == 1 - eps);
}

TEST_CASE("loss monotonicity") {
  Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    auto real = random_scores(rng, 1 + rng.index(6));
    auto fake = random_scores(rng, 1 + rng.index(6));
    const auto i = rng.index(fake.size());
    auto fake_up = fake;
    fake_up[i] = std::min(0.999, fake[i] + 0.01);
    if (fake_up[i] == fake[i]) continue;
    CHECK(generator_loss(fake_up) < generator_loss(fake));
    CHECK(discriminator_loss(real, fake_up) > discriminator_loss(real, fake));
    const auto j = rng.index(real.size());
    auto real_up = real;
    real_up[j] = std::min(0.999, real[j] + 0.01);
    if (real_up[j] != real[j]) CHECK(discriminator_loss(real_up, fake) < discriminator_loss(real, fake));
  }
}

TEST_CASE("reinforce update") {
  Eigen::Vector2d scores(0.9, 0.1), lp(-3.0, -4.0);
  auto r = reinforce_update(scores, lp, RewardBaseline::batch_mean);
  const double expected = (std::log(0.9) - std::log(0.1)) / 2;
  CHECK(r.advantages(0) == doctest::Approx(expected));
  CHECK(r.advantages(0) == doctest::Approx(1.0986).epsilon(1e-4));
  CHECK(r.advantages(1) == doctest::Approx(-expected));
  CHECK(r.loss == doctest::Approx(-(expected * -3.0 + -expected * -4.0) / 2));

  Eigen::Vector3d same(0.4, 0.4, 0.4), lp3(-1, -2, -3);
  auto z = reinforce_update(same, lp3, RewardBaseline::batch_mean);
  CHECK(z.advantages.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.loss == 0.0);

  Eigen::VectorXd one(1), lp1(1);
  one << 0.5;
  lp1 << -2.0;
  CHECK(reinforce_update(one, lp1, RewardBaseline::none).advantages(0) == doctest::Approx(std::log(0.5)));

  Eigen::VectorXd bad(2);
  bad << 0.5, 0.5;
  CHECK_THROWS_AS(reinforce_update(bad, lp1, RewardBaseline::none), InvalidArgument);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.index(30);
    Eigen::VectorXd s(n), l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s(static_cast<Eigen::Index>(i)) = rng.uniform();
      l(static_cast<Eigen::Index>(i)) = -10 * rng.uniform();
    }
    CHECK(std::abs(reinforce_update(s, l, RewardBaseline::batch_mean).advantages.sum()) < 1e-9);
  }
}

TEST_CASE("gan config parsing") {
  auto c = Config::parse(
      "d_steps_per_round = 2\nsupervised_mix_weight = 0.5\nreward_baseline = \"none\"\n"
      "[decode]\ntop_p = 0.8\ngreedy = true\n");
  auto g = GanConfig::from_config(c);
  CHECK(g.d_steps_per_round == 2);
  CHECK(g.g_steps_per_round == 1);
  CHECK(g.supervised_mix_weight == 0.5);
  CHECK(g.reward_baseline == RewardBaseline::none);
  CHECK(g.decode.top_p == 0.8);
  CHECK(g.decode.greedy);
  CHECK(g.score_clamp == 1e-6);

  auto back = GanConfig::from_config(g.to_config());
  CHECK(back.hash() == g.hash());
  CHECK(g.hash() != GanConfig{}.hash());
  CHECK(g.hash().size() == 64);

  CHECK_THROWS_AS(GanConfig::from_config(Config::parse("d_steps = 1\n")), InvalidArgument);
  CHECK_THROWS_AS(GanConfig::from_config(Config::parse("d_steps_per_round = 0\n")), InvalidArgument);
  CHECK_THROWS_AS(GanConfig::from_config(Config::parse("supervised_mix_weight = -1.0\n")), InvalidArgument);
  CHECK_THROWS_AS(GanConfig::from_config(Config::parse("reward_baseline = \"median\"\n")), InvalidArgument);
  CHECK_THROWS_AS(GanConfig::from_config(Config::parse("batch_size = \"four\"\n")), InvalidArgument);
}

TEST_CASE("train_gan with zero rounds does nothing") {
  auto gen = period_generator();
  LogisticDiscriminator disc;
  const auto before = disc.save_state();
  GanConfig cfg;
  cfg.max_rounds = 0;
  auto r = train_gan(gen, disc, period_pairs(10, 1), cfg);
  CHECK(r.metrics.empty());
  CHECK(disc.save_state() == before);
}

TEST_CASE("frozen constant discriminator keeps g_loss at ln 2") {
  auto gen = period_generator();
  ConstantDiscriminator disc(0.5);
  GanConfig cfg;
  cfg.max_rounds = 5;
  cfg.supervised_mix_weight = 0.0;
  cfg.freeze_discriminator = true;
  auto r = train_gan(gen, disc, period_pairs(50, 2), cfg);
  REQUIRE(r.metrics.size() == 5);
  for (const auto& m : r.metrics) {
    CHECK(std::abs(m.g_loss - std::log(2.0)) < 1e-9);
    CHECK(m.d_loss == doctest::Approx(2 * std::log(2.0)));
    CHECK(m.mean_reward == doctest::Approx(std::log(0.5)));
  }
}

TEST_CASE("scripted gan separates by the terminal period") {
  auto gen = period_generator();
  LogisticDiscriminator disc;
  GanConfig cfg;
  cfg.max_rounds = 10;
  cfg.d_steps_per_round = 4;
  cfg.batch_size = 32;
  cfg.seed = 5;
  GanRunOptions opts;
  opts.heldout = period_pairs(300, 99);
  auto r = train_gan(gen, disc, period_pairs(500, 5), cfg, opts);
  REQUIRE(r.metrics.size() == 10);
  const double oracle = bayes_accuracy(kRealDrop, kFakeDrop);
  CHECK(oracle == doctest::Approx(0.8));
  CHECK(*r.metrics.back().heldout_accuracy > 0.65);
  CHECK(std::abs(*r.metrics.back().heldout_accuracy - oracle) <= 0.05);
  for (const auto& m : r.metrics) {
    CHECK(m.d_accuracy_real >= 0.0);
    CHECK(m.d_accuracy_real <= 1.0);
    CHECK(m.d_accuracy_fake >= 0.0);
    CHECK(m.d_accuracy_fake <= 1.0);
    CHECK(std::isfinite(m.d_loss));
  }
}

TEST_CASE("train_gan is deterministic and writes a run directory") {
  GanConfig cfg;
  cfg.max_rounds = 3;
  cfg.seed = 11;
  cfg.checkpoint_every = 2;
  auto pairs = period_pairs(100, 3);
  auto run = [&](const std::filesystem::path& dir) {
    auto gen = period_generator();
    LogisticDiscriminator disc;
    GanRunOptions opts;
    opts.run_dir = dir;
    return train_gan(gen, disc, pairs, cfg, opts);
  };
  const auto a_dir = scratch_dir("gan_a"), b_dir = scratch_dir("gan_b");
  auto a = run(a_dir);
  auto b = run(b_dir);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) CHECK(to_json(a.metrics[i]) == to_json(b.metrics[i]));
  CHECK(read_file(a_dir / "metrics.jsonl") == read_file(b_dir / "metrics.jsonl"));

  // Rounds 2 and 3 (the final round) are checkpointed.
  REQUIRE(a.checkpoints.size() == 2);
  CHECK(std::filesystem::exists(a_dir / "checkpoints/round_0002/generator.json"));
  CHECK(std::filesystem::exists(a_dir / "checkpoints/round_0003/discriminator.json"));
  auto manifest = nlohmann::json::parse(read_file(a_dir / "manifest.json"));
  CHECK(manifest["config_hash"] == cfg.hash());
  CHECK(manifest["seed"] == 11);
  CHECK(manifest["rounds_completed"] == 3);
  CHECK(manifest["checkpoints"].size() == 2);

  std::size_t lines = 0;
  std::ifstream in(a_dir / "metrics.jsonl");
  for (std::string line; std::getline(in, line); ++lines) CHECK(nlohmann::json::parse(line)["round"] == lines);
  CHECK(lines == 3);
  std::filesystem::remove_all(a_dir);
  std::filesystem::remove_all(b_dir);
}

namespace {

class NanDiscriminator : public ConstantDiscriminator {
 public:
  double train_step(const std::vector<DiscriminatorExample>&) override {
    return ++calls_ > 2 ? std::nan("") : 1.0;
  }

 private:
  int calls_ = 0;
};

}  // namespace

TEST_CASE("non-finite loss aborts and keeps the last checkpoint") {
  auto gen = period_generator();
  NanDiscriminator disc;
  GanConfig cfg;
  cfg.max_rounds = 5;
  GanRunOptions opts;
  const auto dir = scratch_dir("gan_nan");
  opts.run_dir = dir;
  CHECK_THROWS_AS(train_gan(gen, disc, period_pairs(20, 1), cfg, opts), TrainingAborted);
  CHECK(std::filesystem::exists(dir / "checkpoints/round_0002"));
  CHECK_FALSE(std::filesystem::exists(dir / "checkpoints/round_0003"));
  auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest["rounds_completed"] == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("frozen logistic discriminator does not move") {
  LogisticDiscriminator disc;
  disc.set_encoder_frozen(true);
  const auto before = disc.save_state();
  disc.train_step({{"c", "Hello.", true}, {"c", "hello", false}});
  CHECK(disc.save_state() == before);
}

namespace {

class OracleDiscriminator : public DiscriminatorBackend {
 public:
  std::string name() const override { return "oracle"; }
  double score(std::string_view, std::string_view candidate) const override {
    return candidate.starts_with("gen:") ? 0.2 : 0.8;
  }
  double train_step(const std::vector<DiscriminatorExample>&) override { return 0; }
  nlohmann::json save_state() const override { return {}; }
  void load_state(const nlohmann::json&) override {}
};

class HashCoinDiscriminator : public OracleDiscriminator {
 public:
  double score(std::string_view, std::string_view candidate) const override {
    return static_cast<double>(text::fnv1a(candidate, 77) % 1000003) / 1000003.0;
  }
};

}  // namespace

TEST_CASE("cue report") {
  RuleGrammarJudge judge;
  std::vector<CuePair> pairs;
  Rng rng(8);
  const auto& s = clean_sentences();
  for (std::size_t i = 0; i < 600; ++i) {
    auto human = s[rng.index(s.size())];
    if (i % 2) human = drop_terminal(human);
    pairs.push_back({"ctx", human + " #" + std::to_string(i), "gen:" + std::to_string(i) + " " + human});
  }
  for (auto& p : pairs) p.human = p.human.substr(0, p.human.find(" #"));

  auto all = discriminate_cue_report(OracleDiscriminator{}, pairs, judge);
  CHECK(all.n == 600);
  CHECK(all.overall_accuracy == 1.0);
  CHECK(all.groups.size() == GrammarRegistry::kSize);
  std::size_t populated = 0;
  for (const auto& g : all.groups) {
    if (g.n == 0) {
      CHECK_FALSE(g.accuracy.has_value());
      continue;
    }
    ++populated;
    CHECK(*g.accuracy == 1.0);
  }
  CHECK(populated == 2);

  auto coin = discriminate_cue_report(HashCoinDiscriminator{}, pairs, judge);
  for (const auto& g : coin.groups) {
    if (g.n < 200) continue;
    // 99.9% binomial interval around one half.
    const double half_width = 3.29 * std::sqrt(0.25 / static_cast<double>(g.n));
    CHECK(std::abs(*g.accuracy - 0.5) <= half_width);
  }
}

TEST_CASE("tokenizer round trip") {
  for (const char* s : {"Hello, world.", "I'm at (the gym).", "no punctuation here",
                        "Is it 10:30am? Yes."}) {
    CHECK(detokenize_response(tokenize_response(s)) == s);
  }
  auto t = tokenize_response("Help me, now!");
  CHECK(t == std::vector<std::string>{"Help", "me", ",", "now", "!"});
}

TEST_CASE("style discriminator distills rule-injected grammar data") {
  auto gram = synthesize_grammar_corpus(1500, 2, injectable_grammar_classes());
  auto ds = distillation_dataset({}, gram, 2);
  StyleDiscriminator disc;
  DistillOptions opts;
  opts.seed = 2;
  opts.epochs = 0;
  auto untrained = distill_discriminator(disc, ds, opts);
  CHECK(untrained.tasks.at("grammar").accuracy == untrained.tasks.at("grammar").baseline);

  opts.epochs = 4;
  StyleDiscriminator a, b;
  auto ra = distill_discriminator(a, ds, opts);
  auto rb = distill_discriminator(b, ds, opts);
  CHECK(to_json(ra) == to_json(rb));
  CHECK(ra.tasks.at("grammar").accuracy >= 0.9);
  CHECK(ra.heldout_size == 300);

  StyleDiscriminator restored;
  restored.load_state(a.save_state());
  for (const auto& ex : gram) CHECK(restored.classify_grammar(ex.text).value == a.classify_grammar(ex.text).value);
  CHECK(restored.score("ctx", "hello there") == a.score("ctx", "hello there"));

  CHECK_THROWS_AS(distill_discriminator(disc, {ds[0]}, opts), InvalidArgument);
}

TEST_CASE("distillation on both tasks") {
  auto emo = synthesize_emotion_corpus(800, 3);
  auto gram = synthesize_grammar_corpus(800, 3, injectable_grammar_classes());
  auto ds = distillation_dataset(emo, gram, 3);
  StyleDiscriminator disc;
  DistillOptions opts;
  opts.seed = 3;
  auto r = distill_discriminator(disc, ds, opts);
  REQUIRE(r.tasks.count("emotion"));
  REQUIRE(r.tasks.count("grammar"));
  CHECK(r.tasks.at("emotion").n + r.tasks.at("grammar").n == r.heldout_size);
  CHECK(r.tasks.at("emotion").accuracy > r.tasks.at("emotion").baseline);
  CHECK(r.tasks.at("grammar").accuracy > 0.85);

  MajorityLabelLearner majority;
  auto m = distill_discriminator(majority, ds, opts);
  CHECK(m.overall_accuracy < r.overall_accuracy);
}

TEST_CASE("copy generator learns and copies unseen names") {
  auto ner = make_ner_backend("rule");
  auto corpus = synthesize_corpus(120, 4);
  ExampleOptions eo;
  eo.keywords = true;
  auto examples = build_examples(corpus, *ner, eo);
  REQUIRE(examples.size() > 100);
  CopyGeneratorOptions co;
  co.seed = 4;
  CopyGenerator gen(examples, co);
  CHECK(gen.parameter_count() < 10'000'000);
  const double before = gen.evaluate_nll(examples);
  for (int epoch = 0; epoch < 4; ++epoch)
    for (std::size_t s = 0; s < examples.size(); s += 32)
      gen.supervised_step({examples.begin() + static_cast<std::ptrdiff_t>(s),
                           examples.begin() + static_cast<std::ptrdiff_t>(std::min(examples.size(), s + 32))});
  const double after = gen.evaluate_nll(examples);
  CHECK(after < before * 0.5);

  // A zero-weight step leaves parameters untouched.
  const auto state = gen.save_state();
  gen.supervised_step({examples[0]}, 0.0);
  CHECK(gen.save_state() == state);

  DecodeParams p;
  p.seed = 17;
  const auto& ctx = examples[0].context;
  auto s1 = gen.sample(ctx, p);
  auto s2 = gen.sample(ctx, p);
  CHECK(s1.text == s2.text);
  CHECK(s1.log_probs == s2.log_probs);
  CHECK(s1.tokens.size() == s1.log_probs.size());
  for (double lp : s1.log_probs) CHECK(lp <= 0.0);
  CHECK_FALSE(s1.text.empty());

  CopyGenerator restored(gen.save_state());
  CHECK(restored.sample(ctx, p).text == s1.text);

  // A name never seen in training is a candidate once it is in the prompt.
  PromptBundle b = ctx.bundle;
  b.scenario_text = "The user reported that Zebulon saw a theft at the gym.";
  b.keyword_block = extract_keywords(b.scenario_text, *ner, KeywordSource::scenario);
  b.history = {{Role::dispatcher, "Who did you speak with?"}};
  auto novel = make_context(b, PromptTemplate::load("default"));
  bool copied = false;
  for (std::uint64_t seed = 0; seed < 40 && !copied; ++seed) {
    p.seed = seed;
    copied = gen.sample(novel, p).text.find("Zebulon") != std::string::npos;
  }
  CHECK(copied);

  DecodeParams bad;
  bad.temperature = 0;
  CHECK_THROWS_AS(gen.sample(ctx, bad), InvalidArgument);
}

TEST_CASE("reward update moves probability toward advantaged samples") {
  auto pairs = period_pairs(60, 6);
  CopyGeneratorOptions co;
  co.seed = 6;
  co.learning_rate = 0.05;
  CopyGenerator gen(pairs, co);
  const auto ctx = pairs[0].context;
  DecodeParams p;
  p.seed = 1;
  auto good = gen.sample(ctx, p);
  p.seed = 2;
  auto bad = gen.sample(ctx, p);
  if (good.text == bad.text) return;
  auto nll = [&](const GeneratedSample& s) { return gen.evaluate_nll({{ctx, s.text}}); };
  const double good_before = nll(good), bad_before = nll(bad);
  for (int i = 0; i < 5; ++i) gen.apply_reward_update({good, bad}, {1.0, -1.0});
  CHECK(nll(good) < good_before);
  CHECK(nll(bad) > bad_before);
  CHECK_THROWS_AS(gen.apply_reward_update({good}, {1.0, 2.0}), InvalidArgument);
}

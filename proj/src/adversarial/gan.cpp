#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "vicsim/adversarial.hpp"
#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"

namespace vicsim {

namespace {

const std::set<std::string> kGanKeys = {
    "d_steps_per_round", "g_steps_per_round", "supervised_mix_weight", "batch_size",       "max_rounds",
    "seed",              "reward_baseline",   "score_clamp",           "checkpoint_every", "freeze_discriminator",
    "decode.temperature", "decode.top_p",     "decode.max_tokens",     "decode.greedy",
};

std::size_t count_value(const Config& c, const char* key, std::size_t fallback) {
  auto v = c.get_int(key);
  if (!v) return fallback;
  if (*v < 0) throw InvalidArgument(std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(*v);
}

// Stream ids for derived generators.
enum : std::uint64_t { kBatchStream = 1, kSampleStream = 2, kHeldoutStream = 3 };

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return a * 1000003ULL + b; }

std::vector<TrainingExample> draw_batch(const std::vector<TrainingExample>& pairs, std::size_t n, Rng& rng) {
  std::vector<TrainingExample> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.push_back(pairs[rng.index(pairs.size())]);
  return batch;
}

void check_finite(double v, const char* what, std::size_t round) {
  if (!std::isfinite(v))
    throw TrainingAborted(std::string(what) + " is not finite in round " + std::to_string(round));
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
}

}  // namespace

GanConfig GanConfig::from_config(const Config& c) {
  for (const auto& [key, value] : c.values())
    if (!kGanKeys.count(key)) throw InvalidArgument("unknown GAN config key '" + key + "'");
  GanConfig g;
  g.d_steps_per_round = count_value(c, "d_steps_per_round", g.d_steps_per_round);
  g.g_steps_per_round = count_value(c, "g_steps_per_round", g.g_steps_per_round);
  g.supervised_mix_weight = c.get_double("supervised_mix_weight").value_or(g.supervised_mix_weight);
  g.batch_size = count_value(c, "batch_size", g.batch_size);
  g.max_rounds = count_value(c, "max_rounds", g.max_rounds);
  if (auto s = c.get_int("seed")) {
    if (*s < 0) throw InvalidArgument("seed must be non-negative");
    g.seed = static_cast<std::uint64_t>(*s);
  }
  if (auto b = c.get_string("reward_baseline")) {
    if (*b == "batch_mean") g.reward_baseline = RewardBaseline::batch_mean;
    else if (*b == "none") g.reward_baseline = RewardBaseline::none;
    else throw InvalidArgument("reward_baseline must be batch_mean or none");
  }
  g.score_clamp = c.get_double("score_clamp").value_or(g.score_clamp);
  g.checkpoint_every = count_value(c, "checkpoint_every", g.checkpoint_every);
  g.freeze_discriminator = c.get_bool("freeze_discriminator").value_or(g.freeze_discriminator);
  g.decode.temperature = c.get_double("decode.temperature").value_or(g.decode.temperature);
  g.decode.top_p = c.get_double("decode.top_p").value_or(g.decode.top_p);
  g.decode.max_tokens = count_value(c, "decode.max_tokens", g.decode.max_tokens);
  g.decode.greedy = c.get_bool("decode.greedy").value_or(g.decode.greedy);
  g.validate();
  return g;
}

Config GanConfig::to_config() const {
  Config c;
  c.set("d_steps_per_round", static_cast<long long>(d_steps_per_round));
  c.set("g_steps_per_round", static_cast<long long>(g_steps_per_round));
  c.set("supervised_mix_weight", supervised_mix_weight);
  c.set("batch_size", static_cast<long long>(batch_size));
  c.set("max_rounds", static_cast<long long>(max_rounds));
  c.set("seed", static_cast<long long>(seed));
  c.set("reward_baseline", std::string(reward_baseline == RewardBaseline::batch_mean ? "batch_mean" : "none"));
  c.set("score_clamp", score_clamp);
  c.set("checkpoint_every", static_cast<long long>(checkpoint_every));
  c.set("freeze_discriminator", freeze_discriminator);
  c.set("decode.temperature", decode.temperature);
  c.set("decode.top_p", decode.top_p);
  c.set("decode.max_tokens", static_cast<long long>(decode.max_tokens));
  c.set("decode.greedy", decode.greedy);
  return c;
}

void GanConfig::validate() const {
  if (d_steps_per_round < 1) throw InvalidArgument("d_steps_per_round must be at least 1");
  if (g_steps_per_round < 1) throw InvalidArgument("g_steps_per_round must be at least 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!std::isfinite(supervised_mix_weight) || supervised_mix_weight < 0)
    throw InvalidArgument("supervised_mix_weight must be finite and non-negative");
  if (!(score_clamp > 0 && score_clamp < 0.5)) throw InvalidArgument("score_clamp must be in (0, 0.5)");
  if (!(decode.temperature > 0) || !std::isfinite(decode.temperature))
    throw InvalidArgument("decode.temperature must be positive");
  if (!(decode.top_p > 0 && decode.top_p <= 1)) throw InvalidArgument("decode.top_p must be in (0, 1]");
  if (decode.max_tokens < 1) throw InvalidArgument("decode.max_tokens must be at least 1");
}

std::string GanConfig::hash() const { return sha256_hex(to_config().canonical()); }

nlohmann::ordered_json to_json(const TrainingMetrics& m) {
  nlohmann::ordered_json j;
  j["round"] = m.round;
  j["d_loss"] = m.d_loss;
  j["g_loss"] = m.g_loss;
  j["supervised_loss"] = m.supervised_loss;
  j["d_accuracy_real"] = m.d_accuracy_real;
  j["d_accuracy_fake"] = m.d_accuracy_fake;
  j["mean_reward"] = m.mean_reward;
  j["heldout_accuracy"] = m.heldout_accuracy ? nlohmann::ordered_json(*m.heldout_accuracy) : nullptr;
  return j;
}

double heldout_accuracy(const GeneratorBackend& generator, const DiscriminatorBackend& discriminator,
                        const std::vector<TrainingExample>& heldout, const DecodeParams& decode,
                        std::uint64_t seed) {
  if (heldout.empty()) throw InvalidArgument("heldout_accuracy: no examples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const auto& ex = heldout[i];
    DecodeParams p = decode;
    p.seed = Rng::derive(seed, mix(kHeldoutStream, i)).next_u64();
    const auto fake = generator.sample(ex.context, p);
    correct += discriminator.score(ex.context.prompt, ex.target) > 0.5;
    correct += discriminator.score(ex.context.prompt, fake.text) <= 0.5;
  }
  return static_cast<double>(correct) / static_cast<double>(2 * heldout.size());
}

GanResult train_gan(GeneratorBackend& generator, DiscriminatorBackend& discriminator,
                    const std::vector<TrainingExample>& train_pairs, const GanConfig& config,
                    const GanRunOptions& options) {
  config.validate();
  GanResult result;
  if (config.max_rounds == 0) return result;
  if (train_pairs.empty()) throw InvalidArgument("train_gan: no training pairs");
  discriminator.set_encoder_frozen(config.freeze_discriminator);

  std::filesystem::path metrics_path;
  nlohmann::ordered_json manifest;
  if (options.run_dir) {
    std::filesystem::create_directories(*options.run_dir / "checkpoints");
    metrics_path = *options.run_dir / "metrics.jsonl";
    write_file_atomic(metrics_path, "");
    manifest["seed"] = config.seed;
    manifest["config_hash"] = config.hash();
    manifest["config"] = config.to_config().canonical();
    manifest["generator"] = generator.name();
    manifest["discriminator"] = discriminator.name();
    manifest["checkpoints"] = nlohmann::ordered_json::array();
    manifest["rounds_completed"] = 0;
    write_file_atomic(*options.run_dir / "manifest.json", manifest.dump(2) + "\n");
  }

  auto sample_batch = [&](const std::vector<TrainingExample>& batch, std::uint64_t stream) {
    std::vector<GeneratedSample> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      DecodeParams p = config.decode;
      p.seed = Rng::derive(config.seed, mix(stream, i)).next_u64();
      out.push_back(generator.sample(batch[i].context, p));
    }
    return out;
  };

  for (std::size_t round = 0; round < config.max_rounds; ++round) {
    TrainingMetrics m;
    m.round = round;

    double d_loss = 0, acc_real = 0, acc_fake = 0;
    for (std::size_t step = 0; step < config.d_steps_per_round; ++step) {
      const std::uint64_t stream = mix(mix(round, 0), step);
      Rng rng = Rng::derive(config.seed, mix(kBatchStream, stream));
      const auto batch = draw_batch(train_pairs, config.batch_size, rng);
      const auto fakes = sample_batch(batch, mix(kSampleStream, stream));
      std::vector<DiscriminatorExample> examples;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& ctx = batch[i].context.prompt;
        acc_real += discriminator.score(ctx, batch[i].target) > 0.5;
        acc_fake += discriminator.score(ctx, fakes[i].text) <= 0.5;
        examples.push_back({ctx, batch[i].target, true});
        examples.push_back({ctx, fakes[i].text, false});
      }
      d_loss += discriminator.train_step(examples);
    }
    const double d_count = static_cast<double>(config.d_steps_per_round * config.batch_size);
    m.d_loss = d_loss / static_cast<double>(config.d_steps_per_round);
    m.d_accuracy_real = acc_real / d_count;
    m.d_accuracy_fake = acc_fake / d_count;
    check_finite(m.d_loss, "d_loss", round);

    double g_loss = 0, sup_loss = 0, reward = 0;
    for (std::size_t step = 0; step < config.g_steps_per_round; ++step) {
      const std::uint64_t stream = mix(mix(round, 1), step);
      Rng rng = Rng::derive(config.seed, mix(kBatchStream, stream));
      const auto batch = draw_batch(train_pairs, config.batch_size, rng);
      const auto fakes = sample_batch(batch, mix(kSampleStream, stream));
      Eigen::VectorXd scores(static_cast<Eigen::Index>(fakes.size()));
      Eigen::VectorXd log_probs(scores.size());
      for (std::size_t i = 0; i < fakes.size(); ++i) {
        scores(static_cast<Eigen::Index>(i)) = discriminator.score(batch[i].context.prompt, fakes[i].text);
        log_probs(static_cast<Eigen::Index>(i)) = fakes[i].sum_log_prob();
      }
      g_loss += generator_loss(scores, config.score_clamp);
      const auto rl = reinforce_update(scores, log_probs, config.reward_baseline, config.score_clamp);
      reward += rl.rewards.mean();
      std::vector<double> adv(rl.advantages.data(), rl.advantages.data() + rl.advantages.size());
      generator.apply_reward_update(fakes, adv);
      sup_loss += generator.supervised_step(batch, config.supervised_mix_weight);
    }
    const double g_steps = static_cast<double>(config.g_steps_per_round);
    m.g_loss = g_loss / g_steps;
    m.supervised_loss = sup_loss / g_steps;
    m.mean_reward = reward / g_steps;
    check_finite(m.g_loss, "g_loss", round);
    check_finite(m.supervised_loss, "supervised_loss", round);
    check_finite(m.mean_reward, "mean_reward", round);

    if (!options.heldout.empty())
      m.heldout_accuracy =
          heldout_accuracy(generator, discriminator, options.heldout, config.decode, mix(config.seed, round));

    result.metrics.push_back(m);
    if (options.run_dir) {
      append_line(metrics_path, to_json(m).dump());
      const bool last = round + 1 == config.max_rounds;
      const bool scheduled = config.checkpoint_every > 0 && (round + 1) % config.checkpoint_every == 0;
      if (last || scheduled) {
        char name[32];
        std::snprintf(name, sizeof name, "round_%04zu", round + 1);
        const auto dir = *options.run_dir / "checkpoints" / name;
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "generator.json", generator.save_state().dump() + "\n");
        write_file_atomic(dir / "discriminator.json", discriminator.save_state().dump() + "\n");
        result.checkpoints.push_back(dir);
        manifest["checkpoints"].push_back(std::filesystem::relative(dir, *options.run_dir).generic_string());
      }
      manifest["rounds_completed"] = round + 1;
      write_file_atomic(*options.run_dir / "manifest.json", manifest.dump(2) + "\n");
    }
    if (options.on_round) options.on_round(m);
  }
  return result;
}

}  // namespace vicsim

#include <cmath>

#include "vicsim/adversarial.hpp"
#include "vicsim/error.hpp"

namespace vicsim {

namespace {

struct Tally {
  std::size_t n = 0;
  std::size_t correct = 0;
};

std::map<std::string, Tally> evaluate(const InstructionLearner& learner, const std::vector<InstructionPair>& items) {
  std::map<std::string, Tally> tallies;
  for (const auto& item : items) {
    auto& t = tallies[std::string(to_string(item.task))];
    ++t.n;
    t.correct += learner.predict_label(item.instruction) == item.label;
  }
  return tallies;
}

double rate(const Tally& t) { return t.n ? static_cast<double>(t.correct) / static_cast<double>(t.n) : 0.0; }

}  // namespace

nlohmann::ordered_json to_json(const DistillReport& r) {
  nlohmann::ordered_json j;
  j["learner"] = r.learner;
  j["train_size"] = r.train_size;
  j["heldout_size"] = r.heldout_size;
  j["epochs"] = r.epochs;
  j["seed"] = r.seed;
  auto& tasks = j["tasks"] = nlohmann::ordered_json::object();
  for (const auto& [name, t] : r.tasks) tasks[name] = {{"n", t.n}, {"baseline", t.baseline}, {"accuracy", t.accuracy}};
  j["overall_accuracy"] = r.overall_accuracy;
  return j;
}

DistillReport distill_discriminator(InstructionLearner& learner, const std::vector<InstructionPair>& dataset,
                                    const DistillOptions& options) {
  if (!(options.heldout_fraction > 0.0 && options.heldout_fraction < 1.0))
    throw InvalidArgument("heldout_fraction must be in (0, 1)");
  if (options.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  const auto heldout_n = static_cast<std::size_t>(std::llround(options.heldout_fraction * static_cast<double>(dataset.size())));
  if (heldout_n == 0 || heldout_n >= dataset.size())
    throw InvalidArgument("dataset of " + std::to_string(dataset.size()) + " items is too small to split");

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = Rng::derive(options.seed, 0);
  split_rng.shuffle(order);
  std::vector<InstructionPair> heldout, train;
  for (std::size_t i = 0; i < order.size(); ++i) (i < heldout_n ? heldout : train).push_back(dataset[order[i]]);

  const auto before = evaluate(learner, heldout);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng = Rng::derive(options.seed, epoch + 1);
    rng.shuffle(train);
    for (std::size_t start = 0; start < train.size(); start += options.batch_size) {
      const auto end = std::min(train.size(), start + options.batch_size);
      learner.instruction_step({train.begin() + static_cast<std::ptrdiff_t>(start),
                                train.begin() + static_cast<std::ptrdiff_t>(end)});
    }
  }
  const auto after = evaluate(learner, heldout);

  DistillReport report;
  report.learner = learner.learner_name();
  report.train_size = train.size();
  report.heldout_size = heldout.size();
  report.epochs = options.epochs;
  report.seed = options.seed;
  Tally total;
  for (const auto& [task, t] : after) {
    report.tasks[task] = {t.n, rate(before.at(task)), rate(t)};
    total.n += t.n;
    total.correct += t.correct;
  }
  report.overall_accuracy = rate(total);
  return report;
}

}  // namespace vicsim

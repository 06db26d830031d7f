#include "vicsim/adversarial.hpp"
#include "vicsim/error.hpp"

namespace vicsim {

CueReport discriminate_cue_report(const DiscriminatorBackend& discriminator, const std::vector<CuePair>& pairs,
                                  const GrammarJudge& judge, const GrammarRegistry& registry) {
  std::vector<std::size_t> n(registry.size(), 0), correct(registry.size(), 0);
  CueReport report;
  std::size_t total_correct = 0;
  for (const auto& pair : pairs) {
    const auto label = judge.classify(pair.human).value;
    const auto index = registry.index_of(label);
    if (!index) throw InvalidArgument("grammar judge returned unregistered label '" + label + "'");
    const bool identified =
        discriminator.score(pair.context, pair.generated) < discriminator.score(pair.context, pair.human);
    ++n[*index];
    correct[*index] += identified;
    total_correct += identified;
  }
  for (std::size_t i = 0; i < registry.size(); ++i) {
    CueGroup g{registry.id(i), n[i], std::nullopt};
    if (n[i]) g.accuracy = static_cast<double>(correct[i]) / static_cast<double>(n[i]);
    report.groups.push_back(std::move(g));
  }
  report.n = pairs.size();
  report.overall_accuracy = pairs.empty() ? 0.0 : static_cast<double>(total_correct) / static_cast<double>(pairs.size());
  return report;
}

}  // namespace vicsim

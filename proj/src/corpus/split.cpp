#include <algorithm>
#include <cmath>
#include <numeric>

#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"

namespace vicsim {

CorpusSplit split_corpus(const std::vector<Dialogue>& dialogues, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0.0) || !(ratios.eval > 0.0) || std::abs(ratios.train + ratios.eval - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must be positive and sum to 1");
  }
  const std::size_t n = dialogues.size();
  if (n < 2) throw InvalidArgument("corpus needs at least 2 dialogues to split");

  std::vector<std::vector<std::size_t>> strata(kAllEventTypes.size());
  for (std::size_t i = 0; i < n; ++i) {
    strata[static_cast<std::size_t>(dialogues[i].event_type)].push_back(i);
  }

  // Largest-remainder apportionment keeps the global count at round(r * n)
  // and every stratum within one dialogue of its exact share.
  const auto total_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> quota(strata.size());
  std::vector<double> remainder(strata.size());
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const double exact = ratios.train * static_cast<double>(strata[s].size());
    quota[s] = static_cast<std::size_t>(std::floor(exact));
    remainder[s] = exact - static_cast<double>(quota[s]);
    assigned += quota[s];
  }
  std::vector<std::size_t> order(strata.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total_train; k = (k + 1) % order.size()) {
    const auto s = order[k];
    if (quota[s] < strata[s].size()) {
      ++quota[s];
      ++assigned;
    }
  }
  std::vector<bool> in_train(n, false);
  Rng rng(seed);
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto members = strata[s];
    rng.shuffle(members);
    for (std::size_t k = 0; k < quota[s]; ++k) in_train[members[k]] = true;
  }
  CorpusSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? split.train : split.eval).push_back(dialogues[i]);
  }
  return split;
}

}  // namespace vicsim

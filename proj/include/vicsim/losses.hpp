#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "vicsim/error.hpp"

namespace vicsim {

inline constexpr double kDefaultScoreClamp = 1e-6;

template <typename Scalar>
Scalar clamp_score(Scalar s, Scalar eps = Scalar(kDefaultScoreClamp)) {
  return std::clamp(s, eps, Scalar(1) - eps);
}

template <typename Derived>
auto clamp_scores(const Eigen::MatrixBase<Derived>& s,
                  typename Derived::Scalar eps = typename Derived::Scalar(kDefaultScoreClamp)) {
  using Scalar = typename Derived::Scalar;
  return s.derived().array().max(eps).min(Scalar(1) - eps);
}

// mean(-log D(G(p))) over clamped fake scores.
template <typename Derived>
typename Derived::Scalar generator_loss(const Eigen::MatrixBase<Derived>& fake,
                                        typename Derived::Scalar eps = typename Derived::Scalar(kDefaultScoreClamp)) {
  if (fake.size() == 0) throw InvalidArgument("generator_loss: no fake scores");
  return -clamp_scores(fake, eps).log().mean();
}

// mean(-log D(x)) over real scores plus mean(-log(1 - D(G(p)))) over fake scores.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar discriminator_loss(
    const Eigen::MatrixBase<DerivedA>& real, const Eigen::MatrixBase<DerivedB>& fake,
    typename DerivedA::Scalar eps = typename DerivedA::Scalar(kDefaultScoreClamp)) {
  using Scalar = typename DerivedA::Scalar;
  if (real.size() == 0 || fake.size() == 0) throw InvalidArgument("discriminator_loss: empty score list");
  return -clamp_scores(real, eps).log().mean() - (Scalar(1) - clamp_scores(fake, eps)).log().mean();
}

inline Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

inline double generator_loss(const std::vector<double>& fake, double eps = kDefaultScoreClamp) {
  return generator_loss(as_vector(fake), eps);
}

inline double discriminator_loss(const std::vector<double>& real, const std::vector<double>& fake,
                                 double eps = kDefaultScoreClamp) {
  return discriminator_loss(as_vector(real), as_vector(fake), eps);
}

enum class RewardBaseline { batch_mean, none };

template <typename Scalar>
struct ReinforceResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rewards;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> advantages;
  Scalar baseline = 0;
  // mean over samples of -a_i * sum_t log p_i,t
  Scalar loss = 0;
};

// Policy-gradient surrogate with reward log D. seq_log_probs holds the summed
// token log-probabilities of each sample.
template <typename DerivedS, typename DerivedL>
ReinforceResult<typename DerivedS::Scalar> reinforce_update(
    const Eigen::MatrixBase<DerivedS>& scores, const Eigen::MatrixBase<DerivedL>& seq_log_probs,
    RewardBaseline baseline, typename DerivedS::Scalar eps = typename DerivedS::Scalar(kDefaultScoreClamp)) {
  if (scores.size() != seq_log_probs.size()) throw InvalidArgument("reinforce_update: length mismatch");
  if (scores.size() == 0) throw InvalidArgument("reinforce_update: empty batch");
  ReinforceResult<typename DerivedS::Scalar> r;
  r.rewards = clamp_scores(scores, eps).log().matrix();
  r.baseline = baseline == RewardBaseline::batch_mean ? r.rewards.mean() : 0;
  r.advantages = r.rewards.array() - r.baseline;
  r.loss = -(r.advantages.array() * seq_log_probs.derived().array()).mean();
  return r;
}

}  // namespace vicsim

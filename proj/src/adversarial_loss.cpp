#include "evavla/adversarial_loss.hpp"

#include <algorithm>
#include <cmath>

#include "evavla/error.hpp"

namespace evavla {

double cosine_similarity(const ActionVector& a, const ActionVector& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i]))
      throw Error(ErrorCode::Evaluation, "non-finite action component");
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (std::sqrt(na) < kZeroNorm || std::sqrt(nb) < kZeroNorm) return 0.0;
  // sqrt(|a|^2 |b|^2) rather than |a| |b|: identical and antipodal pairs come
  // out as exactly +1 and -1.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::size_t compared_steps(const ActionSequence& clean, const ActionSequence& adv,
                           LengthPolicy policy) {
  return policy == LengthPolicy::Truncate
             ? std::min(clean.steps.size(), adv.steps.size())
             : clean.steps.size();
}

double adversarial_loss(const ActionSequence& clean, const ActionSequence& adv,
                        LengthPolicy policy) {
  if (clean.steps.empty())
    throw Error(ErrorCode::Precondition,
                "clean rollout for episode '" + clean.episode_id + "' has no steps");
  const std::size_t n = std::min(clean.steps.size(), adv.steps.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += cosine_similarity(clean.steps[i], adv.steps[i]);
  double loss = -sum;
  if (policy == LengthPolicy::Penalize && adv.steps.size() < clean.steps.size())
    loss += static_cast<double>(clean.steps.size() - adv.steps.size());
  return loss;
}

double normalized_loss(const ActionSequence& clean, const ActionSequence& adv,
                       LengthPolicy policy) {
  const double loss = adversarial_loss(clean, adv, policy);
  const std::size_t n = compared_steps(clean, adv, policy);
  return n == 0 ? 0.0 : loss / static_cast<double>(n);
}

}  // namespace evavla

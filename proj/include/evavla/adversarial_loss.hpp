#pragma once

#include <array>
#include <string>
#include <vector>

namespace evavla {

/// One 7-DoF action: (dPx, dPy, dPz, dRx, dRy, dRz, gripper).
using ActionVector = std::array<double, 7>;

struct ActionSequence {
  std::vector<ActionVector> steps;
  bool success = false;
  std::string episode_id;
};

/// Below this norm an action counts as zero and its cosine is defined as 0.
inline constexpr double kZeroNorm = 1e-12;

double cosine_similarity(const ActionVector& a, const ActionVector& b);

enum class LengthPolicy {
  Truncate,  // compare the first min(|clean|, |adv|) steps
  Penalize,  // missing adversarial steps count as fully opposed (+1 each)
};

/// L = -sum_i cos(clean_i, adv_i). Throws Precondition on an empty clean
/// sequence; an empty adversarial sequence scores 0 under Truncate.
double adversarial_loss(const ActionSequence& clean, const ActionSequence& adv,
                        LengthPolicy policy = LengthPolicy::Truncate);

/// Number of step pairs adversarial_loss() sums over.
std::size_t compared_steps(const ActionSequence& clean, const ActionSequence& adv,
                           LengthPolicy policy = LengthPolicy::Truncate);

/// adversarial_loss / N, in [-1, 1]; 0 when nothing is compared.
double normalized_loss(const ActionSequence& clean, const ActionSequence& adv,
                       LengthPolicy policy = LengthPolicy::Truncate);

}  // namespace evavla

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "evavla/param_space.hpp"

namespace evavla {

struct EarlyStopPolicy {
  int window = 10;
  double min_improvement = 1e-3;
};

struct OptimizerConfig {
  int population = 10;        // K
  int max_iterations = 50;    // t_max
  double initial_sigma = 0.3;
  std::uint64_t seed = 0;
  bool lra_enabled = false;
  EarlyStopPolicy early_stop;
  /// Hard cap on objective evaluations; unset means K * t_max.
  std::optional<long> max_queries;

  void validate() const;
};

/// Search distribution N(mean, sigma^2 * cov) plus the adaptation constants
/// fixed at initialisation. Single writer: the sampling RNG lives here.
struct DistributionState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double sigma = 1.0;
  Eigen::VectorXd path_sigma;
  int iteration = 0;
  Eigen::VectorXd weights;
  double c_c = 0.0;
  double c_sigma = 0.0;
  double mu_eff = 0.0;
  std::mt19937_64 rng;

  int dim() const { return static_cast<int>(mean.size()); }
};

enum class StopReason { None, MaxIterations, EarlyStop, QueryBudget, OracleFailure };

const char* to_string(StopReason reason) noexcept;

struct IterationRecord {
  int iteration = 0;          // 1-based count of completed updates
  double best_loss = 0.0;     // running maximum up to and including this one
  double iteration_best = 0.0;
  double mean_loss = 0.0;
  double sigma = 0.0;         // step size after the update
  Eigen::VectorXd mean;       // distribution mean after the update
};

struct OptimizationTrace {
  std::vector<IterationRecord> iterations;
  Eigen::VectorXd best_candidate;
  double best_loss = -std::numeric_limits<double>::infinity();
  long total_queries = 0;
  StopReason stop_reason = StopReason::None;
  // Set only when the objective threw; an exhausted max_queries leaves it empty.
  std::string failure;
};

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::None;
};

/// Log-rank weights over the top floor(K/2) candidates, zero for the rest.
Eigen::VectorXd selection_weights(int population);

/// E||N(0, I)|| in d dimensions (series approximation).
double expected_normal_norm(int dim);

DistributionState init_state(int dim, const OptimizerConfig& config);

/// Draws K candidates mean + sigma * B * D * z. Only advances state.rng.
std::vector<Eigen::VectorXd> sample_candidates(DistributionState& state, int count);

/// Most adversarial first (descending loss), ties by lower index.
std::vector<int> rank_candidates(std::span<const double> losses);

DistributionState update_state(const DistributionState& state,
                               const std::vector<Eigen::VectorXd>& candidates,
                               std::span<const double> losses);

/// Bounded multiplicative step-size schedule driven by recent improvements.
DistributionState lra_adjust(const DistributionState& state,
                             const OptimizationTrace& trace, bool enabled);

StopDecision should_stop(const OptimizationTrace& trace,
                         const EarlyStopPolicy& policy, int max_iterations);

/// Objective returns the adversarial loss (to be maximised) of a raw,
/// unclipped normalized candidate. `iteration` is the 0-based generation.
using Objective = std::function<double(const Eigen::VectorXd& candidate, int iteration)>;

struct OptimizationResult {
  OptimizationTrace trace;
  DistributionState state;

  /// Draws from the final distribution N(mean*, sigma*^2 C*).
  std::vector<Eigen::VectorXd> sample_final(int count);
};

/// Runs sample -> evaluate -> rank -> update until should_stop() fires.
/// Errors thrown by the objective end the run with a partial trace and a
/// non-empty `failure`; the reason is QueryBudget for budget errors and
/// OracleFailure otherwise.
OptimizationResult maximize(const Objective& objective, int dim,
                            const OptimizerConfig& config,
                            const std::optional<Eigen::VectorXd>& initial_mean = {});

/// Same as maximize(), with candidates decoded into `space` before the loss
/// is evaluated. The distribution keeps the unclipped samples.
using PhysicalObjective =
    std::function<double(const PhysicalParams& params, int iteration)>;

OptimizationResult run_optimization(const VariationSpace& space,
                                    const PhysicalObjective& objective,
                                    const OptimizerConfig& config);

}  // namespace evavla

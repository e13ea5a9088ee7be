#include "evavla/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "evavla/error.hpp"

namespace evavla {

namespace {

constexpr double kEigenFloor = 1e-12;
constexpr double kLraFactor = 1.2;
constexpr double kSigmaMin = 1e-8;
constexpr double kSigmaMax = 10.0;

struct Decomposition {
  Eigen::MatrixXd basis;
  Eigen::VectorXd scales;  // square roots of the eigenvalues
};

Decomposition decompose(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::InternalState, "covariance eigendecomposition failed");
  Eigen::VectorXd ev = solver.eigenvalues().cwiseMax(kEigenFloor);
  return {solver.eigenvectors(), ev.cwiseSqrt()};
}

// Symmetrize, then lift any eigenvalue below the floor.
Eigen::MatrixXd regularize(const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::InternalState, "covariance eigendecomposition failed");
  if (solver.eigenvalues().minCoeff() >= kEigenFloor) return sym;
  // Rebuild with a little headroom so round-off cannot dip below the floor.
  Eigen::VectorXd ev = solver.eigenvalues().cwiseMax(2.0 * kEigenFloor);
  const Eigen::MatrixXd& b = solver.eigenvectors();
  Eigen::MatrixXd out = b * ev.asDiagonal() * b.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

const char* to_string(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::None: return "none";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::EarlyStop: return "early_stop";
    case StopReason::QueryBudget: return "query_budget";
    case StopReason::OracleFailure: return "oracle_failure";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  if (population < 2)
    throw Error(ErrorCode::Config, "population must be >= 2");
  if (max_iterations < 1)
    throw Error(ErrorCode::Config, "max_iterations must be >= 1");
  if (!(initial_sigma > 0.0) || !std::isfinite(initial_sigma))
    throw Error(ErrorCode::Config, "initial_sigma must be positive");
  if (early_stop.window < 1)
    throw Error(ErrorCode::Config, "early_stop.window must be >= 1");
  if (!std::isfinite(early_stop.min_improvement))
    throw Error(ErrorCode::Config, "early_stop.min_improvement must be finite");
  if (max_queries && *max_queries < 1)
    throw Error(ErrorCode::Config, "max_queries must be >= 1");
}

Eigen::VectorXd selection_weights(int population) {
  if (population < 2)
    throw Error(ErrorCode::InvalidParameter, "selection needs at least 2 candidates");
  const int parents = population / 2;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(population);
  for (int i = 0; i < parents; ++i)
    w[i] = std::log(parents + 0.5) - std::log(static_cast<double>(i + 1));
  return w / w.sum();
}

double expected_normal_norm(int dim) {
  const double d = dim;
  return std::sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
}

DistributionState init_state(int dim, const OptimizerConfig& config) {
  if (dim < 1) throw Error(ErrorCode::Dimension, "search dimension must be >= 1");
  if (config.population < 2)
    throw Error(ErrorCode::InvalidParameter, "population must be >= 2");
  DistributionState s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.cov = Eigen::MatrixXd::Identity(dim, dim);
  s.sigma = config.initial_sigma;
  s.path_sigma = Eigen::VectorXd::Zero(dim);
  s.weights = selection_weights(config.population);
  s.mu_eff = 1.0 / s.weights.squaredNorm();
  s.c_sigma = (s.mu_eff + 2.0) / (dim + s.mu_eff + 5.0);
  s.c_c = 4.0 / (dim + 4.0);
  s.rng.seed(config.seed);
  return s;
}

std::vector<Eigen::VectorXd> sample_candidates(DistributionState& state, int count) {
  const Decomposition dec = decompose(state.cov);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd z(state.dim());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(state.rng);
    out.push_back(state.mean + state.sigma * (dec.basis * dec.scales.cwiseProduct(z)));
  }
  return out;
}

std::vector<int> rank_candidates(std::span<const double> losses) {
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (std::isnan(losses[i]))
      throw Error(ErrorCode::Evaluation,
                  "candidate " + std::to_string(i) + " has a NaN loss");
  std::vector<int> order(losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return losses[a] > losses[b]; });
  return order;
}

DistributionState update_state(const DistributionState& state,
                               const std::vector<Eigen::VectorXd>& candidates,
                               std::span<const double> losses) {
  const auto k = static_cast<Eigen::Index>(candidates.size());
  if (k != state.weights.size() || losses.size() != candidates.size())
    throw Error(ErrorCode::Dimension,
                "update needs exactly " + std::to_string(state.weights.size()) +
                    " candidates and losses");
  for (const auto& c : candidates)
    if (c.size() != state.mean.size())
      throw Error(ErrorCode::Dimension, "candidate dimension mismatch");
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (!std::isfinite(losses[i]))
      throw Error(ErrorCode::Evaluation,
                  "candidate " + std::to_string(i) + " has a non-finite loss");

  const auto order = rank_candidates(losses);
  const int d = state.dim();

  Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index r = 0; r < k; ++r) {
    const double w = state.weights[r];
    if (w == 0.0) continue;
    const Eigen::VectorXd& x = candidates[static_cast<std::size_t>(order[r])];
    new_mean += w * x;
    const Eigen::VectorXd y = (x - state.mean) / state.sigma;
    rank_mu += w * (y * y.transpose());
  }

  DistributionState next = state;
  next.mean = new_mean;
  next.cov = regularize((1.0 - state.c_c) * state.cov + state.c_c * rank_mu);

  const Decomposition dec = decompose(state.cov);
  const Eigen::MatrixXd inv_sqrt =
      dec.basis * dec.scales.cwiseInverse().asDiagonal() * dec.basis.transpose();
  const double cs = state.c_sigma;
  next.path_sigma = (1.0 - cs) * state.path_sigma +
                    std::sqrt(cs * (2.0 - cs) * state.mu_eff) * inv_sqrt *
                        (new_mean - state.mean) / state.sigma;
  next.sigma = state.sigma *
               std::exp(cs * (next.path_sigma.norm() / expected_normal_norm(d) - 1.0));
  next.iteration = state.iteration + 1;

  if (!next.mean.allFinite() || !next.cov.allFinite() ||
      !next.path_sigma.allFinite() || !std::isfinite(next.sigma) ||
      !(next.sigma > 0.0))
    throw Error(ErrorCode::InternalState, "non-finite distribution update");
  return next;
}

DistributionState lra_adjust(const DistributionState& state,
                             const OptimizationTrace& trace, bool enabled) {
  const auto& it = trace.iterations;
  if (!enabled || it.size() < 2) return state;
  auto improved = [&](std::size_t j) {
    return j == 0 || it[j].best_loss > it[j - 1].best_loss;
  };
  const std::size_t n = it.size();
  const bool last = improved(n - 1);
  const bool prev = improved(n - 2);
  DistributionState next = state;
  if (last && prev)
    next.sigma = state.sigma * kLraFactor;
  else if (!last && !prev)
    next.sigma = state.sigma / kLraFactor;
  next.sigma = std::clamp(next.sigma, kSigmaMin, kSigmaMax);
  return next;
}

StopDecision should_stop(const OptimizationTrace& trace,
                         const EarlyStopPolicy& policy, int max_iterations) {
  const auto n = static_cast<int>(trace.iterations.size());
  if (policy.window >= 1 && n > policy.window) {
    const double now = trace.iterations[n - 1].best_loss;
    const double before = trace.iterations[n - 1 - policy.window].best_loss;
    if (now - before < policy.min_improvement)
      return {true, StopReason::EarlyStop};
  }
  if (n >= max_iterations) return {true, StopReason::MaxIterations};
  return {};
}

std::vector<Eigen::VectorXd> OptimizationResult::sample_final(int count) {
  return sample_candidates(state, count);
}

OptimizationResult maximize(const Objective& objective, int dim,
                            const OptimizerConfig& config,
                            const std::optional<Eigen::VectorXd>& initial_mean) {
  config.validate();
  OptimizationResult result{{}, init_state(dim, config)};
  auto& state = result.state;
  auto& trace = result.trace;
  if (initial_mean) {
    if (initial_mean->size() != dim)
      throw Error(ErrorCode::Dimension, "initial mean dimension mismatch");
    state.mean = *initial_mean;
  }
  const long budget = config.max_queries.value_or(
      static_cast<long>(config.population) * config.max_iterations);
  const int k = config.population;

  while (true) {
    const int generation = static_cast<int>(trace.iterations.size());
    auto candidates = sample_candidates(state, k);
    std::vector<double> losses;
    losses.reserve(candidates.size());
    for (const auto& x : candidates) {
      if (trace.total_queries >= budget) {
        trace.stop_reason = StopReason::QueryBudget;
        return result;
      }
      double loss = 0.0;
      try {
        loss = objective(x, generation);
      } catch (const Error& e) {
        trace.stop_reason = e.code() == ErrorCode::Budget ? StopReason::QueryBudget
                                                          : StopReason::OracleFailure;
        trace.failure = e.what();
        return result;
      }
      ++trace.total_queries;
      if (!std::isfinite(loss))
        throw Error(ErrorCode::Evaluation,
                    "candidate " + std::to_string(losses.size()) +
                        " produced a non-finite loss");
      losses.push_back(loss);
      if (loss > trace.best_loss) {
        trace.best_loss = loss;
        trace.best_candidate = x;
      }
    }

    state = update_state(state, candidates, losses);

    IterationRecord rec;
    rec.iteration = state.iteration;
    rec.best_loss = trace.best_loss;
    rec.iteration_best = *std::max_element(losses.begin(), losses.end());
    rec.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) /
                    static_cast<double>(losses.size());
    rec.mean = state.mean;
    trace.iterations.push_back(rec);

    state = lra_adjust(state, trace, config.lra_enabled);
    trace.iterations.back().sigma = state.sigma;

    if (const auto stop = should_stop(trace, config.early_stop, config.max_iterations);
        stop.stop) {
      trace.stop_reason = stop.reason;
      return result;
    }
  }
}

OptimizationResult run_optimization(const VariationSpace& space,
                                    const PhysicalObjective& objective,
                                    const OptimizerConfig& config) {
  space.validate();
  return maximize(
      [&](const Eigen::VectorXd& x, int iteration) {
        return objective(decode(space, x), iteration);
      },
      space.search_dim(), config);
}

}  // namespace evavla

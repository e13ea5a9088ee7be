#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "evavla/cmaes.hpp"
#include "evavla/error.hpp"

using namespace evavla;

namespace {

OptimizerConfig config_with(int k, std::uint64_t seed = 0) {
  OptimizerConfig c;
  c.population = k;
  c.seed = seed;
  c.initial_sigma = 1.0;
  return c;
}

}  // namespace

TEST_CASE("init_state") {
  const auto s = init_state(1, config_with(10));
  CHECK(s.cov == Eigen::MatrixXd::Identity(1, 1));
  CHECK(s.mean == Eigen::VectorXd::Zero(1));
  CHECK(s.path_sigma == Eigen::VectorXd::Zero(1));
  CHECK(s.sigma == 1.0);
  CHECK(s.iteration == 0);

  CHECK_THROWS_AS(init_state(0, config_with(10)), Error);
  CHECK_THROWS_AS(init_state(2, config_with(1)), Error);
}

TEST_CASE("log-rank weights") {
  // w_i ~ ln(2.5) - ln(i), frozen from an independent 30-digit evaluation.
  const auto w = selection_weights(4);
  CHECK(w.size() == 4);
  CHECK(w[0] == doctest::Approx(0.804162859932729505).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.195837140067270495).epsilon(1e-14));
  CHECK(w[2] == 0.0);
  CHECK(w[3] == 0.0);

  for (int k : {2, 3, 7, 10, 31}) {
    const auto wk = selection_weights(k);
    CHECK(wk.sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (int i = 1; i < k; ++i) CHECK(wk[i] <= wk[i - 1]);
    CHECK(wk.minCoeff() >= 0.0);
  }
}

TEST_CASE("adaptation constants for K=10, d=2") {
  const auto s = init_state(2, config_with(10));
  CHECK(s.mu_eff == doctest::Approx(3.16729928141070314).epsilon(1e-13));
  CHECK(s.c_sigma == doctest::Approx(0.508227321571844717).epsilon(1e-13));
  CHECK(s.c_c == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(expected_normal_norm(2) == doctest::Approx(1.254272742818995014).epsilon(1e-14));
}

TEST_CASE("rank_candidates orders by descending loss with index tie-break") {
  const std::vector<double> a{-3, -1, -2};
  CHECK(rank_candidates(a) == std::vector<int>{1, 2, 0});
  const std::vector<double> b{4, 4, 4, 4};
  CHECK(rank_candidates(b) == std::vector<int>{0, 1, 2, 3});
  const std::vector<double> c{5, 5, 7};
  CHECK(rank_candidates(c) == std::vector<int>{2, 0, 1});

  const std::vector<double> bad{1.0, std::nan(""), 0.0};
  try {
    rank_candidates(bad);
    FAIL("NaN accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Evaluation);
    CHECK(std::string(e.what()).find("candidate 1") != std::string::npos);
  }
}

TEST_CASE("sampling") {
  SUBCASE("zero step size collapses onto the mean") {
    auto s = init_state(3, config_with(6));
    s.mean << 0.1, -0.2, 0.3;
    s.sigma = 0.0;
    for (const auto& x : sample_candidates(s, 6)) CHECK(x == s.mean);
  }
  SUBCASE("same seed gives bitwise identical candidates") {
    auto a = init_state(4, config_with(10, 99));
    auto b = init_state(4, config_with(10, 99));
    const auto xa = sample_candidates(a, 10);
    const auto xb = sample_candidates(b, 10);
    for (std::size_t i = 0; i < xa.size(); ++i) CHECK(xa[i] == xb[i]);
  }
  SUBCASE("Monte-Carlo covariance and mean match the declared distribution") {
    auto s = init_state(2, config_with(10, 7));
    const int n = 100000;
    const auto xs = sample_candidates(s, n);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& x : xs) mean += x;
    mean /= n;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
    cov /= (n - 1);
    CHECK(std::abs(cov(0, 0) - 1.0) < 0.05);
    CHECK(std::abs(cov(1, 1) - 1.0) < 0.05);
    CHECK(std::abs(cov(0, 1)) < 0.05);
    // Three standard errors of the mean per component.
    CHECK(std::abs(mean[0]) < 3.0 / std::sqrt(double(n)));
    CHECK(std::abs(mean[1]) < 3.0 / std::sqrt(double(n)));
  }
  SUBCASE("correlated covariance is reproduced") {
    auto s = init_state(2, config_with(10, 3));
    s.cov << 2.0, 0.9, 0.9, 1.0;
    s.sigma = 0.5;
    s.mean << 1.0, -1.0;
    const int n = 100000;
    const auto xs = sample_candidates(s, n);
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    for (const auto& x : xs) m += x;
    m /= n;
    Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
    for (const auto& x : xs) c += (x - m) * (x - m).transpose();
    c /= (n - 1);
    const Eigen::Matrix2d expected = 0.25 * s.cov;
    CHECK(((c - expected).cwiseAbs().array() < 0.05 * expected.cwiseAbs().maxCoeff()).all());
    CHECK(std::abs(m[0] - 1.0) < 3.0 * std::sqrt(expected(0, 0) / n));
    CHECK(std::abs(m[1] + 1.0) < 3.0 * std::sqrt(expected(1, 1) / n));
  }
}

TEST_CASE("update_state") {
  SUBCASE("hand-computed mean for d=1, K=4") {
    auto s = init_state(1, config_with(4));
    std::vector<Eigen::VectorXd> xs;
    for (double v : {1.0, 3.0, 5.0, 7.0}) xs.push_back(Eigen::VectorXd::Constant(1, v));
    const std::vector<double> losses{4, 3, 2, 1};
    const auto next = update_state(s, xs, losses);
    CHECK(next.mean[0] == doctest::Approx(1.391674280134540989).epsilon(1e-13));
    CHECK(next.iteration == 1);
  }
  SUBCASE("identical candidates pull the mean onto them") {
    auto s = init_state(2, config_with(6));
    const Eigen::Vector2d v(0.3, -0.7);
    const std::vector<Eigen::VectorXd> xs(6, v);
    const std::vector<double> losses{1, 2, 3, 4, 5, 6};
    CHECK((update_state(s, xs, losses).mean - v).norm() < 1e-15);
  }
  SUBCASE("candidates at the mean shrink C by (1 - c_c)") {
    auto s = init_state(3, config_with(8));
    s.mean << 0.1, 0.2, 0.3;
    const std::vector<Eigen::VectorXd> xs(8, s.mean);
    const std::vector<double> losses(8, 0.0);
    const auto next = update_state(s, xs, losses);
    CHECK((next.mean - s.mean).norm() < 1e-15);
    CHECK((next.cov - (1.0 - s.c_c) * s.cov).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("errors") {
    auto s = init_state(2, config_with(4));
    const std::vector<Eigen::VectorXd> three(3, Eigen::Vector2d::Zero());
    const std::vector<double> l3{1, 2, 3};
    CHECK_THROWS_AS(update_state(s, three, l3), Error);
    const std::vector<Eigen::VectorXd> wrong(4, Eigen::Vector3d::Zero());
    const std::vector<double> l4{1, 2, 3, 4};
    CHECK_THROWS_AS(update_state(s, wrong, l4), Error);
    const std::vector<Eigen::VectorXd> ok(4, Eigen::Vector2d::Zero());
    const std::vector<double> inf{1, 2, INFINITY, 4};
    CHECK_THROWS_AS(update_state(s, ok, inf), Error);
  }
}

TEST_CASE("property: covariance stays symmetric positive definite") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = init_state(3, config_with(10, seed));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 60; ++t) {
      auto xs = sample_candidates(s, 10);
      std::vector<double> losses;
      // Rugged objective: noise plus a ridge so C keeps changing shape.
      for (const auto& x : xs) losses.push_back(-std::pow(x[0] - 3 * x[1], 2) + 0.1 * g(rng));
      s = update_state(s, xs, losses);
      CHECK((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.cov);
      CHECK(es.eigenvalues().minCoeff() >= 1e-12);
      CHECK(s.sigma > 0.0);
      CHECK(s.iteration == t + 1);
    }
  }
}

TEST_CASE("lra_adjust") {
  auto s = init_state(2, config_with(10));
  OptimizationTrace trace;
  auto push = [&](double best) {
    IterationRecord r;
    r.best_loss = best;
    trace.iterations.push_back(r);
  };

  s.sigma = 0.5;
  CHECK(lra_adjust(s, trace, true).sigma == 0.5);  // no history
  push(1.0);
  push(2.0);
  CHECK(lra_adjust(s, trace, true).sigma == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(lra_adjust(s, trace, false).sigma == 0.5);

  push(2.0);
  push(2.0);
  s.sigma = 0.6;
  CHECK(lra_adjust(s, trace, true).sigma == doctest::Approx(0.5).epsilon(1e-15));

  push(3.0);  // one of two improved: unchanged
  CHECK(lra_adjust(s, trace, true).sigma == 0.6);

  push(4.0);
  s.sigma = 9.5;
  CHECK(lra_adjust(s, trace, true).sigma == 10.0);
  push(4.0);
  push(4.0);
  s.sigma = 1e-8;
  CHECK(lra_adjust(s, trace, true).sigma == 1e-8);

  const auto adjusted = lra_adjust(s, trace, true);
  CHECK(adjusted.mean == s.mean);
  CHECK(adjusted.cov == s.cov);
  CHECK(adjusted.iteration == s.iteration);
}

TEST_CASE("should_stop") {
  OptimizationTrace trace;
  const EarlyStopPolicy policy{10, 1e-3};
  auto push = [&](double best) {
    IterationRecord r;
    r.best_loss = best;
    trace.iterations.push_back(r);
  };
  for (int i = 0; i < 10; ++i) push(1.0);
  CHECK_FALSE(should_stop(trace, policy, 50).stop);  // window not yet full
  push(1.0);
  auto d = should_stop(trace, policy, 50);
  CHECK(d.stop);
  CHECK(d.reason == StopReason::EarlyStop);

  trace.iterations.clear();
  for (int i = 0; i < 30; ++i) push(0.01 * i);
  CHECK_FALSE(should_stop(trace, policy, 50).stop);
  d = should_stop(trace, policy, 30);
  CHECK(d.stop);
  CHECK(d.reason == StopReason::MaxIterations);
}

TEST_CASE("maximize") {
  SUBCASE("sphere in 4-d reaches 1e-6 by generation 200") {
    OptimizerConfig c = config_with(10, 5);
    c.max_iterations = 200;
    c.early_stop.min_improvement = 0.0;
    const auto r = maximize([](const Eigen::VectorXd& x, int) { return -x.squaredNorm(); }, 4, c);
    CHECK(-r.trace.best_loss < 1e-6);
    CHECK(r.trace.stop_reason == StopReason::MaxIterations);
  }
  SUBCASE("known optimum in normalized space") {
    const Eigen::Vector2d target(0.35, -0.6);
    OptimizerConfig c = config_with(10, 1);
    c.initial_sigma = 0.3;
    c.early_stop.min_improvement = 0.0;
    const auto r = maximize(
        [&](const Eigen::VectorXd& x, int) {
          return -(x.cwiseMax(-1.0).cwiseMin(1.0) - target).squaredNorm();
        },
        2, c);
    CHECK((r.trace.best_candidate - target).norm() < 1e-2);
  }
  SUBCASE("trace invariants") {
    OptimizerConfig c = config_with(6, 2);
    c.max_iterations = 25;
    c.early_stop.min_improvement = 0.0;
    int calls = 0;
    auto r = maximize(
        [&](const Eigen::VectorXd& x, int) {
          ++calls;
          return std::sin(3 * x[0]) - x.squaredNorm();
        },
        3, c);
    CHECK(r.trace.total_queries == calls);
    CHECK(r.trace.total_queries == 6L * static_cast<long>(r.trace.iterations.size()));
    for (std::size_t i = 1; i < r.trace.iterations.size(); ++i)
      CHECK(r.trace.iterations[i].best_loss >= r.trace.iterations[i - 1].best_loss);
    CHECK(r.sample_final(4).size() == 4);
  }
  SUBCASE("determinism") {
    OptimizerConfig c = config_with(8, 11);
    auto f = [](const Eigen::VectorXd& x, int) { return -std::abs(x[0] - 0.2) - x[1] * x[1]; };
    const auto a = maximize(f, 2, c);
    const auto b = maximize(f, 2, c);
    REQUIRE(a.trace.iterations.size() == b.trace.iterations.size());
    for (std::size_t i = 0; i < a.trace.iterations.size(); ++i) {
      CHECK(a.trace.iterations[i].mean == b.trace.iterations[i].mean);
      CHECK(a.trace.iterations[i].sigma == b.trace.iterations[i].sigma);
    }
    CHECK(a.state.cov == b.state.cov);
  }
  SUBCASE("objective failure keeps the partial trace") {
    OptimizerConfig c = config_with(4);
    int calls = 0;
    const auto r = maximize(
        [&](const Eigen::VectorXd&, int) -> double {
          if (++calls == 7) throw Error(ErrorCode::Transport, "victim died");
          return 0.0;
        },
        2, c);
    CHECK(r.trace.stop_reason == StopReason::OracleFailure);
    CHECK(r.trace.total_queries == 6);
    CHECK(r.trace.iterations.size() == 1);
    CHECK(r.trace.failure.find("victim died") != std::string::npos);
  }
  SUBCASE("budget error maps to query_budget") {
    OptimizerConfig c = config_with(4);
    const auto r = maximize(
        [&](const Eigen::VectorXd&, int) -> double { throw Error(ErrorCode::Budget, "spent"); },
        2, c);
    CHECK(r.trace.stop_reason == StopReason::QueryBudget);
    CHECK(r.trace.total_queries == 0);
  }
  SUBCASE("max_queries caps evaluations") {
    OptimizerConfig c = config_with(4);
    c.max_queries = 10;
    const auto r = maximize([](const Eigen::VectorXd& x, int) { return x[0]; }, 1, c);
    CHECK(r.trace.total_queries == 10);
    CHECK(r.trace.stop_reason == StopReason::QueryBudget);
    CHECK(r.trace.failure.empty());
  }
  SUBCASE("invalid config") {
    OptimizerConfig c = config_with(10);
    c.max_iterations = 0;
    CHECK_THROWS_AS(maximize([](const Eigen::VectorXd&, int) { return 0.0; }, 2, c), Error);
    c = config_with(1);
    CHECK_THROWS_AS(maximize([](const Eigen::VectorXd&, int) { return 0.0; }, 2, c), Error);
  }
  SUBCASE("NaN loss is a hard error") {
    CHECK_THROWS_AS(
        maximize([](const Eigen::VectorXd&, int) { return std::nan(""); }, 2, config_with(4)),
        Error);
  }
}

TEST_CASE("property: best loss dominates a grid search on 1-2 dim objectives") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  for (int trial = 0; trial < 6; ++trial) {
    const int dim = 1 + trial % 2;
    const Eigen::VectorXd c1 = Eigen::VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return u(rng); });
    const Eigen::VectorXd c2 = Eigen::VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return u(rng); });
    // Two bumps of different heights inside the cube.
    auto f = [&](const Eigen::VectorXd& raw) {
      const Eigen::VectorXd x = raw.cwiseMax(-1.0).cwiseMin(1.0);
      return std::exp(-(x - c1).squaredNorm() / 0.08) + 0.7 * std::exp(-(x - c2).squaredNorm() / 0.02);
    };
    double grid = -1e300;
    const int n = 50;
    for (int g = 0; g < (dim == 1 ? n : n * n); ++g) {
      Eigen::VectorXd x(dim);
      int rem = g;
      for (int k = 0; k < dim; ++k) {
        x[k] = -1.0 + 2.0 * (rem % n) / (n - 1);
        rem /= n;
      }
      grid = std::max(grid, f(x));
    }
    OptimizerConfig c = config_with(10, static_cast<std::uint64_t>(trial));
    c.initial_sigma = 0.3;
    const auto r = maximize([&](const Eigen::VectorXd& x, int) { return f(x); }, dim, c);
    CHECK(r.trace.best_loss >= grid - 1e-2);
  }
}

TEST_CASE("run_optimization decodes into the space") {
  const auto space = make_rotation_space(-90.0, 90.0);
  OptimizerConfig c = config_with(10, 4);
  c.initial_sigma = 0.3;
  std::vector<double> seen;
  const auto r = run_optimization(
      space,
      [&](const PhysicalParams& p, int) {
        seen.push_back(p.values[2]);
        CHECK(p.values[0] == 0.0);
        CHECK(p.values[1] == 0.0);
        return -std::abs(p.values[2] - 30.0);
      },
      c);
  for (double g : seen) {
    CHECK(g >= -90.0);
    CHECK(g <= 90.0);
  }
  CHECK(decode(space, r.trace.best_candidate).values[2] == doctest::Approx(30.0).epsilon(1e-3));
}

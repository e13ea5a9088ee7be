#include "acceptance.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "evavla/adversarial_loss.hpp"
#include "evavla/campaign.hpp"
#include "evavla/cmaes.hpp"
#include "evavla/error.hpp"
#include "evavla/oracle.hpp"
#include "evavla/param_space.hpp"
#include "evavla/scene_transforms.hpp"

namespace evavla::acceptance {

const char* const kFixtureConfig = R"({
  "space": {"kind": "patch", "lower": [100, 100], "upper": [200, 200]},
  "optimizer": {"population": 10, "max_iterations": 50, "initial_sigma": 0.3, "seed": 0},
  "oracle": {"type": "synthetic", "worst": [0.4, -0.3], "steps": 8, "sharpness": 0.3},
  "episodes": [
    {"id": "spatial-0", "instruction": "pick up the black bowl and place it on the plate"},
    {"id": "goal-3", "instruction": "open the middle drawer"}
  ],
  "mode": "optimized",
  "trials": 10,
  "output_dir": "fixture_out"
}
)";

namespace {

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

SyntheticOracleSpec ground_truth_spec(Eigen::VectorXd worst, double sharpness) {
  return {make_patch_space(300, 300), std::move(worst), 8, sharpness};
}

// Sphere from (2, 2, 2, 2): fitness < 1e-6 within 200 generations, 10/10 seeds, < 5 s.
CriterionResult sphere_benchmark() {
  CriterionResult r;
  const auto t0 = std::chrono::steady_clock::now();
  int solved = 0;
  int worst_gen = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    OptimizerConfig cfg;
    cfg.population = 10;
    cfg.max_iterations = 200;
    cfg.initial_sigma = 1.0;
    cfg.seed = seed;
    cfg.early_stop.min_improvement = 0.0;
    const auto res = maximize([](const Eigen::VectorXd& x, int) { return -x.squaredNorm(); },
                              4, cfg, Eigen::VectorXd::Constant(4, 2.0));
    int hit = -1;
    for (const auto& it : res.trace.iterations)
      if (-it.best_loss < 1e-6) {
        hit = it.iteration;
        break;
      }
    if (hit > 0) {
      ++solved;
      worst_gen = std::max(worst_gen, hit);
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = solved == 10 && secs < 5.0;
  r.detail = std::to_string(solved) + "/10 seeds below 1e-6, slowest at generation " +
             std::to_string(worst_gen) + ", " + fmt(secs, 3) + " s";
  return r;
}

// Default budget K=10, t_max=50 on dim 2 / sharpness 0.3: nloss >= 0.95 and within
// 0.05 of worst_params in >= 9/10 seeds.
CriterionResult ground_truth_recovery() {
  CriterionResult r;
  const Eigen::Vector2d worst(0.4, -0.3);
  int ok = 0;
  double worst_dist = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto spec = ground_truth_spec(worst, 0.3);
    const auto space = spec.space;
    SyntheticOracle oracle(spec);
    OracleSession session(oracle, static_cast<std::int64_t>(seed));
    double best_nloss = -2.0;
    OptimizerConfig cfg;
    cfg.seed = seed;
    auto res = run_optimization(
        space,
        [&](const PhysicalParams& p, int) {
          const auto rec = session.evaluate_candidate("e0", "", Variation::of(p));
          best_nloss = std::max(best_nloss, rec.normalized_loss);
          return rec.loss;
        },
        cfg);
    const Eigen::VectorXd found = encode(space, decode(space, res.trace.best_candidate));
    const double dist = (found - worst).norm();
    worst_dist = std::max(worst_dist, dist);
    if (best_nloss >= 0.95 && dist <= 0.05) ++ok;
  }
  r.pass = ok >= 9;
  r.detail = std::to_string(ok) + "/10 seeds, max distance " + fmt(worst_dist, 3);
  return r;
}

// Optimizer (500 queries) vs. a 50-per-dimension grid on 5 random synthetic oracles.
CriterionResult brute_force_dominance() {
  CriterionResult r;
  std::mt19937_64 rng(20240917);
  std::uniform_real_distribution<double> pos(-0.8, 0.8);
  std::uniform_real_distribution<double> sharp(0.2, 0.5);
  bool all = true;
  std::ostringstream detail;
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 1 + trial % 2;
    VariationSpace space = dim == 1 ? make_rotation_space(-90.0, 90.0) : make_patch_space(300, 300);
    Eigen::VectorXd worst(dim);
    for (int k = 0; k < dim; ++k) worst[k] = pos(rng);
    SyntheticOracle oracle({space, worst, 8, sharp(rng)});

    OracleSession grid_session(oracle, 0);
    double grid_best = -1e300;
    const int n = 50;
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    const int total = dim == 1 ? n : n * n;
    for (int g = 0; g < total; ++g) {
      Eigen::VectorXd v(dim);
      int rem = g;
      for (int k = 0; k < dim; ++k) {
        v[k] = -1.0 + 2.0 * (rem % n) / (n - 1);
        rem /= n;
      }
      grid_best = std::max(
          grid_best,
          grid_session.evaluate_candidate("e0", "", Variation::of(decode(space, v))).loss);
    }

    OracleSession session(oracle, 0);
    OptimizerConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto res = run_optimization(
        space,
        [&](const PhysicalParams& p, int) {
          return session.evaluate_candidate("e0", "", Variation::of(p)).loss;
        },
        cfg);
    const bool pass = res.trace.best_loss >= grid_best - 1e-2;
    all = all && pass;
    detail << (trial ? "; " : "") << "d" << dim << " " << fmt(res.trace.best_loss, 5)
           << " vs grid " << fmt(grid_best, 5);
  }
  r.pass = all;
  r.detail = detail.str();
  return r;
}

// 20 seeds: mean FR(optimized) > mean FR(random) > FR(clean) = 0, paired gap >= 10 pp.
CriterionResult baseline_ordering(const std::filesystem::path& work) {
  CriterionResult r;
  CampaignConfig base;
  base.space = make_patch_space(300, 300);
  base.oracle.worst = {0.4, -0.3};
  base.oracle.sharpness = 0.3;
  base.episodes = {{"task-0", "put the bowl on the plate"}};
  base.trials = 20;
  double sum_opt = 0.0, sum_rand = 0.0, sum_gap = 0.0, max_clean = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    auto fr = [&](BaselineMode mode) {
      CampaignConfig c = base;
      c.mode = mode;
      c.optimizer.seed = static_cast<std::uint64_t>(s);
      c.output_dir = work / ("ordering_" + std::string(mode_name(mode)) + "_" + std::to_string(s));
      const auto rep = run_campaign(c);
      if (!rep.complete) throw Error(ErrorCode::Evaluation, rep.failure);
      return rep.fr_mean;
    };
    const double clean = fr(BaselineMode::Clean);
    const double rand = fr(BaselineMode::Random);
    const double opt = fr(BaselineMode::Optimized);
    max_clean = std::max(max_clean, clean);
    sum_opt += opt;
    sum_rand += rand;
    sum_gap += opt - rand;
  }
  const double m_opt = sum_opt / seeds, m_rand = sum_rand / seeds, gap = sum_gap / seeds;
  r.pass = m_opt > m_rand && m_rand > 0.0 && max_clean == 0.0 && gap >= 0.10;
  r.detail = "FR optimized " + fmt(100 * m_opt, 4) + "%, random " + fmt(100 * m_rand, 4) +
             "%, clean max " + fmt(100 * max_clean, 4) + "%, paired gap " +
             fmt(100 * gap, 4) + " pp";
  return r;
}

// Gaussian falloff: +I at the centre, +I e^{-1/2} at distance sigma, identity at I = 0.
CriterionResult illumination_golden() {
  CriterionResult r;
  const Image base(64, 2, 0.0);
  const LightSpec light{0.5, 0.5, 50.0, 0.8};
  const Image lit = apply_illumination(base, light);
  // 0.8 * exp(-1/2) to 20 significant digits.
  const double expected_sigma = 0.48522452777010673888;
  const double err_centre = std::abs(lit.at(0, 0, 0) - 0.8);
  const double err_sigma = std::abs(lit.at(50, 0, 1) - expected_sigma);

  Image textured(17, 11);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& p : textured.pixels) p = u(rng);
  const Image unchanged = apply_illumination(textured, {8.0, 5.0, 50.0, 0.0});
  const bool identity = unchanged.pixels == textured.pixels;

  Image half(3, 3, 0.2);
  const double at_centre = apply_illumination(half, {1.5, 1.5, 50.0, 0.8}).at(1, 1, 2);

  r.pass = err_centre < 1e-12 && err_sigma < 1e-12 && identity && at_centre == 1.0;
  r.detail = "centre err " + fmt(err_centre, 3) + ", sigma err " + fmt(err_sigma, 3) +
             ", I=0 identity " + (identity ? "yes" : "no") + ", clamp " + fmt(at_centre);
  return r;
}

// L(clean, clean) = -N, antipodal = +N, scale invariance, bounds over 1e4 sequences.
CriterionResult loss_bounds() {
  CriterionResult r;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  auto random_seq = [&](int n) {
    ActionSequence s;
    for (int i = 0; i < n; ++i) {
      ActionVector a;
      for (double& x : a) x = g(rng);
      s.steps.push_back(a);
    }
    return s;
  };
  bool ok = true;
  double max_scale_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int n = len(rng);
    const auto clean = random_seq(n);
    const auto adv = random_seq(len(rng));
    const auto cmp = static_cast<double>(std::min(clean.steps.size(), adv.steps.size()));
    const double l = adversarial_loss(clean, adv);
    if (!(l >= -cmp && l <= cmp)) ok = false;
    if (i < 100) {
      ActionSequence neg = clean;
      for (auto& a : neg.steps)
        for (double& x : a) x = -x;
      if (adversarial_loss(clean, clean) != -static_cast<double>(n)) ok = false;
      if (adversarial_loss(clean, neg) != static_cast<double>(n)) ok = false;
      ActionVector scaled = clean.steps[0];
      const double k = std::exp(4.0 * g(rng));
      for (double& x : scaled) x *= k;
      max_scale_err = std::max(max_scale_err,
                               std::abs(cosine_similarity(scaled, adv.steps[0]) -
                                        cosine_similarity(clean.steps[0], adv.steps[0])));
    }
  }
  r.pass = ok && max_scale_err < 1e-12;
  r.detail = std::string("identities and bounds ") + (ok ? "hold" : "VIOLATED") +
             ", max scale error " + fmt(max_scale_err, 3);
  return r;
}

CriterionResult rotation_checks() {
  CriterionResult r;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-180.0, 180.0);
  double max_orth = 0.0, max_det = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Matrix3 m = rotation_matrix_zyx(ang(rng), ang(rng), ang(rng));
    max_orth = std::max(max_orth, (m.transpose() * m - Matrix3::Identity()).cwiseAbs().maxCoeff());
    max_det = std::max(max_det, std::abs(m.determinant() - 1.0));
  }
  const bool identity = rotation_matrix_zyx(0, 0, 0) == Matrix3::Identity();
  r.pass = max_orth < 1e-12 && max_det < 1e-12 && identity;
  r.detail = "max |R^T R - I| " + fmt(max_orth, 3) + ", max |det - 1| " + fmt(max_det, 3) +
             ", zero angles -> identity " + (identity ? "yes" : "no");
  return r;
}

CriterionResult patch_containment() {
  CriterionResult r;
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> dims(3, 2000);
  std::uniform_real_distribution<double> v(-3.0, 3.0);
  int inside = 0;
  for (int i = 0; i < 10000; ++i) {
    const int w = dims(rng), h = dims(rng);
    const auto space = make_patch_space(w, h);
    const auto p = decode(space, Eigen::Vector2d(v(rng), v(rng)));
    if (p.values[0] >= w / 3.0 && p.values[0] <= 2.0 * w / 3.0 && p.values[1] >= h / 3.0 &&
        p.values[1] <= 2.0 * h / 3.0)
      ++inside;
  }
  const Image texture(300, 300, 0.5);
  const Image patch(20, 20, 0.1);
  int rejected = 0;
  const double anchors[][2] = {{0, 0}, {99.5, 150}, {150, 200.5}, {250, 250}, {150, 10}};
  for (const auto& a : anchors) {
    try {
      composite_patch(texture, {patch, a[0], a[1]});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::PlacementBounds) ++rejected;
    }
  }
  r.pass = inside == 10000 && rejected == 5;
  r.detail = std::to_string(inside) + "/10000 decodes inside, " + std::to_string(rejected) +
             "/5 out-of-region anchors rejected";
  return r;
}

CriterionResult determinism(const Options& opt) {
  CriterionResult r;
  std::string text = kFixtureConfig;
  if (opt.fixture) {
    std::ifstream in(*opt.fixture);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  auto run_once = [&](const char* tag) {
    CampaignConfig c = parse_config(text);
    c.optimizer.seed = 7;
    c.output_dir = opt.work_dir / tag;
    run_campaign(c);
    std::ifstream in(c.output_dir / "trace.jsonl", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto a = run_once("determinism_a");
  const auto b = run_once("determinism_b");
  r.pass = !a.empty() && a == b;
  r.detail = "trace sizes " + std::to_string(a.size()) + " / " + std::to_string(b.size()) +
             " bytes, " + (a == b ? "identical" : "DIFFERENT");
  return r;
}

CriterionResult early_stop() {
  CriterionResult r;
  OptimizerConfig cfg;
  cfg.early_stop = {10, 1e-3};
  const auto res = maximize([](const Eigen::VectorXd&, int) { return 0.25; }, 2, cfg);
  const auto n = res.trace.iterations.size();
  r.pass = n == 11 && res.trace.stop_reason == StopReason::EarlyStop;
  r.detail = std::to_string(n) + " iterations, reason " + to_string(res.trace.stop_reason);
  return r;
}

}  // namespace

std::vector<CriterionResult> run_all(const Options& options,
                                     const std::function<void(const CriterionResult&)>& on_result) {
  std::filesystem::create_directories(options.work_dir);
  const std::vector<std::pair<const char*, std::function<CriterionResult()>>> checks = {
      {"cmaes-sphere-4d", sphere_benchmark},
      {"ground-truth-recovery", ground_truth_recovery},
      {"brute-force-dominance", brute_force_dominance},
      {"baseline-ordering", [&] { return baseline_ordering(options.work_dir); }},
      {"illumination-golden", illumination_golden},
      {"adversarial-loss-bounds", loss_bounds},
      {"rotation-orthonormality", rotation_checks},
      {"patch-region-containment", patch_containment},
      {"campaign-determinism", [&] { return determinism(options); }},
      {"early-stop-plateau", early_stop},
  };
  std::vector<CriterionResult> out;
  for (const auto& [name, check] : checks) {
    CriterionResult res;
    try {
      res = check();
    } catch (const std::exception& e) {
      res.pass = false;
      res.detail = std::string("threw: ") + e.what();
    }
    res.name = name;
    if (on_result) on_result(res);
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace evavla::acceptance

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "evavla/campaign.hpp"
#include "evavla/error.hpp"

using namespace evavla;
namespace fs = std::filesystem;

namespace {

const char* const kMinimal = R"({
  "space": {"kind": "patch", "lower": [100, 100], "upper": [200, 200]},
  "oracle": {"type": "synthetic", "worst": [0.4, -0.3]},
  "episodes": [{"id": "e0"}]
})";

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("evavla_test_campaign_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TraceLine trial(const std::string& ep, bool success, double nloss = 0.0) {
  TraceLine l;
  l.episode = ep;
  l.phase = "trial";
  l.mode = "optimized";
  l.kind = "patch";
  l.success = success;
  l.nloss = nloss;
  l.loss = nloss;
  l.params = {150.0, 150.0};
  return l;
}

}  // namespace

TEST_CASE("config defaults") {
  const auto c = parse_config(kMinimal);
  CHECK(c.optimizer.population == 10);
  CHECK(c.optimizer.max_iterations == 50);
  CHECK(c.optimizer.initial_sigma == 0.3);
  CHECK(c.optimizer.early_stop.window == 10);
  CHECK(c.optimizer.early_stop.min_improvement == 1e-3);
  CHECK_FALSE(c.optimizer.lra_enabled);
  CHECK_FALSE(c.optimizer.max_queries);
  CHECK(c.mode == BaselineMode::Optimized);
  CHECK(c.trials == 10);
  CHECK(c.space.kind == VariationKind::PatchPlacement);
  CHECK(c.episodes.size() == 1);
  CHECK(c.length_policy == LengthPolicy::Truncate);
}

TEST_CASE("config validation") {
  std::string bad = kMinimal;
  bad.insert(bad.find("\"oracle\""), R"("optimizer": {"population": 1}, )");
  CHECK(error_of(bad).find("population") != std::string::npos);

  std::string typo = kMinimal;
  typo.insert(typo.find("\"oracle\""), R"("optimizer": {"populaton": 12}, )");
  CHECK(error_of(typo).find("populaton") != std::string::npos);

  std::string top = kMinimal;
  top.insert(top.find("\"oracle\""), R"("trails": 3, )");
  CHECK(error_of(top).find("trails") != std::string::npos);

  const auto syntax = error_of("{\n  \"space\": {,\n}");
  CHECK(syntax.find("line 2") != std::string::npos);
  CHECK(syntax.find("column") != std::string::npos);

  std::string inverted = kMinimal;
  inverted.replace(inverted.find("[200, 200]"), 10, "[50, 200]");
  CHECK_FALSE(error_of(inverted).empty());

  CHECK_FALSE(error_of(R"({"space": {"kind": "patch", "lower": [0,0], "upper": [1,1]},
                          "oracle": {"type": "synthetic", "worst": [0,0]}, "episodes": []})")
                  .empty());
  CHECK_FALSE(error_of(R"({"space": {"kind": "wind", "lower": [0], "upper": [1]},
                          "oracle": {"type": "synthetic", "worst": [0]},
                          "episodes": [{"id": "a"}]})")
                  .empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("external oracle config and environment override") {
  const auto c = parse_config(R"({
    "space": {"kind": "rotation3", "lower": [0, 0, -30], "upper": [0, 0, 30], "frozen": [0, 0, null]},
    "oracle": {"type": "subprocess", "command": ["python", "-m", "victim"], "timeout_s": 5, "query_budget": 100},
    "episodes": [{"id": "a", "instruction": "x"}],
    "mode": "random"
  })");
  CHECK(c.oracle.type == OracleConfig::Type::External);
  CHECK(c.oracle.endpoint.command.size() == 3);
  CHECK(c.oracle.timeout_s == 5.0);
  CHECK(c.oracle.query_budget == 100);
  CHECK(c.space.search_dim() == 1);

  auto copy = parse_config(kMinimal);
  ::setenv(kOracleEnvVar, "tcp:10.0.0.2:9000", 1);
  apply_environment(copy);
  ::unsetenv(kOracleEnvVar);
  CHECK(copy.oracle.type == OracleConfig::Type::External);
  CHECK(copy.oracle.endpoint.type == OracleEndpoint::Type::Tcp);
  CHECK(copy.oracle.endpoint.port == 9000);
}

TEST_CASE("trace lines round trip") {
  const auto dir = scratch("roundtrip");
  fs::create_directories(dir);
  TraceLine a = trial("ep", false, 0.75);
  a.t = 3;
  a.q = 17;
  a.retries = 2;
  a.phase = "optimize";
  TraceLine b = trial("ep", true, -0.25);
  b.params.clear();
  {
    JsonlSink sink(dir / "t.jsonl");
    write_trace(a, sink);
    write_trace(b, sink);
    CHECK(sink.lines_written() == 2);
    // flushed per line: visible before the sink closes
    CHECK(read_trace(dir / "t.jsonl").size() == 2);
  }
  const auto back = read_trace(dir / "t.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  CHECK(to_jsonl(b).find("retries") == std::string::npos);

  std::ofstream(dir / "bad.jsonl") << to_jsonl(a) << "\n{oops\n";
  try {
    read_trace(dir / "bad.jsonl");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("failure rate aggregation") {
  std::vector<TraceLine> lines;
  for (int i = 0; i < 10; ++i) lines.push_back(trial("a", i >= 3));
  auto reps = build_reports(lines);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].episodes[0].failure_rate == doctest::Approx(0.3));
  CHECK(reps[0].episodes[0].trials == 10);

  lines.clear();
  for (int i = 0; i < 10; ++i) lines.push_back(trial("a", i >= 2));
  for (int i = 0; i < 10; ++i) lines.push_back(trial("b", i >= 4));
  reps = build_reports(lines);
  REQUIRE(reps[0].episodes.size() == 2);
  CHECK(reps[0].fr_mean == doctest::Approx(0.3));
  CHECK(reps[0].fr_std == doctest::Approx(0.1));
  CHECK(reps[0].total_queries == 20);

  std::ostringstream table;
  print_summary_table(reps, table);
  CHECK(table.str().find("30.0% +- 10.0%") != std::string::npos);
}

TEST_CASE("campaign report reproduces from traces") {
  auto c = parse_config(kMinimal);
  c.episodes.push_back({"e1", "second"});
  c.output_dir = scratch("repro");
  c.optimizer.seed = 5;
  const auto report = run_campaign(c);
  CHECK(report.complete);
  CHECK(report.episodes.size() == 2);
  for (const auto& e : report.episodes) CHECK(e.trials == 10);

  const auto again = summarize({c.output_dir / "trace.jsonl"});
  REQUIRE(again.size() == 1);
  CHECK(again[0].same_results(report));
  CHECK(fs::exists(c.output_dir / "report.json"));
  CHECK(fs::exists(c.output_dir / "iterations.jsonl"));

  const auto lines = read_trace(c.output_dir / "trace.jsonl");
  long queries = 0;
  for (const auto& l : lines) queries += 1 + l.retries;
  CHECK(queries == report.total_queries);
  fs::remove_all(c.output_dir);
}

TEST_CASE("campaign determinism") {
  auto c = parse_config(kMinimal);
  c.optimizer.seed = 7;
  c.output_dir = scratch("det_a");
  run_campaign(c);
  const auto first = slurp(c.output_dir / "trace.jsonl");
  fs::remove_all(c.output_dir);
  c.output_dir = scratch("det_b");
  run_campaign(c);
  CHECK(first == slurp(c.output_dir / "trace.jsonl"));
  fs::remove_all(c.output_dir);
}

TEST_CASE("baselines") {
  auto c = parse_config(kMinimal);
  c.output_dir = scratch("baselines");
  c.mode = BaselineMode::Clean;
  const auto clean = run_campaign(c);
  CHECK(clean.fr_mean == 0.0);
  CHECK(clean.total_queries == 1 + 10);

  c.mode = BaselineMode::Random;
  const auto random = run_campaign(c);
  CHECK(random.total_queries == 1 + 10);
  CHECK(random.mode == "random");

  c.mode = BaselineMode::Optimized;
  const auto opt = run_campaign(c);
  CHECK(opt.fr_mean >= random.fr_mean);
  fs::remove_all(c.output_dir);
}

TEST_CASE("query ceiling") {
  auto c = parse_config(kMinimal);
  c.output_dir = scratch("ceiling");
  c.optimizer.max_queries = 35;
  c.optimizer.early_stop.min_improvement = 0.0;
  const auto report = run_campaign(c);
  CHECK(report.complete);
  // 35 optimizer queries at most, plus the reference rollout and the trials
  CHECK(report.total_queries <= 1 + 35 + 10);
  long optimize = 0;
  for (const auto& l : read_trace(c.output_dir / "trace.jsonl"))
    if (l.phase == "optimize") ++optimize;
  CHECK(optimize <= 35);
  fs::remove_all(c.output_dir);
}

TEST_CASE("campaign against a subprocess victim") {
  auto c = parse_config(R"({
    "space": {"kind": "patch", "lower": [100, 100], "upper": [200, 200]},
    "oracle": {"type": "synthetic", "worst": [0.4, -0.3]},
    "episodes": [{"id": "e0"}],
    "optimizer": {"max_iterations": 5}
  })");
  c.output_dir = scratch("external_local");
  const auto local = run_campaign(c);

  ::setenv(kOracleEnvVar, (std::string("stdio:") + FAKE_VICTIM_PATH).c_str(), 1);
  apply_environment(c);
  ::unsetenv(kOracleEnvVar);
  c.output_dir = scratch("external_remote");
  const auto remote = run_campaign(c);
  CHECK(remote.complete);
  CHECK(remote.episodes[0].failure_rate == local.episodes[0].failure_rate);
  CHECK(remote.total_queries == local.total_queries);
  CHECK(remote.episodes[0].best_loss ==
        doctest::Approx(local.episodes[0].best_loss).epsilon(1e-9));
  fs::remove_all(scratch("external_local"));
  fs::remove_all(c.output_dir);

  c.oracle.endpoint = parse_endpoint(std::string("stdio:") + FAKE_VICTIM_PATH + " --garbage-at 4");
  c.output_dir = scratch("external_broken");
  const auto broken = run_campaign(c);
  CHECK_FALSE(broken.complete);
  CHECK_FALSE(broken.failure.empty());
  CHECK(fs::exists(c.output_dir / "report.json"));
  fs::remove_all(c.output_dir);
}

// evavla: run adversarial-variation campaigns against a black-box policy.
//
//   evavla run --config campaign.json [--seed N] [--out DIR]
//   evavla summarize trace.jsonl [more.jsonl ...] [--json]
//   evavla selftest [--work DIR]
//   evavla apply --image in.png --kind illumination --params x,y,sigma,I --out out.png
//
// Exit codes: 0 success, 1 validation error, 2 oracle failure.

#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "acceptance.hpp"
#include "evavla/campaign.hpp"
#include "evavla/error.hpp"
#include "evavla/image_io.hpp"
#include "evavla/scene_transforms.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kOracleFailure = 2;

int exit_code_for(const evavla::Error& e) {
  switch (e.code()) {
    case evavla::ErrorCode::Transport:
    case evavla::ErrorCode::Timeout:
    case evavla::ErrorCode::MalformedResponse:
    case evavla::ErrorCode::Handshake:
    case evavla::ErrorCode::Budget:
    case evavla::ErrorCode::Evaluation:
      return kOracleFailure;
    default:
      return kValidation;
  }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out) {
  auto config = evavla::load_config(config_path);
  evavla::apply_environment(config);
  if (seed) config.optimizer.seed = *seed;
  if (out) config.output_dir = *out;
  const auto report = evavla::run_campaign(config);
  evavla::print_summary_table({report}, std::cout);
  std::cout << "queries " << report.total_queries << ", wall " << report.wall_seconds
            << " s, outputs in " << config.output_dir.string() << "\n";
  if (!report.complete) {
    std::cerr << "campaign incomplete: " << report.failure << "\n";
    return kOracleFailure;
  }
  return kOk;
}

int cmd_summarize(const std::vector<std::string>& files, bool as_json) {
  std::vector<std::filesystem::path> paths(files.begin(), files.end());
  const auto reports = evavla::summarize(paths);
  if (as_json) {
    for (const auto& r : reports) std::cout << evavla::report_to_json(r) << "\n";
  } else {
    evavla::print_summary_table(reports, std::cout);
  }
  return kOk;
}

int cmd_selftest(std::optional<std::string> work) {
  evavla::acceptance::Options opts;
  opts.work_dir = work ? std::filesystem::path(*work)
                       : std::filesystem::temp_directory_path() /
                             ("evavla_selftest_" + std::to_string(::getpid()));
  int failed = 0;
  evavla::acceptance::run_all(opts, [&](const auto& r) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << std::endl;
    if (!r.pass) ++failed;
  });
  if (!work) std::filesystem::remove_all(opts.work_dir);
  return failed == 0 ? kOk : kValidation;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

int cmd_apply(const std::string& image, const std::string& kind, const std::string& params,
              const std::string& out, std::optional<std::string> patch, bool multiplicative) {
  evavla::SceneContext ctx;
  if (patch) ctx.patch_asset = evavla::read_png(*patch);
  if (multiplicative) ctx.illumination_mode = evavla::IlluminationMode::Multiplicative;
  const evavla::PhysicalParams p{evavla::parse_kind(kind), parse_list(params)};
  const evavla::Image base = p.kind == evavla::VariationKind::Rotation3
                                 ? evavla::Image{}
                                 : evavla::read_png(image);
  const auto result = evavla::apply_variation(base, p, ctx);
  if (const auto* m = std::get_if<evavla::Matrix3>(&result)) {
    std::cout << m->format(Eigen::IOFormat(Eigen::FullPrecision)) << "\n";
  } else {
    evavla::write_png(std::get<evavla::Image>(result), out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-based adversarial variation search for black-box robot policies"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a campaign from a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  run->add_option("--config", config_path, "Campaign config (JSON)")->required();
  run->add_option("--seed", seed, "Override optimizer.seed");
  run->add_option("--out", out_dir, "Override output_dir");

  auto* sum = app.add_subcommand("summarize", "Rebuild failure-rate reports from traces");
  std::vector<std::string> traces;
  bool as_json = false;
  sum->add_option("traces", traces, "trace.jsonl files")->required();
  sum->add_flag("--json", as_json, "Print reports as JSON");

  auto* self = app.add_subcommand("selftest", "Run the synthetic-oracle acceptance suite");
  std::optional<std::string> work_dir;
  self->add_option("--work", work_dir, "Keep campaign outputs in this directory");

  auto* apply = app.add_subcommand("apply", "Apply one physical variation to an image");
  std::string image, kind, params, out_png;
  std::optional<std::string> patch;
  bool multiplicative = false;
  apply->add_option("--image", image, "Input PNG (texture or camera frame)");
  apply->add_option("--kind", kind, "rotation3 | illumination | patch")->required();
  apply->add_option("--params", params, "Comma-separated physical parameters")->required();
  apply->add_option("--out", out_png, "Output PNG");
  apply->add_option("--patch", patch, "Patch asset PNG (kind=patch)");
  apply->add_flag("--multiplicative", multiplicative, "Multiplicative light instead of additive");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed, out_dir);
    if (*sum) return cmd_summarize(traces, as_json);
    if (*self) return cmd_selftest(work_dir);
    if (*apply) return cmd_apply(image, kind, params, out_png, patch, multiplicative);
  } catch (const evavla::Error& e) {
    std::cerr << "evavla: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "evavla: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}

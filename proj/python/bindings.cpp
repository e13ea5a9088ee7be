#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "evavla/adversarial_loss.hpp"
#include "evavla/campaign.hpp"
#include "evavla/cmaes.hpp"
#include "evavla/error.hpp"
#include "evavla/oracle.hpp"
#include "evavla/param_space.hpp"
#include "evavla/protocol.hpp"
#include "evavla/scene_transforms.hpp"

namespace py = pybind11;
using namespace evavla;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != Image::kChannels)
    throw Error(ErrorCode::Dimension, "image must have shape (height, width, 3)");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

Array from_image(const Image& img) {
  Array out({img.height, img.width, Image::kChannels});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

ActionSequence to_sequence(const std::vector<std::vector<double>>& steps) {
  ActionSequence s;
  for (const auto& v : steps) {
    if (v.size() != 7) throw Error(ErrorCode::Dimension, "actions must have 7 components");
    ActionVector a{};
    std::copy(v.begin(), v.end(), a.begin());
    s.steps.push_back(a);
  }
  return s;
}

std::vector<std::vector<double>> from_sequence(const ActionSequence& s) {
  std::vector<std::vector<double>> out;
  for (const auto& a : s.steps) out.emplace_back(a.begin(), a.end());
  return out;
}

// Lets a Python object act as the victim.
class PyOracle : public Oracle {
 public:
  using Oracle::Oracle;
  OracleResponse rollout(const OracleRequest& request) override {
    PYBIND11_OVERRIDE_PURE(OracleResponse, Oracle, rollout, request);
  }
  std::string name() const override {
    py::gil_scoped_acquire gil;
    if (py::function f = py::get_override(static_cast<const Oracle*>(this), "name"))
      return f().cast<std::string>();
    return "python";
  }
};

}  // namespace

PYBIND11_MODULE(_evavla, m) {
  m.doc() = "CMA-ES search for physical variations that break a black-box policy";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> exc(m, "EvavlaError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(exc, e.what());
    }
  });

  py::enum_<VariationKind>(m, "VariationKind")
      .value("ROTATION3", VariationKind::Rotation3)
      .value("ILLUMINATION", VariationKind::Illumination)
      .value("PATCH", VariationKind::PatchPlacement);
  m.def("kind_name", [](VariationKind k) { return std::string(kind_name(k)); });
  m.def("parse_kind", &parse_kind);

  py::class_<VariationSpace>(m, "VariationSpace")
      .def_readonly("kind", &VariationSpace::kind)
      .def_readonly("dim_names", &VariationSpace::dim_names)
      .def_readonly("lower", &VariationSpace::lower)
      .def_readonly("upper", &VariationSpace::upper)
      .def_readonly("frozen", &VariationSpace::frozen)
      .def_property_readonly("search_dim", &VariationSpace::search_dim)
      .def("free_indices", &VariationSpace::free_indices);

  py::class_<PhysicalParams>(m, "PhysicalParams")
      .def(py::init([](VariationKind k, std::vector<double> v) {
             return PhysicalParams{k, std::move(v)};
           }),
           py::arg("kind"), py::arg("values"))
      .def_readwrite("kind", &PhysicalParams::kind)
      .def_readwrite("values", &PhysicalParams::values);

  m.def("make_space", &make_space, py::arg("kind"), py::arg("lower"), py::arg("upper"),
        py::arg("frozen") = std::vector<std::optional<double>>{});
  m.def("make_rotation_space", &make_rotation_space, py::arg("gamma_min_deg"),
        py::arg("gamma_max_deg"));
  m.def("make_illumination_space", &make_illumination_space, py::arg("x_min"), py::arg("x_max"),
        py::arg("y_min"), py::arg("y_max"), py::arg("sigma"), py::arg("intensity"));
  m.def("make_patch_space", &make_patch_space, py::arg("texture_w"), py::arg("texture_h"));
  m.def("encode", &encode, py::arg("space"), py::arg("params"));
  m.def("decode", &decode, py::arg("space"), py::arg("v"));

  m.def("cosine_similarity", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto s = to_sequence({a, b});
    return cosine_similarity(s.steps[0], s.steps[1]);
  });
  py::enum_<LengthPolicy>(m, "LengthPolicy")
      .value("TRUNCATE", LengthPolicy::Truncate)
      .value("PENALIZE", LengthPolicy::Penalize);
  m.def(
      "adversarial_loss",
      [](const std::vector<std::vector<double>>& clean,
         const std::vector<std::vector<double>>& adv, LengthPolicy p) {
        return adversarial_loss(to_sequence(clean), to_sequence(adv), p);
      },
      py::arg("clean"), py::arg("adv"), py::arg("policy") = LengthPolicy::Truncate);
  m.def(
      "normalized_loss",
      [](const std::vector<std::vector<double>>& clean,
         const std::vector<std::vector<double>>& adv, LengthPolicy p) {
        return normalized_loss(to_sequence(clean), to_sequence(adv), p);
      },
      py::arg("clean"), py::arg("adv"), py::arg("policy") = LengthPolicy::Truncate);

  m.def("rotation_matrix_zyx", &rotation_matrix_zyx, py::arg("yaw_deg"), py::arg("pitch_deg"),
        py::arg("roll_deg"));
  py::enum_<IlluminationMode>(m, "IlluminationMode")
      .value("ADDITIVE", IlluminationMode::Additive)
      .value("MULTIPLICATIVE", IlluminationMode::Multiplicative);
  m.def(
      "apply_illumination",
      [](const Array& img, double x, double y, double sigma, double intensity,
         IlluminationMode mode) {
        return from_image(apply_illumination(to_image(img), {x, y, sigma, intensity}, mode));
      },
      py::arg("image"), py::arg("x"), py::arg("y"), py::arg("sigma"), py::arg("intensity"),
      py::arg("mode") = IlluminationMode::Additive);
  m.def(
      "composite_patch",
      [](const Array& texture, const Array& patch, double x, double y) {
        return from_image(composite_patch(to_image(texture), {to_image(patch), x, y}));
      },
      py::arg("texture"), py::arg("patch"), py::arg("x"), py::arg("y"));

  py::enum_<StopReason>(m, "StopReason")
      .value("NONE", StopReason::None)
      .value("MAX_ITERATIONS", StopReason::MaxIterations)
      .value("EARLY_STOP", StopReason::EarlyStop)
      .value("QUERY_BUDGET", StopReason::QueryBudget)
      .value("ORACLE_FAILURE", StopReason::OracleFailure);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("population", &OptimizerConfig::population)
      .def_readwrite("max_iterations", &OptimizerConfig::max_iterations)
      .def_readwrite("initial_sigma", &OptimizerConfig::initial_sigma)
      .def_readwrite("seed", &OptimizerConfig::seed)
      .def_readwrite("lra_enabled", &OptimizerConfig::lra_enabled)
      .def_readwrite("max_queries", &OptimizerConfig::max_queries)
      .def_property(
          "early_stop_window", [](const OptimizerConfig& c) { return c.early_stop.window; },
          [](OptimizerConfig& c, int w) { c.early_stop.window = w; })
      .def_property(
          "min_improvement",
          [](const OptimizerConfig& c) { return c.early_stop.min_improvement; },
          [](OptimizerConfig& c, double v) { c.early_stop.min_improvement = v; });

  py::class_<IterationRecord>(m, "IterationRecord")
      .def_readonly("iteration", &IterationRecord::iteration)
      .def_readonly("best_loss", &IterationRecord::best_loss)
      .def_readonly("iteration_best", &IterationRecord::iteration_best)
      .def_readonly("mean_loss", &IterationRecord::mean_loss)
      .def_readonly("sigma", &IterationRecord::sigma)
      .def_readonly("mean", &IterationRecord::mean);

  py::class_<OptimizationResult>(m, "OptimizationResult")
      .def_property_readonly("iterations",
                             [](const OptimizationResult& r) { return r.trace.iterations; })
      .def_property_readonly("best_candidate",
                             [](const OptimizationResult& r) { return r.trace.best_candidate; })
      .def_property_readonly("best_loss",
                             [](const OptimizationResult& r) { return r.trace.best_loss; })
      .def_property_readonly("total_queries",
                             [](const OptimizationResult& r) { return r.trace.total_queries; })
      .def_property_readonly("stop_reason",
                             [](const OptimizationResult& r) { return r.trace.stop_reason; })
      .def_property_readonly("failure", [](const OptimizationResult& r) { return r.trace.failure; })
      .def_property_readonly("mean", [](const OptimizationResult& r) { return r.state.mean; })
      .def_property_readonly("cov", [](const OptimizationResult& r) { return r.state.cov; })
      .def_property_readonly("sigma", [](const OptimizationResult& r) { return r.state.sigma; })
      .def("sample_final", &OptimizationResult::sample_final, py::arg("count"));

  m.def("selection_weights", &selection_weights, py::arg("population"));
  m.def("expected_normal_norm", &expected_normal_norm, py::arg("dim"));
  m.def(
      "maximize",
      [](const std::function<double(const Eigen::VectorXd&, int)>& f, int dim,
         const OptimizerConfig& config, std::optional<Eigen::VectorXd> initial_mean) {
        return maximize(f, dim, config, initial_mean);
      },
      py::arg("objective"), py::arg("dim"), py::arg("config") = OptimizerConfig{},
      py::arg("initial_mean") = py::none(),
      "Maximizes objective(x, iteration) over R^dim with CMA-ES.");

  py::class_<Variation>(m, "Variation")
      .def(py::init([](std::optional<VariationKind> k, std::vector<double> p) {
             return Variation{k, std::move(p)};
           }),
           py::arg("kind") = py::none(), py::arg("params") = std::vector<double>{})
      .def_static("neutral", &Variation::neutral)
      .def_readwrite("kind", &Variation::kind)
      .def_readwrite("params", &Variation::params)
      .def_property_readonly("is_neutral", &Variation::is_neutral);

  py::class_<OracleRequest>(m, "OracleRequest")
      .def_readonly("episode_id", &OracleRequest::episode_id)
      .def_readonly("instruction", &OracleRequest::instruction)
      .def_readonly("variation", &OracleRequest::variation)
      .def_readonly("seed", &OracleRequest::seed);

  py::class_<OracleResponse>(m, "OracleResponse")
      .def(py::init([](const std::vector<std::vector<double>>& actions, bool success) {
             OracleResponse r;
             r.actions = to_sequence(actions);
             r.actions.success = success;
             r.success = success;
             return r;
           }),
           py::arg("actions"), py::arg("success"))
      .def_property_readonly("actions",
                             [](const OracleResponse& r) { return from_sequence(r.actions); })
      .def_readonly("success", &OracleResponse::success);

  py::class_<Oracle, PyOracle>(m, "Oracle")
      .def(py::init<>())
      .def("rollout", &Oracle::rollout)
      .def("name", &Oracle::name);

  py::class_<SyntheticOracle, Oracle>(m, "SyntheticOracle")
      .def(py::init([](const VariationSpace& space, const Eigen::VectorXd& worst, int steps,
                       double sharpness) {
             return std::make_unique<SyntheticOracle>(
                 SyntheticOracleSpec{space, worst, steps, sharpness});
           }),
           py::arg("space"), py::arg("worst"), py::arg("steps") = 8, py::arg("sharpness") = 0.3)
      .def("closeness", &SyntheticOracle::closeness)
      .def("expected_normalized_loss", &SyntheticOracle::expected_normalized_loss)
      .def(
          "query",
          [](SyntheticOracle& o, const Variation& v, const std::string& episode) {
            return o.rollout({episode, "", v, 0});
          },
          py::arg("variation"), py::arg("episode") = "episode");

  py::class_<EvaluationRecord>(m, "EvaluationRecord")
      .def_readonly("episode_id", &EvaluationRecord::episode_id)
      .def_readonly("loss", &EvaluationRecord::loss)
      .def_readonly("normalized_loss", &EvaluationRecord::normalized_loss)
      .def_readonly("success", &EvaluationRecord::success)
      .def_readonly("query_index", &EvaluationRecord::query_index)
      .def_readonly("retries", &EvaluationRecord::retries);

  py::class_<OracleSession>(m, "OracleSession")
      .def(py::init<Oracle&, std::int64_t, LengthPolicy, int>(), py::arg("oracle"),
           py::arg("seed") = 0, py::arg("policy") = LengthPolicy::Truncate,
           py::arg("max_retries") = 2, py::keep_alive<1, 2>())
      .def("evaluate_candidate", &OracleSession::evaluate_candidate, py::arg("episode_id"),
           py::arg("instruction"), py::arg("variation"))
      .def_property_readonly("queries", &OracleSession::queries);

  m.def(
      "connect_external_oracle",
      [](const std::string& endpoint, double timeout_s, std::optional<long> budget) {
        ExternalOracleOptions opt;
        opt.timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000.0));
        opt.query_budget = budget;
        return std::unique_ptr<Oracle>(connect_external_oracle(parse_endpoint(endpoint), opt));
      },
      py::arg("endpoint"), py::arg("timeout_s") = 120.0, py::arg("query_budget") = py::none());

  py::module_ proto = m.def_submodule("protocol", "Newline-delimited JSON wire format");
  proto.attr("VERSION") = kProtocolVersion;
  proto.def("encode_hello", [](std::optional<std::string> n) {
    return n ? protocol::encode_hello(*n) : protocol::encode_hello();
  }, py::arg("name") = py::none());
  proto.def("encode_response", &protocol::encode_response);
  proto.def("encode_error", &protocol::encode_error);
  proto.def("parse_request", &protocol::parse_request);

  py::class_<EpisodeReport>(m, "EpisodeReport")
      .def_readonly("episode", &EpisodeReport::episode)
      .def_readonly("failure_rate", &EpisodeReport::failure_rate)
      .def_readonly("mean_normalized_loss", &EpisodeReport::mean_normalized_loss)
      .def_readonly("best_params", &EpisodeReport::best_params)
      .def_readonly("best_loss", &EpisodeReport::best_loss)
      .def_readonly("best_success", &EpisodeReport::best_success)
      .def_readonly("trials", &EpisodeReport::trials)
      .def_readonly("queries", &EpisodeReport::queries);

  py::class_<CampaignReport>(m, "CampaignReport")
      .def_readonly("kind", &CampaignReport::kind)
      .def_readonly("mode", &CampaignReport::mode)
      .def_readonly("episodes", &CampaignReport::episodes)
      .def_readonly("fr_mean", &CampaignReport::fr_mean)
      .def_readonly("fr_std", &CampaignReport::fr_std)
      .def_readonly("total_queries", &CampaignReport::total_queries)
      .def_readonly("wall_seconds", &CampaignReport::wall_seconds)
      .def_readonly("complete", &CampaignReport::complete)
      .def_readonly("failure", &CampaignReport::failure)
      .def("same_results", &CampaignReport::same_results)
      .def("to_json", &report_to_json);

  m.def(
      "run_campaign",
      [](const std::string& config_json, std::optional<std::filesystem::path> output_dir,
         std::optional<std::uint64_t> seed, Oracle* oracle) {
        auto config = parse_config(config_json);
        apply_environment(config);
        if (output_dir) config.output_dir = *output_dir;
        if (seed) config.optimizer.seed = *seed;
        return run_campaign(config, oracle);
      },
      py::arg("config_json"), py::arg("output_dir") = py::none(), py::arg("seed") = py::none(),
      py::arg("oracle") = nullptr,
      "Runs a campaign from JSON config text; `oracle` overrides the configured one.");
  m.def("summarize", &summarize, py::arg("traces"));
  m.def("summary_table", [](const std::vector<CampaignReport>& reports) {
    std::ostringstream s;
    print_summary_table(reports, s);
    return s.str();
  });
}

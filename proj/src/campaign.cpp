#include "evavla/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evavla/error.hpp"

namespace evavla {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!obj.is_object()) config_error("'" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) config_error("missing key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("key '" + key + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& where, T fallback) {
  return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

VariationSpace parse_space(const json& j) {
  check_keys(j, {"kind", "lower", "upper", "frozen"}, "space");
  const auto kind = get<std::string>(j, "kind", "space");
  VariationKind k;
  try {
    k = parse_kind(kind);
  } catch (const Error&) {
    config_error("space.kind '" + kind + "' is not rotation3, illumination or patch");
  }
  auto lower = get<std::vector<double>>(j, "lower", "space");
  auto upper = get<std::vector<double>>(j, "upper", "space");
  std::vector<std::optional<double>> frozen(lower.size());
  if (j.contains("frozen")) {
    const auto& f = j["frozen"];
    if (!f.is_array() || f.size() != lower.size())
      config_error("space.frozen must be an array with one entry per dimension");
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i].is_null()) continue;
      if (!f[i].is_number()) config_error("space.frozen entries must be null or numbers");
      frozen[i] = f[i].get<double>();
    }
  }
  try {
    return make_space(k, std::move(lower), std::move(upper), std::move(frozen));
  } catch (const Error& e) {
    config_error(std::string("space: ") + e.what());
  }
}

OptimizerConfig parse_optimizer(const json& j) {
  const std::string w = "optimizer";
  check_keys(j, {"population", "max_iterations", "initial_sigma", "seed", "lra",
                 "early_stop", "max_queries"},
             w);
  OptimizerConfig c;
  c.population = get_or<int>(j, "population", w, c.population);
  c.max_iterations = get_or<int>(j, "max_iterations", w, c.max_iterations);
  c.initial_sigma = get_or<double>(j, "initial_sigma", w, c.initial_sigma);
  c.seed = get_or<std::uint64_t>(j, "seed", w, c.seed);
  c.lra_enabled = get_or<bool>(j, "lra", w, c.lra_enabled);
  if (j.contains("max_queries") && !j["max_queries"].is_null())
    c.max_queries = get<long>(j, "max_queries", w);
  if (j.contains("early_stop")) {
    const auto& es = j["early_stop"];
    check_keys(es, {"window", "min_improvement"}, "optimizer.early_stop");
    c.early_stop.window = get_or<int>(es, "window", "optimizer.early_stop", c.early_stop.window);
    c.early_stop.min_improvement = get_or<double>(es, "min_improvement", "optimizer.early_stop",
                                                  c.early_stop.min_improvement);
  }
  return c;
}

OracleConfig parse_oracle(const json& j) {
  const std::string w = "oracle";
  if (!j.is_object()) config_error("'oracle' must be an object");
  const auto type = get<std::string>(j, "type", w);
  OracleConfig c;
  if (type == "synthetic") {
    check_keys(j, {"type", "worst", "steps", "sharpness"}, w);
    c.type = OracleConfig::Type::Synthetic;
    c.worst = get<std::vector<double>>(j, "worst", w);
    c.steps = get_or<int>(j, "steps", w, c.steps);
    c.sharpness = get_or<double>(j, "sharpness", w, c.sharpness);
  } else if (type == "subprocess" || type == "tcp") {
    c.type = OracleConfig::Type::External;
    if (type == "subprocess") {
      check_keys(j, {"type", "command", "timeout_s", "query_budget"}, w);
      c.endpoint.type = OracleEndpoint::Type::Subprocess;
      c.endpoint.command = get<std::vector<std::string>>(j, "command", w);
      if (c.endpoint.command.empty()) config_error("oracle.command must not be empty");
    } else {
      check_keys(j, {"type", "host", "port", "timeout_s", "query_budget"}, w);
      c.endpoint.type = OracleEndpoint::Type::Tcp;
      c.endpoint.host = get_or<std::string>(j, "host", w, c.endpoint.host);
      c.endpoint.port = get<int>(j, "port", w);
    }
    c.timeout_s = get_or<double>(j, "timeout_s", w, c.timeout_s);
    if (!(c.timeout_s > 0.0)) config_error("oracle.timeout_s must be positive");
    if (j.contains("query_budget") && !j["query_budget"].is_null())
      c.query_budget = get<long>(j, "query_budget", w);
  } else {
    config_error("oracle.type '" + type + "' is not synthetic, subprocess or tcp");
  }
  return c;
}

BaselineMode parse_mode(const std::string& s) {
  if (s == "clean") return BaselineMode::Clean;
  if (s == "random") return BaselineMode::Random;
  if (s == "optimized") return BaselineMode::Optimized;
  config_error("mode '" + s + "' is not clean, random or optimized");
}

std::string location(std::string_view text, std::size_t byte) {
  long line = 1;
  long col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::uint64_t derive_seed(std::uint64_t seed, std::size_t episode, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode), stream};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string_view mode_name(BaselineMode mode) noexcept {
  switch (mode) {
    case BaselineMode::Clean: return "clean";
    case BaselineMode::Random: return "random";
    case BaselineMode::Optimized: return "optimized";
  }
  return "?";
}

void CampaignConfig::validate() const {
  space.validate();
  optimizer.validate();
  if (trials < 1) config_error("trials must be >= 1");
  if (episodes.empty()) config_error("at least one episode is required");
  std::set<std::string> ids;
  for (const auto& e : episodes) {
    if (e.id.empty()) config_error("episode id must not be empty");
    if (!ids.insert(e.id).second) config_error("duplicate episode id '" + e.id + "'");
  }
  if (oracle.type == OracleConfig::Type::Synthetic) {
    if (static_cast<int>(oracle.worst.size()) != space.search_dim())
      config_error("oracle.worst needs " + std::to_string(space.search_dim()) +
                   " normalized components");
    if (oracle.steps < 1) config_error("oracle.steps must be >= 1");
    if (!(oracle.sharpness > 0.0)) config_error("oracle.sharpness must be positive");
  }
}

CampaignConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error("parse error at " + location(text, e.byte) + ": " + e.what());
  }
  check_keys(j, {"space", "optimizer", "oracle", "episodes", "mode", "trials",
                 "output_dir", "length_policy", "scene"},
             "config");
  CampaignConfig c;
  if (!j.contains("space")) config_error("missing key 'space' in config");
  if (!j.contains("oracle")) config_error("missing key 'oracle' in config");
  if (!j.contains("episodes")) config_error("missing key 'episodes' in config");
  c.space = parse_space(j["space"]);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j["optimizer"]);
  c.oracle = parse_oracle(j["oracle"]);
  if (!j["episodes"].is_array()) config_error("'episodes' must be an array");
  for (const auto& e : j["episodes"]) {
    check_keys(e, {"id", "instruction"}, "episodes[]");
    c.episodes.push_back({get<std::string>(e, "id", "episodes[]"),
                          get_or<std::string>(e, "instruction", "episodes[]", "")});
  }
  c.mode = parse_mode(get_or<std::string>(j, "mode", "config", "optimized"));
  c.trials = get_or<int>(j, "trials", "config", c.trials);
  c.output_dir = get_or<std::string>(j, "output_dir", "config", c.output_dir.string());
  const auto lp = get_or<std::string>(j, "length_policy", "config", "truncate");
  if (lp == "truncate") c.length_policy = LengthPolicy::Truncate;
  else if (lp == "penalize") c.length_policy = LengthPolicy::Penalize;
  else config_error("length_policy '" + lp + "' is not truncate or penalize");
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    check_keys(s, {"patch_asset", "illumination_mode"}, "scene");
    if (s.contains("patch_asset"))
      c.scene.patch_asset = get<std::string>(s, "patch_asset", "scene");
    const auto im = get_or<std::string>(s, "illumination_mode", "scene", "additive");
    if (im == "additive") c.scene.illumination_mode = IlluminationMode::Additive;
    else if (im == "multiplicative") c.scene.illumination_mode = IlluminationMode::Multiplicative;
    else config_error("scene.illumination_mode '" + im + "' is not additive or multiplicative");
  }
  c.validate();
  return c;
}

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void apply_environment(CampaignConfig& config) {
  const char* value = std::getenv(kOracleEnvVar);
  if (!value || !*value) return;
  config.oracle.type = OracleConfig::Type::External;
  config.oracle.endpoint = parse_endpoint(value);
}

bool CampaignReport::same_results(const CampaignReport& o) const {
  return kind == o.kind && mode == o.mode && episodes == o.episodes &&
         fr_mean == o.fr_mean && fr_std == o.fr_std && total_queries == o.total_queries;
}

std::vector<CampaignReport> build_reports(const std::vector<TraceLine>& lines) {
  using Key = std::pair<std::string, std::string>;
  std::vector<Key> group_order;
  std::map<Key, std::vector<std::string>> episode_order;
  std::map<std::pair<Key, std::string>, std::vector<const TraceLine*>> by_episode;
  for (const auto& l : lines) {
    const Key key{l.kind, l.mode};
    if (!episode_order.count(key)) group_order.push_back(key);
    auto& eps = episode_order[key];
    auto& bucket = by_episode[{key, l.episode}];
    if (bucket.empty()) eps.push_back(l.episode);
    bucket.push_back(&l);
  }

  std::vector<CampaignReport> out;
  for (const auto& key : group_order) {
    CampaignReport rep;
    rep.kind = key.first;
    rep.mode = key.second;
    std::vector<double> frs;
    for (const auto& ep : episode_order[key]) {
      const auto& ls = by_episode[{key, ep}];
      EpisodeReport er;
      er.episode = ep;
      std::vector<double> nl;
      long failures = 0;
      const TraceLine* best = nullptr;
      const TraceLine* best_trial = nullptr;
      for (const TraceLine* l : ls) {
        er.queries += 1 + l->retries;
        if (l->phase == "trial") {
          ++er.trials;
          if (!l->success) ++failures;
          nl.push_back(l->nloss);
          if (!best_trial || l->loss > best_trial->loss) best_trial = l;
        } else if (l->phase == "optimize") {
          if (!best || l->loss > best->loss) best = l;
        }
      }
      if (!best) best = best_trial;
      er.failure_rate = er.trials ? static_cast<double>(failures) / er.trials : 0.0;
      er.mean_normalized_loss = mean_of(nl);
      if (best) {
        er.best_params = best->params;
        er.best_loss = best->loss;
        er.best_success = best->success;
      }
      frs.push_back(er.failure_rate);
      rep.total_queries += er.queries;
      rep.episodes.push_back(std::move(er));
    }
    rep.fr_mean = mean_of(frs);
    double var = 0.0;
    for (double f : frs) var += (f - rep.fr_mean) * (f - rep.fr_mean);
    rep.fr_std = frs.empty() ? 0.0 : std::sqrt(var / static_cast<double>(frs.size()));
    out.push_back(std::move(rep));
  }
  return out;
}

std::vector<CampaignReport> summarize(const std::vector<std::filesystem::path>& traces) {
  if (traces.empty()) throw Error(ErrorCode::Io, "no trace files given");
  std::vector<TraceLine> all;
  for (const auto& p : traces) {
    auto lines = read_trace(p);
    all.insert(all.end(), std::make_move_iterator(lines.begin()),
               std::make_move_iterator(lines.end()));
  }
  return build_reports(all);
}

void print_summary_table(const std::vector<CampaignReport>& reports, std::ostream& out) {
  std::vector<std::string> cols;
  for (const auto& r : reports)
    for (const auto& e : r.episodes)
      if (std::find(cols.begin(), cols.end(), e.episode) == cols.end())
        cols.push_back(e.episode);

  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * v << "%";
    return s.str();
  };
  const int w = 14;
  out << std::left << std::setw(w) << "Type" << std::setw(w) << "Method";
  for (const auto& c : cols) out << std::setw(w) << c;
  out << "Avg\n";
  for (const auto& r : reports) {
    out << std::setw(w) << r.kind << std::setw(w) << r.mode;
    for (const auto& c : cols) {
      auto it = std::find_if(r.episodes.begin(), r.episodes.end(),
                             [&](const EpisodeReport& e) { return e.episode == c; });
      out << std::setw(w) << (it == r.episodes.end() ? std::string("-") : pct(it->failure_rate));
    }
    out << pct(r.fr_mean) << " +- " << pct(r.fr_std) << "\n";
  }
}

std::string report_to_json(const CampaignReport& r) {
  json eps = json::array();
  for (const auto& e : r.episodes)
    eps.push_back({{"episode", e.episode},
                   {"failure_rate", e.failure_rate},
                   {"mean_normalized_loss", e.mean_normalized_loss},
                   {"best_params", e.best_params},
                   {"best_loss", e.best_loss},
                   {"best_success", e.best_success},
                   {"trials", e.trials},
                   {"queries", e.queries}});
  json j{{"kind", r.kind},
         {"mode", r.mode},
         {"episodes", eps},
         {"fr_mean", r.fr_mean},
         {"fr_std", r.fr_std},
         {"total_queries", r.total_queries},
         {"wall_seconds", r.wall_seconds},
         {"complete", r.complete}};
  if (!r.failure.empty()) j["failure"] = r.failure;
  return j.dump(2);
}

std::unique_ptr<Oracle> make_oracle(const CampaignConfig& config) {
  const auto& oc = config.oracle;
  if (oc.type == OracleConfig::Type::Synthetic) {
    Eigen::VectorXd worst = Eigen::Map<const Eigen::VectorXd>(
        oc.worst.data(), static_cast<Eigen::Index>(oc.worst.size()));
    return make_synthetic_oracle({config.space, worst, oc.steps, oc.sharpness});
  }
  ExternalOracleOptions opts;
  opts.timeout = std::chrono::milliseconds(static_cast<long>(oc.timeout_s * 1000.0));
  opts.query_budget = oc.query_budget;
  return connect_external_oracle(oc.endpoint, opts);
}

CampaignReport run_campaign(const CampaignConfig& config, Oracle* oracle) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<Oracle> owned;
  if (!oracle) {
    owned = make_oracle(config);
    oracle = owned.get();
  }

  std::filesystem::create_directories(config.output_dir);
  JsonlSink trace(config.output_dir / "trace.jsonl");
  JsonlSink iterations(config.output_dir / "iterations.jsonl");

  const auto& space = config.space;
  const std::string mode(mode_name(config.mode));
  const std::string kind(kind_name(space.kind));
  const std::uint64_t seed = config.optimizer.seed;
  OracleSession session(*oracle, static_cast<std::int64_t>(seed), config.length_policy);

  std::vector<TraceLine> lines;
  auto emit = [&](const EvaluationRecord& rec, int t, const char* phase) {
    lines.push_back(make_trace_line(rec, t, phase, mode, kind));
    write_trace(lines.back(), trace);
  };

  std::string failure;
  for (std::size_t e = 0; e < config.episodes.size() && failure.empty(); ++e) {
    const auto& ep = config.episodes[e];
    try {
      const long before = session.queries();
      const ActionSequence& clean = session.get_clean_rollout(ep.id, ep.instruction);
      EvaluationRecord ref;
      ref.episode_id = ep.id;
      ref.loss = adversarial_loss(clean, clean, config.length_policy);
      ref.normalized_loss = normalized_loss(clean, clean, config.length_policy);
      ref.success = clean.success;
      ref.query_index = session.queries();
      ref.retries = static_cast<int>(session.queries() - before) - 1;
      emit(ref, 0, "reference");

      auto evaluate = [&](const Eigen::VectorXd& normalized, int t, const char* phase) {
        const auto rec = session.evaluate_candidate(ep.id, ep.instruction,
                                                    Variation::of(decode(space, normalized)));
        emit(rec, t, phase);
        return rec;
      };

      switch (config.mode) {
        case BaselineMode::Clean:
          for (int i = 0; i < config.trials; ++i)
            emit(session.evaluate_candidate(ep.id, ep.instruction, Variation::neutral()), 0,
                 "trial");
          break;
        case BaselineMode::Random: {
          std::mt19937_64 rng(derive_seed(seed, e, 1));
          std::uniform_real_distribution<double> unit(-1.0, 1.0);
          for (int i = 0; i < config.trials; ++i) {
            Eigen::VectorXd v(space.search_dim());
            for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = unit(rng);
            evaluate(v, 0, "trial");
          }
          break;
        }
        case BaselineMode::Optimized: {
          OptimizerConfig oc = config.optimizer;
          oc.seed = derive_seed(seed, e, 0);
          auto result = maximize(
              [&](const Eigen::VectorXd& x, int t) { return evaluate(x, t, "optimize").loss; },
              space.search_dim(), oc);
          for (const auto& it : result.trace.iterations) write_trace(it, ep.id, iterations);
          iterations.write_line(json{{"episode", ep.id},
                                     {"stop_reason", to_string(result.trace.stop_reason)},
                                     {"queries", result.trace.total_queries}}
                                    .dump());
          if (!result.trace.failure.empty()) {
            failure = "episode '" + ep.id + "': " + result.trace.failure;
            break;
          }
          for (const auto& x : result.sample_final(config.trials)) evaluate(x, 0, "trial");
          break;
        }
      }
    } catch (const Error& err) {
      failure = "episode '" + ep.id + "': " + err.what();
    }
  }

  auto reports = build_reports(lines);
  CampaignReport report = reports.empty() ? CampaignReport{} : std::move(reports.front());
  report.kind = kind;
  report.mode = mode;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.complete = failure.empty();
  report.failure = failure;
  std::ofstream(config.output_dir / "report.json") << report_to_json(report) << "\n";
  return report;
}

}  // namespace evavla

#include "evavla/oracle.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "evavla/error.hpp"

namespace evavla {

SyntheticOracle::SyntheticOracle(SyntheticOracleSpec spec) : spec_(std::move(spec)) {
  spec_.space.validate();
  if (spec_.steps < 1)
    throw Error(ErrorCode::InvalidParameter, "synthetic oracle needs >= 1 step");
  if (!(spec_.sharpness > 0.0))
    throw Error(ErrorCode::InvalidParameter, "synthetic oracle sharpness must be positive");
  if (spec_.worst.size() != spec_.space.search_dim())
    throw Error(ErrorCode::Dimension,
                "worst_params must have " + std::to_string(spec_.space.search_dim()) +
                    " components");
  for (Eigen::Index i = 0; i < spec_.worst.size(); ++i)
    if (!(spec_.worst[i] >= -1.0 && spec_.worst[i] <= 1.0))
      throw Error(ErrorCode::OutOfBounds, "worst_params outside the normalized cube");
}

ActionSequence SyntheticOracle::clean_sequence(int steps) {
  ActionSequence seq;
  seq.success = true;
  for (int i = 0; i < steps; ++i) {
    ActionVector a{};
    for (int k = 0; k < 6; ++k) a[k] = 0.05 * std::cos(0.9 * (i + 1) + 0.7 * k);
    a[6] = 2 * i < steps ? 1.0 : -1.0;
    seq.steps.push_back(a);
  }
  return seq;
}

double SyntheticOracle::closeness(const Variation& variation) const {
  if (variation.is_neutral()) return 0.0;
  if (*variation.kind != spec_.space.kind)
    throw Error(ErrorCode::KindMismatch,
                std::string(kind_name(*variation.kind)) + " variation sent to a " +
                    std::string(kind_name(spec_.space.kind)) + " oracle");
  if (variation.params.size() != spec_.space.lower.size())
    throw Error(ErrorCode::Dimension, "variation parameter count mismatch");
  const Eigen::VectorXd v = normalize_unchecked(spec_.space, variation.params);
  const double s = spec_.sharpness;
  return std::exp(-(v - spec_.worst).squaredNorm() / (2.0 * s * s));
}

double SyntheticOracle::expected_normalized_loss(const Variation& variation) const {
  return -std::cos(std::numbers::pi * closeness(variation));
}

OracleResponse SyntheticOracle::rollout(const OracleRequest& request) {
  const double theta = std::numbers::pi * closeness(request.variation);
  OracleResponse out;
  out.actions = clean_sequence(spec_.steps);
  out.actions.episode_id = request.episode_id;
  if (theta != 0.0) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (std::size_t i = 0; i < out.actions.steps.size(); ++i) {
      ActionVector& a = out.actions.steps[i];
      double norm = 0.0;
      for (double x : a) norm += x * x;
      norm = std::sqrt(norm);
      // Unit direction orthogonal to a, from the first usable basis vector.
      ActionVector u{};
      for (std::size_t off = 0; off < 7; ++off) {
        u.fill(0.0);
        u[(i + off) % 7] = 1.0;
        const double proj = a[(i + off) % 7] / (norm * norm);
        double un = 0.0;
        for (std::size_t k = 0; k < 7; ++k) {
          u[k] -= proj * a[k];
          un += u[k] * u[k];
        }
        un = std::sqrt(un);
        if (un > 1e-6) {
          for (double& x : u) x /= un;
          break;
        }
      }
      for (std::size_t k = 0; k < 7; ++k) a[k] = c * a[k] + s * norm * u[k];
    }
  }
  const double nloss = -std::cos(theta);
  out.success = nloss < kFailureThreshold;
  out.actions.success = out.success;
  return out;
}

std::unique_ptr<SyntheticOracle> make_synthetic_oracle(SyntheticOracleSpec spec) {
  return std::make_unique<SyntheticOracle>(std::move(spec));
}

OracleSession::OracleSession(Oracle& oracle, std::int64_t seed, LengthPolicy policy,
                             int max_retries)
    : oracle_(oracle), seed_(seed), policy_(policy), max_retries_(max_retries) {}

OracleResponse OracleSession::query(const OracleRequest& request, int* retries) {
  for (int attempt = 0;; ++attempt) {
    ++queries_;
    try {
      return oracle_.rollout(request);
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= max_retries_) throw;
      if (retries) ++*retries;
    }
  }
}

const ActionSequence& OracleSession::get_clean_rollout(const std::string& episode_id,
                                                       const std::string& instruction) {
  const auto key = std::make_pair(episode_id, seed_);
  if (auto it = clean_.find(key); it != clean_.end()) return it->second;
  OracleResponse r;
  try {
    r = query({episode_id, instruction, Variation::neutral(), seed_}, nullptr);
  } catch (const Error& e) {
    throw Error(e.code(), "clean rollout of episode '" + episode_id + "': " + e.what());
  }
  r.actions.episode_id = episode_id;
  r.actions.success = r.success;
  return clean_.emplace(key, std::move(r.actions)).first->second;
}

EvaluationRecord OracleSession::evaluate_candidate(const std::string& episode_id,
                                                   const std::string& instruction,
                                                   const Variation& variation) {
  const ActionSequence& clean = get_clean_rollout(episode_id, instruction);
  EvaluationRecord rec;
  rec.episode_id = episode_id;
  rec.variation = variation;
  const auto t0 = std::chrono::steady_clock::now();
  const OracleResponse r =
      query({episode_id, instruction, variation, seed_}, &rec.retries);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.query_index = queries_;
  rec.loss = adversarial_loss(clean, r.actions, policy_);
  rec.normalized_loss = normalized_loss(clean, r.actions, policy_);
  rec.success = r.success;
  return rec;
}

ExternalOracle::ExternalOracle(std::unique_ptr<LineTransport> transport,
                               ExternalOracleOptions options)
    : transport_(std::move(transport)), options_(options) {
  transport_->send_line(protocol::encode_hello());
  peer_name_ = protocol::parse_hello(transport_->recv_line(options_.timeout)).name;
  if (peer_name_.empty()) peer_name_ = "external";
}

OracleResponse ExternalOracle::rollout(const OracleRequest& request) {
  if (options_.query_budget && sent_ >= *options_.query_budget)
    throw Error(ErrorCode::Budget, "external oracle query budget of " +
                                       std::to_string(*options_.query_budget) +
                                       " exhausted");
  ++sent_;
  transport_->send_line(protocol::encode_request(request));
  while (true) {
    std::string line;
    try {
      line = transport_->recv_line(options_.timeout);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Timeout) ++stale_;
      throw;
    }
    // Late replies to requests that already timed out arrive first.
    if (stale_ > 0) {
      --stale_;
      continue;
    }
    return protocol::parse_response(line, request.episode_id);
  }
}

OracleEndpoint parse_endpoint(std::string_view text) {
  OracleEndpoint ep;
  if (text.starts_with("stdio:")) {
    ep.type = OracleEndpoint::Type::Subprocess;
    std::string cur;
    for (char ch : text.substr(6)) {
      if (ch == ' ') {
        if (!cur.empty()) ep.command.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) ep.command.push_back(cur);
    if (ep.command.empty())
      throw Error(ErrorCode::Config, "stdio endpoint without a command");
    return ep;
  }
  if (text.starts_with("tcp:")) {
    ep.type = OracleEndpoint::Type::Tcp;
    const auto rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos)
      throw Error(ErrorCode::Config, "tcp endpoint must be tcp:<host>:<port>");
    ep.host = std::string(rest.substr(0, colon));
    try {
      ep.port = std::stoi(std::string(rest.substr(colon + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad tcp port in '" + std::string(text) + "'");
    }
    return ep;
  }
  throw Error(ErrorCode::Config, "endpoint must start with stdio: or tcp:");
}

std::unique_ptr<ExternalOracle> connect_external_oracle(const OracleEndpoint& endpoint,
                                                        ExternalOracleOptions options) {
  auto transport = endpoint.type == OracleEndpoint::Type::Subprocess
                       ? spawn_subprocess(endpoint.command)
                       : connect_tcp(endpoint.host, endpoint.port);
  return std::make_unique<ExternalOracle>(std::move(transport), options);
}

}  // namespace evavla

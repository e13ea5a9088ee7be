#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "evavla/adversarial_loss.hpp"
#include "evavla/param_space.hpp"
#include "evavla/protocol.hpp"

namespace evavla {

/// The black-box victim: one rollout per request, no gradients.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleResponse rollout(const OracleRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Ground-truth fixture. The clean rollout is a fixed N-step sequence; under a
/// variation every action is rotated away from its clean counterpart by
/// pi * g, where g = exp(-|v - worst|^2 / (2 sharpness^2)) and v is the
/// variation in normalized coordinates. The adversarial loss is therefore
/// maximal exactly at `worst` and the normalized loss equals -cos(pi * g).
struct SyntheticOracleSpec {
  VariationSpace space;
  Eigen::VectorXd worst;   // normalized coordinates, one per free dimension
  int steps = 8;
  double sharpness = 0.3;  // in normalized units
};

class SyntheticOracle final : public Oracle {
 public:
  explicit SyntheticOracle(SyntheticOracleSpec spec);

  OracleResponse rollout(const OracleRequest& request) override;
  std::string name() const override { return "synthetic"; }

  const SyntheticOracleSpec& spec() const { return spec_; }

  /// Closeness g in [0, 1] of a variation to the worst case (0 when neutral).
  double closeness(const Variation& variation) const;
  /// The normalized loss the oracle produces for a variation, in closed form.
  double expected_normalized_loss(const Variation& variation) const;

  static ActionSequence clean_sequence(int steps);
  /// Success iff normalized loss < this threshold.
  static constexpr double kFailureThreshold = 0.5;

 private:
  SyntheticOracleSpec spec_;
};

std::unique_ptr<SyntheticOracle> make_synthetic_oracle(SyntheticOracleSpec spec);

/// One query's worth of evidence.
struct EvaluationRecord {
  std::string episode_id;
  Variation variation;
  double loss = 0.0;
  double normalized_loss = 0.0;
  bool success = false;
  long query_index = 0;  // 1-based over the session
  int retries = 0;
  double wall_seconds = 0.0;
};

/// Wraps an oracle with the clean-rollout cache, retry policy and exact
/// query accounting. Not thread-safe: one session per logical evaluator.
class OracleSession {
 public:
  OracleSession(Oracle& oracle, std::int64_t seed,
                LengthPolicy policy = LengthPolicy::Truncate, int max_retries = 2);

  /// Queries the neutral scene once per (episode, seed) and caches it.
  const ActionSequence& get_clean_rollout(const std::string& episode_id,
                                          const std::string& instruction);

  EvaluationRecord evaluate_candidate(const std::string& episode_id,
                                      const std::string& instruction,
                                      const Variation& variation);

  /// Requests actually sent to the oracle, retries included.
  long queries() const { return queries_; }
  std::int64_t seed() const { return seed_; }

 private:
  OracleResponse query(const OracleRequest& request, int* retries);

  Oracle& oracle_;
  std::int64_t seed_;
  LengthPolicy policy_;
  int max_retries_;
  long queries_ = 0;
  std::map<std::pair<std::string, std::int64_t>, ActionSequence> clean_;
};

/// Line-oriented byte stream to a victim process.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void send_line(std::string_view line) = 0;
  /// Returns one line without its terminator; throws Timeout or Transport.
  virtual std::string recv_line(std::chrono::milliseconds timeout) = 0;
};

std::unique_ptr<LineTransport> spawn_subprocess(const std::vector<std::string>& argv);
std::unique_ptr<LineTransport> connect_tcp(const std::string& host, int port);

struct ExternalOracleOptions {
  std::chrono::milliseconds timeout{120000};
  std::optional<long> query_budget;
};

/// Proxy speaking the newline-delimited JSON protocol; one request in flight.
class ExternalOracle final : public Oracle {
 public:
  /// Performs the hello handshake immediately.
  ExternalOracle(std::unique_ptr<LineTransport> transport, ExternalOracleOptions options);

  OracleResponse rollout(const OracleRequest& request) override;
  std::string name() const override { return peer_name_; }
  long requests_sent() const { return sent_; }

 private:
  std::unique_ptr<LineTransport> transport_;
  ExternalOracleOptions options_;
  std::string peer_name_;
  long sent_ = 0;
  long stale_ = 0;  // replies still owed for requests that timed out
};

struct OracleEndpoint {
  enum class Type { Subprocess, Tcp };
  Type type = Type::Subprocess;
  std::vector<std::string> command;
  std::string host = "127.0.0.1";
  int port = 0;
};

/// Parses "stdio:<cmd> [args...]" or "tcp:<host>:<port>".
OracleEndpoint parse_endpoint(std::string_view text);

std::unique_ptr<ExternalOracle> connect_external_oracle(const OracleEndpoint& endpoint,
                                                        ExternalOracleOptions options = {});

}  // namespace evavla

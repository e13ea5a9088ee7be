#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evavla/adversarial_loss.hpp"
#include "evavla/param_space.hpp"

namespace evavla {

inline constexpr int kProtocolVersion = 1;

/// A variation as sent to the victim. No kind means the neutral scene:
/// identity rotation, no added light, no patch.
struct Variation {
  std::optional<VariationKind> kind;
  std::vector<double> params;

  static Variation neutral() { return {}; }
  static Variation of(const PhysicalParams& p) { return {p.kind, p.values}; }
  bool is_neutral() const { return !kind.has_value(); }
};

struct OracleRequest {
  std::string episode_id;
  std::string instruction;
  Variation variation;
  std::int64_t seed = 0;
};

struct OracleResponse {
  ActionSequence actions;
  bool success = false;
  int queries_used = 1;
};

namespace protocol {

/// Every encoder returns one compact JSON object terminated by '\n'.
std::string encode_hello(std::optional<std::string_view> name = std::nullopt);
std::string encode_request(const OracleRequest& request);
std::string encode_response(const OracleResponse& response);
std::string encode_error(std::string_view message);

struct Hello {
  int version = 0;
  std::string name;
};

/// Throws Handshake on a wrong version, MalformedResponse on anything else.
Hello parse_hello(std::string_view line);

/// Throws Evaluation for an {"type":"error"} reply (the message is kept) and
/// MalformedResponse for anything that is not a well-formed actions reply.
OracleResponse parse_response(std::string_view line, const std::string& episode_id);

/// Server side: parses a rollout request line.
OracleRequest parse_request(std::string_view line);

}  // namespace protocol
}  // namespace evavla

#include "evavla/protocol.hpp"

#include <cmath>

#include <json.hpp>

#include "evavla/error.hpp"

namespace evavla::protocol {

using nlohmann::json;

namespace {

std::string line_of(const json& j) { return j.dump() + "\n"; }

json parse_object(std::string_view line, ErrorCode code) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object())
    throw Error(code, "not a JSON object: " + std::string(line.substr(0, 200)));
  if (!j.contains("type") || !j["type"].is_string())
    throw Error(code, "message has no string 'type'");
  return j;
}

std::string kind_on_wire(const Variation& v) {
  return v.kind ? std::string(kind_name(*v.kind)) : std::string("neutral");
}

}  // namespace

std::string encode_hello(std::optional<std::string_view> name) {
  json j{{"type", "hello"}, {"version", kProtocolVersion}};
  if (name) j["name"] = std::string(*name);
  return line_of(j);
}

std::string encode_request(const OracleRequest& r) {
  json j{{"type", "rollout"},
         {"episode", r.episode_id},
         {"instruction", r.instruction},
         {"variation", {{"kind", kind_on_wire(r.variation)},
                        {"params", r.variation.params}}},
         {"seed", r.seed}};
  return line_of(j);
}

std::string encode_response(const OracleResponse& r) {
  json actions = json::array();
  for (const auto& a : r.actions.steps) actions.push_back(a);
  return line_of(json{{"type", "actions"}, {"actions", actions}, {"success", r.success}});
}

std::string encode_error(std::string_view message) {
  return line_of(json{{"type", "error"}, {"message", std::string(message)}});
}

Hello parse_hello(std::string_view line) {
  const json j = parse_object(line, ErrorCode::MalformedResponse);
  if (j["type"] != "hello")
    throw Error(ErrorCode::Handshake, "expected hello, got '" +
                                          j["type"].get<std::string>() + "'");
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw Error(ErrorCode::MalformedResponse, "hello without integer version");
  Hello h{j["version"].get<int>(), j.value("name", std::string())};
  if (h.version != kProtocolVersion)
    throw Error(ErrorCode::Handshake,
                "protocol version " + std::to_string(h.version) + " (expected " +
                    std::to_string(kProtocolVersion) + ")");
  return h;
}

OracleResponse parse_response(std::string_view line, const std::string& episode_id) {
  const json j = parse_object(line, ErrorCode::MalformedResponse);
  const auto type = j["type"].get<std::string>();
  if (type == "error")
    throw Error(ErrorCode::Evaluation,
                "victim reported: " + j.value("message", std::string("(no message)")));
  if (type != "actions")
    throw Error(ErrorCode::MalformedResponse, "unexpected message type '" + type + "'");
  if (!j.contains("actions") || !j["actions"].is_array())
    throw Error(ErrorCode::MalformedResponse, "'actions' is not an array");
  if (!j.contains("success") || !j["success"].is_boolean())
    throw Error(ErrorCode::MalformedResponse, "'success' is not a boolean");
  OracleResponse r;
  r.success = j["success"].get<bool>();
  r.actions.success = r.success;
  r.actions.episode_id = episode_id;
  const auto& steps = j["actions"];
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (!s.is_array() || s.size() != 7)
      throw Error(ErrorCode::MalformedResponse,
                  "action " + std::to_string(i) + " does not have 7 components");
    ActionVector a{};
    for (std::size_t k = 0; k < 7; ++k) {
      if (!s[k].is_number())
        throw Error(ErrorCode::MalformedResponse,
                    "action " + std::to_string(i) + " has a non-numeric component");
      a[k] = s[k].get<double>();
      if (!std::isfinite(a[k]))
        throw Error(ErrorCode::Evaluation,
                    "action " + std::to_string(i) + " has a non-finite component");
    }
    r.actions.steps.push_back(a);
  }
  return r;
}

OracleRequest parse_request(std::string_view line) {
  const json j = parse_object(line, ErrorCode::MalformedResponse);
  if (j["type"] != "rollout")
    throw Error(ErrorCode::MalformedResponse, "expected a rollout request");
  try {
    OracleRequest r;
    r.episode_id = j.at("episode").get<std::string>();
    r.instruction = j.at("instruction").get<std::string>();
    r.seed = j.at("seed").get<std::int64_t>();
    const auto& v = j.at("variation");
    const auto kind = v.at("kind").get<std::string>();
    if (kind != "neutral") r.variation.kind = parse_kind(kind);
    r.variation.params = v.at("params").get<std::vector<double>>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, e.what());
  }
}

}  // namespace evavla::protocol

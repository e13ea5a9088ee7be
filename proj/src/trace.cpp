#include "evavla/trace.hpp"

#include <fstream>

#include <json.hpp>

#include "evavla/error.hpp"

namespace evavla {

using nlohmann::json;

TraceLine make_trace_line(const EvaluationRecord& record, int iteration,
                          std::string phase, std::string mode, std::string kind) {
  TraceLine l;
  l.t = iteration;
  l.q = record.query_index;
  l.params = record.variation.params;
  l.loss = record.loss;
  l.nloss = record.normalized_loss;
  l.success = record.success;
  l.episode = record.episode_id;
  l.phase = std::move(phase);
  l.mode = std::move(mode);
  l.kind = std::move(kind);
  l.retries = record.retries;
  return l;
}

std::string to_jsonl(const TraceLine& l) {
  json j{{"t", l.t},          {"q", l.q},          {"params", l.params},
         {"loss", l.loss},    {"nloss", l.nloss},  {"success", l.success},
         {"episode", l.episode}, {"phase", l.phase}, {"mode", l.mode},
         {"kind", l.kind}};
  if (l.retries > 0) j["retries"] = l.retries;
  return j.dump();
}

TraceLine parse_trace_line(std::string_view text, long line_no) {
  const std::string where = "trace line " + std::to_string(line_no);
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorCode::Io, where + ": not a JSON object");
  try {
    TraceLine l;
    l.t = j.at("t").get<int>();
    l.q = j.at("q").get<long>();
    l.params = j.at("params").get<std::vector<double>>();
    l.loss = j.at("loss").get<double>();
    l.nloss = j.at("nloss").get<double>();
    l.success = j.at("success").get<bool>();
    l.episode = j.at("episode").get<std::string>();
    l.phase = j.value("phase", std::string("trial"));
    l.mode = j.value("mode", std::string());
    l.kind = j.value("kind", std::string());
    l.retries = j.value("retries", 0);
    return l;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, where + ": " + e.what());
  }
}

JsonlSink::JsonlSink(const std::filesystem::path& path, bool append) : path_(path) {
  file_ = std::fopen(path.c_str(), append ? "ab" : "wb");
  if (!file_) throw Error(ErrorCode::Io, "cannot open " + path.string());
}

JsonlSink::~JsonlSink() {
  if (file_) std::fclose(file_);
}

void JsonlSink::write_line(std::string_view json_line) {
  std::string buf(json_line);
  buf += '\n';
  if (std::fwrite(buf.data(), 1, buf.size(), file_) != buf.size() ||
      std::fflush(file_) != 0)
    throw Error(ErrorCode::Io, "write failed on " + path_.string());
  ++lines_;
}

void write_trace(const TraceLine& line, JsonlSink& sink) { sink.write_line(to_jsonl(line)); }

void write_trace(const IterationRecord& r, const std::string& episode, JsonlSink& sink) {
  std::vector<double> mean(r.mean.data(), r.mean.data() + r.mean.size());
  sink.write_line(json{{"episode", episode},
                       {"t", r.iteration},
                       {"best_loss", r.best_loss},
                       {"iteration_best", r.iteration_best},
                       {"mean_loss", r.mean_loss},
                       {"sigma", r.sigma},
                       {"mu", mean}}
                      .dump());
}

std::vector<TraceLine> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<TraceLine> out;
  std::string text;
  long no = 0;
  while (std::getline(in, text)) {
    ++no;
    if (text.empty()) continue;
    try {
      out.push_back(parse_trace_line(text, no));
    } catch (const Error& e) {
      throw Error(ErrorCode::Io, path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace evavla

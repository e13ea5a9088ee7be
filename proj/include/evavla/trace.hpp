#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evavla/cmaes.hpp"
#include "evavla/oracle.hpp"

namespace evavla {

/// One line of a JSONL evaluation trace. Everything the report needs is here,
/// so a report can be rebuilt from trace files alone.
struct TraceLine {
  int t = 0;                    // optimizer generation; 0 outside the optimize phase
  long q = 0;                   // campaign-wide query index
  std::vector<double> params;   // physical units; empty for the neutral scene
  double loss = 0.0;
  double nloss = 0.0;
  bool success = false;
  std::string episode;
  std::string phase;            // "reference", "optimize" or "trial"
  std::string mode;             // "clean", "random" or "optimized"
  std::string kind;             // variation kind of the campaign's space
  int retries = 0;

  bool operator==(const TraceLine&) const = default;
};

TraceLine make_trace_line(const EvaluationRecord& record, int iteration,
                          std::string phase, std::string mode, std::string kind);

std::string to_jsonl(const TraceLine& line);
/// `line_no` only feeds the error message.
TraceLine parse_trace_line(std::string_view text, long line_no = 0);

/// Append-only JSONL file; every write is a complete line followed by a flush.
class JsonlSink {
 public:
  /// Truncates unless `append` is set.
  explicit JsonlSink(const std::filesystem::path& path, bool append = false);
  ~JsonlSink();
  JsonlSink(const JsonlSink&) = delete;
  JsonlSink& operator=(const JsonlSink&) = delete;

  void write_line(std::string_view json_line);
  long lines_written() const { return lines_; }

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  long lines_ = 0;
};

void write_trace(const TraceLine& line, JsonlSink& sink);
void write_trace(const IterationRecord& record, const std::string& episode, JsonlSink& sink);

std::vector<TraceLine> read_trace(const std::filesystem::path& path);

}  // namespace evavla

#pragma once

#include <stdexcept>
#include <string>

namespace evavla {

enum class ErrorCode {
  InvalidBounds,
  InvalidParameter,
  KindMismatch,
  OutOfBounds,
  Dimension,
  Evaluation,
  InternalState,
  PlacementBounds,
  Precondition,
  Transport,
  Timeout,
  MalformedResponse,
  Handshake,
  Budget,
  Config,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Transport failures and timeouts may be retried; everything else is final.
  bool retryable() const noexcept {
    return code_ == ErrorCode::Transport || code_ == ErrorCode::Timeout;
  }

 private:
  ErrorCode code_;
};

}  // namespace evavla

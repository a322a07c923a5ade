#pragma once

#include <stdexcept>
#include <string>

namespace tensorbeat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by run_pipeline; names the stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Fewer than two usable peaks in a periodicity trace.
class RateUndetectable : public Error {
 public:
  RateUndetectable() : Error("rate undetectable") {}
  explicit RateUndetectable(const std::string& detail)
      : Error("rate undetectable: " + detail) {}
};

}  // namespace tensorbeat

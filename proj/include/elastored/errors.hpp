#pragma once

#include <stdexcept>
#include <string>

namespace elastored {

/// Base class for every error raised by the library. `code()` is a short
/// machine-readable identifier used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error("invalid_argument", w) {}
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& w) : Error("geometry_error", w) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error("domain_error", w) {}
};

struct SingularSystemError : Error {
  explicit SingularSystemError(const std::string& w) : Error("singular_system", w) {}
};

struct NotSpdError : Error {
  explicit NotSpdError(const std::string& w) : Error("not_spd", w) {}
};

struct StepSizeError : Error {
  explicit StepSizeError(const std::string& w) : Error("step_size", w) {}
};

struct LoadError : Error {
  explicit LoadError(const std::string& w) : Error("load_error", w) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error("parse_error", w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io_error", w) {}
};

}  // namespace elastored

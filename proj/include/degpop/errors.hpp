#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace degpop {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// Two fields (or a field and a weight) live on different grids or ranks.
class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

/// Empty or out-of-bounds integration / restriction domain.
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

/// Invalid numeric parameter or violated precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parameter"; }
};

/// Linear solver breakdown during time marching.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  const char* kind() const noexcept override { return "solver"; }
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Internal cross-check failed (e.g. replayed residual disagrees).
class ConsistencyError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "consistency"; }
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const char* kind() const noexcept override { return "io"; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace degpop

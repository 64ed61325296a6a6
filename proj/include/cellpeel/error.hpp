#pragma once

#include <stdexcept>
#include <string>

namespace cellpeel {

/// Base class for every error raised by the library. Carries the name of the
/// module that raised it so the CLI can report it in machine-readable form.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Input violates a documented precondition or invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File content could not be decoded (bad TIFF, bad JSON schema, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// An algorithm could not produce a result for otherwise well-formed input
/// (broken ring, too few shell components, degenerate PCA, ...).
class ComputeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cellpeel

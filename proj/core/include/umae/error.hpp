#pragma once

#include <stdexcept>
#include <string>

namespace umae {

/// Base for all library errors. Messages are prefixed with the owning module
/// ("graph: ...") so the CLI can surface them unchanged.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what);
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Bad input: violated preconditions, malformed files, invalid configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite or otherwise degenerate value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace umae

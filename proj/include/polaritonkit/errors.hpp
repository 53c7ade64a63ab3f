#pragma once

#include <stdexcept>
#include <string>

namespace polaritonkit {

// Invalid or inconsistent configuration (bad key, out-of-range value).
// Mapped to exit code 2 by the CLI.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Data or fit problem that is not a programming error: degenerate input,
// non-converging fit, grid that does not span the feature being located.
// Mapped to exit code 3 by the CLI.
class diagnostic_error : public std::runtime_error {
 public:
  explicit diagnostic_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure (missing file, unwritable directory).
// Mapped to exit code 4 by the CLI.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace polaritonkit

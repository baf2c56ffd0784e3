#pragma once

#include <stdexcept>
#include <string>

namespace mvtwin {

// Invalid user-supplied configuration (parameters, scenario ids, CLI flags).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file; carries the 1-based line where parsing stopped.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line_no)
      : std::runtime_error(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
  int line;
};

}  // namespace mvtwin

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace astoria {

// Input could not be parsed. Carries the source name and 1-based line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// Inputs parsed but are inconsistent with each other or with the requested run.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Selection could not produce a circuit (no candidates, conflicts not resolvable).
class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The LP solver reached a state that a correct solver never reaches.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace astoria

#pragma once

#include <stdexcept>
#include <string>

namespace gridincent {

// Bad numeric input, inconsistent dimensions, broken invariants.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feeder graph is not a tree rooted at the substation.
class TopologyError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// The operating constraints admit no incentive vector. Carries a
// human-readable diagnosis of the constraints certifying emptiness.
class InfeasibleError : public ValidationError {
 public:
  explicit InfeasibleError(const std::string& what) : ValidationError(what) {}
};

// Malformed input file; line is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, long line, const std::string& what)
      : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : "") + ": " + what),
        file_(file),
        line_(line) {}
  const std::string& file() const { return file_; }
  long line() const { return line_; }

 private:
  std::string file_;
  long line_;
};

}  // namespace gridincent

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hbmc {

/// Violated precondition of a library call (bad index, mismatched dimensions, ...).
class contract_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input text. `line()` is 1-based; 0 means "no line information".
class parse_error : public std::runtime_error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite objective or gradient encountered during optimization.
class numerical_error : public std::runtime_error {
 public:
  numerical_error(std::size_t iteration, std::string block, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ", block '" + block +
                           "': " + what),
        iteration_(iteration),
        block_(std::move(block)) {}

  std::size_t iteration() const noexcept { return iteration_; }
  const std::string& block() const noexcept { return block_; }

 private:
  std::size_t iteration_;
  std::string block_;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic corpus could not satisfy its observation constraints.
class generation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All problems found in a configuration file, reported together.
class config_error : public std::runtime_error {
 public:
  explicit config_error(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration";
    for (const auto& issue : issues) out += "\n  " + issue;
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace hbmc

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace morphoscope {

// Input file does not follow the expected binary or text layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, unwritable or truncated file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Line-oriented parse failure; line numbers are 1-based.
class ParseError : public FormatError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A metric or statistic whose denominator is empty (no gold items, zero variance, empty group).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Training produced a non-finite loss or gradient.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace morphoscope

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace khelm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ragged or otherwise malformed input file. `row` is the 1-based file line.
class FormatError : public Error {
 public:
  FormatError(std::size_t row, const std::string& what)
      : Error("format error at row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A cell that does not parse as a finite number. Coordinates are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t col, const std::string& cell)
      : Error("cannot parse '" + cell + "' at row " + std::to_string(row) + ", column " +
              std::to_string(col)),
        row_(row),
        col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Invalid synthetic cohort specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class GroupingError : public Error {
 public:
  using Error::Error;
};

/// Fold plan cannot be built, e.g. a class has fewer than k samples.
class PlanError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or non-positive-definite intermediate. Carries the time-block
/// extent (1-based, inclusive) or the iteration index when known; -1 otherwise.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, long first = -1, long last = -1,
                          long iteration = -1)
      : Error(what), first_(first), last_(last), iteration_(iteration) {}

  static NumericalError at_block(long first, long last, const std::string& what) {
    return NumericalError(what + " (block " + std::to_string(first) + ".." + std::to_string(last) + ")",
                          first, last);
  }
  static NumericalError at_iteration(long iteration, const std::string& what) {
    return NumericalError(what + " (iteration " + std::to_string(iteration) + ")", -1, -1, iteration);
  }

  long block_first() const noexcept { return first_; }
  long block_last() const noexcept { return last_; }
  long iteration() const noexcept { return iteration_; }

 private:
  long first_;
  long last_;
  long iteration_;
};

}  // namespace khelm

#pragma once

#include <stdexcept>
#include <string>

namespace pscausal {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct OutOfDomain : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Cholesky or energy failure inside a named sampler block.
struct NumericalFailure : std::runtime_error {
  NumericalFailure(std::string block, const std::string& what)
      : std::runtime_error(block + ": " + what), block_(std::move(block)) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

/// Malformed input file; row is 1-based with the header as row 1.
struct IngestionError : std::runtime_error {
  IngestionError(const std::string& file, long row, const std::string& column,
                 const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(row) + " [" + column + "] " + what) {}
  explicit IngestionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pscausal

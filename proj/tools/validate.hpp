#pragma once

#include <cstdint>
#include <string>

namespace pscausal::cli {

struct ValidateOptions {
  long geweke_rounds = 2000;
  std::uint64_t seed = 1;
  std::string inject;  ///< "", "gradient" or "alpha"
  bool skip_geweke = false;
};

/// Runs every self-test suite and prints one line per suite. Returns true when all pass.
bool run_validation(const ValidateOptions& opts);

}  // namespace pscausal::cli

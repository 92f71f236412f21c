#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pscausal {

/// Seeded generator. Independent streams come from derive(), never from entropy.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream keyed by a path such as "replicate/17/chain/0".
  static Rng derive(std::uint64_t master_seed, std::string_view name);

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }
  double inverse_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }
  long poisson(double mean);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t stream_seed(std::uint64_t master_seed, std::string_view name);

}  // namespace pscausal

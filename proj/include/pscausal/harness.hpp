#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pscausal/sampler.hpp"
#include "pscausal/simgen.hpp"

namespace pscausal {

struct StudyConfig {
  int scenario = 1;
  int replicates = 50;
  McmcConfig mcmc;  ///< seed is ignored; each fit gets a derived stream
  PriorSpec priors;
  int workers = 1;
  std::uint64_t seed = 0;
  bool freeze_covariates = false;
  std::vector<Variant> variants{Variant::naive, Variant::full};  ///< models fitted per replicate

  void validate() const;
};

struct Estimate {
  double mean = 0.0, lower = 0.0, upper = 0.0;
};

/// Posterior point and 95% interval of Delta for one dataset and one model variant.
using Estimator =
    std::function<Estimate(const Dataset& data, const SimTruth& truth, Variant variant, std::uint64_t seed)>;

/// The MCMC fit used by default.
Estimator mcmc_estimator(const McmcConfig& mcmc, const PriorSpec& priors);

/// Append-only log of finished fits keyed by chain seed. Replaying it reproduces an
/// interrupted study exactly; entries under another fingerprint are discarded on open.
class StudyJournal {
 public:
  StudyJournal(std::string path, const std::string& fingerprint);

  struct Entry {
    bool failed = false;
    Estimate estimate;
    std::string failure;
  };
  std::optional<Entry> find(std::uint64_t seed) const;
  void record(std::uint64_t seed, const Entry& entry);
  std::size_t size() const;

 private:
  std::string path_;
  std::map<std::uint64_t, Entry> entries_;
  mutable std::mutex mutex_;
};

/// Wraps an estimator so finished fits are read from and written to the journal.
Estimator journaled_estimator(Estimator inner, StudyJournal& journal);

struct ReplicateRecord {
  int replicate = 0;
  Variant variant = Variant::full;
  bool failed = false;
  std::string failure;
  int n = 0;
  double truth = 0.0;
  Estimate estimate;
  bool covered = false;
};

struct Aggregate {
  int used = 0, failed = 0;
  double bias = 0.0, bias_se = 0.0;
  double mse = 0.0, mse_se = 0.0;
  double coverage = 0.0, coverage_se = 0.0;
};

struct StudyResult {
  int scenario = 0;
  std::vector<ReplicateRecord> records;  ///< sorted by replicate, naive before full
  Aggregate naive, full;
};

Aggregate aggregate(const std::vector<ReplicateRecord>& records, Variant variant);

StudyResult run_study(const StudyConfig& cfg, const Estimator& estimator);
StudyResult run_study(const StudyConfig& cfg);

/// value (se) scaled by 100 with one decimal.
std::string format_cell(double value, double se);
std::string format_table(const StudyResult& result);
std::string format_table_csv(const StudyResult& result);
std::string format_records_csv(const StudyResult& result);

}  // namespace pscausal

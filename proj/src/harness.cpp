#include "pscausal/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "pscausal/errors.hpp"
#include "pscausal/summary.hpp"

namespace pscausal {

namespace {

const char* variant_name(Variant v) { return v == Variant::full ? "full" : "naive"; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

void StudyConfig::validate() const {
  if (scenario < 1 || scenario > 8) throw InvalidArgument("scenario id must be in 1..8");
  if (replicates < 1) throw InvalidArgument("replicates must be at least 1");
  if (workers < 1) throw InvalidArgument("workers must be at least 1");
  mcmc.validate();
  if (mcmc.retained() < 1) throw InvalidArgument("study chains must retain at least one draw");
  priors.validate();
  if (variants.empty()) throw InvalidArgument("at least one model variant is required");
}

StudyJournal::StudyJournal(std::string path, const std::string& fingerprint) : path_(std::move(path)) {
  const std::string header = "# " + fingerprint;
  {
    std::ifstream in(path_);
    std::string line;
    if (in && std::getline(in, line) && line == header) {
      while (std::getline(in, line)) {
        // seed,ok,mean,lower,upper  or  seed,fail,message
        std::istringstream row(line);
        std::string seed, kind, rest;
        if (!std::getline(row, seed, ',') || !std::getline(row, kind, ',') || !std::getline(row, rest)) continue;
        Entry e;
        if (kind == "ok") {
          if (std::sscanf(rest.c_str(), "%lf,%lf,%lf", &e.estimate.mean, &e.estimate.lower, &e.estimate.upper) != 3)
            continue;
        } else if (kind == "fail") {
          e.failed = true;
          e.failure = rest;
        } else {
          continue;
        }
        entries_[std::stoull(seed)] = e;
      }
      return;
    }
  }
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write study journal " + path_);
  out << header << '\n';
}

std::optional<StudyJournal::Entry> StudyJournal::find(std::uint64_t seed) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = entries_.find(seed);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void StudyJournal::record(std::uint64_t seed, const Entry& e) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_[seed] = e;
  std::ofstream out(path_, std::ios::app);
  out << seed << ',';
  if (e.failed) {
    std::string msg = e.failure;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out << "fail," << msg << '\n';
  } else {
    out << "ok," << fmt("%.17g", e.estimate.mean) << ',' << fmt("%.17g", e.estimate.lower) << ','
        << fmt("%.17g", e.estimate.upper) << '\n';
  }
}

std::size_t StudyJournal::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

Estimator journaled_estimator(Estimator inner, StudyJournal& journal) {
  return [inner = std::move(inner), &journal](const Dataset& data, const SimTruth& truth, Variant v,
                                               std::uint64_t seed) {
    if (const auto hit = journal.find(seed)) {
      if (hit->failed) throw NumericalFailure("journal", hit->failure);
      return hit->estimate;
    }
    try {
      const Estimate e = inner(data, truth, v, seed);
      journal.record(seed, {false, e, {}});
      return e;
    } catch (const NumericalFailure& e) {
      journal.record(seed, {true, {}, e.what()});
      throw;
    }
  };
}

Estimator mcmc_estimator(const McmcConfig& mcmc, const PriorSpec& priors) {
  return [mcmc, priors](const Dataset& data, const SimTruth&, Variant variant, std::uint64_t seed) {
    McmcConfig cfg = mcmc;
    cfg.seed = seed;
    cfg.record_local = false;
    const ChainOutput chain = run_chain(make_fit_data(data), priors, cfg, ModelSpec{variant, false});
    std::vector<double> delta;
    delta.reserve(chain.draws.size());
    for (const auto& d : chain.draws) delta.push_back(d.delta_bar);
    const ScalarSummary s = summarize_values("delta", std::move(delta));
    return Estimate{s.mean, s.lower, s.upper};
  };
}

Aggregate aggregate(const std::vector<ReplicateRecord>& records, Variant variant) {
  Aggregate a;
  std::vector<double> err, sq;
  long covered = 0;
  for (const auto& r : records) {
    if (r.variant != variant) continue;
    if (r.failed) {
      ++a.failed;
      continue;
    }
    const double e = r.estimate.mean - r.truth;
    err.push_back(e);
    sq.push_back(e * e);
    covered += r.covered;
  }
  a.used = static_cast<int>(err.size());
  if (a.used == 0) return a;
  const double m = a.used;
  auto mean_sd = [m](const std::vector<double>& v, double& mean, double& se) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= m;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = m > 1 ? std::sqrt(ss / (m - 1) / m) : 0.0;
  };
  mean_sd(err, a.bias, a.bias_se);
  mean_sd(sq, a.mse, a.mse_se);
  a.coverage = covered / m;
  a.coverage_se = std::sqrt(a.coverage * (1.0 - a.coverage) / m);
  return a;
}

StudyResult run_study(const StudyConfig& cfg, const Estimator& estimator) {
  cfg.validate();
  const ScenarioSpec spec = scenario(cfg.scenario);
  std::optional<Mat> frozen;
  if (cfg.freeze_covariates) {
    Rng r = Rng::derive(cfg.seed, "covariates");
    frozen = generate_covariates(build_grid(spec.domain, spec.nx, spec.ny), r, spec.p, spec.covariate_variance,
                                 spec.covariate_range);
  }

  std::vector<Variant> variants;  // naive before full regardless of the configured order
  for (Variant v : {Variant::naive, Variant::full})
    if (std::find(cfg.variants.begin(), cfg.variants.end(), v) != cfg.variants.end()) variants.push_back(v);
  const std::size_t per_rep = variants.size();
  std::vector<ReplicateRecord> records(per_rep * static_cast<std::size_t>(cfg.replicates));
  std::atomic<int> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto work = [&] {
    for (int rep = next++; rep < cfg.replicates; rep = next++) {
      try {
        const std::string base = "replicate/" + std::to_string(rep);
        Rng data_rng = Rng::derive(cfg.seed, base + "/data");
        const Simulation sim = generate_dataset(spec, data_rng, frozen);
        for (std::size_t k = 0; k < per_rep; ++k) {
          const Variant v = variants[k];
          ReplicateRecord& rec = records[per_rep * rep + k];
          rec.replicate = rep;
          rec.variant = v;
          rec.n = sim.data.n();
          rec.truth = sim.truth.delta_bar;
          try {
            rec.estimate =
                estimator(sim.data, sim.truth, v, stream_seed(cfg.seed, base + "/chain/" + variant_name(v)));
            rec.covered = rec.estimate.lower <= rec.truth && rec.truth <= rec.estimate.upper;
          } catch (const NumericalFailure& e) {
            rec.failed = true;
            rec.failure = e.what();
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next = cfg.replicates;
      }
    }
  };
  const int nthreads = std::min(cfg.workers, cfg.replicates);
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  StudyResult out;
  out.scenario = cfg.scenario;
  out.records = std::move(records);
  out.naive = aggregate(out.records, Variant::naive);
  out.full = aggregate(out.records, Variant::full);
  return out;
}

StudyResult run_study(const StudyConfig& cfg) { return run_study(cfg, mcmc_estimator(cfg.mcmc, cfg.priors)); }

std::string format_cell(double value, double se) {
  return fmt("%.1f", 100.0 * value) + " (" + fmt("%.1f", 100.0 * se) + ")";
}

namespace {

std::string cell_or_dash(const Aggregate& a, double value, double se) {
  return a.used + a.failed > 0 ? format_cell(value, se) : std::string("-");
}

}  // namespace

std::string format_table(const StudyResult& r) {
  const ScenarioSpec s = scenario(r.scenario);
  std::ostringstream o;
  char head[160];
  std::snprintf(head, sizeof head, "%-30s %-14s %-14s %-14s %-14s %-14s %-14s\n", "Scenario", "Bias naive", "Bias full",
                "MSE naive", "MSE full", "CP naive", "CP full");
  o << head;
  char label[96];
  std::snprintf(label, sizeof label, "%d: phi=%.3g rho=%.3g lambda*=%g%s%s", r.scenario, s.truth.phi[0], s.cov.rho_u,
                s.lambda_star, s.stationary ? "" : " nonstat", s.gaussian ? "" : " nongauss");
  char row[256];
  std::snprintf(row, sizeof row, "%-30s %-14s %-14s %-14s %-14s %-14s %-14s\n", label,
                cell_or_dash(r.naive, r.naive.bias, r.naive.bias_se).c_str(),
                cell_or_dash(r.full, r.full.bias, r.full.bias_se).c_str(),
                cell_or_dash(r.naive, r.naive.mse, r.naive.mse_se).c_str(),
                cell_or_dash(r.full, r.full.mse, r.full.mse_se).c_str(),
                cell_or_dash(r.naive, r.naive.coverage, r.naive.coverage_se).c_str(),
                cell_or_dash(r.full, r.full.coverage, r.full.coverage_se).c_str());
  o << row;
  o << "All values multiplied by 100; Monte Carlo standard errors in parentheses.\n";
  if (r.naive.failed + r.full.failed > 0)
    o << "Excluded after numerical failure: naive " << r.naive.failed << ", full " << r.full.failed << " replicates.\n";
  return o.str();
}

std::string format_table_csv(const StudyResult& r) {
  std::ostringstream o;
  o << "scenario,model,used,failed,bias,bias_se,mse,mse_se,coverage,coverage_se\n";
  for (Variant v : {Variant::naive, Variant::full}) {
    const Aggregate& a = v == Variant::full ? r.full : r.naive;
    if (a.used + a.failed == 0) continue;
    o << r.scenario << ',' << variant_name(v) << ',' << a.used << ',' << a.failed << ',' << fmt("%.17g", a.bias) << ','
      << fmt("%.17g", a.bias_se) << ',' << fmt("%.17g", a.mse) << ',' << fmt("%.17g", a.mse_se) << ','
      << fmt("%.17g", a.coverage) << ',' << fmt("%.17g", a.coverage_se) << '\n';
  }
  return o.str();
}

std::string format_records_csv(const StudyResult& r) {
  std::ostringstream o;
  o << "replicate,model,n,truth,mean,lower,upper,covered,failed\n";
  for (const auto& rec : r.records)
    o << rec.replicate << ',' << variant_name(rec.variant) << ',' << rec.n << ',' << fmt("%.17g", rec.truth) << ','
      << fmt("%.17g", rec.estimate.mean) << ',' << fmt("%.17g", rec.estimate.lower) << ','
      << fmt("%.17g", rec.estimate.upper) << ',' << (rec.covered ? 1 : 0) << ',' << (rec.failed ? 1 : 0) << '\n';
  return o.str();
}

}  // namespace pscausal

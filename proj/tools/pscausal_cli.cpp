// Command-line front end: simulate | fit | study | validate.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pscausal/errors.hpp"
#include "pscausal/harness.hpp"
#include "pscausal/io.hpp"
#include "pscausal/summary.hpp"
#include "validate.hpp"

using namespace pscausal;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIngestion = 2, kNumerical = 3, kValidation = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Options shared across subcommands. Values come from --config first, then explicit flags.
struct Options {
  std::string config_path;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::string out;
  // simulate / study
  int scenario = 0;
  double lambda_star = 0.0;
  int replicates = 50;
  int workers = 1;
  bool full_budget = false;
  bool freeze_covariates = false;
  std::string variants = "naive,full";
  std::string journal;
  // fit
  std::string observations, grid_file, mask;
  std::string variant = "full";
  bool pooled = false;
  bool no_standardize = false;
  // mcmc overrides
  long n_iter = 0, burn_in = -1, thin = 0;
  // validate
  long geweke_rounds = 2000;
  std::string inject;
  bool skip_geweke = false;
};

bool given(const CLI::App& app, const std::string& name) { return app.count(name) > 0; }

template <class T>
void merge(const CLI::App& app, const Json& cfg, const std::string& flag, const char* key, T& dst) {
  if (!given(app, flag) && cfg.contains(key)) dst = cfg.at(key).get<T>();
}

std::uint64_t require_seed(const CLI::App& app, const Options& o) {
  if (given(app, "--seed")) return o.seed;
  if (o.config.contains("seed")) return o.config.at("seed").get<std::uint64_t>();
  throw UsageError("a seed is required (--seed or \"seed\" in the config)");
}

McmcConfig mcmc_from(const CLI::App& app, const Options& o, McmcConfig base) {
  if (o.config.contains("mcmc")) from_json(o.config.at("mcmc"), base);
  if (given(app, "--n-iter")) base.n_iter = o.n_iter;
  if (given(app, "--burn-in")) base.burn_in = o.burn_in;
  if (given(app, "--thin")) base.thin = o.thin;
  base.validate();
  return base;
}

PriorSpec priors_from(const Options& o) {
  PriorSpec p;
  if (o.config.contains("priors")) from_json(o.config.at("priors"), p);
  p.validate();
  return p;
}

std::string require_out(const CLI::App& app, const Options& o) {
  std::string out = o.out;
  merge(app, o.config, "--out", "out", out);
  if (out.empty()) throw UsageError("an output directory is required (--out)");
  return out;
}

void write_manifest(const std::string& dir, const std::string& command, Json body) {
  body["schema_version"] = kSchemaVersion;
  body["command"] = command;
  write_text_file(dir + "/manifest.json", body.dump(2) + "\n");
}

int cmd_simulate(const CLI::App& app, const Options& o) {
  const std::uint64_t seed = require_seed(app, o);
  const std::string out = require_out(app, o);
  int id = o.scenario;
  merge(app, o.config, "--scenario", "scenario", id);
  const bool custom = o.config.contains("truth");
  if (!custom && (id < 1 || id > 8)) throw UsageError("scenario must be 1-8, or give a custom truth block");
  ScenarioSpec spec = scenario(custom && id == 0 ? 1 : id);
  if (custom) {
    const Json& t = o.config.at("truth");
    spec.id = 0;
    if (t.contains("params")) from_json(t.at("params"), spec.truth);
    if (t.contains("cov")) from_json(t.at("cov"), spec.cov);
    spec.gaussian = t.value("gaussian", spec.gaussian);
    spec.stationary = t.value("stationary", spec.stationary);
    spec.lambda_star = t.value("lambda_star", spec.lambda_star);
  }
  double lambda_star = spec.lambda_star;
  merge(app, o.config, "--lambda-star", "lambda_star", lambda_star);
  if (given(app, "--lambda-star")) lambda_star = o.lambda_star;
  if (!(lambda_star > 0.0)) throw UsageError("lambda* must be positive");
  spec.lambda_star = lambda_star;

  Rng rng = Rng::derive(seed, "simulate");
  const Simulation sim = generate_dataset(spec, rng);
  write_dataset(out, sim.data);
  write_text_file(out + "/truth.json", truth_to_json(sim.truth, seed).dump(2) + "\n");
  write_manifest(out, "simulate",
                 {{"seed", seed}, {"scenario", spec.id}, {"lambda_star", spec.lambda_star}, {"custom_truth", custom}});
  std::printf("n = %d\nDelta = %s\n", sim.data.n(), format_double(sim.truth.delta_bar).c_str());
  return kOk;
}

std::string summary_line(const ScalarSummary& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %12.4f %10.4f %12.4f %12.4f\n", s.name.c_str(), s.mean, s.sd, s.lower, s.upper);
  return buf;
}

Json summary_json(const ScalarSummary& s) {
  return {{"name", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"lower", s.lower}, {"upper", s.upper}};
}

int cmd_fit(const CLI::App& app, const Options& o) {
  const std::uint64_t seed = require_seed(app, o);
  const std::string out = require_out(app, o);
  std::string obs = o.observations, grid = o.grid_file, mask = o.mask, variant = o.variant;
  merge(app, o.config, "--observations", "observations", obs);
  merge(app, o.config, "--grid", "grid", grid);
  merge(app, o.config, "--mask", "mask", mask);
  merge(app, o.config, "--variant", "variant", variant);
  bool pooled = o.pooled;
  merge(app, o.config, "--pooled", "pooled", pooled);
  bool standardize = !o.no_standardize;
  if (!given(app, "--no-standardize") && o.config.contains("standardize"))
    standardize = o.config.at("standardize").get<bool>();
  if (obs.empty() || grid.empty()) throw UsageError("--observations and --grid are required");
  if (variant != "full" && variant != "naive") throw UsageError("variant must be full or naive");

  std::optional<GridSpec> grid_spec;
  if (o.config.contains("grid_spec")) {
    const Json& g = o.config.at("grid_spec");
    const auto d = g.at("domain").get<std::vector<double>>();
    if (d.size() != 4) throw UsageError("grid_spec.domain must be [x0, x1, y0, y1]");
    grid_spec = GridSpec{{{d[0], d[1]}, {d[2], d[3]}}, g.at("nx").get<int>(), g.at("ny").get<int>()};
  }
  Dataset data = read_dataset(obs, grid, grid_spec, mask);
  Json standardization = nullptr;
  if (standardize && data.p() > 0) {
    const Standardization s = standardize_covariates(data);
    standardization = {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                       {"sd", std::vector<double>(s.sd.data(), s.sd.data() + s.sd.size())}};
  }

  McmcConfig mcmc = mcmc_from(app, o, McmcConfig{});
  mcmc.seed = seed;
  const PriorSpec priors = priors_from(o);
  const ModelSpec spec{variant == "full" ? Variant::full : Variant::naive, pooled};

  const auto t0 = std::chrono::steady_clock::now();
  const ChainOutput chain = run_chain(make_fit_data(data), priors, mcmc, spec);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const PosteriorSummary sum = summarize(chain);

  {
    std::ostringstream s;
    write_chain_csv(s, chain);
    write_text_file(out + "/chain.csv", s.str());
  }
  if (mcmc.record_local) {
    std::ostringstream s;
    write_local_csv(s, chain);
    write_text_file(out + "/local.csv", s.str());
  }

  std::ostringstream text;
  char head[160];
  std::snprintf(head, sizeof head, "%-14s %12s %10s %12s %12s\n", "parameter", "mean", "sd", "2.5%", "97.5%");
  text << head;
  for (const auto& p : sum.parameters) text << summary_line(p);
  text << summary_line(sum.delta);
  Json js = {{"parameters", Json::array()}, {"delta", summary_json(sum.delta)}, {"ess_delta", sum.ess_delta}};
  for (const auto& p : sum.parameters) js["parameters"].push_back(summary_json(p));
  if (spec.full()) {
    for (const auto* s : {&sum.phi_diff, &sum.r_u, &sum.r_v}) text << summary_line(*s);
    char buf[96];
    std::snprintf(buf, sizeof buf, "P(phi_1 - phi_0 < 0) = %.4f\n", sum.prob_phi_diff_negative);
    text << buf;
    js["phi_diff"] = summary_json(sum.phi_diff);
    js["r_u"] = summary_json(sum.r_u);
    js["r_v"] = summary_json(sum.r_v);
    js["prob_phi_diff_negative"] = sum.prob_phi_diff_negative;
  }
  write_text_file(out + "/summary.txt", text.str());
  write_text_file(out + "/summary.json", js.dump(2) + "\n");

  Json manifest = {{"seed", seed},
                   {"variant", variant},
                   {"pooled", pooled},
                   {"observations", obs},
                   {"grid", grid},
                   {"mask", mask},
                   {"standardize", standardize},
                   {"standardization", standardization},
                   {"mcmc", mcmc},
                   {"priors", priors},
                   {"acceptance", acceptance_to_json(chain)},
                   {"draws", chain.draws.size()}};
  if (grid_spec)
    manifest["grid_spec"] = {{"domain", {grid_spec->domain.x.lo, grid_spec->domain.x.hi, grid_spec->domain.y.lo,
                                         grid_spec->domain.y.hi}},
                             {"nx", grid_spec->nx},
                             {"ny", grid_spec->ny}};
  write_manifest(out, "fit", manifest);
  std::cout << text.str();
  std::fprintf(stderr, "%zu draws in %.1f s\n", chain.draws.size(), secs);
  return kOk;
}

int cmd_study(const CLI::App& app, const Options& o) {
  StudyConfig cfg;
  cfg.seed = require_seed(app, o);
  const std::string out = require_out(app, o);
  cfg.scenario = o.scenario;
  merge(app, o.config, "--scenario", "scenario", cfg.scenario);
  if (cfg.scenario < 1 || cfg.scenario > 8) throw UsageError("scenario must be 1-8");
  cfg.replicates = o.replicates;
  merge(app, o.config, "--replicates", "replicates", cfg.replicates);
  cfg.workers = o.workers;
  merge(app, o.config, "--workers", "workers", cfg.workers);
  cfg.freeze_covariates = o.freeze_covariates;
  merge(app, o.config, "--freeze-covariates", "freeze_covariates", cfg.freeze_covariates);
  bool full_budget = o.full_budget;
  merge(app, o.config, "--full-budget", "full_budget", full_budget);
  McmcConfig base;
  if (full_budget) {
    base.n_iter = 120000;
    base.burn_in = 50000;
    if (!given(app, "--replicates") && !o.config.contains("replicates")) cfg.replicates = 200;
  }
  cfg.mcmc = mcmc_from(app, o, base);
  cfg.mcmc.record_local = false;
  cfg.priors = priors_from(o);
  std::string variants = o.variants;
  merge(app, o.config, "--variants", "variants", variants);
  cfg.variants.clear();
  std::istringstream vs(variants);
  for (std::string v; std::getline(vs, v, ',');) {
    if (v == "naive") cfg.variants.push_back(Variant::naive);
    else if (v == "full") cfg.variants.push_back(Variant::full);
    else throw UsageError("unknown variant '" + v + "'");
  }
  cfg.validate();
  std::string journal_path = o.journal;
  merge(app, o.config, "--journal", "journal", journal_path);
  if (journal_path.empty()) journal_path = out + "/journal.csv";
  if (const auto parent = std::filesystem::path(journal_path).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  StudyJournal journal(journal_path, study_fingerprint(cfg));
  if (journal.size() > 0) std::fprintf(stderr, "resuming: %zu fits already in %s\n", journal.size(), journal_path.c_str());

  const auto t0 = std::chrono::steady_clock::now();
  const StudyResult r = run_study(cfg, journaled_estimator(mcmc_estimator(cfg.mcmc, cfg.priors), journal));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text_file(out + "/records.csv", format_records_csv(r));
  write_text_file(out + "/table.txt", format_table(r));
  write_text_file(out + "/table.csv", format_table_csv(r));
  // Worker count is left out so outputs match across pool sizes.
  Json manifest = study_to_json(cfg);
  manifest["failed"] = {{"naive", r.naive.failed}, {"full", r.full.failed}};
  write_manifest(out, "study", manifest);
  std::cout << format_table(r);
  std::fprintf(stderr, "%d replicates in %.1f s\n", cfg.replicates, secs);
  return kOk;
}

int cmd_validate(const CLI::App& app, const Options& o) {
  cli::ValidateOptions v;
  v.geweke_rounds = o.geweke_rounds;
  merge(app, o.config, "--geweke-rounds", "geweke_rounds", v.geweke_rounds);
  if (given(app, "--seed")) v.seed = o.seed;
  else if (o.config.contains("seed")) v.seed = o.config.at("seed").get<std::uint64_t>();
  v.inject = o.inject;
  v.skip_geweke = o.skip_geweke;
  if (!v.inject.empty() && v.inject != "gradient" && v.inject != "alpha")
    throw UsageError("--inject takes gradient or alpha");
  return cli::run_validation(v) ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal effects under preferential sampling: simulation, fitting and validation"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config; explicit flags override it");
    sub->add_option("--seed", o.seed, "Master seed");
  };
  auto add_mcmc = [&](CLI::App* sub) {
    sub->add_option("--n-iter", o.n_iter, "Total iterations");
    sub->add_option("--burn-in", o.burn_in, "Burn-in iterations");
    sub->add_option("--thin", o.thin, "Thinning interval");
  };

  CLI::App* sim = app.add_subcommand("simulate", "Draw a dataset from a scenario");
  add_common(sim);
  sim->add_option("--scenario", o.scenario, "Scenario 1-8");
  sim->add_option("--lambda-star", o.lambda_star, "Expected count per cell and arm");
  sim->add_option("--out", o.out, "Output directory");

  CLI::App* fit = app.add_subcommand("fit", "Run one chain on a dataset");
  add_common(fit);
  add_mcmc(fit);
  fit->add_option("--observations", o.observations, "Observation CSV");
  fit->add_option("--grid", o.grid_file, "Grid CSV");
  fit->add_option("--mask", o.mask, "Mask file, one 0/1 per cell");
  fit->add_option("--variant", o.variant, "full or naive");
  fit->add_flag("--pooled", o.pooled, "Share beta and delta across arms");
  fit->add_flag("--no-standardize", o.no_standardize, "Keep covariates on their original scale");
  fit->add_option("--out", o.out, "Output directory");

  CLI::App* study = app.add_subcommand("study", "Replicate study over one scenario");
  add_common(study);
  add_mcmc(study);
  study->add_option("--scenario", o.scenario, "Scenario 1-8");
  study->add_option("--replicates", o.replicates, "Number of datasets");
  study->add_option("--workers", o.workers, "Worker threads");
  study->add_flag("--full-budget", o.full_budget, "200 replicates, 120000 iterations, 50000 burn-in");
  study->add_flag("--freeze-covariates", o.freeze_covariates, "Draw covariates once and reuse them");
  study->add_option("--variants", o.variants, "Comma-separated models to fit: naive,full");
  study->add_option("--journal", o.journal, "Resume log of finished fits (default <out>/journal.csv)");
  study->add_option("--out", o.out, "Output directory");

  CLI::App* val = app.add_subcommand("validate", "Numerical self-tests");
  add_common(val);
  val->add_option("--geweke-rounds", o.geweke_rounds, "Rounds for the joint-distribution test");
  val->add_option("--inject", o.inject, "Deliberate fault: gradient or alpha");
  val->add_flag("--skip-geweke", o.skip_geweke, "Skip the joint-distribution test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!o.config_path.empty()) o.config = read_json_file(o.config_path);
    if (*sim) return cmd_simulate(*sim, o);
    if (*fit) return cmd_fit(*fit, o);
    if (*study) return cmd_study(*study, o);
    if (*val) return cmd_validate(*val, o);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const IngestionError& e) {
    std::fprintf(stderr, "ingestion error: %s\n", e.what());
    return kIngestion;
  } catch (const OutOfDomain& e) {
    std::fprintf(stderr, "ingestion error: %s\n", e.what());
    return kIngestion;
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}

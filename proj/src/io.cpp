#include "pscausal/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pscausal/errors.hpp"
#include "pscausal/summary.hpp"

namespace pscausal {

namespace {

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IngestionError(path, 1, name, "missing column");
    return static_cast<int>(it - header.begin());
  }
  double number(std::size_t r, int c) const {
    const std::string& cell = rows[r][c];
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan")
      throw IngestionError(path, static_cast<long>(r) + 2, header[c], "missing value");
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
      throw IngestionError(path, static_cast<long>(r) + 2, header[c], "not a finite number: '" + cell + "'");
    return v;
  }
  long integer(std::size_t r, int c) const {
    const std::string& cell = rows[r][c];
    long v = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      throw IngestionError(path, static_cast<long>(r) + 2, header[c], "not an integer: '" + cell + "'");
    return v;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  CsvTable t;
  t.path = path;
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path, 1, "header", "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw IngestionError(path, row, "*", "expected " + std::to_string(t.header.size()) + " fields, found " +
                                               std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

int covariate_count(const CsvTable& t) {
  int p = 0;
  while (std::find(t.header.begin(), t.header.end(), "x_" + std::to_string(p + 1)) != t.header.end()) ++p;
  return p;
}

void write_covariate_header(std::ostream& out, int p) {
  for (int j = 1; j <= p; ++j) out << ",x_" << j;
}

/// Distinct sorted values, merging those within tol.
std::vector<double> distinct(std::vector<double> v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  return out;
}

Interval infer_axis(const std::vector<double>& centres, const std::string& path, const char* axis,
                    double fallback_width) {
  if (centres.size() == 1) {
    if (!(fallback_width > 0.0))
      throw IngestionError(path + ": cannot infer the grid extent along " + axis + "; give it in the config");
    return {centres[0] - fallback_width / 2, centres[0] + fallback_width / 2};
  }
  const double w = (centres.back() - centres.front()) / static_cast<double>(centres.size() - 1);
  return {centres.front() - w / 2, centres.back() + w / 2};
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_observations_csv(std::ostream& out, const Dataset& d) {
  out << "s_x,s_y,a,y";
  write_covariate_header(out, d.p());
  out << '\n';
  for (int i = 0; i < d.n(); ++i) {
    out << format_double(d.sites(i, 0)) << ',' << format_double(d.sites(i, 1)) << ',' << d.treatment[i] << ','
        << format_double(d.y[i]);
    for (int j = 0; j < d.p(); ++j) out << ',' << format_double(d.x(i, j));
    out << '\n';
  }
}

void write_grid_csv(std::ostream& out, const Dataset& d) {
  out << "g,c_x,c_y";
  write_covariate_header(out, d.p());
  out << ",mask\n";
  for (int g = 0; g < d.grid.size(); ++g) {
    out << g << ',' << format_double(d.grid.centroids(g, 0)) << ',' << format_double(d.grid.centroids(g, 1));
    for (int j = 0; j < d.p(); ++j) out << ',' << format_double(d.grid_x(g, j));
    out << ',' << (d.active(g) ? 1 : 0) << '\n';
  }
}

void write_dataset(const std::string& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  std::ofstream obs(dir + "/observations.csv"), grid(dir + "/grid.csv");
  if (!obs || !grid) throw std::runtime_error("cannot write dataset under " + dir);
  write_observations_csv(obs, data);
  write_grid_csv(grid, data);
}

Dataset read_dataset(const std::string& obs_path, const std::string& grid_path, const std::optional<GridSpec>& spec,
                     const std::string& mask_path) {
  const CsvTable gt = read_csv(grid_path);
  const int p = covariate_count(gt);
  const int cg = gt.column("g"), ccx = gt.column("c_x"), ccy = gt.column("c_y");
  const int cmask = std::find(gt.header.begin(), gt.header.end(), "mask") != gt.header.end() ? gt.column("mask") : -1;
  const int G = static_cast<int>(gt.rows.size());
  if (G == 0) throw IngestionError(grid_path, 2, "g", "no grid cells");

  Points centroids(G, 2);
  Mat grid_x(G, p);
  CellMask mask(G, true);
  for (int r = 0; r < G; ++r) {
    if (gt.integer(r, cg) != r) throw IngestionError(grid_path, r + 2, "g", "cells must be listed in order 0..G-1");
    centroids(r, 0) = gt.number(r, ccx);
    centroids(r, 1) = gt.number(r, ccy);
    for (int j = 0; j < p; ++j) grid_x(r, j) = gt.number(r, gt.column("x_" + std::to_string(j + 1)));
    if (cmask >= 0) {
      const long m = gt.integer(r, cmask);
      if (m != 0 && m != 1) throw IngestionError(grid_path, r + 2, "mask", "expected 0 or 1");
      mask[r] = m == 1;
    }
  }

  Dataset d;
  if (spec) {
    d.grid = build_grid(spec->domain, spec->nx, spec->ny);
    if (d.grid.size() != G) throw IngestionError(grid_path + ": row count does not match the configured grid");
  } else {
    std::vector<double> xs(centroids.col(0).data(), centroids.col(0).data() + G);
    std::vector<double> ys(centroids.col(1).data(), centroids.col(1).data() + G);
    const double extent = std::max(centroids.col(0).maxCoeff() - centroids.col(0).minCoeff(),
                                   centroids.col(1).maxCoeff() - centroids.col(1).minCoeff());
    const double tol = 1e-9 * std::max(extent, 1.0);
    const auto ux = distinct(xs, tol), uy = distinct(ys, tol);
    if (static_cast<int>(ux.size() * uy.size()) != G)
      throw IngestionError(grid_path + ": centroids do not form a complete rectangular grid");
    const double wx = ux.size() > 1 ? (ux.back() - ux.front()) / (ux.size() - 1) : 0.0;
    const double wy = uy.size() > 1 ? (uy.back() - uy.front()) / (uy.size() - 1) : 0.0;
    const Interval ix = infer_axis(ux, grid_path, "x", wy);
    const Interval iy = infer_axis(uy, grid_path, "y", wx);
    d.grid = build_grid({ix, iy}, static_cast<int>(ux.size()), static_cast<int>(uy.size()));
  }
  const double scale = std::max(d.grid.domain.x.length(), d.grid.domain.y.length());
  if ((d.grid.centroids - centroids).cwiseAbs().maxCoeff() > 1e-6 * scale)
    throw IngestionError(grid_path + ": centroids are not in row-major order (x fastest) for the grid");
  d.grid.centroids = centroids;  // keep file values so a rewrite is byte-identical
  d.grid_x = grid_x;
  d.mask = mask;
  if (!mask_path.empty()) d.mask = read_mask_file(mask_path, G);
  if (std::all_of(d.mask.begin(), d.mask.end(), [](bool b) { return b; })) d.mask.clear();

  const CsvTable ot = read_csv(obs_path);
  if (covariate_count(ot) != p)
    throw IngestionError(obs_path + ": observation and grid covariate counts differ");
  const int n = static_cast<int>(ot.rows.size());
  const int csx = ot.column("s_x"), csy = ot.column("s_y"), ca = ot.column("a"), cy = ot.column("y");
  std::vector<int> cx(p);
  for (int j = 0; j < p; ++j) cx[j] = ot.column("x_" + std::to_string(j + 1));
  d.sites.resize(n, 2);
  d.treatment.resize(n);
  d.y.resize(n);
  d.x.resize(n, p);
  const Domain& dom = d.grid.domain;
  for (int r = 0; r < n; ++r) {
    d.sites(r, 0) = ot.number(r, csx);
    d.sites(r, 1) = ot.number(r, csy);
    const long a = ot.integer(r, ca);
    if (a != 0 && a != 1) throw IngestionError(obs_path, r + 2, "a", "treatment must be 0 or 1");
    d.treatment[r] = static_cast<int>(a);
    d.y[r] = ot.number(r, cy);
    for (int j = 0; j < p; ++j) d.x(r, j) = ot.number(r, cx[j]);
    const double sx = d.sites(r, 0), sy = d.sites(r, 1);
    if (sx < dom.x.lo || sx > dom.x.hi || sy < dom.y.lo || sy > dom.y.hi)
      throw IngestionError(obs_path, r + 2, "s_x/s_y", "site outside the grid domain");
    if (!d.active(locate(d.grid, {sx, sy})))
      throw IngestionError(obs_path, r + 2, "s_x/s_y", "site lies in a masked cell");
  }
  d.validate();
  return d;
}

Standardization standardize_covariates(Dataset& d) {
  const int p = d.p();
  Standardization s{Vec::Zero(p), Vec::Ones(p)};
  for (int j = 0; j < p; ++j) {
    const double count = d.n() + d.grid_x.rows();
    const double mean = (d.x.col(j).sum() + d.grid_x.col(j).sum()) / count;
    const double ss = (d.x.col(j).array() - mean).square().sum() + (d.grid_x.col(j).array() - mean).square().sum();
    const double sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
    s.mean[j] = mean;
    s.sd[j] = sd > 0.0 ? sd : 1.0;
    d.x.col(j) = (d.x.col(j).array() - mean) / s.sd[j];
    d.grid_x.col(j) = (d.grid_x.col(j).array() - mean) / s.sd[j];
  }
  return s;
}

namespace {

Json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json pair_json(const std::array<double, 2>& a) { return Json::array({a[0], a[1]}); }

void read_pair(const Json& j, const char* key, std::array<double, 2>& dst) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw InvalidArgument(std::string(key) + " must have two entries");
  dst = {v[0], v[1]};
}

Json hyper_json(const HyperPrior& h) {
  const char* fam = h.family == HyperPrior::Family::uniform      ? "uniform"
                    : h.family == HyperPrior::Family::log_normal ? "log_normal"
                                                                 : "fixed";
  return {{"family", fam}, {"a", h.a}, {"b", h.b}};
}

HyperPrior json_hyper(const Json& j, HyperPrior h) {
  const std::string fam = j.value("family", std::string{});
  if (fam == "uniform") h.family = HyperPrior::Family::uniform;
  else if (fam == "log_normal") h.family = HyperPrior::Family::log_normal;
  else if (fam == "fixed") h.family = HyperPrior::Family::fixed;
  else if (!fam.empty()) throw InvalidArgument("unknown prior family '" + fam + "'");
  h.a = j.value("a", h.a);
  h.b = j.value("b", h.family == HyperPrior::Family::fixed ? h.a : h.b);
  return h;
}

Json ig_json(const InverseGammaPrior& p) { return {{"shape", p.shape}, {"rate", p.rate}}; }

InverseGammaPrior json_ig(const Json& j, InverseGammaPrior p) {
  return {j.value("shape", p.shape), j.value("rate", p.rate)};
}

}  // namespace

void to_json(Json& j, const PriorSpec& p) {
  j = {{"c2_alpha", p.c2_alpha},
       {"c2_beta", p.c2_beta},
       {"c2_eta", p.c2_eta},
       {"c2_delta", p.c2_delta},
       {"c2_phi", p.c2_phi},
       {"c2_gamma", p.c2_gamma},
       {"tau2", ig_json(p.tau2)},
       {"sigma2_u", ig_json(p.sigma2_u)},
       {"sigma2_v", ig_json(p.sigma2_v)},
       {"tau2_psi", ig_json(p.tau2_psi)},
       {"rho_u", hyper_json(p.rho_u)},
       {"rho_v", hyper_json(p.rho_v)},
       {"kappa_u", hyper_json(p.kappa_u)},
       {"kappa_v", hyper_json(p.kappa_v)},
       {"kappa_max", p.kappa_max}};
}

void from_json(const Json& j, PriorSpec& p) {
  for (auto [key, dst] : {std::pair{"c2_alpha", &p.c2_alpha}, {"c2_beta", &p.c2_beta}, {"c2_eta", &p.c2_eta},
                          {"c2_delta", &p.c2_delta}, {"c2_phi", &p.c2_phi}, {"c2_gamma", &p.c2_gamma},
                          {"kappa_max", &p.kappa_max}})
    *dst = j.value(key, *dst);
  for (auto [key, dst] : {std::pair{"tau2", &p.tau2}, {"sigma2_u", &p.sigma2_u}, {"sigma2_v", &p.sigma2_v},
                          {"tau2_psi", &p.tau2_psi}})
    if (j.contains(key)) *dst = json_ig(j.at(key), *dst);
  for (auto [key, dst] : {std::pair{"rho_u", &p.rho_u}, {"rho_v", &p.rho_v}, {"kappa_u", &p.kappa_u},
                          {"kappa_v", &p.kappa_v}})
    if (j.contains(key)) *dst = json_hyper(j.at(key), *dst);
}

void to_json(Json& j, const McmcConfig& c) {
  j = {{"n_iter", c.n_iter},
       {"burn_in", c.burn_in},
       {"thin", c.thin},
       {"seed", c.seed},
       {"adapt", c.adapt},
       {"record_local", c.record_local},
       {"ridge_moves", c.ridge_moves},
       {"collapse_counterfactuals", c.collapse_counterfactuals},
       {"hmc", {{"step_size", c.hmc.step_size}, {"leapfrog_steps", c.hmc.leapfrog_steps}, {"mass_scale", c.hmc.mass_scale}}},
       {"mh",
        {{"log_rho_sd", c.mh.log_rho_sd}, {"log_kappa_sd", c.mh.log_kappa_sd}, {"target_accept", c.mh.target_accept}}}};
}

void from_json(const Json& j, McmcConfig& c) {
  c.n_iter = j.value("n_iter", c.n_iter);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thin = j.value("thin", c.thin);
  c.seed = j.value("seed", c.seed);
  c.adapt = j.value("adapt", c.adapt);
  c.record_local = j.value("record_local", c.record_local);
  c.ridge_moves = j.value("ridge_moves", c.ridge_moves);
  c.collapse_counterfactuals = j.value("collapse_counterfactuals", c.collapse_counterfactuals);
  if (j.contains("hmc")) {
    const Json& h = j.at("hmc");
    c.hmc.step_size = h.value("step_size", c.hmc.step_size);
    c.hmc.leapfrog_steps = h.value("leapfrog_steps", c.hmc.leapfrog_steps);
    c.hmc.mass_scale = h.value("mass_scale", c.hmc.mass_scale);
  }
  if (j.contains("mh")) {
    const Json& m = j.at("mh");
    c.mh.log_rho_sd = m.value("log_rho_sd", c.mh.log_rho_sd);
    c.mh.log_kappa_sd = m.value("log_kappa_sd", c.mh.log_kappa_sd);
    c.mh.target_accept = m.value("target_accept", c.mh.target_accept);
  }
}

void to_json(Json& j, const ModelParams& m) {
  j = {{"alpha", pair_json(m.alpha)},
       {"beta", {vec_json(m.beta[0]), vec_json(m.beta[1])}},
       {"eta", pair_json(m.eta)},
       {"delta", {vec_json(m.delta[0]), vec_json(m.delta[1])}},
       {"phi", pair_json(m.phi)},
       {"tau2", pair_json(m.tau2)},
       {"gamma_u", m.gamma_u},
       {"gamma_v", m.gamma_v}};
}

void from_json(const Json& j, ModelParams& m) {
  read_pair(j, "alpha", m.alpha);
  read_pair(j, "eta", m.eta);
  read_pair(j, "phi", m.phi);
  read_pair(j, "tau2", m.tau2);
  for (auto [key, dst] : {std::pair{"beta", &m.beta}, {"delta", &m.delta}})
    if (j.contains(key)) {
      const Json& v = j.at(key);
      if (!v.is_array() || v.size() != 2) throw InvalidArgument(std::string(key) + " must hold two vectors");
      (*dst)[0] = json_vec(v[0]);
      (*dst)[1] = json_vec(v[1]);
    }
  m.gamma_u = j.value("gamma_u", m.gamma_u);
  m.gamma_v = j.value("gamma_v", m.gamma_v);
}

void to_json(Json& j, const CovParams& c) {
  j = {{"rho_u", c.rho_u},         {"rho_v", c.rho_v},         {"kappa_u", c.kappa_u},
       {"kappa_v", c.kappa_v},     {"sigma2_u", pair_json(c.sigma2_u)}, {"sigma2_v", pair_json(c.sigma2_v)},
       {"tau2_psi", pair_json(c.tau2_psi)}};
}

void from_json(const Json& j, CovParams& c) {
  c.rho_u = j.value("rho_u", c.rho_u);
  c.rho_v = j.value("rho_v", c.rho_v);
  c.kappa_u = j.value("kappa_u", c.kappa_u);
  c.kappa_v = j.value("kappa_v", c.kappa_v);
  read_pair(j, "sigma2_u", c.sigma2_u);
  read_pair(j, "sigma2_v", c.sigma2_v);
  read_pair(j, "tau2_psi", c.tau2_psi);
}

Json study_to_json(const StudyConfig& cfg) {
  Json variants = Json::array();
  for (Variant v : cfg.variants) variants.push_back(v == Variant::full ? "full" : "naive");
  return {{"scenario", cfg.scenario},     {"replicates", cfg.replicates}, {"seed", cfg.seed},
          {"freeze_covariates", cfg.freeze_covariates}, {"variants", variants}, {"mcmc", cfg.mcmc},
          {"priors", cfg.priors}};
}

std::string study_fingerprint(const StudyConfig& cfg) {
  Json j = study_to_json(cfg);
  // Replicate count and variants may grow without invalidating finished fits.
  j.erase("replicates");
  j.erase("variants");
  j["sampler_revision"] = kSamplerRevision;
  j["schema_version"] = kSchemaVersion;
  return j.dump();
}

Json truth_to_json(const SimTruth& t, std::uint64_t seed) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = t.scenario;
  j["seed"] = seed;
  j["params"] = t.params;
  j["cov"] = t.cov;
  j["delta_star"] = {vec_json(t.delta_star[0]), vec_json(t.delta_star[1])};
  j["delta_bar"] = t.delta_bar;
  j["fields"] = {{"u0_tilde", vec_json(t.fields.u_tilde[0])}, {"u1_tilde", vec_json(t.fields.u_tilde[1])},
                 {"v0_tilde", vec_json(t.fields.v_tilde[0])}, {"v1_tilde", vec_json(t.fields.v_tilde[1])},
                 {"log_lambda0", vec_json(t.fields.log_lambda[0])}, {"log_lambda1", vec_json(t.fields.log_lambda[1])}};
  return j;
}

void write_chain_csv(std::ostream& out, const ChainOutput& chain) {
  out << "iter";
  for (const auto& n : parameter_names(chain.p, chain.spec)) out << ',' << n;
  out << ",delta\n";
  for (const auto& d : chain.draws) {
    out << d.iter;
    for (double v : parameter_values(d, chain.spec)) out << ',' << format_double(v);
    out << ',' << format_double(d.delta_bar) << '\n';
  }
}

void write_local_csv(std::ostream& out, const ChainOutput& chain) {
  out << "iter";
  for (int g : chain.active) out << ",delta_" << g;
  if (chain.propensity.rows() > 0)
    for (int g : chain.active) out << ",propensity_" << g;
  out << '\n';
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    out << chain.draws[i].iter;
    for (Eigen::Index g = 0; g < chain.delta_local.cols(); ++g) out << ',' << format_double(chain.delta_local(i, g));
    for (Eigen::Index g = 0; g < chain.propensity.cols(); ++g) out << ',' << format_double(chain.propensity(i, g));
    out << '\n';
  }
}

Json acceptance_to_json(const ChainOutput& c) {
  return {{"hmc", pair_json(c.acceptance.hmc)}, {"rho_u", c.acceptance.rho_u},     {"rho_v", c.acceptance.rho_v},
          {"kappa_u", c.acceptance.kappa_u},    {"kappa_v", c.acceptance.kappa_v}, {"non_finite_energy", c.non_finite_energy},
          {"step_size", pair_json(c.step_size)}};
}

void write_text_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

}  // namespace pscausal

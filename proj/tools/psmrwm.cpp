// Batch front end for the psmrwm library.
//
// Subcommands: theory-grid, optimize, finite-d, lv-simulate, pmrwm-run,
// pilot, diagnose.  Each run resolves its JSON config (filling documented
// defaults), executes the corresponding library calls, and writes
// <command>-<seed>-<timestamp>.{csv,json} outputs plus a manifest.  File
// contents are timestamp-free and fully determined by (resolved config,
// seed), so reruns are byte-identical; the timestamp lives only in the
// file names.  Every output header records the seed and the FNV-1a hash
// of the resolved config.  Failures print a machine-readable JSON object
// to stderr and exit nonzero.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psmrwm/io/csv.hpp"
#include "psmrwm/kalman.hpp"
#include "psmrwm/limit_theory.hpp"
#include "psmrwm/lotka_volterra.hpp"
#include "psmrwm/noise_diagnostics.hpp"
#include "psmrwm/noise_models.hpp"
#include "psmrwm/particle_filter.hpp"
#include "psmrwm/psm_sampler.hpp"
#include "psmrwm/rng.hpp"
#include "psmrwm/simulation_study.hpp"
#include "psmrwm/tuning_optimizer.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Run context and output plumbing

struct RunContext {
  std::string command;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string config_path;  // empty: defaults only
  std::size_t threads = 1;
  bool full_scale = false;

  std::string stamp;        // filled at dispatch time
  json resolved;            // filled by each command's resolver
  std::string config_hash;  // FNV-1a of resolved.dump()
  std::vector<std::string> outputs;

  std::string base_name() const {
    return command + "-" + std::to_string(seed) + "-" + stamp;
  }

  std::string path(const std::string& suffix, const std::string& ext) const {
    namespace fs = std::filesystem;
    return (fs::path(out_dir) / (base_name() + suffix + "." + ext)).string();
  }

  void note_output(const std::string& p) { outputs.push_back(p); }
};

std::string utc_stamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
}

void stamp_csv(psmrwm::CsvWriter& w, const RunContext& ctx) {
  w.comment("command=" + ctx.command);
  w.comment("seed=" + std::to_string(ctx.seed));
  w.comment("config=" + ctx.config_hash);
}

void write_json_output(const RunContext& ctx, const std::string& path, json body) {
  body["command"] = ctx.command;
  body["seed"] = ctx.seed;
  body["config"] = ctx.config_hash;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << body.dump(2) << "\n";
}

void write_manifest(RunContext& ctx) {
  json m;
  m["command"] = ctx.command;
  m["config_path"] = ctx.config_path;
  m["seed"] = ctx.seed;
  m["output_dir"] = ctx.out_dir;
  m["config_hash"] = ctx.config_hash;
  m["config"] = ctx.resolved;
  m["outputs"] = ctx.outputs;
  const std::string path = ctx.path("-manifest", "json");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open manifest file " + path);
  out << m.dump(2) << "\n";
  ctx.note_output(path);
}

// ---------------------------------------------------------------------------
// Config helpers

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count < 1) throw std::runtime_error("grid: count must be >= 1");
  std::vector<double> xs(count);
  if (count == 1) {
    xs[0] = lo;
    return xs;
  }
  for (std::size_t i = 0; i < count; ++i)
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return xs;
}

// Accepts either "<key>_values": [..] or "<key>": {"min","max","count"};
// normalizes to an explicit value list in the resolved config.
std::vector<double> resolve_grid(json& cfg, const std::string& key,
                                 std::vector<double> fallback) {
  const std::string values_key = key + "_values";
  std::vector<double> xs;
  if (cfg.contains(values_key)) {
    xs = cfg.at(values_key).get<std::vector<double>>();
  } else if (cfg.contains(key) && cfg.at(key).is_object()) {
    const json& r = cfg.at(key);
    xs = linspace(r.at("min").get<double>(), r.at("max").get<double>(),
                  r.at("count").get<std::size_t>());
    cfg.erase(key);
  } else {
    xs = std::move(fallback);
  }
  if (xs.empty()) throw std::runtime_error("grid '" + key + "' is empty");
  cfg[values_key] = xs;
  return xs;
}

psmrwm::ResamplingScheme resolve_resampling(const std::string& name) {
  if (name == "systematic") return psmrwm::ResamplingScheme::systematic;
  if (name == "multinomial") return psmrwm::ResamplingScheme::multinomial;
  throw std::runtime_error("unknown resampling scheme '" + name + "'");
}

std::vector<double> read_single_column(const std::string& path) {
  std::vector<double> xs;
  for (const auto& row : psmrwm::read_csv_rows(path)) {
    if (row.empty()) continue;
    xs.push_back(row.front());
  }
  if (xs.empty()) throw std::runtime_error("no numeric rows in " + path);
  return xs;
}

// Accepts a flat row-major list or a nested list-of-rows (as emitted by the
// pilot command); returns row-major d*d.
std::vector<double> resolve_matrix(const json& j, std::size_t d,
                                   const std::string& what) {
  std::vector<double> flat;
  if (!j.is_array()) throw std::runtime_error(what + " must be an array");
  if (!j.empty() && j.front().is_array()) {
    for (const auto& row : j)
      for (const auto& v : row) flat.push_back(v.get<double>());
  } else {
    flat = j.get<std::vector<double>>();
  }
  if (flat.size() != d * d)
    throw std::runtime_error(what + " must have " + std::to_string(d * d) + " entries");
  return flat;
}

json fit_to_json(const std::optional<psmrwm::OlsFit>& fit) {
  if (!fit) return nullptr;
  return json{{"slope", fit->slope}, {"intercept", fit->intercept}};
}

// ---------------------------------------------------------------------------
// theory-grid

void run_theory_grid(RunContext& ctx) {
  json& cfg = ctx.resolved;
  const auto ells = resolve_grid(cfg, "ell", linspace(0.25, 5.0, 20));
  const auto sigma2s = resolve_grid(cfg, "sigma2", {0.0, 1.0, 2.0, 3.283});
  if (!cfg.contains("families")) cfg["families"] = {"gaussian", "laplace"};
  if (!cfg.contains("mc_budget")) cfg["mc_budget"] = 1'000'000;
  if (!cfg.contains("roughness")) cfg["roughness"] = 1.0;

  psmrwm::TheoryGridConfig grid;
  grid.ell_values = ells;
  grid.sigma2_values = sigma2s;
  grid.families.clear();
  for (const auto& f : cfg.at("families")) {
    const std::string name = f.get<std::string>();
    if (name == "none") grid.families.push_back(psmrwm::NoiseKind::none);
    else if (name == "gaussian") grid.families.push_back(psmrwm::NoiseKind::gaussian);
    else if (name == "laplace") grid.families.push_back(psmrwm::NoiseKind::laplace);
    else throw std::runtime_error("theory-grid: unknown noise family '" + name + "'");
  }
  grid.mc_budget = cfg.at("mc_budget").get<std::size_t>();
  grid.roughness_i = cfg.at("roughness").get<double>();

  ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());
  psmrwm::RngStream rng(ctx.seed);
  const auto rows = psmrwm::theory_grid(grid, rng);

  const std::string path = ctx.path("", "csv");
  psmrwm::CsvWriter w(path);
  stamp_csv(w, ctx);
  w.header("family,ell,sigma2,alpha,esjd,j_rel,eff,skipped");
  for (const auto& r : rows) {
    if (r.skipped) w.comment("warning: " + r.note);
    std::ostringstream line;
    line << to_string(r.family) << "," << psmrwm::format_double(r.ell) << ","
         << psmrwm::format_double(r.sigma2) << ",";
    if (r.skipped) {
      line << "nan,nan,nan,nan,1";
    } else {
      line << psmrwm::format_double(r.alpha) << "," << psmrwm::format_double(r.esjd)
           << "," << psmrwm::format_double(r.j_rel) << ","
           << psmrwm::format_double(r.eff) << ",0";
    }
    w.raw_row(line.str());
  }
  ctx.note_output(path);
}

// ---------------------------------------------------------------------------
// optimize

void run_optimize(RunContext& ctx) {
  json& cfg = ctx.resolved;
  if (!cfg.contains("mode")) cfg["mode"] = "sar-joint";
  const std::string mode = cfg.at("mode").get<std::string>();

  json body;
  body["mode"] = mode;
  body["d"] = nullptr;
  body["t_rat"] = nullptr;
  if (mode == "sar-joint") {
    if (!cfg.contains("tol")) cfg["tol"] = 1e-9;
    ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());
    const auto r = psmrwm::optimize_sar_joint(cfg.at("tol").get<double>());
    body.update(psmrwm::to_json(r));
  } else if (mode == "ell-given-sigma2") {
    const double sigma2 = cfg.at("sigma2").get<double>();
    if (!cfg.contains("tol")) cfg["tol"] = 1e-12;
    ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());
    const double ell = psmrwm::optimize_ell_given_sigma2(sigma2, cfg.at("tol").get<double>());
    body["ell_opt"] = ell;
    body["sigma2_opt"] = sigma2;
    body["alpha_opt"] = psmrwm::limiting_acceptance(ell, psmrwm::NoiseModel::gaussian(sigma2)).value;
    body["eff_opt"] = psmrwm::sar_efficiency(ell, sigma2);
  } else if (mode == "sigma2-given-ell") {
    const double ell = cfg.at("ell").get<double>();
    if (!cfg.contains("tol")) cfg["tol"] = 1e-12;
    ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());
    const double sigma2 = psmrwm::optimize_sigma2_given_ell(ell, cfg.at("tol").get<double>());
    body["ell_opt"] = ell;
    body["sigma2_opt"] = sigma2;
    body["alpha_opt"] = psmrwm::limiting_acceptance(ell, psmrwm::NoiseModel::gaussian(sigma2)).value;
    body["eff_opt"] = psmrwm::sar_efficiency(ell, sigma2);
  } else if (mode == "overhead") {
    const double t_rat = cfg.at("t_rat").get<double>();
    if (!cfg.contains("tol")) cfg["tol"] = 1e-9;
    ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());
    const auto r = psmrwm::optimize_with_overhead(t_rat, cfg.at("tol").get<double>());
    body.update(psmrwm::to_json(r));
    body["t_rat"] = t_rat;
  } else {
    throw std::runtime_error("optimize: unknown mode '" + mode + "'");
  }

  const std::string path = ctx.path("", "json");
  write_json_output(ctx, path, body);
  ctx.note_output(path);
}

// ---------------------------------------------------------------------------
// finite-d

void run_finite_d(RunContext& ctx) {
  json& cfg = ctx.resolved;
  if (!cfg.contains("d_values")) cfg["d_values"] = {1, 2, 3, 5, 10, 100};
  if (!cfg.contains("tol")) cfg["tol"] = 1e-7;
  if (!cfg.contains("evaluate")) cfg["evaluate"] = json::array();
  ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());

  const double tol = cfg.at("tol").get<double>();
  json optima = json::array();
  for (const auto& dj : cfg.at("d_values")) {
    const auto d = dj.get<std::size_t>();
    const auto r = psmrwm::optimize_finite_d(d, tol);
    json entry = psmrwm::to_json(r);
    entry["d"] = d;
    entry["lambda_opt"] = r.ell_opt / std::sqrt(static_cast<double>(d));
    optima.push_back(std::move(entry));
  }

  json evals = json::array();
  for (const auto& e : cfg.at("evaluate")) {
    const double lambda = e.at("lambda").get<double>();
    const auto d = e.at("d").get<std::size_t>();
    const double sigma2 = e.at("sigma2").get<double>();
    const auto r = psmrwm::finite_d_gaussian(lambda, d, sigma2);
    evals.push_back({{"lambda", lambda},
                     {"d", d},
                     {"sigma2", sigma2},
                     {"esjd", r.esjd},
                     {"acceptance", r.acceptance}});
  }

  const std::string path = ctx.path("", "json");
  write_json_output(ctx, path, {{"optima", optima}, {"evaluations", evals}});
  ctx.note_output(path);
}

// ---------------------------------------------------------------------------
// lv-simulate

void run_lv_simulate(RunContext& ctx) {
  json& cfg = ctx.resolved;
  if (!cfg.contains("params")) cfg["params"] = {0.006, 0.6, 0.3, 25.0, 49.0};
  if (!cfg.contains("u0")) cfg["u0"] = {70, 70};
  if (!cfg.contains("t_max")) cfg["t_max"] = 50.0;
  if (!cfg.contains("dt")) cfg["dt"] = 1.0;
  ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());

  const auto pv = cfg.at("params").get<std::vector<double>>();
  if (pv.size() != 5) throw std::runtime_error("lv-simulate: params must have 5 entries");
  psmrwm::LVParams params{pv[0], pv[1], pv[2], pv[3], pv[4]};
  const auto u0v = cfg.at("u0").get<std::vector<std::int64_t>>();
  if (u0v.size() != 2) throw std::runtime_error("lv-simulate: u0 must have 2 entries");
  const psmrwm::LVState u0{u0v[0], u0v[1]};

  psmrwm::RngStream rng(ctx.seed);
  const auto synth = psmrwm::lv_synthesize_data(params, u0, cfg.at("t_max").get<double>(),
                                                cfg.at("dt").get<double>(), rng);

  const std::string data_path = ctx.path("", "csv");
  {
    psmrwm::CsvWriter w(data_path);
    stamp_csv(w, ctx);
    w.header("t,y1,y2");
    for (std::size_t i = 0; i < synth.model.observation_times.size(); ++i)
      w.row({synth.model.observation_times[i], synth.model.observations[i][0],
             synth.model.observations[i][1]});
  }
  ctx.note_output(data_path);

  const std::string latent_path = ctx.path("-latent", "csv");
  {
    psmrwm::CsvWriter w(latent_path);
    stamp_csv(w, ctx);
    w.header("t,u1,u2");
    for (std::size_t i = 0; i < synth.latent.size(); ++i)
      w.row({synth.model.observation_times[i], static_cast<double>(synth.latent[i][0]),
             static_cast<double>(synth.latent[i][1])});
  }
  ctx.note_output(latent_path);
}

// ---------------------------------------------------------------------------
// pmrwm-run

// Shared by pmrwm-run and pilot: load t,y1,y2 CSV into an LV model.
psmrwm::LVModel load_lv_model(const json& cfg) {
  const std::string data_path = cfg.at("data_path").get<std::string>();
  const auto rows = psmrwm::read_csv_rows(data_path);
  if (rows.empty()) throw std::runtime_error("no observation rows in " + data_path);
  std::vector<double> times;
  std::vector<psmrwm::LVObservation> obs;
  for (const auto& r : rows) {
    if (r.size() < 3)
      throw std::runtime_error("expected t,y1,y2 rows in " + data_path);
    times.push_back(r[0]);
    obs.push_back({r[1], r[2]});
  }
  const auto u0v = cfg.at("u0").get<std::vector<std::int64_t>>();
  if (u0v.size() != 2) throw std::runtime_error("u0 must have 2 entries");
  return psmrwm::make_lv_model({u0v[0], u0v[1]}, times, obs,
                               cfg.at("population_cap").get<std::int64_t>());
}

void run_pmrwm_run(RunContext& ctx) {
  json& cfg = ctx.resolved;
  const bool surrogate = cfg.contains("surrogate");
  if (ctx.full_scale) {
    // Full-size reference grid; overrides any grid keys in the config.
    cfg["m_values"] = {50, 80, 100, 150, 200, 300, 400};
    cfg["gamma_values"] = {0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
    cfg["iterations"] = 250'000;
    cfg["iterations_by_m"] = {{"50", 1'000'000}, {"80", 1'000'000}};
  }
  if (!cfg.contains("m_values")) cfg["m_values"] = {20, 50, 100};
  if (!cfg.contains("gamma_values")) cfg["gamma_values"] = {0.6, 1.0, 1.4};
  if (!cfg.contains("iterations")) cfg["iterations"] = 20'000;
  if (!cfg.contains("iterations_by_m")) cfg["iterations_by_m"] = json::object();
  if (!cfg.contains("thin")) cfg["thin"] = 10;
  if (!cfg.contains("noise_sample_size")) cfg["noise_sample_size"] = 500;
  if (!cfg.contains("resampling")) cfg["resampling"] = "systematic";
  if (!surrogate) {
    if (!cfg.contains("data_path"))
      throw std::runtime_error("pmrwm-run: config needs data_path (or surrogate)");
    if (!cfg.contains("u0")) cfg["u0"] = {70, 70};
    if (!cfg.contains("population_cap")) cfg["population_cap"] = 10'000;
    if (!cfg.contains("theta0"))
      throw std::runtime_error("pmrwm-run: config needs theta0 (5 log-parameters)");
  } else {
    const auto d = cfg.at("surrogate").at("dimension").get<std::size_t>();
    if (!cfg.contains("theta0")) cfg["theta0"] = std::vector<double>(d, 0.0);
  }

  psmrwm::StudyEstimatorFactory factory;
  if (surrogate) {
    factory = psmrwm::gaussian_surrogate_factory(
        cfg.at("surrogate").at("dimension").get<std::size_t>(),
        cfg.at("surrogate").at("noise_c").get<double>());
  } else {
    const auto model = load_lv_model(cfg);
    const auto scheme = resolve_resampling(cfg.at("resampling").get<std::string>());
    factory.dimension = 5;
    factory.make = [model, scheme](std::size_t m) {
      psmrwm::ParticleFilterConfig pf;
      pf.particle_count = m;
      pf.resampling = scheme;
      return psmrwm::pmrwm_log_posterior_estimator(model, pf);
    };
  }

  psmrwm::SimulationStudyConfig study;
  study.m_grid = cfg.at("m_values").get<std::vector<std::size_t>>();
  study.gamma_grid = cfg.at("gamma_values").get<std::vector<double>>();
  study.iterations = cfg.at("iterations").get<std::size_t>();
  for (const auto& [key, value] : cfg.at("iterations_by_m").items())
    study.iterations_by_m.emplace_back(std::stoull(key), value.get<std::size_t>());
  study.thin = cfg.at("thin").get<std::size_t>();
  study.theta0 = cfg.at("theta0").get<std::vector<double>>();
  if (cfg.contains("pilot_var"))
    study.pilot_var = resolve_matrix(cfg.at("pilot_var"), factory.dimension, "pilot_var");
  study.noise_sample_size = cfg.at("noise_sample_size").get<std::size_t>();
  study.threads = ctx.threads;

  ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());
  psmrwm::RngStream rng(ctx.seed);
  const auto report = psmrwm::run_simulation_study(study, factory, rng);

  const std::string cells_path = ctx.path("-cells", "csv");
  {
    psmrwm::CsvWriter w(cells_path);
    stamp_csv(w, ctx);
    if (report.identity_proposal_fallback)
      w.comment("warning: no pilot_var supplied; identity proposal covariance");
    w.header("m,gamma,acceptance,esjd,min_ess,total_cost,ess_per_cost");
    for (const auto& c : report.cells)
      w.row({static_cast<double>(c.m), c.gamma, c.acceptance, c.esjd, c.min_ess,
             c.total_cost, c.ess_per_cost});
  }
  ctx.note_output(cells_path);

  for (std::size_t mi = 0; mi < study.m_grid.size(); ++mi) {
    const std::string noise_path =
        ctx.path("-noise-m" + std::to_string(study.m_grid[mi]), "csv");
    psmrwm::CsvWriter w(noise_path);
    stamp_csv(w, ctx);
    w.comment("m=" + std::to_string(study.m_grid[mi]));
    w.comment("sigma2_hat=" + psmrwm::format_double(report.sigma2_hat_per_m[mi]));
    w.header("w_star");
    for (double v : report.noise_samples[mi].w_star_draws) w.row({v});
    ctx.note_output(noise_path);
  }

  json cells = json::array();
  for (const auto& c : report.cells)
    cells.push_back({{"m", c.m},
                     {"gamma", c.gamma},
                     {"acceptance", c.acceptance},
                     {"esjd", c.esjd},
                     {"min_ess", c.min_ess},
                     {"total_cost", c.total_cost},
                     {"ess_per_cost", c.ess_per_cost}});
  json body;
  body["cells"] = cells;
  body["sigma2_hat_per_m"] = report.sigma2_hat_per_m;
  body["variance_slope"] = fit_to_json(report.variance_slope);
  body["identity_proposal_fallback"] = report.identity_proposal_fallback;
  const std::string summary_path = ctx.path("-summary", "json");
  write_json_output(ctx, summary_path, std::move(body));
  ctx.note_output(summary_path);
}

// ---------------------------------------------------------------------------
// pilot

void run_pilot(RunContext& ctx) {
  json& cfg = ctx.resolved;
  if (!cfg.contains("data_path"))
    throw std::runtime_error("pilot: config needs data_path");
  if (!cfg.contains("u0")) cfg["u0"] = {70, 70};
  if (!cfg.contains("population_cap")) cfg["population_cap"] = 10'000;
  if (!cfg.contains("m")) cfg["m"] = 100;
  if (!cfg.contains("lambda")) cfg["lambda"] = 0.2;
  if (!cfg.contains("iterations")) cfg["iterations"] = 5'000;
  if (!cfg.contains("thin")) cfg["thin"] = 10;
  if (!cfg.contains("resampling")) cfg["resampling"] = "systematic";
  if (!cfg.contains("theta0"))
    throw std::runtime_error("pilot: config needs theta0 (5 log-parameters)");
  ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());

  const auto model = load_lv_model(cfg);
  psmrwm::ParticleFilterConfig pf;
  pf.particle_count = cfg.at("m").get<std::size_t>();
  pf.resampling = resolve_resampling(cfg.at("resampling").get<std::string>());
  const auto estimator = psmrwm::pmrwm_log_posterior_estimator(model, pf);

  const auto theta0 = cfg.at("theta0").get<std::vector<double>>();
  psmrwm::RngStream rng(ctx.seed);
  const auto result =
      psmrwm::pilot_run(estimator, theta0, cfg.at("lambda").get<double>(),
                        cfg.at("iterations").get<std::size_t>(),
                        cfg.at("thin").get<std::size_t>(), rng);

  const std::size_t d = result.median.size();
  json cov = json::array();
  for (std::size_t i = 0; i < d; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < d; ++j) row.push_back(result.covariance[i * d + j]);
    cov.push_back(std::move(row));
  }
  const std::string path = ctx.path("", "json");
  write_json_output(ctx, path,
                    {{"median", result.median},
                     {"covariance", cov},
                     {"acceptance_rate", result.acceptance_rate}});
  ctx.note_output(path);
}

// ---------------------------------------------------------------------------
// diagnose

void run_diagnose(RunContext& ctx) {
  json& cfg = ctx.resolved;
  if (cfg.contains("noise_csv")) {
    // Single-input shorthand; normalize to the list form.
    json entry = {{"path", cfg.at("noise_csv")}};
    if (cfg.contains("m")) entry["m"] = cfg.at("m");
    cfg["noise_csvs"] = json::array({entry});
    cfg.erase("noise_csv");
    cfg.erase("m");
  }
  if (!cfg.contains("noise_csvs") || cfg.at("noise_csvs").empty())
    throw std::runtime_error("diagnose: config needs noise_csv or noise_csvs");
  if (!cfg.contains("shift")) cfg["shift"] = 0.0;
  if (!cfg.contains("bootstrap")) cfg["bootstrap"] = true;
  const auto t_grid = resolve_grid(cfg, "t", psmrwm::default_mgf_t_grid());
  ctx.config_hash = psmrwm::fnv1a_hex(cfg.dump());

  std::vector<psmrwm::NoiseSample> samples;
  json inputs = json::array();
  for (const auto& entry : cfg.at("noise_csvs")) {
    const std::string path = entry.at("path").get<std::string>();
    const auto raw = read_single_column(path);
    psmrwm::NoiseSample s;
    s.w_star_draws = psmrwm::recentre_log_noise(raw);
    s.recentre_shift = psmrwm::log_mean_exp(raw);
    s.m = entry.contains("m") ? entry.at("m").get<std::size_t>() : 0;
    samples.push_back(std::move(s));
    inputs.push_back({{"path", path},
                      {"m", samples.back().m},
                      {"sigma2_hat", psmrwm::variance(samples.back().w_star_draws)}});
  }

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto pairs = psmrwm::qq_against_gaussian(samples[i]);
    const std::string qq_path = ctx.path("-qq" + std::to_string(i), "csv");
    psmrwm::CsvWriter w(qq_path);
    stamp_csv(w, ctx);
    w.header("q_theory,q_emp");
    for (const auto& [qt, qe] : pairs) w.row({qt, qe});
    ctx.note_output(qq_path);
  }

  json body;
  body["inputs"] = inputs;
  body["variance_slope"] = nullptr;
  if (samples.size() >= 3) {
    bool all_labelled = true;
    for (const auto& s : samples) all_labelled = all_labelled && s.m >= 1;
    if (all_labelled)
      body["variance_slope"] = fit_to_json(psmrwm::variance_vs_m_slope(samples));
  }

  if (cfg.contains("l_hat_csv")) {
    const auto l_hat = read_single_column(cfg.at("l_hat_csv").get<std::string>());
    const double shift = cfg.at("shift").get<double>();
    const auto curves = psmrwm::mgf_curves(l_hat, samples.front(), t_grid, shift);
    std::optional<psmrwm::MGFBands> bands;
    if (cfg.at("bootstrap").get<bool>()) {
      psmrwm::RngStream rng(ctx.seed);
      bands = psmrwm::mgf_m2_bootstrap_bands(l_hat, samples.front(), t_grid, shift, rng);
    }
    const std::string mgf_path = ctx.path("-mgf", "csv");
    psmrwm::CsvWriter w(mgf_path);
    stamp_csv(w, ctx);
    w.header(bands ? "t,m1,m2,m2_lo,m2_hi" : "t,m1,m2");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      if (bands)
        w.row({curves.t_grid[i], curves.m1[i], curves.m2[i], bands->lo[i], bands->hi[i]});
      else
        w.row({curves.t_grid[i], curves.m1[i], curves.m2[i]});
    }
    ctx.note_output(mgf_path);
  }

  const std::string summary_path = ctx.path("-summary", "json");
  write_json_output(ctx, summary_path, std::move(body));
  ctx.note_output(summary_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-marginal random-walk Metropolis tuning toolkit"};
  app.require_subcommand(1);

  RunContext ctx;
  struct Handler {
    std::string name;
    std::string help;
    void (*fn)(RunContext&);
  };
  const std::vector<Handler> handlers = {
      {"theory-grid", "Sweep limiting acceptance/ESJD/efficiency over an (ell, sigma2) grid",
       run_theory_grid},
      {"optimize", "Optimal scaling reports (joint, conditional, or with overhead)",
       run_optimize},
      {"finite-d", "Finite-dimensional optima and ESJD/acceptance evaluations",
       run_finite_d},
      {"lv-simulate", "Synthesize predator-prey data from the jump-process model",
       run_lv_simulate},
      {"pmrwm-run", "Particle-marginal study over a (particles, scale) grid",
       run_pmrwm_run},
      {"pilot", "Pilot chain for posterior medians and covariance", run_pilot},
      {"diagnose", "Noise diagnostics from stored CSVs: QQ, MGF curves, variance slope",
       run_diagnose},
  };

  std::map<std::string, void (*)(RunContext&)> dispatch;
  for (const auto& h : handlers) {
    CLI::App* sub = app.add_subcommand(h.name, h.help);
    sub->add_option("--config", ctx.config_path, "JSON config file");
    sub->add_option("--seed", ctx.seed, "RNG seed recorded in all outputs");
    sub->add_option("--out", ctx.out_dir, "Output directory");
    sub->add_option("--threads", ctx.threads, "Worker threads for grid cells");
    if (h.name == "pmrwm-run")
      sub->add_flag("--full-scale", ctx.full_scale,
                    "Use the full-size reference grid (m up to 400, long runs)");
    dispatch[h.name] = h.fn;
  }

  CLI11_PARSE(app, argc, argv);
  ctx.command = app.get_subcommands().front()->get_name();

  try {
    std::filesystem::create_directories(ctx.out_dir);
    ctx.stamp = utc_stamp();
    ctx.resolved = load_config(ctx.config_path);
    dispatch.at(ctx.command)(ctx);
    write_manifest(ctx);
    for (const auto& p : ctx.outputs) std::cout << "wrote " << p << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"command", ctx.command}}.dump() << "\n";
    return 1;
  }
}

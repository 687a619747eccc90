#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmmdiff/bounds.hpp"
#include "gmmdiff/forward.hpp"
#include "gmmdiff/gmm.hpp"
#include "gmmdiff/io.hpp"
#include "gmmdiff/schedule.hpp"
#include "gmmdiff/score_model.hpp"
#include "gmmdiff/solvers.hpp"
#include "gmmdiff/suite.hpp"
#include "gmmdiff/sweep.hpp"
#include "gmmdiff/verify.hpp"

namespace gmmdiff::cli {

using json = io::json;

/// Stable process exit codes.
enum ExitCode : int { kSuccess = 0, kVerificationFailed = 1, kConfigError = 2, kNumericalFailure = 3 };

/// Fully resolved options of one CLI invocation.
struct RunConfig {
  std::string command;
  std::string spec_path;  // empty: built-in standard mixture
  std::string solver = "ei";
  std::string schedule = "uniform";
  double T = 6.0;
  std::size_t N = 1024;
  double delta = 0.0;
  double epsilon0 = 0.0;
  std::optional<std::uint64_t> seed;
  std::size_t n = 100000;
  std::string out = ".";
  double K = 1.0;
  std::optional<double> L;  // exp-decay schedule; derived from the bound report when absent
  std::optional<double> R, beta, gamma;
  unsigned threads = 1;
  std::vector<double> t_list{0.0};
  double eps = 0.1;  // target accuracy for the step-count heuristic
  double h_pred = 1.0 / 128.0;
  double h_corr = 0.01;
  std::size_t corr_steps = 1;
  double friction = 2.0;
  std::string suite = "score";
  std::string axis = "N";
  std::vector<double> values;
  std::string metric = "kl_histogram";
  std::size_t probe_points = 10000;
  double tv_threshold = 0.05;
};

namespace detail {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& v) {
  if (j.contains(key) && !j[key].is_null()) v = j[key].get<T>();
}

}  // namespace detail

/// Everything except `out` and `threads`, which never influence results.
inline json config_to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["spec_path"] = c.spec_path;
  j["solver"] = c.solver;
  j["schedule"] = c.schedule;
  j["T"] = c.T;
  j["N"] = c.N;
  j["delta"] = c.delta;
  j["epsilon0"] = c.epsilon0;
  j["seed"] = detail::opt(c.seed);
  j["n"] = c.n;
  j["K"] = c.K;
  j["L"] = detail::opt(c.L);
  j["R"] = detail::opt(c.R);
  j["beta"] = detail::opt(c.beta);
  j["gamma"] = detail::opt(c.gamma);
  j["t_list"] = c.t_list;
  j["eps"] = c.eps;
  j["h_pred"] = c.h_pred;
  j["h_corr"] = c.h_corr;
  j["corr_steps"] = c.corr_steps;
  j["friction"] = c.friction;
  j["suite"] = c.suite;
  j["axis"] = c.axis;
  j["values"] = c.values;
  j["metric"] = c.metric;
  j["probe_points"] = c.probe_points;
  j["tv_threshold"] = c.tv_threshold;
  return j;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    c.command = j.at("command").get<std::string>();
    c.spec_path = j.at("spec_path").get<std::string>();
    c.solver = j.at("solver").get<std::string>();
    c.schedule = j.at("schedule").get<std::string>();
    c.T = j.at("T").get<double>();
    c.N = j.at("N").get<std::size_t>();
    c.delta = j.at("delta").get<double>();
    c.epsilon0 = j.at("epsilon0").get<double>();
    detail::read_opt(j, "seed", c.seed);
    c.n = j.at("n").get<std::size_t>();
    c.K = j.at("K").get<double>();
    detail::read_opt(j, "L", c.L);
    detail::read_opt(j, "R", c.R);
    detail::read_opt(j, "beta", c.beta);
    detail::read_opt(j, "gamma", c.gamma);
    c.t_list = j.at("t_list").get<std::vector<double>>();
    c.eps = j.at("eps").get<double>();
    c.h_pred = j.at("h_pred").get<double>();
    c.h_corr = j.at("h_corr").get<double>();
    c.corr_steps = j.at("corr_steps").get<std::size_t>();
    c.friction = j.at("friction").get<double>();
    c.suite = j.at("suite").get<std::string>();
    c.axis = j.at("axis").get<std::string>();
    c.values = j.at("values").get<std::vector<double>>();
    c.metric = j.at("metric").get<std::string>();
    c.probe_points = j.at("probe_points").get<std::size_t>();
    c.tv_threshold = j.at("tv_threshold").get<double>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("metadata config is incomplete: ") + e.what());
  }
  return c;
}

/// Fills the seed from std::random_device when the user gave none.
inline void resolve_seed(RunConfig& c) {
  if (!c.seed) {
    std::random_device rd;
    c.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
}

inline std::optional<ConditionParams> region_override(const RunConfig& c) {
  if (!c.R && !c.beta && !c.gamma) return std::nullopt;
  ConditionParams p;
  if (c.R) p.R = *c.R;
  if (c.beta) p.beta = *c.beta;
  if (c.gamma) p.gamma = *c.gamma;
  check_params(p);
  return p;
}

/// A run's inputs: the resolved config and the validated spec.
struct Context {
  RunConfig config;
  GmmSpec spec;
  std::ostream& log;
};

inline json meta_json(const Context& ctx) {
  json j;
  j["config"] = config_to_json(ctx.config);
  j["spec"] = io::spec_to_json(ctx.spec);
  return j;
}

inline std::filesystem::path out_path(const Context& ctx, const std::string& name) {
  return std::filesystem::path(ctx.config.out) / name;
}

// ---------------------------------------------------------------------------
// bounds

/// Region parameters at time t: the override, or the percentile calibration.
inline ConditionParams params_at(const Context& ctx, const GmmSpec& spec_t, std::size_t index) {
  if (auto p = region_override(ctx.config)) return *p;
  return calibrate_region(spec_t, sample(spec_t, ctx.config.probe_points,
                                         substream_seed(*ctx.config.seed, stream::kCalibration, index)));
}

inline int cmd_bounds(const Context& ctx) {
  const auto& c = ctx.config;
  if (c.t_list.empty()) throw Error(Errc::InvalidArgument, "--t-list needs at least one time");
  if (!(c.eps > 0.0)) throw Error(Errc::InvalidArgument, "--eps must be positive");
  std::vector<double> times{0.0};
  for (double t : c.t_list)
    if (t != 0.0) times.push_back(t);
  json reports = json::array();
  std::string csv = "t,L,log_L,m2,M2,kl_upper,sigma_min,sigma_max,det_min,mu_max,R,beta,gamma\n";
  double log_l_sup = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < times.size(); ++i) {
    const GmmSpec spec_t = marginal_at(ctx.spec, times[i]);
    const auto r = bound_report(spec_t, times[i], params_at(ctx, spec_t, i));
    reports.push_back(io::bound_report_json(r));
    log_l_sup = std::max(log_l_sup, r.L.log_value);
    for (double v : {r.t, r.L.value, r.L.log_value, r.moment.m2, r.moment.M2, r.kl.upper, r.summary.sigma_min,
                     r.summary.sigma_max, r.summary.det_min, r.summary.mu_max, r.params.R, r.params.beta})
      csv += io::format_double(v) + ',';
    csv += io::format_double(r.params.gamma) + '\n';
    ctx.log << "t=" << times[i] << "  L=" << r.L.value << "  log L=" << r.L.log_value << "  M2=" << r.moment.M2
            << "  kl_upper=" << r.kl.upper << '\n';
  }
  // N = L² d / ε² with the constant set to 1; a heuristic, not a guarantee.
  const double log_n = 2.0 * log_l_sup + std::log(static_cast<double>(ctx.spec.dim())) - 2.0 * std::log(c.eps);
  json doc = meta_json(ctx);
  doc["reports"] = reports;
  doc["step_suggestion"] = {{"eps", c.eps},
                            {"log_L_sup", log_l_sup},
                            {"N", std::ceil(std::exp(log_n))},
                            {"log_N", log_n},
                            {"rule", "heuristic: N = L^2 d / eps^2, constant 1, L = sup over reported times"}};
  io::write_text(out_path(ctx, "bounds.json"), doc.dump(2) + '\n');
  io::write_text(out_path(ctx, "bounds.csv"), csv);
  ctx.log << "suggested N (heuristic, constant 1) for eps=" << c.eps << ": " << std::ceil(std::exp(log_n)) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------
// sample

inline bool is_predictor_corrector(const std::string& solver) { return solver == "dpom" || solver == "dpum"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "em") return Scheme::EulerMaruyama;
  if (s == "ei") return Scheme::ExponentialIntegrator;
  throw Error(Errc::InvalidArgument, "unknown solver '" + s + "' (expected em, ei, dpom or dpum)");
}

inline ScoreModel build_model(const Context& ctx) {
  const auto& c = ctx.config;
  const auto kind = c.epsilon0 > 0.0 ? ScoreKind::Perturbed : ScoreKind::Exact;
  return make_score_model(ctx.spec, kind, c.epsilon0, *c.seed, c.T);
}

/// Exp-decay needs L; absent an override it is L at t = 0 with the region
/// parameters of params_at.
inline double schedule_lipschitz(const Context& ctx) {
  if (ctx.config.L) return *ctx.config.L;
  const auto params = params_at(ctx, ctx.spec, 0);
  return std::max(1.0, lipschitz_constant(spectral_summary(ctx.spec), params, ctx.spec.dim()).value);
}

inline TimeGrid build_grid(const Context& ctx) {
  const auto& c = ctx.config;
  if (c.schedule == "uniform") return uniform_grid(c.T, c.N, c.delta);
  if (c.schedule == "expdecay") return exp_decay_grid(c.T, c.N, schedule_lipschitz(ctx), ctx.spec.dim(), c.K);
  throw Error(Errc::InvalidArgument, "unknown schedule '" + c.schedule + "' (expected uniform or expdecay)");
}

inline PredictorCorrectorConfig pc_config(const RunConfig& c) {
  PredictorCorrectorConfig pc;
  pc.T = c.T;
  pc.h_pred = c.h_pred;
  pc.h_corr = c.h_corr;
  pc.corr_steps = c.corr_steps;
  pc.variant = c.solver == "dpom" ? CorrectorVariant::Overdamped : CorrectorVariant::Underdamped;
  pc.friction = c.friction;
  pc.delta = c.delta;
  return pc;
}

/// Runs the configured solver; also returns the grid it walked.
inline std::pair<SampleBatch, TimeGrid> run_solver(const Context& ctx) {
  const auto& c = ctx.config;
  const ScoreModel model = build_model(ctx);
  const SamplerOptions opts{c.threads};
  if (is_predictor_corrector(c.solver)) {
    const auto pc = pc_config(c);
    return {run_predictor_corrector(model, pc, c.n, *c.seed, opts), predictor_grid(pc)};
  }
  const Scheme scheme = parse_scheme(c.solver);
  const TimeGrid grid = build_grid(ctx);
  return {run_sampler(model, grid, scheme, c.n, *c.seed, opts), grid};
}

inline int cmd_sample(const Context& ctx) {
  const auto [batch, grid] = run_solver(ctx);
  json meta = meta_json(ctx);
  meta["seed"] = batch.meta.seed;
  meta["solver"] = batch.meta.solver;
  meta["grid"] = batch.meta.grid;
  meta["T"] = batch.meta.T;
  meta["delta"] = batch.meta.delta;
  meta["n"] = batch.size();
  meta["epsilon0"] = batch.meta.epsilon0;
  meta["steps"] = grid.N();
  io::write_text(out_path(ctx, "samples.csv"), io::samples_csv(batch));
  io::write_text(out_path(ctx, "grid.csv"), io::grid_csv(grid));
  io::write_text(out_path(ctx, "samples.meta.json"), meta.dump(2) + '\n');
  ctx.log << "wrote " << batch.size() << " samples (" << batch.meta.solver << ", " << batch.meta.grid << ", seed "
          << batch.meta.seed << ")\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------
// verify

inline int cmd_verify(const Context& ctx) {
  const auto& c = ctx.config;
  VerifyReport report;
  if (c.suite == "score") {
    report = verify_score(ctx.spec, 200, *c.seed);
  } else if (c.suite == "lipschitz") {
    report = verify_lipschitz(ctx.spec, c.t_list, region_override(c), c.probe_points, *c.seed);
  } else if (c.suite == "mixture") {
    report = verify_mixture(ctx.spec, c.t_list, c.n, *c.seed);
  } else if (c.suite == "solver") {
    if (ctx.spec.dim() > 3) throw Error(Errc::DimensionTooHigh, "the solver suite compares histograms, d <= 3");
    const auto [batch, grid] = run_solver(ctx);
    report = verify_solver_output(batch, marginal_at(ctx.spec, c.delta), c.tv_threshold);
  } else {
    throw Error(Errc::InvalidArgument, "unknown suite '" + c.suite + "' (expected score, lipschitz, mixture or solver)");
  }
  json doc = meta_json(ctx);
  doc["suite"] = report.suite;
  doc["passed"] = report.passed();
  doc["checks"] = json::array();
  std::string csv = "check,value,threshold,relation,pass\n";
  for (const auto& ch : report.checks) {
    doc["checks"].push_back({{"name", ch.name},
                             {"value", ch.value},
                             {"threshold", ch.threshold},
                             {"relation", ch.upper ? "<=" : ">="},
                             {"pass", ch.pass}});
    csv += ch.name + ',' + io::format_double(ch.value) + ',' + io::format_double(ch.threshold) + ',' +
           (ch.upper ? "<=" : ">=") + ',' + (ch.pass ? "1" : "0") + '\n';
    ctx.log << (ch.pass ? "PASS  " : "FAIL  ") << ch.name << "  " << ch.value << (ch.upper ? " <= " : " >= ")
            << ch.threshold << '\n';
  }
  io::write_text(out_path(ctx, "verify_" + report.suite + ".json"), doc.dump(2) + '\n');
  io::write_text(out_path(ctx, "verify_" + report.suite + ".csv"), csv);
  return report.passed() ? kSuccess : kVerificationFailed;
}

// ---------------------------------------------------------------------------
// sweep

inline int cmd_sweep(const Context& ctx) {
  const auto& c = ctx.config;
  SweepConfig s;
  if (c.axis == "N")
    s.axis = SweepAxis::StepCount;
  else if (c.axis == "epsilon0")
    s.axis = SweepAxis::Epsilon0;
  else
    throw Error(Errc::InvalidArgument, "unknown sweep axis '" + c.axis + "' (expected N or epsilon0)");
  s.values = c.values;
  s.scheme = parse_scheme(c.solver);
  if (c.schedule == "uniform") {
    s.family = GridFamily::Uniform;
  } else if (c.schedule == "expdecay") {
    s.family = GridFamily::ExpDecay;
    s.L = schedule_lipschitz(ctx);
  } else {
    throw Error(Errc::InvalidArgument, "unknown schedule '" + c.schedule + "'");
  }
  if (c.metric == "kl_histogram")
    s.metric = SweepMetric::KlHistogram;
  else if (c.metric == "tv_histogram")
    s.metric = SweepMetric::TvHistogram;
  else
    throw Error(Errc::InvalidArgument, "unknown metric '" + c.metric + "' (expected kl_histogram or tv_histogram)");
  s.T = c.T;
  s.N = c.N;
  s.delta = c.delta;
  s.epsilon0 = c.epsilon0;
  s.K = c.K;
  s.n = c.n;
  s.seed = *c.seed;
  s.threads = c.threads;
  const auto result = convergence_sweep(ctx.spec, s);
  json doc = meta_json(ctx);
  doc["summary"] = io::sweep_summary_json(result);
  io::write_text(out_path(ctx, "sweep.csv"), io::sweep_csv(result));
  io::write_text(out_path(ctx, "sweep.meta.json"), doc.dump(2) + '\n');
  for (const auto& r : result.rows)
    ctx.log << axis_name(result.axis) << '=' << r.value << "  " << r.metric << '=' << r.metric_value << " (se "
            << r.se << ")\n";
  if (result.fit)
    ctx.log << "log-log slope " << result.fit->slope << " +/- " << result.fit->half_width << " (95%)\n";
  for (std::size_t i = 0; i < result.ratios.size(); ++i) ctx.log << "ratio[" << i << "] " << result.ratios[i] << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------

/// Loads the spec named by the config (or the standard mixture).
inline GmmSpec resolve_spec(const RunConfig& c) {
  return c.spec_path.empty() ? standard_mixture() : io::load_spec(c.spec_path);
}

/// Reconstructs the config and spec from any metadata file the CLI wrote.
/// `out` and `threads` come from the caller.
inline std::pair<RunConfig, GmmSpec> load_meta(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::parse_error&) {
    throw Error(Errc::ParseError, path.string() + ": metadata is not valid JSON");
  }
  if (!doc.contains("config") || !doc.contains("spec"))
    throw Error(Errc::ParseError, path.string() + ": metadata lacks 'config' or 'spec'");
  return {config_from_json(doc["config"]), io::spec_from_json(doc["spec"], path.string())};
}

/// Runs one command and maps failures onto the exit-code contract.
inline int run(RunConfig config, std::optional<GmmSpec> spec, std::ostream& log, std::ostream& err) {
  try {
    resolve_seed(config);
    const GmmSpec s = spec ? *spec : resolve_spec(config);
    const Context ctx{config, s, log};
    if (config.command == "bounds") return cmd_bounds(ctx);
    if (config.command == "sample") return cmd_sample(ctx);
    if (config.command == "verify") return cmd_verify(ctx);
    if (config.command == "sweep") return cmd_sweep(ctx);
    err << "error: unknown command '" << config.command << "'\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == Errc::NonFiniteState || e.code() == Errc::NoPointsInRegion ? kNumericalFailure : kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error [IoError]: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace gmmdiff::cli

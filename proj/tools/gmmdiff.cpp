// gmmdiff: bounds, sampling, verification and sweeps for Gaussian-mixture
// diffusion models.
//
//   gmmdiff bounds  --spec data/standard_mixture.json --t-list 0,1,3
//   gmmdiff sample  --solver ei --T 6 --N 1024 --n 100000 --seed 7 --out run
//   gmmdiff verify  lipschitz --t-list 0,0.5,2
//   gmmdiff sweep   --axis N --values 64,128,256,512 --T 8
//   gmmdiff --from-meta run/samples.meta.json --out rerun

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gmmdiff/cli/commands.hpp"

namespace {

using gmmdiff::cli::RunConfig;

struct Flags {
  std::uint64_t seed = 0;
  double L = 1.0, R = 1.0, beta = 0.05, gamma = 0.05;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* L_opt = nullptr;
  CLI::Option* R_opt = nullptr;
  CLI::Option* beta_opt = nullptr;
  CLI::Option* gamma_opt = nullptr;
};

void add_common(CLI::App& app, RunConfig& c, Flags& f) {
  app.add_option("--spec", c.spec_path, "Mixture spec file (default: built-in standard mixture)");
  f.seed_opt = app.add_option("--seed", f.seed, "RNG seed (default: random, recorded in the output)");
  app.add_option("--out", c.out, "Output directory")->capture_default_str();
  app.add_option("--threads", c.threads, "Worker cap (0 = all cores); never changes results")->capture_default_str();
  app.add_option("--n", c.n, "Number of samples / Monte-Carlo draws")->capture_default_str();
  f.R_opt = app.add_option("--R", f.R, "Region radius upper bound (>= 1)");
  f.beta_opt = app.add_option("--beta", f.beta, "Region radius lower bound in (0, 0.1)");
  f.gamma_opt = app.add_option("--gamma", f.gamma, "Region density floor in (0, 0.1)");
  app.add_option("--t-list", c.t_list, "Comma-separated times")->delimiter(',')->capture_default_str();
  app.add_option("--probe-points", c.probe_points, "Region points for calibration and probing")->capture_default_str();
}

void add_solver(CLI::App& app, RunConfig& c, Flags& f) {
  app.add_option("--solver", c.solver, "em | ei | dpom | dpum")
      ->check(CLI::IsMember({"em", "ei", "dpom", "dpum"}))
      ->capture_default_str();
  app.add_option("--schedule", c.schedule, "uniform | expdecay")
      ->check(CLI::IsMember({"uniform", "expdecay"}))
      ->capture_default_str();
  app.add_option("--T", c.T, "Horizon")->capture_default_str();
  app.add_option("--N", c.N, "Step count")->capture_default_str();
  app.add_option("--delta", c.delta, "Early-stopping time")->capture_default_str();
  app.add_option("--epsilon0", c.epsilon0, "Score perturbation RMS")->capture_default_str();
  app.add_option("--K", c.K, "Exp-decay schedule constant")->capture_default_str();
  f.L_opt = app.add_option("--L", f.L, "Lipschitz constant for the exp-decay schedule");
  app.add_option("--h-pred", c.h_pred, "Predictor step (dpom/dpum)")->capture_default_str();
  app.add_option("--h-corr", c.h_corr, "Corrector step (dpom/dpum)")->capture_default_str();
  app.add_option("--corr-steps", c.corr_steps, "Corrector steps per node (dpom/dpum)")->capture_default_str();
  app.add_option("--friction", c.friction, "Underdamped friction (dpum)")->capture_default_str();
}

void apply(const Flags& f, RunConfig& c) {
  if (f.seed_opt && f.seed_opt->count()) c.seed = f.seed;
  if (f.L_opt && f.L_opt->count()) c.L = f.L;
  if (f.R_opt && f.R_opt->count()) c.R = f.R;
  if (f.beta_opt && f.beta_opt->count()) c.beta = f.beta;
  if (f.gamma_opt && f.gamma_opt->count()) c.gamma = f.gamma;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-mixture diffusion: bounds, samplers, verification"};
  app.require_subcommand(0, 1);

  std::string from_meta;
  std::string meta_out = ".";
  unsigned meta_threads = 1;
  app.add_option("--from-meta", from_meta, "Re-run the command recorded in a metadata file");
  app.add_option("--out", meta_out, "Output directory for --from-meta")->capture_default_str();
  app.add_option("--threads", meta_threads, "Worker cap for --from-meta")->capture_default_str();

  RunConfig bounds_cfg, sample_cfg, verify_cfg, sweep_cfg;
  Flags bounds_f, sample_f, verify_f, sweep_f;

  auto* bounds = app.add_subcommand("bounds", "Lipschitz constant, second moment and KL bound report");
  add_common(*bounds, bounds_cfg, bounds_f);
  bounds->add_option("--eps", bounds_cfg.eps, "Target accuracy for the step-count heuristic")->capture_default_str();

  auto* samp = app.add_subcommand("sample", "Run a reverse-process sampler");
  add_common(*samp, sample_cfg, sample_f);
  add_solver(*samp, sample_cfg, sample_f);

  auto* ver = app.add_subcommand("verify", "Run an invariant suite");
  add_common(*ver, verify_cfg, verify_f);
  add_solver(*ver, verify_cfg, verify_f);
  ver->add_option("suite", verify_cfg.suite, "score | lipschitz | mixture | solver")
      ->check(CLI::IsMember({"score", "lipschitz", "mixture", "solver"}))
      ->required();
  ver->add_option("--t", verify_cfg.t_list, "Alias of --t-list")->delimiter(',');
  ver->add_option("--tv-threshold", verify_cfg.tv_threshold, "TV threshold of the solver suite")->capture_default_str();

  auto* sw = app.add_subcommand("sweep", "Convergence sweep over N or epsilon0");
  add_common(*sw, sweep_cfg, sweep_f);
  add_solver(*sw, sweep_cfg, sweep_f);
  sw->add_option("--axis", sweep_cfg.axis, "N | epsilon0")->check(CLI::IsMember({"N", "epsilon0"}))->capture_default_str();
  sw->add_option("--values", sweep_cfg.values, "Comma-separated sweep values")->delimiter(',')->required();
  sw->add_option("--metric", sweep_cfg.metric, "kl_histogram | tv_histogram")
      ->check(CLI::IsMember({"kl_histogram", "tv_histogram"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gmmdiff::cli::kConfigError;
  }

  if (!from_meta.empty()) {
    if (!app.get_subcommands().empty()) {
      std::cerr << "error: --from-meta does not combine with a subcommand\n";
      return gmmdiff::cli::kConfigError;
    }
    try {
      auto [cfg, spec] = gmmdiff::cli::load_meta(from_meta);
      cfg.out = meta_out;
      cfg.threads = meta_threads;
      return gmmdiff::cli::run(cfg, spec, std::cout, std::cerr);
    } catch (const gmmdiff::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return gmmdiff::cli::kConfigError;
    }
  }

  RunConfig* cfg = nullptr;
  if (bounds->parsed()) {
    apply(bounds_f, bounds_cfg);
    cfg = &bounds_cfg;
    cfg->command = "bounds";
  } else if (samp->parsed()) {
    apply(sample_f, sample_cfg);
    cfg = &sample_cfg;
    cfg->command = "sample";
  } else if (ver->parsed()) {
    apply(verify_f, verify_cfg);
    cfg = &verify_cfg;
    cfg->command = "verify";
  } else if (sw->parsed()) {
    apply(sweep_f, sweep_cfg);
    cfg = &sweep_cfg;
    cfg->command = "sweep";
  } else {
    std::cerr << app.help();
    return gmmdiff::cli::kConfigError;
  }
  return gmmdiff::cli::run(*cfg, std::nullopt, std::cout, std::cerr);
}

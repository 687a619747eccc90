// Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets
// are fixed here; the process exits nonzero if any criterion fails.
//
//   acceptance [path-to-gmmdiff-cli] [criterion...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "gmmdiff/gmmdiff.hpp"

namespace fs = std::filesystem;
using namespace gmmdiff;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

GmmSpec from_raw(int d, std::vector<RawComponent> comps) { return validate_spec(RawMixture{d, std::move(comps)}); }

// 1 ------------------------------------------------------------------------
Outcome score_gradients() {
  constexpr double kGradTol = 1e-5, kHessTol = 1e-4;
  ChainRng rng(101, 0, 0);
  const int dims[] = {1, 2, 3, 5};
  const int ks[] = {1, 2, 3, 5, 8};
  double grad = 0.0, hess = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto spec = random_spec(dims[i % 4], ks[(i / 4) % 5], rng);
    const Vector x = sample(spec, 1, substream_seed(101, 1, static_cast<std::uint64_t>(i))).point(0);
    grad = std::max(grad, relative_error(score(spec, x), fd_score(spec, x)));
    hess = std::max(hess, relative_error(score_jacobian(spec, x), fd_jacobian(spec, x)));
  }
  return {grad <= kGradTol && hess <= kHessTol,
          "max score rel err " + num(grad) + " (<= 1e-5), max Jacobian rel err " + num(hess) + " (<= 1e-4)"};
}

// 2 ------------------------------------------------------------------------
Outcome mixture_preservation() {
  constexpr double kZ = 4.0, kTv = 0.02;
  const std::vector<NamedSpec> specs{
      {"standard_mixture", standard_mixture()},
      {"d2_k3", from_raw(2, {{0.2, Vector::Constant(2, -1.5), Matrix::Identity(2, 2) * 0.3},
                             {0.5, (Vector(2) << 1.0, 0.5).finished(), (Matrix(2, 2) << 0.6, 0.2, 0.2, 0.4).finished()},
                             {0.3, (Vector(2) << 0.0, 2.5).finished(), (Matrix(2, 2) << 1.5, -0.3, -0.3, 0.7).finished()}})}};
  double worst_z = 0.0, worst_tv = 0.0;
  bool structure = true;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto r = verify_mixture(specs[s].spec, {0.1, 1.0, 3.0}, 100000, 200 + s);
    for (const auto& c : r.checks) {
      if (c.name.find("moment_max_abs_z") != std::string::npos) worst_z = std::max(worst_z, c.value);
      else if (c.name.find("marginal_tv") != std::string::npos) worst_tv = std::max(worst_tv, c.value);
      else structure = structure && c.value == 0.0;
    }
  }
  return {worst_z <= kZ && worst_tv <= kTv && structure,
          "max |z| " + num(worst_z) + " (<= 4), max histogram TV " + num(worst_tv) + " (<= 0.02), weights/count " +
              (structure ? "unchanged" : "CHANGED")};
}

// 3 ------------------------------------------------------------------------
Outcome lipschitz_validity() {
  std::size_t violations = 0, short_probes = 0;
  double worst_ratio = 0.0;
  for (const auto& named : standard_suite()) {
    const auto r = verify_lipschitz(named.spec, {0.0, 0.5, 2.0}, std::nullopt, 10000, 300);
    for (const auto& c : r.checks) {
      if (c.name.find("max_jacobian_norm") != std::string::npos) {
        worst_ratio = std::max(worst_ratio, c.value / c.threshold);
        if (!c.pass) ++violations;
      } else if (!c.pass) {
        ++short_probes;
      }
    }
  }
  return {violations == 0 && short_probes == 0,
          std::to_string(violations) + " violations, " + std::to_string(short_probes) +
              " probes short of 10^4 region points, max norm/L " + num(worst_ratio)};
}

// 4 ------------------------------------------------------------------------
Outcome second_moment_check() {
  double worst_z = 0.0;
  bool ordered = true;
  std::uint64_t seed = 400;
  for (const auto& named : standard_suite()) {
    const auto m = second_moment(named.spec);
    ordered = ordered && m.M2 <= m.max_term;
    const auto b = sample(named.spec, 1000000, seed++);
    const Eigen::ArrayXd sq = b.points.colwise().squaredNorm().transpose();
    const double mean = sq.mean();
    const double se = std::sqrt((sq - mean).square().sum() / (sq.size() - 1.0) / sq.size());
    worst_z = std::max(worst_z, std::abs(mean - m.M2) / se);
  }
  return {worst_z <= 4.0 && ordered,
          "max |MC - M2|/SE " + num(worst_z) + " (<= 4), M2 <= max_i(|mu_i|^2 + tr Sigma_i) " +
              (ordered ? "holds" : "VIOLATED")};
}

// 5 ------------------------------------------------------------------------
Outcome kl_prior_bound() {
  ChainRng rng(500, 0, 0);
  double worst_excess = -1e300;
  bool ok = true;
  for (int i = 0; i < 10; ++i) {
    const auto spec = random_spec(1 + i % 3, 1 + i % 4, rng, 0.25, 2.0, 2.0);
    const auto est = kl_mc(spec, standard_normal(spec.dim()), 200000, 500 + static_cast<std::uint64_t>(i));
    const double upper = kl_to_standard_upper(spec).upper;
    worst_excess = std::max(worst_excess, (est.value - upper) / est.se);
    ok = ok && est.value <= upper + 4.0 * est.se;
  }
  const double zero = kl_to_standard_upper(standard_normal(3)).upper;
  Vector mu(3);
  mu << 0.7, -1.2, 2.0;
  const auto shifted = from_raw(3, {{1.0, mu, Matrix::Identity(3, 3)}});
  const double shift_err = std::abs(kl_to_standard_upper(shifted).upper - 0.5 * mu.squaredNorm());
  const bool exact = std::abs(zero) <= 1e-12 && shift_err <= 1e-12;
  return {ok && exact, "max (MC - bound)/SE " + num(worst_excess) + " (<= 4), N(0,I) bound " + num(zero) +
                           ", N(mu,I) error " + num(shift_err) + " (<= 1e-12)"};
}

// 6 ------------------------------------------------------------------------
Outcome solver_stationarity() {
  const std::size_t n = 100000;
  const double nn = static_cast<double>(n);
  const auto model = make_score_model(standard_normal(2), ScoreKind::Exact);
  // EM and EI carry an O(h) stationary variance bias, so h = 1/256.
  const auto grid = uniform_grid(4.0, 1024);
  PredictorCorrectorConfig pc;
  pc.T = 4.0;
  pc.h_pred = 1.0 / 16.0;
  std::vector<std::pair<std::string, SampleBatch>> runs;
  runs.emplace_back("em", run_sampler(model, grid, Scheme::EulerMaruyama, n, 601));
  runs.emplace_back("ei", run_sampler(model, grid, Scheme::ExponentialIntegrator, n, 602));
  runs.emplace_back("dpom", run_predictor_corrector(model, pc, n, 603));
  pc.variant = CorrectorVariant::Underdamped;
  runs.emplace_back("dpum", run_predictor_corrector(model, pc, n, 604));
  bool ok = true;
  std::string detail;
  for (const auto& [name, b] : runs) {
    const Vector mean = b.points.rowwise().mean();
    const Vector var = (b.points.colwise() - mean).rowwise().squaredNorm() / (nn - 1.0);
    const double mz = mean.cwiseAbs().maxCoeff() / (4.0 / std::sqrt(nn));
    const double vz = (var.array() - 1.0).abs().maxCoeff() / (4.0 * std::sqrt(2.0 / nn));
    ok = ok && mz <= 1.0 && vz <= 1.0;
    detail += name + " mean/tol " + num(mz) + " var/tol " + num(vz) + "; ";
  }
  return {ok, detail + "(each <= 1)"};
}

// 7 ------------------------------------------------------------------------
Outcome discretization_rate() {
  SweepConfig cfg;
  cfg.values = {64, 128, 256, 512, 1024, 2048, 4096};
  cfg.T = 8.0;
  cfg.n = 100000;
  cfg.seed = 700;
  const auto r = convergence_sweep(standard_mixture(), cfg);
  std::string kls;
  for (const auto& row : r.rows) kls += num(row.metric_value) + " ";
  const double slope = r.fit ? r.fit->slope : 0.0;
  return {r.fit && std::abs(slope + 1.0) <= 0.35,
          "slope " + num(slope) + " (target -1 +/- 0.35), KL by N: " + kls};
}

// 8 ------------------------------------------------------------------------
Outcome score_error_floor() {
  SweepConfig cfg;
  cfg.axis = SweepAxis::Epsilon0;
  cfg.values = {0.05, 0.1, 0.2};
  cfg.N = 8192;
  cfg.T = 8.0;
  cfg.n = 50000;
  cfg.seed = 800;
  const auto r = convergence_sweep(standard_mixture(), cfg);
  bool ok = r.ratios.size() == 2;
  std::string detail = "KL ";
  for (const auto& row : r.rows) detail += num(row.metric_value) + " ";
  detail += "ratios ";
  for (double q : r.ratios) {
    ok = ok && q >= 2.8 && q <= 5.7;
    detail += num(q) + " ";
  }
  return {ok, detail + "(each in [2.8, 5.7])"};
}

// 9 ------------------------------------------------------------------------
Outcome ei_closed_form() {
  double worst_det = 0.0, worst_z = 0.0;
  // Cases avoid cancellation in (y + 2s)e^h − 2s, where the oracle's own
  // O(h²/M) error would be amplified past the tolerance.
  const double ys[] = {0.8, -2.0, 3.5};
  const double ss[] = {-1.3, 0.4, 1.0};
  const double hs[] = {0.01, 0.25, 0.5};
  const Matrix zero = Matrix::Zero(1, 1);
  for (int c = 0; c < 3; ++c) {
    const double y0 = ys[c], s = ss[c], h = hs[c];
    const int M = 10000;
    double y = y0;
    for (int i = 0; i < M; ++i) y += (h / M) * (y + 2.0 * s);
    const double ei = step_ei(Matrix::Constant(1, 1, y0), h, Matrix::Constant(1, 1, s), zero)(0, 0);
    worst_det = std::max(worst_det, std::abs(ei - y) / std::abs(ei));

    const int n = 200000;
    ChainRng rng(900, 0, static_cast<std::uint64_t>(c));
    Matrix Z(1, n);
    for (int i = 0; i < n; ++i) Z(0, i) = rng.normal();
    const Matrix Y = step_ei(Matrix::Constant(1, n, y0), h, Matrix::Constant(1, n, s), Z);
    const Eigen::ArrayXd dev = (Y.array() - ei).row(0).transpose();
    const Eigen::ArrayXd sq = dev.square();
    const double var = sq.mean();
    const double se = std::sqrt((sq - var).square().sum() / (n - 1.0) / n);
    worst_z = std::max(worst_z, std::abs(var - std::expm1(2.0 * h)) / se);
  }
  return {worst_det <= 1e-4 && worst_z <= 4.0,
          "deterministic rel err vs 10^4-substep Euler " + num(worst_det) + " (<= 1e-4), variance |z| " + num(worst_z) +
              " (<= 4)"};
}

// 10 -----------------------------------------------------------------------
Outcome schedule_contract() {
  bool band = true, collapse = true, reject = true;
  for (double L : {1.5, 10.0, 1e3, 1e6}) {
    for (std::size_t N : {50u, 200u, 2000u}) {
      for (int d : {1, 2}) {
        const double T = 5.0;
        const double K = 0.05;
        const auto g = exp_decay_grid(T, N, L, d, K);
        const double c = exp_decay_scale(T, N, L);
        for (double h : g.steps()) band = band && h >= c / L * (1 - 1e-12) && h <= c * (1 + 1e-12);
      }
    }
  }
  for (std::size_t N : {7u, 64u, 1000u}) collapse = collapse && exp_decay_grid(3.0, N, 1.0, 1).points == uniform_grid(3.0, N).points;
  for (int d : {1, 3}) {
    const double T = 8.0, L = 1e4, K = 2.0;
    const auto n_min = exp_decay_min_steps(T, L, d, K);
    try {
      exp_decay_grid(T, n_min - 1, L, d, K);
      reject = false;
    } catch (const Error& e) {
      reject = reject && e.code() == Errc::StepBudgetViolated && e.index() && static_cast<std::size_t>(*e.index()) == n_min &&
               std::string(e.what()).find(std::to_string(n_min)) != std::string::npos;
    }
    try {
      exp_decay_grid(T, n_min, L, d, K);
    } catch (const Error&) {
      reject = false;
    }
  }
  return {band && collapse && reject, std::string("steps in [c/L, c] ") + (band ? "yes" : "NO") + ", L = 1 equals uniform " +
                                          (collapse ? "yes" : "NO") + ", over-budget rejected with minimal N " +
                                          (reject ? "yes" : "NO")};
}

// 11 -----------------------------------------------------------------------
Outcome pinsker() {
  struct Pair {
    double m1, v1, m2, v2;
  };
  double worst = -1e300;
  std::uint64_t seed = 1100;
  const auto g = HistogramGrid::uniform(1, -12.0, 12.0, 240);
  for (const Pair p : {Pair{0, 1, 0.25, 1}, Pair{0, 1, 1, 1}, Pair{0, 1, 3, 1}, Pair{0, 1, 0, 3}, Pair{-1, 0.5, 1, 2},
                       Pair{2, 0.2, 2.5, 0.3}}) {
    const auto P = from_raw(1, {{1.0, Vector::Constant(1, p.m1), Matrix::Constant(1, 1, p.v1)}});
    const auto Q = from_raw(1, {{1.0, Vector::Constant(1, p.m2), Matrix::Constant(1, 1, p.v2)}});
    const double kl = kl_gaussian_exact(P[0].mean(), P[0].covariance(), Q[0].mean(), Q[0].covariance());
    const double tv = tv_histogram(sample(P, 100000, seed++), Q, g);
    worst = std::max(worst, tv - std::sqrt(kl / 2.0));
  }
  return {worst <= 0.02, "max TV - sqrt(KL/2) " + num(worst) + " (<= 0.02)"};
}

// 12 -----------------------------------------------------------------------
std::string g_cli;

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  if (g_cli.empty() || !fs::exists(g_cli)) return {false, "CLI binary not found: '" + g_cli + "'"};
  const fs::path root = fs::temp_directory_path() / "gmmdiff_acceptance_determinism";
  fs::remove_all(root);
  struct Case {
    std::string name, args, meta;
  };
  const std::vector<Case> cases{
      {"bounds", "bounds --t-list 0,1,3 --probe-points 5000 --seed 12", "bounds.json"},
      {"sample_em", "sample --solver em --N 64 --n 3000 --epsilon0 0.1 --seed 12", "samples.meta.json"},
      {"sample_ei_exp", "sample --solver ei --schedule expdecay --T 4 --N 128 --n 3000 --seed 13", "samples.meta.json"},
      {"sample_dpum", "sample --solver dpum --T 3 --h-pred 0.05 --corr-steps 2 --n 2000 --seed 14", "samples.meta.json"},
      {"sample_random_seed", "sample --N 32 --n 1500", "samples.meta.json"},
      {"verify_solver", "verify solver --solver dpom --T 3 --h-pred 0.05 --n 2000 --seed 15 --tv-threshold 1", "verify_solver.json"},
      {"verify_mixture", "verify mixture --t 0.1,1 --n 5000 --seed 16", "verify_mixture.json"},
      {"sweep", "sweep --axis N --values 8,16,32,64 --T 4 --n 3000 --seed 17", "sweep.meta.json"},
  };
  std::size_t compared = 0;
  for (const auto& c : cases) {
    // Exit code 1 (a verification verdict of fail) is still a completed run.
    const fs::path first = root / c.name / "threads1";
    const int code = shell(g_cli + " " + c.args + " --threads 1 --out " + first.string());
    if (code != 0 && code != 1) return {false, c.name + ": initial run exited with " + std::to_string(code)};
    for (const char* threads : {"0", "4"}) {
      const fs::path again = root / c.name / (std::string("rerun") + threads);
      if (shell(g_cli + " --from-meta " + (first / c.meta).string() + " --threads " + threads + " --out " +
                again.string()) != code)
        return {false, c.name + ": rerun from metadata changed the exit code"};
      for (const auto& entry : fs::directory_iterator(first)) {
        if (entry.path().extension() != ".csv") continue;
        const auto other = again / entry.path().filename();
        if (!fs::exists(other) || io::read_text(entry.path()) != io::read_text(other))
          return {false, c.name + ": " + entry.path().filename().string() + " differs with --threads " + threads};
        ++compared;
      }
    }
  }
  fs::remove_all(root);
  return {compared > 0, std::to_string(cases.size()) + " commands, " + std::to_string(compared) +
                            " CSV files byte-identical across --threads 1/0/4 re-runs from metadata"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (!a.empty() && std::isdigit(static_cast<unsigned char>(a[0])))
      only.insert(std::stoi(a));
    else
      g_cli = a;
  }
  const std::vector<Criterion> criteria{
      {1, "score/gradient suite", 5, score_gradients},
      {2, "mixture preservation", 10, mixture_preservation},
      {3, "Lipschitz bound validity", 30, lipschitz_validity},
      {4, "second moment", 5, second_moment_check},
      {5, "KL-to-prior bound", 20, kl_prior_bound},
      {6, "solver stationarity", 30, solver_stationarity},
      {7, "discretization rate", 180, discretization_rate},
      {8, "score-error floor", 180, score_error_floor},
      {9, "EI closed form", 10, ei_closed_form},
      {10, "schedule contract", 1, schedule_contract},
      {11, "Pinsker consistency", 10, pinsker},
      {12, "determinism", 30, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " | " << num(secs)
              << " s (budget " << num(c.budget_s) << " s" << (in_budget ? "" : ", EXCEEDED") << ")" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

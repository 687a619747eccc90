// Builds a two-component mixture, prints its bound report, samples it with
// the exponential integrator and scores the result against the target.

#include <cstdio>

#include "gmmdiff/gmmdiff.hpp"

int main() {
  using namespace gmmdiff;
  const GmmSpec spec = standard_mixture();

  const auto params = calibrate_region(spec, sample(spec, 10000, 1));
  const auto report = bound_report(spec, 0.0, params);
  std::printf("L = %.4g (log %.4f), M2 = %.4g, KL(p0 || N(0,1)) <= %.4g\n", report.L.value, report.L.log_value,
              report.moment.M2, report.kl.upper);

  const double delta = 1e-3;
  const auto model = make_score_model(spec, ScoreKind::Exact);
  const auto grid = uniform_grid(8.0, 1024, delta);
  const auto batch = run_sampler(model, grid, Scheme::ExponentialIntegrator, 50000, 7);

  const auto reference = marginal_at(spec, delta);
  const auto hist = default_histogram_grid(reference);
  const auto kl = kl_histogram(batch, reference, hist);
  std::printf("histogram KL %.3g (se %.2g), TV %.3g over %zu samples\n", kl.value, kl.se,
              tv_histogram(batch, reference, hist), batch.size());
  return 0;
}

#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace gmmdiff {

/// Provenance of a batch of points.
struct SampleMeta {
  std::uint64_t seed = 0;
  std::string solver;  // "mixture", "em", "ei", "dpom", "dpum", "forward", ...
  std::string grid;    // human-readable grid identity, empty when no grid was used
  double T = 0.0;
  double delta = 0.0;
  double epsilon0 = 0.0;
};

/// n points in R^d, stored one point per column.
struct SampleBatch {
  Eigen::MatrixXd points;
  SampleMeta meta;

  int dim() const { return static_cast<int>(points.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  auto point(std::size_t i) const { return points.col(static_cast<Eigen::Index>(i)); }
};

}  // namespace gmmdiff

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rmt::eval {

/// Probability that a random positive outscores a random negative, ties
/// counted one half (midrank statistic). Throws UndefinedMetricError unless
/// both classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

/// Kolmogorov-Smirnov separation: max over score thresholds of |TPR - FPR|,
/// thresholds swept at every distinct score.
double ks(std::span<const double> scores, std::span<const double> labels);

/// Default x rejection cross-counts.
struct ContingencyTable {
  std::size_t n_dr = 0;    // default, rejected
  std::size_t n_d_nr = 0;  // default, approved
  std::size_t n_nd_r = 0;  // non-default, rejected
  std::size_t n_nd_nr = 0; // non-default, approved

  std::size_t total() const { return n_dr + n_d_nr + n_nd_r + n_nd_nr; }

  static ContingencyTable from_labels(std::span<const double> defaults,
                                      std::span<const double> rejections);
};

/// Pearson correlation of the two binary variables,
/// (P(DR) - P(D)P(R)) / sqrt(P(D)P(!D)P(R)P(!R)). Throws
/// UndefinedMetricError when a marginal is degenerate.
double phi_correlation(const ContingencyTable& table);

/// Per-policy, per-layer gate parameters (alpha, beta).
struct GateParams {
  double alpha = 0.0;
  double beta = 0.0;
};

/// g(p) = sigmoid(alpha * p + beta) sampled on a uniform grid over [0, 1],
/// for every (policy, layer) pair.
struct GateCurve {
  std::vector<double> p;  // ascending grid
  // g[m][j][i] = gate output of policy m, layer j at p[i]
  std::vector<std::vector<std::vector<double>>> g;
};

GateCurve gate_curve(const std::vector<std::vector<GateParams>>& gates,
                     std::size_t grid_size);

/// Median of the values (mean of the two middle order statistics for even
/// counts). Throws on empty input.
double median(std::vector<double> values);

}  // namespace rmt::eval

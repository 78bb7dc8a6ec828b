#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rmtnet/dataset.hpp"
#include "rmtnet/discretize.hpp"
#include "rmtnet/table.hpp"

namespace rmt {

/// A fitted synthetic rejection/approval policy: a logistic regression over
/// a random subset of ceil(epsilon * d) features, trained on the initial
/// third of the rows.
struct SynthPolicy {
  std::vector<std::size_t> feature_subset;
  std::vector<double> weights;  // per selected feature, standardized scale
  double intercept = 0.0;
  std::vector<double> feature_means;  // standardization fitted on initial rows
  std::vector<double> feature_stds;
  double epsilon = 1.0;
  double train_accuracy = 0.0;  // on the initial rows

  /// Predicted default probability for a full-width raw feature row.
  double score(std::span<const double> row) const;
};

struct SynthStats {
  std::size_t n_initial = 0;
  std::size_t n_main = 0;
  std::size_t n_rejected = 0;
  std::size_t n_approved = 0;
  double default_ratio_approved = 0.0;
  double default_ratio_rejected = 0.0;
};

struct SynthResult {
  Dataset dataset;  // main rows only, binned, split tags all Train
  DiscretizationMap discretizer;
  std::vector<SynthPolicy> policies;  // one per policy id
  std::vector<SynthStats> stats;      // parallel to policies
  std::string warning;
};

/// Missing-not-at-random rejection synthesis. Requires ground-truth default
/// labels on every row. Steps: a random third of the rows and a random
/// ceil(epsilon*d)-feature subset fit a logistic-regression policy; the
/// policy scores the remaining two thirds; the top 3/4 of those by predicted
/// default probability become rejected (their labels go to the hidden
/// compartment), the bottom 1/4 stay approved. The initial third is
/// discarded. Features are then quantile-binned on the surviving rows.
SynthResult generate_synthetic_rejection(const RawTable& table,
                                         double epsilon, std::uint64_t seed,
                                         int bins = 32);

struct PolicySpec {
  RawTable table;
  double epsilon = 1.0;
  std::uint64_t seed = 0;
};

/// Runs the rejection synthesis independently on each subset, tags rows with
/// policy ids 1..M, concatenates, and bins features jointly so bin indices
/// mean the same thing across policies.
SynthResult compose_multi_policy(const std::vector<PolicySpec>& subsets,
                                 int bins = 32);

/// Synthetic raw credit data: standard-normal features, default labels drawn
/// from a logistic model with logit noise, intercept calibrated to
/// `default_rate`.
RawTable make_synthetic_raw(std::size_t n, std::size_t d, double noise,
                            std::uint64_t seed, double default_rate = 0.2);

/// Full-batch gradient-descent logistic regression used for the synthetic
/// policy (standardized inputs, run to a fixed gradient tolerance).
struct LogisticFit {
  std::vector<double> weights;
  double intercept = 0.0;
  std::vector<double> means;
  std::vector<double> stds;
  double train_accuracy = 0.0;
};

LogisticFit fit_logistic_gd(const std::vector<double>& x, std::size_t n,
                            std::size_t d, const std::vector<double>& y,
                            int max_iters = 5000, double lr = 0.5,
                            double tol = 1e-7);

}  // namespace rmt

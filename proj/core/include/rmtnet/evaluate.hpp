#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmtnet/dataset.hpp"
#include "rmtnet/metrics.hpp"
#include "rmtnet/model_api.hpp"

namespace rmt::eval {

struct SubsetMetrics {
  bool defined = false;
  double auc = 0.0;
  double ks = 0.0;
  std::size_t n = 0;
};

/// One model evaluated on one dataset's test rows, split by origin.
struct EvalEntry {
  std::uint64_t seed = 0;
  SubsetMetrics approved_test;
  SubsetMetrics rejected_test;  // undefined in approval-only settings
  SubsetMetrics combined_test;
};

/// AUC/KS of the model's default score against ground-truth labels on the
/// approved-test, rejected-test and combined-test subsets. Rejected test
/// rows must carry hidden labels; a subset whose labels are single-class is
/// reported as undefined.
EvalEntry evaluate_model(const models::CreditModel& model, const Dataset& ds);

struct Stat {
  bool defined = false;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct SubsetAggregate {
  Stat auc, ks;
};

struct Aggregate {
  std::size_t n_runs = 0;
  SubsetAggregate approved_test, rejected_test, combined_test;
};

/// Median (plus min/max dispersion) over completed runs, per subset/metric.
Aggregate aggregate(const std::vector<EvalEntry>& runs);

struct ModelReport {
  std::string name;
  std::vector<EvalEntry> runs;
};

nlohmann::json eval_entry_to_json(const EvalEntry& e);
nlohmann::json aggregate_to_json(const Aggregate& a);

/// Full report: per-seed values and aggregates for every approach.
nlohmann::json report_to_json(const std::vector<ModelReport>& models);

/// Aligned-column text table, one row per approach, AUC/KS per subset
/// (medians over runs).
std::string report_table(const std::vector<ModelReport>& models);

/// CSV: column p, then one gate column per (policy, layer).
std::string gate_curve_csv(const GateCurve& curve);

}  // namespace rmt::eval

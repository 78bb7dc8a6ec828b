#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmtnet/evaluate.hpp"
#include "rmtnet/experiment.hpp"

namespace rmt::cmd {

/// gen-data: builds the dataset (synthetic generator or CSV source), runs
/// the rejection synthesis and split assignment, and writes dataset.csv,
/// discretizer.json and manifest.json into cfg.out_dir.
void gen_data(const ExperimentConfig& cfg);

/// train: one model per (sweep grid point x seed); the grid point with the
/// best median validation KS wins and its best run's snapshot lands in
/// out_dir/snapshot.bin, next to manifest.json and log.csv.
void train(const ExperimentConfig& cfg, int jobs = 0);

/// evaluate: scores the listed snapshots on the dataset's test subsets and
/// writes metrics.json, table.txt and gates.csv.
void evaluate(const ExperimentConfig& cfg);

/// summary: per-group feature means of a raw CSV with rejection labels.
void summary(const ExperimentConfig& cfg);

struct BenchModelResult {
  std::vector<eval::EvalEntry> runs;  // one per seed
};

struct BenchVariant {
  double epsilon = 0.0;
  std::map<std::string, BenchModelResult> models;
  std::vector<double> gate_alpha_layer1;  // per seed, gated model only
  std::vector<double> phi_hidden;         // phi(hidden y, r) per seed
};

struct BenchReport {
  std::vector<BenchVariant> variants;
  nlohmann::json to_json(const ExperimentConfig& cfg) const;
};

/// bench: the full directional benchmark (synthetic MNAR data, all
/// configured models, bench.seeds seeds per epsilon variant). Writes
/// bench.json, table.txt and per-variant gate curves; also returns the
/// report so tests can assert on it.
BenchReport bench(const ExperimentConfig& cfg, int jobs = 0);

/// Deterministic helpers shared by the commands and the tests.
void write_text_file(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace rmt::cmd

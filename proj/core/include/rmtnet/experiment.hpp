#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmtnet/model_config.hpp"

namespace rmt {

/// Flat key=value configuration with '#' comments and dotted section
/// prefixes (data.n, model.kind, ...). Unknown keys are rejected so typos
/// fail loudly.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_real_list(const std::string& key,
                                    const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;
  std::vector<std::string> get_string_list(
      const std::string& key, const std::vector<std::string>& fallback) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return kv_; }

  /// Throws ConfigError if any key is outside `known`.
  void check_known_keys(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> kv_;
};

/// Fully resolved experiment description. Every field has a value after
/// resolve(), so the emitted manifest pins the entire experiment.
struct ExperimentConfig {
  std::uint64_t seed = 7;  // base for all defaulted seeds

  // dataset
  std::string data_source = "synthetic";  // synthetic | csv
  std::string data_csv;
  std::size_t data_n = 2000;
  std::size_t data_d = 10;
  double data_noise = 0.5;
  double data_default_rate = 0.2;
  std::vector<double> data_epsilon = {1.0};  // >1 entry => multi-policy
  int data_bins = 32;
  std::string data_mode = "approval-rejection";  // | approval-only
  std::uint64_t data_seed = 0;
  std::uint64_t split_seed = 0;

  // model
  std::string model_kind = "rmtnet";
  models::ModelConfig model;

  // sweep
  std::vector<double> sweep_eta;  // defaults to {model.eta}
  std::vector<int> sweep_t;       // defaults to {model.t}
  int n_runs = 10;
  std::uint64_t sweep_seed_base = 0;

  // evaluate
  std::vector<std::string> eval_snapshots;
  int gate_grid = 101;

  // summary
  std::string summary_csv;
  std::vector<std::string> summary_fields;

  // bench
  std::size_t bench_n = 20000;
  std::size_t bench_d = 20;
  double bench_noise = 0.5;
  double bench_default_rate = 0.2;
  std::vector<double> bench_epsilon = {1.0, 0.5};
  int bench_seeds = 10;
  std::uint64_t bench_seed_base = 0;
  std::vector<std::string> bench_models = {"rmtnet", "mlp", "st", "ips"};

  std::string out_dir = "out";
  std::string data_dir;  // where train/evaluate read the dataset; defaults to out_dir

  static ExperimentConfig from_kv(const KvConfig& kv);
  void validate() const;

  /// Complete echo of every effective value, defaults included.
  nlohmann::json to_json() const;
};

}  // namespace rmt

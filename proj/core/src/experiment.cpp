#include "rmtnet/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rmtnet/csv.hpp"
#include "rmtnet/error.hpp"

namespace rmt {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cur = trim(cur);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) +
                       ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(line_no) +
                       ": empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

bool KvConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

long KvConfig::get_int(const std::string& key, long fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  return csv::parse_int(it->second, 0);
}

double KvConfig::get_real(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  auto v = csv::parse_real(it->second, 0);
  if (!v) throw ConfigError("config key '" + key + "' has no value");
  return *v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config key '" + key + "' must be true/false");
}

std::vector<double> KvConfig::get_real_list(
    const std::string& key, const std::vector<double>& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  for (const auto& tok : split_list(it->second)) {
    auto v = csv::parse_real(tok, 0);
    if (!v) throw ConfigError("config key '" + key + "': bad list entry");
    out.push_back(*v);
  }
  return out;
}

std::vector<int> KvConfig::get_int_list(
    const std::string& key, const std::vector<int>& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<int> out;
  for (const auto& tok : split_list(it->second))
    out.push_back(static_cast<int>(csv::parse_int(tok, 0)));
  return out;
}

std::vector<std::string> KvConfig::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  return split_list(it->second);
}

void KvConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

void KvConfig::check_known_keys(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : kv_) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key: '" + key + "'");
  }
}

namespace {

const std::vector<std::string> kKnownKeys = {
    "seed",
    "data.source", "data.csv", "data.n", "data.d", "data.noise",
    "data.default_rate", "data.epsilon", "data.bins", "data.mode",
    "data.seed", "data.split_seed", "data.dir",
    "model.kind", "model.k", "model.hidden", "model.t", "model.eta",
    "model.learning_rate", "model.epochs", "model.patience", "model.min_epochs", "model.batch",
    "model.seed", "model.share_gradient_through_gate",
    "model.per_policy_strict_masking", "model.st_rounds",
    "model.st_add_fraction", "model.ips_weight_clip", "model.base_learner",
    "sweep.eta", "sweep.t", "sweep.n_runs", "sweep.seed_base",
    "eval.snapshots", "eval.gate_grid",
    "summary.csv", "summary.fields",
    "bench.n", "bench.d", "bench.noise", "bench.default_rate",
    "bench.epsilon", "bench.seeds", "bench.seed_base", "bench.models",
    "out.dir",
};

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  kv.check_known_keys(kKnownKeys);

  ExperimentConfig c;
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 7));

  c.data_source = kv.get_string("data.source", "synthetic");
  c.data_csv = kv.get_string("data.csv", "");
  c.data_n = static_cast<std::size_t>(kv.get_int("data.n", 2000));
  c.data_d = static_cast<std::size_t>(kv.get_int("data.d", 10));
  c.data_noise = kv.get_real("data.noise", 0.5);
  c.data_default_rate = kv.get_real("data.default_rate", 0.2);
  c.data_epsilon = kv.get_real_list("data.epsilon", {1.0});
  c.data_bins = static_cast<int>(kv.get_int("data.bins", 32));
  c.data_mode = kv.get_string("data.mode", "approval-rejection");
  c.data_seed = static_cast<std::uint64_t>(
      kv.get_int("data.seed", static_cast<long>(c.seed)));
  c.split_seed = static_cast<std::uint64_t>(kv.get_int(
      "data.split_seed", static_cast<long>(c.data_seed + 202)));
  c.data_dir = kv.get_string("data.dir", "");

  c.model_kind = kv.get_string("model.kind", "rmtnet");
  c.model.k = static_cast<int>(kv.get_int("model.k", 4));
  c.model.hidden = static_cast<int>(kv.get_int("model.hidden", 16));
  c.model.t = static_cast<int>(kv.get_int("model.t", 2));
  c.model.eta = kv.get_real("model.eta", 0.3);
  c.model.learning_rate = kv.get_real("model.learning_rate", 0.001);
  c.model.epochs = static_cast<int>(kv.get_int("model.epochs", 500));
  c.model.patience = static_cast<int>(kv.get_int("model.patience", 10));
  c.model.min_epochs = static_cast<int>(kv.get_int("model.min_epochs", 0));
  c.model.batch = static_cast<int>(kv.get_int("model.batch", 0));
  c.model.seed = static_cast<std::uint64_t>(
      kv.get_int("model.seed", static_cast<long>(c.seed)));
  c.model.n_policies = static_cast<int>(c.data_epsilon.size());
  c.model.share_gradient_through_gate =
      kv.get_bool("model.share_gradient_through_gate", true);
  c.model.per_policy_strict_masking =
      kv.get_bool("model.per_policy_strict_masking", true);
  c.model.st_rounds = static_cast<int>(kv.get_int("model.st_rounds", 5));
  c.model.st_add_fraction = kv.get_real("model.st_add_fraction", 0.02);
  c.model.ips_weight_clip = kv.get_real("model.ips_weight_clip", 20.0);
  c.model.base_learner = kv.get_string("model.base_learner", "mlp");

  c.sweep_eta = kv.get_real_list("sweep.eta", {c.model.eta});
  c.sweep_t = kv.get_int_list("sweep.t", {c.model.t});
  c.n_runs = static_cast<int>(kv.get_int("sweep.n_runs", 10));
  c.sweep_seed_base = static_cast<std::uint64_t>(
      kv.get_int("sweep.seed_base", static_cast<long>(c.seed)));

  c.eval_snapshots = kv.get_string_list("eval.snapshots", {});
  c.gate_grid = static_cast<int>(kv.get_int("eval.gate_grid", 101));

  c.summary_csv = kv.get_string("summary.csv", "");
  c.summary_fields = kv.get_string_list("summary.fields", {});

  c.bench_n = static_cast<std::size_t>(kv.get_int("bench.n", 20000));
  c.bench_d = static_cast<std::size_t>(kv.get_int("bench.d", 20));
  c.bench_noise = kv.get_real("bench.noise", 0.5);
  c.bench_default_rate = kv.get_real("bench.default_rate", 0.2);
  c.bench_epsilon = kv.get_real_list("bench.epsilon", {1.0, 0.5});
  c.bench_seeds = static_cast<int>(kv.get_int("bench.seeds", 10));
  c.bench_seed_base = static_cast<std::uint64_t>(
      kv.get_int("bench.seed_base", static_cast<long>(c.seed)));
  c.bench_models =
      kv.get_string_list("bench.models", {"rmtnet", "mlp", "st", "ips"});

  c.out_dir = kv.get_string("out.dir", "out");
  if (c.data_dir.empty()) c.data_dir = c.out_dir;

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (data_source != "synthetic" && data_source != "csv")
    throw ConfigError("data.source must be 'synthetic' or 'csv'");
  if (data_source == "csv" && data_csv.empty())
    throw ConfigError("data.source=csv requires data.csv");
  if (data_mode != "approval-rejection" && data_mode != "approval-only")
    throw ConfigError("data.mode must be approval-rejection or approval-only");
  if (data_epsilon.empty()) throw ConfigError("data.epsilon must be non-empty");
  for (double e : data_epsilon)
    if (!(e > 0.0) || e > 1.0)
      throw ConfigError("data.epsilon entries must be in (0,1]");
  if (sweep_eta.empty() || sweep_t.empty())
    throw ConfigError("sweep grids must be non-empty");
  if (n_runs < 1) throw ConfigError("sweep.n_runs must be >= 1");
  if (bench_seeds < 1) throw ConfigError("bench.seeds must be >= 1");
  if (gate_grid < 2) throw ConfigError("eval.gate_grid must be >= 2");
  model.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["data"] = {
      {"source", data_source},       {"csv", data_csv},
      {"n", data_n},                 {"d", data_d},
      {"noise", data_noise},         {"default_rate", data_default_rate},
      {"epsilon", data_epsilon},     {"bins", data_bins},
      {"mode", data_mode},           {"seed", data_seed},
      {"split_seed", split_seed},    {"dir", data_dir},
  };
  j["model"] = {
      {"kind", model_kind},
      {"k", model.k},
      {"hidden", model.hidden},
      {"t", model.t},
      {"eta", model.eta},
      {"learning_rate", model.learning_rate},
      {"epochs", model.epochs},
      {"patience", model.patience},
      {"min_epochs", model.min_epochs},
      {"batch", model.batch},
      {"seed", model.seed},
      {"n_policies", model.n_policies},
      {"share_gradient_through_gate", model.share_gradient_through_gate},
      {"per_policy_strict_masking", model.per_policy_strict_masking},
      {"st_rounds", model.st_rounds},
      {"st_add_fraction", model.st_add_fraction},
      {"ips_weight_clip", model.ips_weight_clip},
      {"base_learner", model.base_learner},
  };
  j["sweep"] = {
      {"eta", sweep_eta},
      {"t", sweep_t},
      {"n_runs", n_runs},
      {"seed_base", sweep_seed_base},
  };
  j["eval"] = {
      {"snapshots", eval_snapshots},
      {"gate_grid", gate_grid},
  };
  j["summary"] = {
      {"csv", summary_csv},
      {"fields", summary_fields},
  };
  j["bench"] = {
      {"n", bench_n},
      {"d", bench_d},
      {"noise", bench_noise},
      {"default_rate", bench_default_rate},
      {"epsilon", bench_epsilon},
      {"seeds", bench_seeds},
      {"seed_base", bench_seed_base},
      {"models", bench_models},
  };
  j["out"] = {{"dir", out_dir}};
  return j;
}

}  // namespace rmt

#include "rmtnet/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "rmtnet/csv.hpp"
#include "rmtnet/error.hpp"
#include "rmtnet/metrics.hpp"
#include "rmtnet/synth.hpp"

namespace rmt::cmd {

namespace fs = std::filesystem;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);
}

void run_parallel(std::size_t n_tasks, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (n_tasks == 0) return;
  std::size_t n_workers =
      jobs > 0 ? static_cast<std::size_t>(jobs)
               : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, n_tasks);
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct RawSource {
  RawTable table;
  std::size_t dropped_rows = 0;
};

RawSource build_raw(const ExperimentConfig& cfg) {
  if (cfg.data_source == "synthetic") {
    return {make_synthetic_raw(cfg.data_n, cfg.data_d, cfg.data_noise,
                               cfg.data_seed, cfg.data_default_rate),
            0};
  }
  LoadResult res = load_csv(cfg.data_csv);
  if (!res.table.has_y())
    throw ConfigError("gen-data: source CSV needs a ground-truth y column");
  return {std::move(res.table), res.dropped_rows};
}

nlohmann::json policy_stats_json(const SynthResult& synth) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t m = 0; m < synth.stats.size(); ++m) {
    const SynthStats& s = synth.stats[m];
    const SynthPolicy& p = synth.policies[m];
    nlohmann::json jp;
    jp["policy"] = m + 1;
    jp["epsilon"] = p.epsilon;
    jp["n_initial"] = s.n_initial;
    jp["n_main"] = s.n_main;
    jp["n_rejected"] = s.n_rejected;
    jp["n_approved"] = s.n_approved;
    jp["rejection_ratio_pct"] =
        100.0 * static_cast<double>(s.n_rejected) /
        static_cast<double>(s.n_main);
    jp["default_ratio_approved_pct"] = 100.0 * s.default_ratio_approved;
    jp["default_ratio_rejected_pct"] = 100.0 * s.default_ratio_rejected;
    jp["policy_feature_subset"] = p.feature_subset;
    jp["policy_train_accuracy"] = p.train_accuracy;
    arr.push_back(jp);
  }
  return arr;
}

SplitMode split_mode_of(const ExperimentConfig& cfg) {
  return cfg.data_mode == "approval-only" ? SplitMode::ApprovalOnly
                                          : SplitMode::ApprovalRejection;
}

struct LoadedData {
  Dataset dataset;
  std::vector<int> bin_counts;
};

LoadedData load_dataset_dir(const std::string& dir) {
  const std::string dpath = dir + "/dataset.csv";
  const std::string mpath = dir + "/discretizer.json";
  std::ifstream in(mpath);
  std::vector<int> bin_counts;
  if (in) {
    std::stringstream ss;
    ss << in.rdbuf();
    bin_counts = DiscretizationMap::from_json(ss.str()).bin_counts();
  }
  LoadedData out{Dataset::load_csv(dpath, bin_counts), bin_counts};
  if (out.bin_counts.empty()) out.bin_counts = out.dataset.bin_counts();
  return out;
}

nlohmann::json split_counts_json(const Dataset& ds) {
  std::size_t counts[3][2] = {{0, 0}, {0, 0}, {0, 0}};
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    ++counts[static_cast<int>(ds.split(i))][ds.rejected(i) ? 1 : 0];
  nlohmann::json j;
  for (int s = 0; s < 3; ++s) {
    j[split_name(static_cast<Split>(s))] = {
        {"approved", counts[s][0]}, {"rejected", counts[s][1]}};
  }
  return j;
}

nlohmann::json diagnostics_json(const Dataset& ds) {
  // default-vs-rejection correlation over rows with known ground truth
  std::vector<double> y, r;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    const auto label = ds.eval_label(i);
    if (!label) continue;
    y.push_back(*label);
    r.push_back(ds.rejection_label(i));
  }
  nlohmann::json j;
  j["n_labeled"] = y.size();
  if (y.empty()) return j;
  const auto table = eval::ContingencyTable::from_labels(y, r);
  const double n_r = static_cast<double>(table.n_dr + table.n_nd_r);
  const double n_nr = static_cast<double>(table.n_d_nr + table.n_nd_nr);
  if (n_r > 0) j["p_default_given_rejected"] = table.n_dr / n_r;
  if (n_nr > 0) j["p_default_given_approved"] = table.n_d_nr / n_nr;
  try {
    j["phi_correlation"] = eval::phi_correlation(table);
  } catch (const UndefinedMetricError&) {
    j["phi_correlation"] = nullptr;
  }
  return j;
}

}  // namespace

void gen_data(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  const RawSource source = build_raw(cfg);
  const RawTable& raw = source.table;

  SynthResult synth;
  const std::size_t M = cfg.data_epsilon.size();
  if (M == 1) {
    synth = generate_synthetic_rejection(raw, cfg.data_epsilon[0],
                                         cfg.data_seed + 102, cfg.data_bins);
  } else {
    std::vector<PolicySpec> specs;
    std::vector<RawTable> halves = raw.split_equal(M, cfg.data_seed + 77);
    for (std::size_t m = 0; m < M; ++m) {
      specs.push_back(PolicySpec{std::move(halves[m]), cfg.data_epsilon[m],
                                 cfg.data_seed + 102 + m});
    }
    synth = compose_multi_policy(specs, cfg.data_bins);
  }

  const Dataset ds = synth.dataset.assign_splits(cfg.split_seed,
                                                 split_mode_of(cfg));
  ds.save_csv(cfg.out_dir + "/dataset.csv");
  write_text_file(cfg.out_dir + "/discretizer.json",
                  synth.discretizer.to_json() + "\n");

  nlohmann::json manifest;
  manifest["command"] = "gen-data";
  manifest["config"] = cfg.to_json();
  manifest["n_source_rows"] = raw.n_rows();
  manifest["dropped_rows"] = source.dropped_rows;
  manifest["n_dataset_rows"] = ds.n_rows();
  manifest["n_policies"] = ds.n_policies();
  manifest["policies"] = policy_stats_json(synth);
  manifest["splits"] = split_counts_json(ds);
  manifest["diagnostics"] = diagnostics_json(ds);
  if (!synth.warning.empty()) manifest["warning"] = synth.warning;
  write_json_file(cfg.out_dir + "/manifest.json", manifest);
}

namespace {

struct TrainTask {
  double eta;
  int t;
  std::uint64_t seed;
  std::size_t grid_index;
};

std::string log_csv(const std::vector<TrainTask>& tasks,
                    const std::vector<models::TrainLog>& logs) {
  std::string out = "eta,t,seed,phase,epoch,loss,loss_rejection,"
                    "loss_default,val_ks\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (const auto& e : logs[i].epochs) {
      out += csv::format_double(tasks[i].eta);
      out += "," + std::to_string(tasks[i].t);
      out += "," + std::to_string(tasks[i].seed);
      out += "," + e.phase;
      out += "," + std::to_string(e.epoch);
      out += "," + csv::format_double(e.loss);
      out += "," + csv::format_double(e.loss_rejection);
      out += "," + csv::format_double(e.loss_default);
      out += "," + csv::format_double(e.val_ks);
      out += "\n";
    }
  }
  return out;
}

}  // namespace

void train(const ExperimentConfig& cfg, int jobs) {
  ensure_dir(cfg.out_dir);
  const LoadedData data = load_dataset_dir(cfg.data_dir);
  const models::ModelKind kind = models::model_kind_from_string(cfg.model_kind);

  std::vector<TrainTask> tasks;
  std::size_t grid_index = 0;
  for (double eta : cfg.sweep_eta) {
    for (int t : cfg.sweep_t) {
      for (int run = 0; run < cfg.n_runs; ++run)
        tasks.push_back(TrainTask{eta, t, cfg.sweep_seed_base +
                                              static_cast<std::uint64_t>(run),
                                  grid_index});
      ++grid_index;
    }
  }

  std::vector<models::FitResult> results(tasks.size());
  run_parallel(tasks.size(), jobs, [&](std::size_t i) {
    models::ModelConfig mc = cfg.model;
    mc.eta = tasks[i].eta;
    mc.t = tasks[i].t;
    mc.seed = tasks[i].seed;
    mc.n_policies = data.dataset.n_policies();
    results[i] = models::fit_model(kind, data.dataset, mc);
  });

  // grid point with the best median validation KS wins; ties keep the
  // earliest grid point, then the earliest seed
  const std::size_t n_grid = grid_index;
  std::vector<std::vector<double>> grid_ks(n_grid);
  for (std::size_t i = 0; i < tasks.size(); ++i)
    grid_ks[tasks[i].grid_index].push_back(results[i].log.best_val_ks);
  std::size_t best_grid = 0;
  double best_median = -1.0;
  for (std::size_t g = 0; g < n_grid; ++g) {
    const double med = eval::median(grid_ks[g]);
    if (med > best_median) {
      best_median = med;
      best_grid = g;
    }
  }
  std::size_t best_task = tasks.size();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].grid_index != best_grid) continue;
    if (best_task == tasks.size() ||
        results[i].log.best_val_ks > results[best_task].log.best_val_ks)
      best_task = i;
  }

  results[best_task].model->save(cfg.out_dir + "/snapshot.bin");

  std::vector<models::TrainLog> logs;
  logs.reserve(results.size());
  for (auto& r : results) logs.push_back(r.log);
  write_text_file(cfg.out_dir + "/log.csv", log_csv(tasks, logs));

  nlohmann::json manifest;
  manifest["command"] = "train";
  manifest["config"] = cfg.to_json();
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    runs.push_back({{"eta", tasks[i].eta},
                    {"t", tasks[i].t},
                    {"seed", tasks[i].seed},
                    {"best_epoch", results[i].log.best_epoch},
                    {"best_val_ks", results[i].log.best_val_ks}});
  }
  manifest["runs"] = runs;
  manifest["selected"] = {{"eta", tasks[best_task].eta},
                          {"t", tasks[best_task].t},
                          {"seed", tasks[best_task].seed},
                          {"median_val_ks", best_median},
                          {"best_val_ks",
                           results[best_task].log.best_val_ks}};
  write_json_file(cfg.out_dir + "/manifest.json", manifest);
}

void evaluate(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  if (cfg.eval_snapshots.empty())
    throw ConfigError("evaluate: eval.snapshots is empty");
  const LoadedData data = load_dataset_dir(cfg.data_dir);

  std::vector<eval::ModelReport> reports;
  std::string gates = "";
  std::vector<std::pair<std::string, eval::GateCurve>> curves;
  std::map<std::string, int> name_count;
  for (const auto& path : cfg.eval_snapshots) {
    auto model = models::load_model(path);
    std::string name = models::model_kind_name(model->kind());
    const int idx = ++name_count[name];
    if (idx > 1) name += "#" + std::to_string(idx);
    eval::EvalEntry entry = eval::evaluate_model(*model, data.dataset);
    entry.seed = 0;
    reports.push_back(eval::ModelReport{name, {entry}});
    if (const models::RmtNet* net = model->rmtnet()) {
      curves.emplace_back(
          name, eval::gate_curve(net->gate_params(),
                                 static_cast<std::size_t>(cfg.gate_grid)));
    }
  }

  nlohmann::json metrics = eval::report_to_json(reports);
  metrics["config"] = cfg.to_json();
  metrics["diagnostics"] = diagnostics_json(data.dataset);
  write_json_file(cfg.out_dir + "/metrics.json", metrics);
  write_text_file(cfg.out_dir + "/table.txt", eval::report_table(reports));

  if (!curves.empty()) {
    // one file, columns prefixed by approach
    std::string out = "p";
    for (const auto& [name, curve] : curves)
      for (std::size_t m = 0; m < curve.g.size(); ++m)
        for (std::size_t j = 0; j < curve.g[m].size(); ++j)
          out += "," + name + "_g_m" + std::to_string(m + 1) + "_l" +
                 std::to_string(j + 1);
    out += "\n";
    const auto& grid = curves.front().second.p;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out += csv::format_double(grid[i]);
      for (const auto& [name, curve] : curves)
        for (std::size_t m = 0; m < curve.g.size(); ++m)
          for (std::size_t j = 0; j < curve.g[m].size(); ++j)
            out += "," + csv::format_double(curve.g[m][j][i]);
      out += "\n";
    }
    gates = out;
    write_text_file(cfg.out_dir + "/gates.csv", gates);
  }
}

void summary(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  if (cfg.summary_csv.empty())
    throw ConfigError("summary: summary.csv path is required");
  LoadResult res = load_csv(cfg.summary_csv);
  if (!res.table.has_r())
    throw SchemaError("summary: CSV has no rejection label column 'r'");
  std::vector<std::string> fields = cfg.summary_fields;
  if (fields.empty()) fields = res.table.column_names;
  const GroupSummary gs = group_summary(res.table, fields);

  nlohmann::json j;
  j["command"] = "summary";
  j["config"] = cfg.to_json();
  j["n_approved"] = gs.n_approved;
  j["n_rejected"] = gs.n_rejected;
  j["dropped_rows"] = res.dropped_rows;
  nlohmann::json jf = nlohmann::json::array();
  for (const auto& f : gs.fields) {
    nlohmann::json e;
    e["field"] = f.name;
    e["approved_mean"] =
        f.approved_mean ? nlohmann::json(*f.approved_mean) : nullptr;
    e["rejected_mean"] =
        f.rejected_mean ? nlohmann::json(*f.rejected_mean) : nullptr;
    jf.push_back(e);
  }
  j["fields"] = jf;
  write_json_file(cfg.out_dir + "/summary.json", j);

  std::string table = "field            approved-mean    rejected-mean\n";
  for (const auto& f : gs.fields) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-16s %13s %16s\n", f.name.c_str(),
                  f.approved_mean ? csv::format_double(*f.approved_mean).c_str()
                                  : "-",
                  f.rejected_mean ? csv::format_double(*f.rejected_mean).c_str()
                                  : "-");
    table += buf;
  }
  write_text_file(cfg.out_dir + "/summary.txt", table);
}

nlohmann::json BenchReport::to_json(const ExperimentConfig& cfg) const {
  nlohmann::json j;
  j["command"] = "bench";
  j["config"] = cfg.to_json();
  nlohmann::json jv = nlohmann::json::array();
  for (const auto& v : variants) {
    nlohmann::json e;
    e["epsilon"] = v.epsilon;
    nlohmann::json jm;
    for (const auto& [name, res] : v.models) {
      nlohmann::json runs = nlohmann::json::array();
      for (const auto& r : res.runs) runs.push_back(eval::eval_entry_to_json(r));
      jm[name] = {{"runs", runs},
                  {"aggregate", eval::aggregate_to_json(
                                    eval::aggregate(res.runs))}};
    }
    e["models"] = jm;
    e["gate_alpha_layer1"] = v.gate_alpha_layer1;
    e["phi_hidden"] = v.phi_hidden;

    // headline comparisons on combined-test KS medians
    auto median_ks = [&](const std::string& name) -> double {
      const auto it = v.models.find(name);
      if (it == v.models.end()) return std::nan("");
      return eval::aggregate(it->second.runs).combined_test.ks.median;
    };
    const double rmt = median_ks("rmtnet");
    nlohmann::json cmp;
    for (const auto& [name, res] : v.models) {
      (void)res;
      if (name == "rmtnet") continue;
      const double other = median_ks(name);
      if (!std::isnan(rmt) && !std::isnan(other) && other > 0.0)
        cmp[name] = {{"median_ks", other},
                     {"rmtnet_relative_gain", (rmt - other) / other}};
    }
    if (!std::isnan(rmt)) cmp["rmtnet"] = {{"median_ks", rmt}};
    e["combined_ks_comparison"] = cmp;
    jv.push_back(e);
  }
  j["variants"] = jv;
  return j;
}

BenchReport bench(const ExperimentConfig& cfg, int jobs) {
  ensure_dir(cfg.out_dir);
  const std::size_t n_variants = cfg.bench_epsilon.size();
  const std::size_t n_seeds = static_cast<std::size_t>(cfg.bench_seeds);

  struct SlotResult {
    std::map<std::string, eval::EvalEntry> entries;
    double gate_alpha = std::nan("");
    double phi = std::nan("");
  };
  std::vector<SlotResult> slots(n_variants * n_seeds);

  run_parallel(slots.size(), jobs, [&](std::size_t slot) {
    const std::size_t vi = slot / n_seeds;
    const std::size_t si = slot % n_seeds;
    const double eps = cfg.bench_epsilon[vi];
    const std::uint64_t raw_seed = cfg.bench_seed_base + si;

    const RawTable raw =
        make_synthetic_raw(cfg.bench_n, cfg.bench_d, cfg.bench_noise,
                           raw_seed, cfg.bench_default_rate);
    const SynthResult synth = generate_synthetic_rejection(
        raw, eps, raw_seed + 5000, cfg.data_bins);
    const Dataset ds = synth.dataset.assign_splits(
        raw_seed + 9000, SplitMode::ApprovalRejection);

    // correlation between hidden defaults and rejection decisions
    {
      std::vector<double> y, r;
      for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        const auto label = ds.eval_label(i);
        if (!label) continue;
        y.push_back(*label);
        r.push_back(ds.rejection_label(i));
      }
      slots[slot].phi = eval::phi_correlation(
          eval::ContingencyTable::from_labels(y, r));
    }

    for (const auto& name : cfg.bench_models) {
      const models::ModelKind kind = models::model_kind_from_string(name);
      models::ModelConfig mc = cfg.model;
      mc.seed = raw_seed;
      mc.n_policies = ds.n_policies();
      models::FitResult fit = models::fit_model(kind, ds, mc);
      eval::EvalEntry entry = eval::evaluate_model(*fit.model, ds);
      entry.seed = raw_seed;
      slots[slot].entries[name] = entry;
      if (const models::RmtNet* net = fit.model->rmtnet())
        slots[slot].gate_alpha = net->gate_alpha(1, 1);
    }
  });

  BenchReport report;
  for (std::size_t vi = 0; vi < n_variants; ++vi) {
    BenchVariant variant;
    variant.epsilon = cfg.bench_epsilon[vi];
    for (const auto& name : cfg.bench_models)
      variant.models[name] = BenchModelResult{};
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const SlotResult& s = slots[vi * n_seeds + si];
      for (const auto& [name, entry] : s.entries)
        variant.models[name].runs.push_back(entry);
      if (!std::isnan(s.gate_alpha))
        variant.gate_alpha_layer1.push_back(s.gate_alpha);
      variant.phi_hidden.push_back(s.phi);
    }
    report.variants.push_back(std::move(variant));
  }

  write_json_file(cfg.out_dir + "/bench.json", report.to_json(cfg));

  std::string table;
  for (const auto& v : report.variants) {
    table += "epsilon = " + csv::format_double(v.epsilon) + "\n";
    std::vector<eval::ModelReport> mr;
    for (const auto& [name, res] : v.models)
      mr.push_back(eval::ModelReport{name, res.runs});
    table += eval::report_table(mr) + "\n";
  }
  write_text_file(cfg.out_dir + "/table.txt", table);

  for (std::size_t vi = 0; vi < n_variants; ++vi) {
    const BenchVariant& v = report.variants[vi];
    if (v.gate_alpha_layer1.empty()) continue;
    std::string out = "seed,alpha_layer1,increasing\n";
    for (std::size_t si = 0; si < v.gate_alpha_layer1.size(); ++si) {
      out += std::to_string(cfg.bench_seed_base + si) + "," +
             csv::format_double(v.gate_alpha_layer1[si]) + "," +
             (v.gate_alpha_layer1[si] > 0.0 ? "1" : "0") + "\n";
    }
    write_text_file(cfg.out_dir + "/gates-eps" +
                        csv::format_double(v.epsilon) + ".csv",
                    out);
  }
  return report;
}

}  // namespace rmt::cmd

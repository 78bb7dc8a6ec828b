#include "rmtnet/evaluate.hpp"

#include <algorithm>
#include <cstdio>

#include "rmtnet/csv.hpp"
#include "rmtnet/error.hpp"

namespace rmt::eval {

namespace {

SubsetMetrics score_subset(const models::CreditModel& model,
                           const Dataset& ds,
                           const std::vector<std::size_t>& rows,
                           const std::vector<double>& labels) {
  SubsetMetrics m;
  m.n = rows.size();
  if (rows.empty()) return m;
  const std::vector<double> scores = model.default_scores(ds, rows);
  try {
    m.auc = auc(scores, labels);
    m.ks = ks(scores, labels);
    m.defined = true;
  } catch (const UndefinedMetricError&) {
    m.defined = false;
  }
  return m;
}

}  // namespace

EvalEntry evaluate_model(const models::CreditModel& model, const Dataset& ds) {
  std::vector<std::size_t> approved, rejected, combined;
  std::vector<double> y_approved, y_rejected, y_combined;
  for (std::size_t i : ds.rows_with_split(Split::Test)) {
    if (ds.rejected(i)) {
      const auto y = ds.eval_label(i);
      if (!y)
        throw ContractError(
            "evaluate_model: rejected test row without a hidden label");
      rejected.push_back(i);
      y_rejected.push_back(*y);
      combined.push_back(i);
      y_combined.push_back(*y);
    } else {
      const double y = ds.train_label(i);
      approved.push_back(i);
      y_approved.push_back(y);
      combined.push_back(i);
      y_combined.push_back(y);
    }
  }

  EvalEntry e;
  e.approved_test = score_subset(model, ds, approved, y_approved);
  e.rejected_test = score_subset(model, ds, rejected, y_rejected);
  e.combined_test = score_subset(model, ds, combined, y_combined);
  return e;
}

namespace {

Stat stat_over(const std::vector<EvalEntry>& runs,
               SubsetMetrics EvalEntry::*subset, double SubsetMetrics::*field) {
  std::vector<double> vals;
  for (const auto& r : runs) {
    const SubsetMetrics& m = r.*subset;
    if (m.defined) vals.push_back(m.*field);
  }
  Stat s;
  if (vals.empty()) return s;
  s.defined = true;
  s.median = median(vals);
  s.min = *std::min_element(vals.begin(), vals.end());
  s.max = *std::max_element(vals.begin(), vals.end());
  return s;
}

SubsetAggregate subset_aggregate(const std::vector<EvalEntry>& runs,
                                 SubsetMetrics EvalEntry::*subset) {
  SubsetAggregate a;
  a.auc = stat_over(runs, subset, &SubsetMetrics::auc);
  a.ks = stat_over(runs, subset, &SubsetMetrics::ks);
  return a;
}

}  // namespace

Aggregate aggregate(const std::vector<EvalEntry>& runs) {
  if (runs.empty()) throw ContractError("aggregate: no runs");
  Aggregate a;
  a.n_runs = runs.size();
  a.approved_test = subset_aggregate(runs, &EvalEntry::approved_test);
  a.rejected_test = subset_aggregate(runs, &EvalEntry::rejected_test);
  a.combined_test = subset_aggregate(runs, &EvalEntry::combined_test);
  return a;
}

namespace {

nlohmann::json subset_to_json(const SubsetMetrics& m) {
  nlohmann::json j;
  j["n"] = m.n;
  if (m.defined) {
    j["auc"] = m.auc;
    j["ks"] = m.ks;
  } else {
    j["auc"] = nullptr;
    j["ks"] = nullptr;
  }
  return j;
}

nlohmann::json stat_to_json(const Stat& s) {
  if (!s.defined) return nullptr;
  return nlohmann::json{{"median", s.median}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

nlohmann::json eval_entry_to_json(const EvalEntry& e) {
  nlohmann::json j;
  j["seed"] = e.seed;
  j["approved_test"] = subset_to_json(e.approved_test);
  j["rejected_test"] = subset_to_json(e.rejected_test);
  j["combined_test"] = subset_to_json(e.combined_test);
  return j;
}

nlohmann::json aggregate_to_json(const Aggregate& a) {
  nlohmann::json j;
  j["n_runs"] = a.n_runs;
  for (const auto& [name, sub] :
       {std::pair<const char*, const SubsetAggregate*>{"approved_test",
                                                       &a.approved_test},
        {"rejected_test", &a.rejected_test},
        {"combined_test", &a.combined_test}}) {
    j[name]["auc"] = stat_to_json(sub->auc);
    j[name]["ks"] = stat_to_json(sub->ks);
  }
  return j;
}

nlohmann::json report_to_json(const std::vector<ModelReport>& models) {
  nlohmann::json j;
  j["format"] = "rmtnet-metrics-v1";
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json jm;
    jm["approach"] = m.name;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : m.runs) runs.push_back(eval_entry_to_json(r));
    jm["runs"] = runs;
    jm["aggregate"] = aggregate_to_json(aggregate(m.runs));
    arr.push_back(jm);
  }
  j["models"] = arr;
  return j;
}

namespace {

std::string fmt_pct(const Stat& s) {
  if (!s.defined) return "    -  ";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%7.2f", 100.0 * s.median);
  return buf;
}

}  // namespace

std::string report_table(const std::vector<ModelReport>& models) {
  std::string out;
  out += "approach      | approved-test     | rejected-test     | "
         "combined-test\n";
  out += "              |     AUC      KS   |     AUC      KS   |     AUC    "
         "  KS\n";
  out += "--------------+-------------------+-------------------+------------"
         "-------\n";
  for (const auto& m : models) {
    const Aggregate a = aggregate(m.runs);
    char name[32];
    std::snprintf(name, sizeof(name), "%-14s", m.name.c_str());
    out += name;
    out += "| " + fmt_pct(a.approved_test.auc) + " " +
           fmt_pct(a.approved_test.ks) + "   ";
    out += "| " + fmt_pct(a.rejected_test.auc) + " " +
           fmt_pct(a.rejected_test.ks) + "   ";
    out += "| " + fmt_pct(a.combined_test.auc) + " " +
           fmt_pct(a.combined_test.ks) + "\n";
  }
  out += "\nvalues are medians over runs, in percent; '-' = not applicable\n";
  return out;
}

std::string gate_curve_csv(const GateCurve& curve) {
  std::string out = "p";
  for (std::size_t m = 0; m < curve.g.size(); ++m)
    for (std::size_t j = 0; j < curve.g[m].size(); ++j)
      out += ",g_m" + std::to_string(m + 1) + "_l" + std::to_string(j + 1);
  out += "\n";
  for (std::size_t i = 0; i < curve.p.size(); ++i) {
    out += csv::format_double(curve.p[i]);
    for (std::size_t m = 0; m < curve.g.size(); ++m)
      for (std::size_t j = 0; j < curve.g[m].size(); ++j)
        out += "," + csv::format_double(curve.g[m][j][i]);
    out += "\n";
  }
  return out;
}

}  // namespace rmt::eval

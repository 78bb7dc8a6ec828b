#include "rmtnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmtnet/error.hpp"
#include "rmtnet/rng.hpp"

namespace rmt {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

LogisticFit fit_logistic_gd(const std::vector<double>& x, std::size_t n,
                            std::size_t d, const std::vector<double>& y,
                            int max_iters, double lr, double tol) {
  LogisticFit fit;
  fit.means.assign(d, 0.0);
  fit.stds.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i * d + j];
    fit.means[j] = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x[i * d + j] - fit.means[j];
      v += c * c;
    }
    const double sd = std::sqrt(v / static_cast<double>(n));
    if (sd > 0.0) fit.stds[j] = sd;
  }

  std::vector<double> xs(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      xs[i * d + j] = (x[i * d + j] - fit.means[j]) / fit.stds[j];

  fit.weights.assign(d, 0.0);
  fit.intercept = 0.0;
  std::vector<double> grad(d);
  for (int it = 0; it < max_iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = fit.intercept;
      for (std::size_t j = 0; j < d; ++j) z += fit.weights[j] * xs[i * d + j];
      const double delta = stable_sigmoid(z) - y[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += delta * xs[i * d + j];
      grad_b += delta;
    }
    double gmax = std::abs(grad_b) / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j)
      gmax = std::max(gmax, std::abs(grad[j]) / static_cast<double>(n));
    if (gmax < tol) break;
    for (std::size_t j = 0; j < d; ++j)
      fit.weights[j] -= lr * grad[j] / static_cast<double>(n);
    fit.intercept -= lr * grad_b / static_cast<double>(n);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = fit.intercept;
    for (std::size_t j = 0; j < d; ++j) z += fit.weights[j] * xs[i * d + j];
    if ((stable_sigmoid(z) >= 0.5) == (y[i] >= 0.5)) ++correct;
  }
  fit.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return fit;
}

double SynthPolicy::score(std::span<const double> row) const {
  double z = intercept;
  for (std::size_t k = 0; k < feature_subset.size(); ++k) {
    const double v =
        (row[feature_subset[k]] - feature_means[k]) / feature_stds[k];
    z += weights[k] * v;
  }
  return stable_sigmoid(z);
}

namespace {

struct LabeledMain {
  std::vector<std::size_t> main_idx;  // indices into the source table
  std::vector<std::uint8_t> r;        // parallel to main_idx
  SynthPolicy policy;
  SynthStats stats;
};

// Steps 1-4 of the rejection synthesis, on raw features.
LabeledMain synth_labels(const RawTable& table, double epsilon,
                         std::uint64_t seed) {
  if (!(epsilon > 0.0) || epsilon > 1.0)
    throw ConfigError("generate_synthetic_rejection: epsilon must be in (0,1]");
  if (!table.has_y())
    throw ContractError(
        "generate_synthetic_rejection: table has no ground-truth default "
        "labels");

  const std::size_t n = table.n_rows();
  const std::size_t d = table.n_features();
  const std::size_t n_init = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) / 3.0));
  if (n_init == 0 || n_init == n)
    throw ConfigError("generate_synthetic_rejection: too few rows");
  const std::size_t n_feat =
      static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(d)));

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  LabeledMain out;
  out.policy.epsilon = epsilon;
  out.policy.feature_subset = rng.sample_indices(d, n_feat);
  std::sort(out.policy.feature_subset.begin(),
            out.policy.feature_subset.end());

  // (1) fit the policy on the initial third
  std::vector<double> px(n_init * n_feat);
  std::vector<double> py(n_init);
  for (std::size_t i = 0; i < n_init; ++i) {
    const std::size_t src = order[i];
    for (std::size_t k = 0; k < n_feat; ++k)
      px[i * n_feat + k] = table.at(src, out.policy.feature_subset[k]);
    py[i] = table.y_raw[src];
  }
  const LogisticFit fit = fit_logistic_gd(px, n_init, n_feat, py);
  out.policy.weights = fit.weights;
  out.policy.intercept = fit.intercept;
  out.policy.feature_means = fit.means;
  out.policy.feature_stds = fit.stds;
  out.policy.train_accuracy = fit.train_accuracy;

  // (2) score the main two thirds
  out.main_idx.assign(order.begin() + n_init, order.end());
  std::sort(out.main_idx.begin(), out.main_idx.end());
  const std::size_t n_main = out.main_idx.size();
  std::vector<double> score(n_main);
  for (std::size_t i = 0; i < n_main; ++i)
    score[i] = out.policy.score(table.row(out.main_idx[i]));

  // (3)+(4) reject the top 3/4 by predicted default probability
  const std::size_t n_rej = static_cast<std::size_t>(
      std::llround(0.75 * static_cast<double>(n_main)));
  std::vector<std::size_t> rank(n_main);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return score[a] > score[b];
  });
  out.r.assign(n_main, 0);
  for (std::size_t k = 0; k < n_rej; ++k) out.r[rank[k]] = 1;

  out.stats.n_initial = n_init;
  out.stats.n_main = n_main;
  out.stats.n_rejected = n_rej;
  out.stats.n_approved = n_main - n_rej;
  double def_app = 0.0, def_rej = 0.0;
  for (std::size_t i = 0; i < n_main; ++i) {
    const double y = table.y_raw[out.main_idx[i]];
    (out.r[i] ? def_rej : def_app) += y;
  }
  if (out.stats.n_approved > 0)
    out.stats.default_ratio_approved =
        def_app / static_cast<double>(out.stats.n_approved);
  if (out.stats.n_rejected > 0)
    out.stats.default_ratio_rejected =
        def_rej / static_cast<double>(out.stats.n_rejected);
  return out;
}

SynthResult assemble(const std::vector<const RawTable*>& tables,
                     const std::vector<LabeledMain>& parts, int bins) {
  // Concatenate the surviving rows across policies, then bin jointly so a
  // given bin index means the same thing for every policy.
  RawTable joined;
  joined.column_names = tables[0]->column_names;
  std::vector<std::uint8_t> r;
  std::vector<std::int8_t> y_vis, y_hid;
  std::vector<int> policy;
  for (std::size_t m = 0; m < parts.size(); ++m) {
    const RawTable& src = *tables[m];
    const LabeledMain& part = parts[m];
    for (std::size_t i = 0; i < part.main_idx.size(); ++i) {
      auto row = src.row(part.main_idx[i]);
      joined.values.insert(joined.values.end(), row.begin(), row.end());
      const std::int8_t y = static_cast<std::int8_t>(src.y_raw[part.main_idx[i]]);
      r.push_back(part.r[i]);
      y_vis.push_back(part.r[i] ? -1 : y);
      y_hid.push_back(part.r[i] ? y : -1);
      policy.push_back(static_cast<int>(m) + 1);
    }
  }

  SynthResult res;
  res.discretizer = fit_discretizer(joined, bins);

  Dataset::Builder b;
  b.column_names = joined.column_names;
  b.bins = apply_discretizer(joined, res.discretizer);
  b.bin_counts = res.discretizer.bin_counts();
  b.r = std::move(r);
  b.y_visible = std::move(y_vis);
  b.y_hidden = std::move(y_hid);
  b.policy = std::move(policy);
  res.dataset = std::move(b).build();
  for (const auto& part : parts) {
    res.policies.push_back(part.policy);
    res.stats.push_back(part.stats);
  }
  return res;
}

}  // namespace

SynthResult generate_synthetic_rejection(const RawTable& table,
                                         double epsilon, std::uint64_t seed,
                                         int bins) {
  const LabeledMain part = synth_labels(table, epsilon, seed);
  return assemble({&table}, {part}, bins);
}

SynthResult compose_multi_policy(const std::vector<PolicySpec>& subsets,
                                 int bins) {
  if (subsets.empty()) throw ConfigError("compose_multi_policy: no subsets");
  std::vector<const RawTable*> tables;
  std::vector<LabeledMain> parts;
  for (const auto& s : subsets) {
    tables.push_back(&s.table);
    parts.push_back(synth_labels(s.table, s.epsilon, s.seed));
  }
  SynthResult res = assemble(tables, parts, bins);
  if (subsets.size() == 1)
    res.warning = "compose_multi_policy: single subset, M=1 degenerate";
  return res;
}

RawTable make_synthetic_raw(std::size_t n, std::size_t d, double noise,
                            std::uint64_t seed, double default_rate) {
  if (n == 0 || d == 0) throw ConfigError("make_synthetic_raw: n, d must be > 0");
  Rng rng(seed);
  RawTable t;
  for (std::size_t j = 0; j < d; ++j)
    t.column_names.push_back("f" + std::to_string(j));
  t.values.resize(n * d);
  for (auto& v : t.values) v = rng.normal();

  std::vector<double> w(d);
  for (auto& v : w) v = rng.normal();
  const double scale = 2.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += w[j] * t.values[i * d + j];
    z[i] = scale * s + noise * rng.normal();
  }

  // calibrate the intercept so the mean default probability hits the target
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += stable_sigmoid(z[i] + mid);
    mean /= static_cast<double>(n);
    (mean < default_rate ? lo : hi) = mid;
  }
  const double b0 = 0.5 * (lo + hi);

  t.y_raw.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    t.y_raw[i] = rng.uniform() < stable_sigmoid(z[i] + b0) ? 1 : 0;
  return t;
}

}  // namespace rmt

#include "rmtnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmtnet/error.hpp"
#include "rmtnet/nn.hpp"

namespace rmt::eval {

namespace {

void check_two_classes(std::span<const double> labels) {
  bool pos = false, neg = false;
  for (double y : labels) (y > 0.5 ? pos : neg) = true;
  if (!pos || !neg)
    throw UndefinedMetricError("metric needs both classes present");
}

}  // namespace

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size())
    throw ContractError("auc: size mismatch");
  check_two_classes(labels);

  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // midranks over tie groups
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] > 0.5) {
      rank_sum_pos += rank[k];
      ++n_pos;
    }
  }
  const std::size_t n_neg = n - n_pos;
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double ks(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size())
    throw ContractError("ks: size mismatch");
  check_two_classes(labels);

  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double n_pos = 0.0, n_neg = 0.0;
  for (double y : labels) (y > 0.5 ? n_pos : n_neg) += 1.0;

  // sweep thresholds downward; tie groups enter together
  double tp = 0.0, fp = 0.0, best = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] > 0.5)
        tp += 1.0;
      else
        fp += 1.0;
    }
    best = std::max(best, std::abs(tp / n_pos - fp / n_neg));
    i = j + 1;
  }
  return best;
}

ContingencyTable ContingencyTable::from_labels(
    std::span<const double> defaults, std::span<const double> rejections) {
  if (defaults.size() != rejections.size())
    throw ContractError("ContingencyTable: size mismatch");
  ContingencyTable t;
  for (std::size_t i = 0; i < defaults.size(); ++i) {
    const bool d = defaults[i] > 0.5;
    const bool r = rejections[i] > 0.5;
    if (d && r) ++t.n_dr;
    else if (d) ++t.n_d_nr;
    else if (r) ++t.n_nd_r;
    else ++t.n_nd_nr;
  }
  return t;
}

double phi_correlation(const ContingencyTable& t) {
  const double n = static_cast<double>(t.total());
  const double n_d = static_cast<double>(t.n_dr + t.n_d_nr);
  const double n_r = static_cast<double>(t.n_dr + t.n_nd_r);
  if (n == 0.0 || n_d == 0.0 || n_d == n || n_r == 0.0 || n_r == n)
    throw UndefinedMetricError("phi_correlation: degenerate marginal");
  const double p_dr = static_cast<double>(t.n_dr) / n;
  const double p_d = n_d / n;
  const double p_r = n_r / n;
  return (p_dr - p_d * p_r) /
         std::sqrt(p_d * (1.0 - p_d) * p_r * (1.0 - p_r));
}

GateCurve gate_curve(const std::vector<std::vector<GateParams>>& gates,
                     std::size_t grid_size) {
  if (grid_size < 2) throw ConfigError("gate_curve: grid_size must be >= 2");
  GateCurve c;
  c.p.resize(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i)
    c.p[i] = static_cast<double>(i) / static_cast<double>(grid_size - 1);
  c.g.resize(gates.size());
  for (std::size_t m = 0; m < gates.size(); ++m) {
    c.g[m].resize(gates[m].size());
    for (std::size_t j = 0; j < gates[m].size(); ++j) {
      c.g[m][j].resize(grid_size);
      for (std::size_t i = 0; i < grid_size; ++i) {
        c.g[m][j][i] =
            nn::sigmoid(gates[m][j].alpha * c.p[i] + gates[m][j].beta);
      }
    }
  }
  return c;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace rmt::eval

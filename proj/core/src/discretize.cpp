#include "rmtnet/discretize.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "rmtnet/error.hpp"
#include "rmtnet/table.hpp"

namespace rmt {

std::vector<int> DiscretizationMap::bin_counts() const {
  std::vector<int> out(edges.size());
  for (std::size_t f = 0; f < edges.size(); ++f)
    out[f] = bin_count(f);
  return out;
}

int DiscretizationMap::bin_of(std::size_t f, double value) const {
  const auto& e = edges[f];
  // count of edges strictly below the value
  return static_cast<int>(std::lower_bound(e.begin(), e.end(), value) -
                          e.begin());
}

std::string DiscretizationMap::to_json() const {
  nlohmann::json j;
  j["format"] = "rmtnet-discretizer-v1";
  j["edges"] = edges;
  return j.dump(2);
}

DiscretizationMap DiscretizationMap::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format") || j["format"] != "rmtnet-discretizer-v1")
    throw ParseError("not a discretizer file");
  DiscretizationMap m;
  m.edges = j["edges"].get<std::vector<std::vector<double>>>();
  return m;
}

namespace {

// Linear-interpolation empirical quantile on sorted values.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

DiscretizationMap fit_discretizer(const RawTable& table, int bins) {
  if (bins < 2) throw ConfigError("fit_discretizer: bins must be >= 2");
  const std::size_t n = table.n_rows();
  if (n < static_cast<std::size_t>(bins))
    throw ConfigError("fit_discretizer: need at least `bins` rows");

  DiscretizationMap map;
  map.edges.resize(table.n_features());
  std::vector<double> col(n);
  for (std::size_t f = 0; f < table.n_features(); ++f) {
    for (std::size_t i = 0; i < n; ++i) col[i] = table.at(i, f);
    std::sort(col.begin(), col.end());
    const double maxv = col.back();
    auto& e = map.edges[f];
    for (int i = 1; i < bins; ++i) {
      const double q = quantile_sorted(col, static_cast<double>(i) / bins);
      // Collapse ties and drop edges no sample can sit above.
      if ((e.empty() || q > e.back()) && q < maxv) e.push_back(q);
    }
  }
  return map;
}

std::vector<int> apply_discretizer(const RawTable& table,
                                   const DiscretizationMap& map) {
  if (table.n_features() != map.n_features())
    throw ContractError("apply_discretizer: feature count mismatch");
  std::vector<int> bins(table.n_rows() * table.n_features());
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    for (std::size_t f = 0; f < table.n_features(); ++f) {
      bins[i * table.n_features() + f] = map.bin_of(f, table.at(i, f));
    }
  }
  return bins;
}

}  // namespace rmt

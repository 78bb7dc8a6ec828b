#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rmt {

class RawTable;

/// Per-feature quantile bin edges. A raw value maps to the number of edges
/// strictly below it, so out-of-range values clamp to the outermost bins.
class DiscretizationMap {
 public:
  std::vector<std::vector<double>> edges;  // strictly increasing per feature

  std::size_t n_features() const { return edges.size(); }

  /// Bins for feature f: number of edges + 1.
  int bin_count(std::size_t f) const {
    return static_cast<int>(edges[f].size()) + 1;
  }
  std::vector<int> bin_counts() const;

  int bin_of(std::size_t f, double value) const;

  std::string to_json() const;
  static DiscretizationMap from_json(const std::string& text);
};

/// Fits linear-interpolation empirical quantile edges at i/bins,
/// i = 1..bins-1, per feature. Duplicate edges are collapsed and edges that
/// cannot separate any sample are dropped, so a constant feature yields a
/// single bin.
DiscretizationMap fit_discretizer(const RawTable& table, int bins);

/// Bin matrix for `table` under `map`, row-major n_rows x n_features.
std::vector<int> apply_discretizer(const RawTable& table,
                                   const DiscretizationMap& map);

}  // namespace rmt

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rmt {

enum class ColumnRole { Feature, DefaultLabel, RejectionLabel, PolicyId };

ColumnRole column_role_from_string(const std::string& s);

/// Maps column names to roles. Columns not mentioned explicitly fall back to
/// the reserved names: "y" -> default label, "r" -> rejection label,
/// "policy" -> policy id, anything else a feature.
struct CsvSchema {
  std::map<std::string, ColumnRole> overrides;

  ColumnRole role_of(const std::string& column) const;
};

/// Raw numeric table as loaded from disk or produced by a generator.
/// Rows with missing values are dropped at load time, so all entries are
/// finite real numbers.
class RawTable {
 public:
  std::vector<std::string> column_names;  // feature columns only
  std::vector<double> values;             // row-major, n_rows x n_features
  std::vector<std::uint8_t> y_raw;        // empty, or one {0,1} per row
  std::vector<std::uint8_t> r_raw;        // empty, or one {0,1} per row
  std::vector<int> policy_raw;            // empty, or one id per row

  std::size_t n_rows() const {
    return column_names.empty() ? 0 : values.size() / column_names.size();
  }
  std::size_t n_features() const { return column_names.size(); }

  bool has_y() const { return !y_raw.empty(); }
  bool has_r() const { return !r_raw.empty(); }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * n_features(),
                                                   n_features());
  }
  double at(std::size_t i, std::size_t j) const {
    return values[i * n_features() + j];
  }

  int feature_index(const std::string& name) const;

  /// Copy of the rows listed in `idx`, labels included.
  RawTable subset(const std::vector<std::size_t>& idx) const;

  /// Splits into `parts` nearly-equal contiguous chunks after a seeded
  /// shuffle of the row order.
  std::vector<RawTable> split_equal(std::size_t parts,
                                    std::uint64_t seed) const;
};

struct LoadResult {
  RawTable table;
  std::size_t dropped_rows = 0;  // rows removed by the missing-value filter
};

/// Loads a CSV file with a header row. Rows containing missing values in any
/// declared column are dropped and counted.
LoadResult load_csv(const std::string& path, const CsvSchema& schema = {});

/// Per-group (approved r=0 / rejected r=1) arithmetic means of the requested
/// feature columns. Groups with no rows are reported as absent.
struct GroupSummary {
  struct Field {
    std::string name;
    std::optional<double> approved_mean;
    std::optional<double> rejected_mean;
  };
  std::vector<Field> fields;
  std::size_t n_approved = 0;
  std::size_t n_rejected = 0;
};

GroupSummary group_summary(const RawTable& table,
                           const std::vector<std::string>& fields);

}  // namespace rmt

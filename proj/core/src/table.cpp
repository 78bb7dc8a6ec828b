#include "rmtnet/table.hpp"

#include <algorithm>
#include <numeric>

#include "rmtnet/csv.hpp"
#include "rmtnet/error.hpp"
#include "rmtnet/rng.hpp"

namespace rmt {

ColumnRole column_role_from_string(const std::string& s) {
  if (s == "feature") return ColumnRole::Feature;
  if (s == "y" || s == "default") return ColumnRole::DefaultLabel;
  if (s == "r" || s == "rejection") return ColumnRole::RejectionLabel;
  if (s == "policy") return ColumnRole::PolicyId;
  throw SchemaError("unknown column role: '" + s + "'");
}

ColumnRole CsvSchema::role_of(const std::string& column) const {
  auto it = overrides.find(column);
  if (it != overrides.end()) return it->second;
  if (column == "y") return ColumnRole::DefaultLabel;
  if (column == "r") return ColumnRole::RejectionLabel;
  if (column == "policy") return ColumnRole::PolicyId;
  return ColumnRole::Feature;
}

int RawTable::feature_index(const std::string& name) const {
  auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end())
    throw SchemaError("no such feature column: '" + name + "'");
  return static_cast<int>(it - column_names.begin());
}

RawTable RawTable::subset(const std::vector<std::size_t>& idx) const {
  RawTable out;
  out.column_names = column_names;
  out.values.reserve(idx.size() * n_features());
  for (std::size_t i : idx) {
    auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    if (has_y()) out.y_raw.push_back(y_raw[i]);
    if (has_r()) out.r_raw.push_back(r_raw[i]);
    if (!policy_raw.empty()) out.policy_raw.push_back(policy_raw[i]);
  }
  return out;
}

std::vector<RawTable> RawTable::split_equal(std::size_t parts,
                                            std::uint64_t seed) const {
  if (parts == 0) throw ConfigError("split_equal: parts must be >= 1");
  Rng rng(seed);
  std::vector<std::size_t> order(n_rows());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<RawTable> out;
  const std::size_t n = order.size();
  std::size_t begin = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t end = n * (p + 1) / parts;
    out.push_back(subset(std::vector<std::size_t>(order.begin() + begin,
                                                  order.begin() + end)));
    begin = end;
  }
  return out;
}

LoadResult load_csv(const std::string& path, const CsvSchema& schema) {
  const csv::File file = csv::read_file(path);

  std::vector<int> feature_cols;
  int y_col = -1, r_col = -1, policy_col = -1;
  for (std::size_t c = 0; c < file.header.size(); ++c) {
    switch (schema.role_of(file.header[c])) {
      case ColumnRole::Feature:
        feature_cols.push_back(static_cast<int>(c));
        break;
      case ColumnRole::DefaultLabel:
        y_col = static_cast<int>(c);
        break;
      case ColumnRole::RejectionLabel:
        r_col = static_cast<int>(c);
        break;
      case ColumnRole::PolicyId:
        policy_col = static_cast<int>(c);
        break;
    }
  }
  for (const auto& [name, role] : schema.overrides) {
    if (std::find(file.header.begin(), file.header.end(), name) ==
        file.header.end()) {
      throw SchemaError("schema names column '" + name +
                        "' which is not in the header of " + path);
    }
    (void)role;
  }

  LoadResult res;
  RawTable& t = res.table;
  for (int c : feature_cols) t.column_names.push_back(file.header[c]);

  auto parse_binary = [](std::optional<double> v, const char* what,
                         std::size_t line_no) -> std::uint8_t {
    if (!v || (*v != 0.0 && *v != 1.0)) {
      throw ParseError("line " + std::to_string(line_no) + ": " + what +
                       " label must be 0 or 1");
    }
    return static_cast<std::uint8_t>(*v);
  };

  std::vector<double> row_buf(feature_cols.size());
  for (std::size_t i = 0; i < file.rows.size(); ++i) {
    const auto& cells = file.rows[i];
    const std::size_t line_no = i + 2;  // header is line 1
    bool missing = false;
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      auto v = csv::parse_real(cells[feature_cols[j]], line_no);
      if (!v) {
        missing = true;
        break;
      }
      row_buf[j] = *v;
    }
    std::optional<double> y, r;
    std::optional<long> policy;
    if (!missing && y_col >= 0) {
      y = csv::parse_real(cells[y_col], line_no);
      if (!y) missing = true;
    }
    if (!missing && r_col >= 0) {
      r = csv::parse_real(cells[r_col], line_no);
      if (!r) missing = true;
    }
    if (!missing && policy_col >= 0) {
      if (cells[policy_col].empty()) {
        missing = true;
      } else {
        policy = csv::parse_int(cells[policy_col], line_no);
      }
    }
    if (missing) {
      ++res.dropped_rows;
      continue;
    }
    t.values.insert(t.values.end(), row_buf.begin(), row_buf.end());
    if (y_col >= 0) t.y_raw.push_back(parse_binary(y, "default", line_no));
    if (r_col >= 0) t.r_raw.push_back(parse_binary(r, "rejection", line_no));
    if (policy_col >= 0) t.policy_raw.push_back(static_cast<int>(*policy));
  }
  return res;
}

GroupSummary group_summary(const RawTable& table,
                           const std::vector<std::string>& fields) {
  if (!table.has_r())
    throw SchemaError("group_summary needs a rejection label column");

  GroupSummary out;
  std::vector<int> cols;
  for (const auto& f : fields) cols.push_back(table.feature_index(f));

  std::vector<double> sum_a(cols.size(), 0.0), sum_r(cols.size(), 0.0);
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    const bool rejected = table.r_raw[i] != 0;
    (rejected ? out.n_rejected : out.n_approved)++;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      (rejected ? sum_r[j] : sum_a[j]) += table.at(i, cols[j]);
    }
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    GroupSummary::Field f;
    f.name = fields[j];
    if (out.n_approved > 0) f.approved_mean = sum_a[j] / out.n_approved;
    if (out.n_rejected > 0) f.rejected_mean = sum_r[j] / out.n_rejected;
    out.fields.push_back(std::move(f));
  }
  return out;
}

}  // namespace rmt

#include "rmtnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rmtnet/csv.hpp"
#include "rmtnet/error.hpp"
#include "rmtnet/rng.hpp"

namespace rmt {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ParseError("unknown split tag: '" + s + "'");
}

Dataset Dataset::Builder::build() && {
  const std::size_t n = r.size();
  const std::size_t d = bin_counts.size();
  if (bins.size() != n * d)
    throw ContractError("Dataset: bins size does not match n x d");
  if (column_names.empty()) {
    for (std::size_t f = 0; f < d; ++f)
      column_names.push_back("f" + std::to_string(f));
  }
  if (column_names.size() != d)
    throw ContractError("Dataset: column name count mismatch");
  if (y_visible.empty()) y_visible.assign(n, -1);
  if (y_hidden.empty()) y_hidden.assign(n, -1);
  if (policy.empty()) policy.assign(n, 1);
  if (split.empty()) split.assign(n, Split::Train);
  if (y_visible.size() != n || y_hidden.size() != n || policy.size() != n ||
      split.size() != n)
    throw ContractError("Dataset: per-row array size mismatch");

  for (std::size_t i = 0; i < n; ++i) {
    if (r[i] == 0 && y_hidden[i] >= 0)
      throw ContractError("Dataset: approved row carries a hidden label");
    if (r[i] != 0 && y_visible[i] >= 0)
      throw ContractError("Dataset: rejected row carries a visible label");
    for (std::size_t f = 0; f < d; ++f) {
      const int b = bins[i * d + f];
      if (b < 0 || b >= bin_counts[f])
        throw ContractError("Dataset: bin index out of range");
    }
  }

  Dataset ds;
  ds.column_names_ = std::move(column_names);
  ds.bins_ = std::move(bins);
  ds.bin_counts_ = std::move(bin_counts);
  ds.r_ = std::move(r);
  ds.y_visible_ = std::move(y_visible);
  ds.y_hidden_ = std::move(y_hidden);
  ds.policy_ = std::move(policy);
  ds.split_ = std::move(split);
  ds.n_policies_ =
      ds.policy_.empty()
          ? 1
          : *std::max_element(ds.policy_.begin(), ds.policy_.end());
  if (ds.n_policies_ < 1) ds.n_policies_ = 1;
  return ds;
}

double Dataset::train_label(std::size_t i) const {
  if (r_[i] != 0)
    throw ContractError(
        "train_label: row is rejected; its default label is not observable "
        "during training");
  if (y_visible_[i] < 0)
    throw ContractError("train_label: row has no observed label");
  return y_visible_[i];
}

std::optional<double> Dataset::eval_label(std::size_t i) const {
  const std::int8_t v = r_[i] == 0 ? y_visible_[i] : y_hidden_[i];
  if (v < 0) return std::nullopt;
  return static_cast<double>(v);
}

std::vector<std::size_t> Dataset::rows_with_split(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_rows(); ++i)
    if (split_[i] == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::approved_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_rows(); ++i)
    if (r_[i] == 0) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::rejected_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_rows(); ++i)
    if (r_[i] != 0) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::default_task_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_rows(); ++i)
    if (split_[i] == Split::Train && r_[i] == 0) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::rejection_task_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_rows(); ++i)
    if (split_[i] == Split::Train || r_[i] != 0) out.push_back(i);
  return out;
}

Dataset Dataset::assign_splits(std::uint64_t seed, SplitMode mode) const {
  std::vector<std::size_t> approved = approved_rows();
  if (approved.size() < 5)
    throw ConfigError("assign_splits: need at least 5 approved rows");

  Rng rng(seed);
  rng.shuffle(approved);
  const std::size_t n = approved.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));

  Dataset out = *this;
  for (std::size_t i = 0; i < out.n_rows(); ++i) {
    if (out.r_[i] != 0) {
      out.split_[i] = mode == SplitMode::ApprovalRejection ? Split::Test
                                                           : Split::Train;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    Split s = k < n_train           ? Split::Train
              : k < n_train + n_val ? Split::Val
                                    : Split::Test;
    out.split_[approved[k]] = s;
  }
  return out;
}

Dataset Dataset::with_permuted_hidden_labels(std::uint64_t seed) const {
  Dataset out = *this;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n_rows(); ++i)
    if (r_[i] != 0 && y_hidden_[i] >= 0) rows.push_back(i);
  std::vector<std::size_t> perm = rows;
  Rng rng(seed);
  rng.shuffle(perm);
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.y_hidden_[rows[k]] = y_hidden_[perm[k]];
  return out;
}

void Dataset::save_csv(const std::string& path) const {
  std::ofstream outf(path);
  if (!outf) throw IoError("cannot write " + path);
  for (const auto& name : column_names_) outf << name << ',';
  outf << "r,y,y_eval,policy,split\n";
  for (std::size_t i = 0; i < n_rows(); ++i) {
    for (std::size_t f = 0; f < n_features(); ++f)
      outf << bins_[i * n_features() + f] << ',';
    outf << int(r_[i]) << ',';
    if (y_visible_[i] >= 0) outf << int(y_visible_[i]);
    outf << ',';
    if (y_hidden_[i] >= 0) outf << int(y_hidden_[i]);
    outf << ',' << policy_[i] << ',' << split_name(split_[i]) << '\n';
  }
  if (!outf) throw IoError("failed writing " + path);
}

Dataset Dataset::load_csv(const std::string& path,
                          const std::vector<int>& bin_counts) {
  const csv::File file = csv::read_file(path);
  const auto& h = file.header;
  const std::size_t ncol = h.size();
  if (ncol < 6 || h[ncol - 5] != "r" || h[ncol - 4] != "y" ||
      h[ncol - 3] != "y_eval" || h[ncol - 2] != "policy" ||
      h[ncol - 1] != "split") {
    throw SchemaError(path + ": not a dataset file (expected trailing "
                             "r,y,y_eval,policy,split columns)");
  }
  const std::size_t d = ncol - 5;

  Dataset::Builder b;
  b.column_names.assign(h.begin(), h.begin() + d);
  b.bin_counts.assign(d, 1);
  for (std::size_t i = 0; i < file.rows.size(); ++i) {
    const auto& cells = file.rows[i];
    const std::size_t line_no = i + 2;
    for (std::size_t f = 0; f < d; ++f) {
      const int bin = static_cast<int>(csv::parse_int(cells[f], line_no));
      if (bin < 0) throw ParseError(path + ": negative bin index");
      b.bins.push_back(bin);
      b.bin_counts[f] = std::max(b.bin_counts[f], bin + 1);
    }
    b.r.push_back(static_cast<std::uint8_t>(
        csv::parse_int(cells[d], line_no)));
    b.y_visible.push_back(
        cells[d + 1].empty()
            ? -1
            : static_cast<std::int8_t>(csv::parse_int(cells[d + 1], line_no)));
    b.y_hidden.push_back(
        cells[d + 2].empty()
            ? -1
            : static_cast<std::int8_t>(csv::parse_int(cells[d + 2], line_no)));
    b.policy.push_back(static_cast<int>(csv::parse_int(cells[d + 3], line_no)));
    b.split.push_back(split_from_string(cells[d + 4]));
  }
  if (!bin_counts.empty()) {
    if (bin_counts.size() != d)
      throw SchemaError(path + ": bin_counts size does not match columns");
    for (std::size_t f = 0; f < d; ++f) {
      if (b.bin_counts[f] > bin_counts[f])
        throw ParseError(path + ": bin index exceeds declared bin count");
    }
    b.bin_counts = bin_counts;
  }
  return std::move(b).build();
}

}  // namespace rmt

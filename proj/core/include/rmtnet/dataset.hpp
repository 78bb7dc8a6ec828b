#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rmt {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

/// Where rejected rows go when splits are assigned. In the
/// approval-rejection setting every rejected row lands in the test set; in
/// the approval-only setting rejected rows stay out of the test set (their
/// features and rejection labels remain usable for training).
enum class SplitMode { ApprovalRejection, ApprovalOnly };

const char* split_name(Split s);
Split split_from_string(const std::string& s);

/// Discretized, labeled, split-tagged samples. Immutable after construction.
///
/// Default labels live in two compartments. Approved rows carry an observed
/// label readable through train_label(). Rejected rows may carry a hidden
/// ground-truth label (synthetic settings only) that train_label() refuses
/// to surface; evaluation code reads it through eval_label().
class Dataset {
 public:
  struct Builder {
    std::vector<std::string> column_names;
    std::vector<int> bins;        // row-major n x d
    std::vector<int> bin_counts;  // per feature
    std::vector<std::uint8_t> r;
    std::vector<std::int8_t> y_visible;  // -1 = absent; set on approved rows
    std::vector<std::int8_t> y_hidden;   // -1 = absent; set on rejected rows
    std::vector<int> policy;             // 1..M; empty means all 1
    std::vector<Split> split;            // empty means all Train

    Dataset build() &&;
  };

  std::size_t n_rows() const { return r_.size(); }
  std::size_t n_features() const { return bin_counts_.size(); }
  int n_policies() const { return n_policies_; }
  const std::vector<int>& bin_counts() const { return bin_counts_; }
  const std::vector<std::string>& column_names() const {
    return column_names_;
  }

  std::span<const int> bins(std::size_t i) const {
    return std::span<const int>(bins_).subspan(i * n_features(),
                                               n_features());
  }
  bool rejected(std::size_t i) const { return r_[i] != 0; }
  double rejection_label(std::size_t i) const { return r_[i]; }
  int policy(std::size_t i) const { return policy_[i]; }
  Split split(std::size_t i) const { return split_[i]; }

  /// Observed default label of an approved row. Throws ContractError on a
  /// rejected row: training code has no business reading those labels.
  double train_label(std::size_t i) const;
  bool has_train_label(std::size_t i) const {
    return r_[i] == 0 && y_visible_[i] >= 0;
  }

  /// Ground-truth default label for evaluation, hidden one included.
  std::optional<double> eval_label(std::size_t i) const;
  bool has_hidden_label(std::size_t i) const {
    return r_[i] != 0 && y_hidden_[i] >= 0;
  }

  std::vector<std::size_t> rows_with_split(Split s) const;
  std::vector<std::size_t> approved_rows() const;
  std::vector<std::size_t> rejected_rows() const;

  /// Rows the default/non-default task may train on: approved train rows.
  std::vector<std::size_t> default_task_rows() const;

  /// Rows the rejection/approval task may train on: train rows plus all
  /// rejected rows (rejection labels are policy outputs, known for every
  /// application regardless of its evaluation split).
  std::vector<std::size_t> rejection_task_rows() const;

  /// Copy with fresh split tags: approved rows 60/20/20 train/val/test,
  /// rejected rows per `mode`. Deterministic in `seed`.
  Dataset assign_splits(std::uint64_t seed, SplitMode mode) const;

  /// Copy with the hidden labels of rejected rows permuted among themselves.
  /// Exists so tests can demonstrate training never reads them.
  Dataset with_permuted_hidden_labels(std::uint64_t seed) const;

  void save_csv(const std::string& path) const;

  /// `bin_counts`, when given, overrides the per-feature bin counts inferred
  /// from the file (the file may not witness every bin of the discretizer).
  static Dataset load_csv(const std::string& path,
                          const std::vector<int>& bin_counts = {});

 private:
  std::vector<std::string> column_names_;
  std::vector<int> bins_;
  std::vector<int> bin_counts_;
  std::vector<std::uint8_t> r_;
  std::vector<std::int8_t> y_visible_;
  std::vector<std::int8_t> y_hidden_;
  std::vector<int> policy_;
  std::vector<Split> split_;
  int n_policies_ = 1;

  friend struct Builder;
};

}  // namespace rmt

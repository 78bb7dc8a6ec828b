#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rmtnet/dataset.hpp"
#include "rmtnet/metrics.hpp"
#include "rmtnet/model_config.hpp"
#include "rmtnet/nn.hpp"

namespace rmt::models {

/// Reject-aware multi-task network. One shared embedding feeds M
/// rejection/approval towers (one per policy) and a single default/non-default
/// tower. At every hidden layer j a scalar gate
/// g_m = sigmoid(alpha_m_j * p_m + beta_m_j), driven by policy m's predicted
/// rejection probability p_m, controls how much of that tower's layer-j
/// representation is added into the default tower:
///
///   q_j = relu(q_{j-1} W_j + b_j) + sum_m g_m_j * p_m_j .
///
/// M = 1 is the single-policy model; the multi-policy variant differs only in
/// M and in the per-policy loss masking.
class RmtNet {
 public:
  RmtNet(std::vector<int> bin_counts, const ModelConfig& cfg);

  struct RowOutput {
    std::vector<double> rejection_prob;  // one per policy
    double default_prob = 0.0;
  };

  /// Scratch space for a forward/backward pass; reusable across rows.
  struct Workspace {
    std::vector<double> embed;                            // dk
    std::vector<std::vector<std::vector<double>>> p_pre;  // [m][j-1]
    std::vector<std::vector<std::vector<double>>> p_post; // [m][j-1]
    std::vector<std::vector<double>> q_pre;               // [j-1]
    std::vector<std::vector<double>> q_post;              // [j-1]
    std::vector<std::vector<double>> gate;                // [m][j-1], j<t
    std::vector<double> p_t;                              // [m]
    double q_t = 0.0;
    // backward buffers
    std::vector<std::vector<double>> dq_post;              // [j-1]
    std::vector<std::vector<std::vector<double>>> dp_post; // [m][j-1]
    std::vector<double> dembed;
    std::vector<double> pre_buf;
  };

  Workspace make_workspace() const;

  /// Concatenation of the d looked-up k-vectors, length d*k.
  void embed_row(std::span<const int> bins, std::span<double> out) const;

  void forward(std::span<const int> bins, Workspace& ws) const;
  RowOutput predict_row(std::span<const int> bins) const;

  struct LossParts {
    double total = 0.0;
    double rejection = 0.0;  // L1 (unscaled sum)
    double default_ = 0.0;   // L2 (unscaled sum)
  };

  /// Loss over the given rows: L = (1-eta) * L1 / M + eta * L2, where L1
  /// sums bce(p_m(i), r_i) through each sample's own policy head and L2 sums
  /// bce(q, y_i) over approved rows only. Rejected rows never have their
  /// default labels read. When `grads` is non-empty, analytic gradients are
  /// accumulated into it (size must match parameter count).
  LossParts loss_and_grad(const Dataset& ds,
                          std::span<const std::size_t> rows,
                          std::span<double> grads, Workspace& ws) const;

  /// Trains on the dataset's rejection-task pool (train rows plus all
  /// rejected rows) with early stopping on the KS of the default score over
  /// approved validation rows. Returns the log; parameters end at the best
  /// validation epoch.
  TrainLog fit(const Dataset& ds);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<int>& bin_counts() const { return bin_counts_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  double gate_alpha(int policy_m, int layer_j) const;
  double gate_beta(int policy_m, int layer_j) const;
  /// Gate parameters indexed [policy][layer], for gate-curve extraction.
  std::vector<std::vector<eval::GateParams>> gate_params() const;

 private:
  ModelConfig cfg_;
  std::vector<int> bin_counts_;
  std::vector<std::size_t> widths_;  // widths_[0] = d*k, ..., widths_[t] = 1
  nn::ParamStore params_;

  std::vector<nn::ParamView> embed_;             // per feature
  std::vector<std::vector<nn::ParamView>> ra_w_; // [m][j-1]
  std::vector<std::vector<nn::ParamView>> ra_b_;
  std::vector<nn::ParamView> dn_w_;              // [j-1]
  std::vector<nn::ParamView> dn_b_;
  std::vector<std::vector<nn::ParamView>> gate_a_; // [m][j-1], j<t
  std::vector<std::vector<nn::ParamView>> gate_b_;

  void check_bins(std::span<const int> bins) const;
};

}  // namespace rmt::models

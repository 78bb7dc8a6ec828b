#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rmtnet/dataset.hpp"
#include "rmtnet/model_config.hpp"
#include "rmtnet/nn.hpp"

namespace rmt::models {

/// Embedding plus a plain dense stack ending in a sigmoid unit. With one
/// layer this is logistic regression on the embedded bins; with cfg.t layers
/// it is the MLP baseline (the default tower topology, gates removed).
class FeedForward {
 public:
  FeedForward(std::vector<int> bin_counts, const ModelConfig& cfg,
              int n_layers);

  struct Workspace {
    std::vector<double> embed;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
    std::vector<std::vector<double>> dpost;
    std::vector<double> dembed;
    std::vector<double> pre_buf;
  };
  Workspace make_workspace() const;

  double forward(std::span<const int> bins, Workspace& ws) const;
  double predict_row(std::span<const int> bins) const;

  /// Weighted BCE over (rows, labels, weights) triples addressed by
  /// positions given in `pos`.
  double loss_and_grad(const Dataset& ds,
                       std::span<const std::size_t> pos,
                       std::span<const std::size_t> rows,
                       std::span<const double> labels,
                       std::span<const double> weights,
                       std::span<double> grads, Workspace& ws) const;

  /// Early stopping follows the KS of the score on approved validation rows
  /// (falls back to training loss when validation is unusable or when
  /// `validate_on_default_labels` is false, as for the propensity model
  /// whose target is the rejection label).
  TrainLog fit(const Dataset& ds, const std::vector<std::size_t>& rows,
               const std::vector<double>& labels,
               const std::vector<double>& weights, const std::string& phase,
               bool validate_on_default_labels = true);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<int>& bin_counts() const { return bin_counts_; }
  int n_layers() const { return static_cast<int>(w_.size()); }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  ModelConfig cfg_;
  std::vector<int> bin_counts_;
  std::vector<std::size_t> widths_;
  nn::ParamStore params_;
  std::vector<nn::ParamView> embed_, w_, b_;
};

/// Logistic-regression baseline: trains on approved train rows only.
FeedForward fit_lr(const Dataset& ds, const ModelConfig& cfg, TrainLog* log);

/// MLP baseline: default-tower topology without gates, approved train rows.
FeedForward fit_mlp(const Dataset& ds, const ModelConfig& cfg, TrainLog* log);

/// Pool evolution of a self-training run: which rejected rows were
/// pseudo-labeled in each round.
struct StTrace {
  std::vector<std::vector<std::size_t>> added_per_round;
};

/// Self-training: per round, score the untouched rejected rows with the
/// current model, pseudo-label the top ceil(st_add_fraction * n_rejected) as
/// defaults, retrain from scratch on the grown pool. cfg.st_rounds rounds,
/// rounds = 0 reduces to the base learner.
FeedForward fit_self_training(const Dataset& ds, const ModelConfig& cfg,
                              TrainLog* log, StTrace* trace = nullptr);

/// Inverse-propensity weighting: a logistic model for P(reject|x) is fitted
/// on every row, then approved train rows are reweighted by
/// clip(1/(1 - p_hat), 1, ips_weight_clip) and the base learner minimizes
/// the weighted BCE.
FeedForward fit_ips(const Dataset& ds, const ModelConfig& cfg, TrainLog* log,
                    std::vector<double>* weights_out = nullptr);

}  // namespace rmt::models

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rmt::models {

struct ModelConfig {
  int k = 4;        // embedding dimensionality per feature
  int hidden = 16;  // width of hidden layers
  int t = 2;        // layer count per tower, final layer included (t >= 2)
  double eta = 0.3; // balance between the rejection and default losses
  double learning_rate = 0.001;
  int epochs = 500;
  int patience = 10;    // early-stopping window, in epochs
  int min_epochs = 0;   // epochs to run before early stopping may engage
  int batch = 0;        // minibatch size; 0 = full batch
  std::uint64_t seed = 0;
  int n_policies = 1;  // M
  // When false, the default-task gradient does not flow into the rejection
  // towers through the gate argument p(t); flow through the shared layer
  // representations is unaffected.
  bool share_gradient_through_gate = true;
  // When false (ablation), every rejection head trains on every row instead
  // of only the rows of its own policy.
  bool per_policy_strict_masking = true;

  // baseline knobs
  int st_rounds = 5;
  double st_add_fraction = 0.02;
  double ips_weight_clip = 20.0;
  std::string base_learner = "mlp";  // base for self-training and IPS

  void validate() const;
};

/// One logged training epoch.
struct EpochLog {
  std::string phase;  // "fit", "st-round-2", "propensity", ...
  int epoch = 0;
  double loss = 0.0;
  double loss_rejection = 0.0;  // L1
  double loss_default = 0.0;    // L2
  double val_ks = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_ks = 0.0;
};

}  // namespace rmt::models

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rmtnet/model_config.hpp"

namespace rmt::models::detail {

struct BatchLoss {
  double total = 0.0;
  double rejection = 0.0;
  double default_ = 0.0;
};

/// Shared optimizer loop: adaptive-moment steps over the pool (full batch or
/// seeded-shuffle minibatches), one validation probe per epoch, early
/// stopping after `patience` epochs without improvement, and restoration of
/// the best-validation parameter snapshot. When `val_metric` is empty the
/// negative training loss stands in as the improvement metric.
TrainLog run_training(
    std::vector<double>& param_values, const ModelConfig& cfg,
    std::span<const std::size_t> pool,
    const std::function<BatchLoss(std::span<const std::size_t>,
                                  std::span<double>)>& loss_grad,
    const std::function<double()>& val_metric, const std::string& phase);

}  // namespace rmt::models::detail

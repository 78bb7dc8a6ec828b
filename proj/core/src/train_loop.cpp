#include "rmtnet/train_loop.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

#include "rmtnet/error.hpp"
#include "rmtnet/nn.hpp"
#include "rmtnet/rng.hpp"

namespace rmt::models::detail {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

TrainLog run_training(
    std::vector<double>& param_values, const ModelConfig& cfg,
    std::span<const std::size_t> pool,
    const std::function<BatchLoss(std::span<const std::size_t>,
                                  std::span<double>)>& loss_grad,
    const std::function<double()>& val_metric, const std::string& phase) {
  if (pool.empty()) throw ConfigError("run_training: empty training pool");

  nn::Adam adam(param_values.size(), cfg.learning_rate);
  std::vector<double> grads(param_values.size(), 0.0);
  std::vector<std::size_t> order(pool.begin(), pool.end());
  Rng shuffle_rng(cfg.seed * 1000003ull + fnv1a(phase));

  TrainLog log;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> best_params = param_values;
  int bad_epochs = 0;

  const std::size_t batch =
      cfg.batch > 0 ? static_cast<std::size_t>(cfg.batch) : order.size();
  // a warmup spanning every epoch would restore the untrained init
  const int warmup = std::min(cfg.min_epochs, cfg.epochs - 1);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.batch > 0) shuffle_rng.shuffle(order);
    BatchLoss epoch_loss;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(begin + batch, order.size());
      std::fill(grads.begin(), grads.end(), 0.0);
      const BatchLoss bl = loss_grad(
          std::span<const std::size_t>(order).subspan(begin, end - begin),
          grads);
      adam.step(param_values, grads);
      epoch_loss.total += bl.total;
      epoch_loss.rejection += bl.rejection;
      epoch_loss.default_ += bl.default_;
    }

    const bool have_val = static_cast<bool>(val_metric);
    const double metric = have_val ? val_metric() : -epoch_loss.total;

    EpochLog e;
    e.phase = phase;
    e.epoch = epoch;
    e.loss = epoch_loss.total;
    e.loss_rejection = epoch_loss.rejection;
    e.loss_default = epoch_loss.default_;
    e.val_ks = have_val ? metric : 0.0;
    log.epochs.push_back(e);

    // the warmup window is exempt from best-tracking and patience, so a
    // lucky metric spike on a barely-trained model cannot win
    if (epoch <= warmup) continue;
    if (metric > best) {
      best = metric;
      best_params = param_values;
      log.best_epoch = epoch;
      log.best_val_ks = have_val ? metric : 0.0;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (cfg.patience > 0 && bad_epochs >= cfg.patience) break;
    }
  }

  param_values = best_params;
  return log;
}

}  // namespace rmt::models::detail

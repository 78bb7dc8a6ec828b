#include "rmtnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmtnet/error.hpp"
#include "rmtnet/metrics.hpp"
#include "rmtnet/train_loop.hpp"

namespace rmt::models {

FeedForward::FeedForward(std::vector<int> bin_counts, const ModelConfig& cfg,
                         int n_layers)
    : cfg_(cfg), bin_counts_(std::move(bin_counts)) {
  if (n_layers < 1) throw ConfigError("FeedForward: need at least one layer");
  const std::size_t d = bin_counts_.size();
  if (d == 0) throw ConfigError("FeedForward: no features");
  const std::size_t L = static_cast<std::size_t>(n_layers);

  widths_.resize(L + 1);
  widths_[0] = d * static_cast<std::size_t>(cfg_.k);
  for (std::size_t j = 1; j < L; ++j)
    widths_[j] = static_cast<std::size_t>(cfg_.hidden);
  widths_[L] = 1;

  for (std::size_t f = 0; f < d; ++f) {
    embed_.push_back(params_.add("embed.f" + std::to_string(f),
                                 static_cast<std::size_t>(bin_counts_[f]),
                                 static_cast<std::size_t>(cfg_.k)));
  }
  for (std::size_t j = 1; j <= L; ++j) {
    w_.push_back(
        params_.add("W" + std::to_string(j), widths_[j - 1], widths_[j]));
    b_.push_back(params_.add("b" + std::to_string(j), 1, widths_[j]));
  }

  Rng rng(cfg_.seed);
  for (std::size_t f = 0; f < d; ++f)
    nn::glorot_init(params_.data(embed_[f]),
                    static_cast<std::size_t>(bin_counts_[f]),
                    static_cast<std::size_t>(cfg_.k), rng);
  for (std::size_t j = 0; j < L; ++j)
    nn::glorot_init(params_.data(w_[j]), widths_[j], widths_[j + 1], rng);
}

FeedForward::Workspace FeedForward::make_workspace() const {
  Workspace ws;
  const std::size_t L = w_.size();
  ws.embed.resize(widths_[0]);
  ws.dembed.resize(widths_[0]);
  ws.pre.resize(L);
  ws.post.resize(L);
  ws.dpost.resize(L);
  for (std::size_t j = 0; j < L; ++j) {
    ws.pre[j].resize(widths_[j + 1]);
    ws.post[j].resize(widths_[j + 1]);
    ws.dpost[j].resize(widths_[j + 1]);
  }
  std::size_t widest = 1;
  for (std::size_t w : widths_) widest = std::max(widest, w);
  ws.pre_buf.resize(widest);
  return ws;
}

double FeedForward::forward(std::span<const int> bins, Workspace& ws) const {
  if (bins.size() != bin_counts_.size())
    throw ContractError("FeedForward: feature count mismatch");
  const std::size_t k = static_cast<std::size_t>(cfg_.k);
  for (std::size_t f = 0; f < bins.size(); ++f) {
    if (bins[f] < 0 || bins[f] >= bin_counts_[f])
      throw ContractError("FeedForward: bin index out of range");
    const auto table = params_.data(embed_[f]);
    const double* src = table.data() + static_cast<std::size_t>(bins[f]) * k;
    std::copy(src, src + k, ws.embed.data() + f * k);
  }
  const std::size_t L = w_.size();
  std::span<const double> x(ws.embed);
  for (std::size_t j = 0; j < L; ++j) {
    const auto act =
        j + 1 < L ? nn::Activation::Relu : nn::Activation::Sigmoid;
    nn::affine_forward(x, params_.data(w_[j]), params_.data(b_[j]), act,
                       std::span<double>(ws.pre[j]),
                       std::span<double>(ws.post[j]));
    x = std::span<const double>(ws.post[j]);
  }
  return ws.post[L - 1][0];
}

double FeedForward::predict_row(std::span<const int> bins) const {
  Workspace ws = make_workspace();
  return forward(bins, ws);
}

double FeedForward::loss_and_grad(const Dataset& ds,
                                  std::span<const std::size_t> pos,
                                  std::span<const std::size_t> rows,
                                  std::span<const double> labels,
                                  std::span<const double> weights,
                                  std::span<double> grads,
                                  Workspace& ws) const {
  const bool want_grads = !grads.empty();
  const std::size_t L = w_.size();
  const std::size_t k = static_cast<std::size_t>(cfg_.k);
  double loss = 0.0;

  auto grad_of = [&](const nn::ParamView& v) {
    return grads.subspan(v.offset, v.size());
  };

  for (std::size_t p : pos) {
    const std::size_t row = rows[p];
    const double y = labels[p];
    const double wgt = weights.empty() ? 1.0 : weights[p];
    const auto bins = ds.bins(row);
    const double pred = forward(bins, ws);
    loss += wgt * nn::bce(pred, y);
    if (!want_grads) continue;

    std::fill(ws.dembed.begin(), ws.dembed.end(), 0.0);
    for (std::size_t j = 0; j < L; ++j)
      std::fill(ws.dpost[j].begin(), ws.dpost[j].end(), 0.0);

    const double dz[1] = {wgt * nn::bce_sigmoid_dz(pred, y)};
    {
      const std::span<const double> x =
          L == 1 ? std::span<const double>(ws.embed)
                 : std::span<const double>(ws.post[L - 2]);
      std::span<double> dx = L == 1 ? std::span<double>(ws.dembed)
                                    : std::span<double>(ws.dpost[L - 2]);
      nn::affine_backward(x, params_.data(w_[L - 1]), nn::Activation::None,
                          std::span<const double>(ws.pre[L - 1]),
                          std::span<const double>(dz, 1),
                          std::span<double>(ws.pre_buf.data(), 1),
                          grad_of(w_[L - 1]), grad_of(b_[L - 1]), dx);
    }
    for (std::size_t j = L - 1; j-- > 0;) {
      const std::span<const double> x =
          j == 0 ? std::span<const double>(ws.embed)
                 : std::span<const double>(ws.post[j - 1]);
      std::span<double> dx = j == 0 ? std::span<double>(ws.dembed)
                                    : std::span<double>(ws.dpost[j - 1]);
      nn::affine_backward(x, params_.data(w_[j]), nn::Activation::Relu,
                          std::span<const double>(ws.pre[j]),
                          std::span<const double>(ws.dpost[j]),
                          std::span<double>(ws.pre_buf.data(),
                                            ws.dpost[j].size()),
                          grad_of(w_[j]), grad_of(b_[j]), dx);
    }
    for (std::size_t f = 0; f < bins.size(); ++f) {
      auto gtable = grad_of(embed_[f]);
      double* dst = gtable.data() + static_cast<std::size_t>(bins[f]) * k;
      const double* src = ws.dembed.data() + f * k;
      for (std::size_t c = 0; c < k; ++c) dst[c] += src[c];
    }
  }
  return loss;
}

TrainLog FeedForward::fit(const Dataset& ds,
                          const std::vector<std::size_t>& rows,
                          const std::vector<double>& labels,
                          const std::vector<double>& weights,
                          const std::string& phase,
                          bool validate_on_default_labels) {
  if (rows.empty()) throw ConfigError("FeedForward::fit: empty pool");
  std::vector<std::size_t> pos(rows.size());
  std::iota(pos.begin(), pos.end(), 0);

  Workspace ws = make_workspace();
  auto loss_grad = [&](std::span<const std::size_t> batch,
                       std::span<double> grads) {
    const double l =
        loss_and_grad(ds, batch, rows, labels, weights, grads, ws);
    return detail::BatchLoss{l, 0.0, l};
  };

  std::vector<std::size_t> val_rows;
  if (validate_on_default_labels) {
    for (std::size_t i : ds.rows_with_split(Split::Val))
      if (!ds.rejected(i)) val_rows.push_back(i);
  }
  std::function<double()> val_metric;
  if (!val_rows.empty()) {
    bool posl = false, negl = false;
    for (std::size_t i : val_rows)
      (ds.train_label(i) > 0.5 ? posl : negl) = true;
    if (posl && negl) {
      val_metric = [this, &ds, val_rows, &ws]() {
        std::vector<double> scores(val_rows.size()), ys(val_rows.size());
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
          scores[i] = forward(ds.bins(val_rows[i]), ws);
          ys[i] = ds.train_label(val_rows[i]);
        }
        return eval::ks(scores, ys);
      };
    }
  }

  return detail::run_training(params_.values(), cfg_, pos, loss_grad,
                              val_metric, phase);
}

namespace {

void append_log(TrainLog* dst, const TrainLog& src) {
  if (!dst) return;
  dst->epochs.insert(dst->epochs.end(), src.epochs.begin(), src.epochs.end());
  dst->best_epoch = src.best_epoch;
  dst->best_val_ks = src.best_val_ks;
}

FeedForward fit_plain(const Dataset& ds, const ModelConfig& cfg,
                      int n_layers, TrainLog* log, const std::string& phase) {
  const std::vector<std::size_t> rows = ds.default_task_rows();
  if (rows.empty())
    throw ConfigError("baseline fit: no approved training rows");
  std::vector<double> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    labels[i] = ds.train_label(rows[i]);
  FeedForward model(ds.bin_counts(), cfg, n_layers);
  append_log(log, model.fit(ds, rows, labels, {}, phase));
  return model;
}

int base_layer_count(const ModelConfig& cfg) {
  if (cfg.base_learner == "lr") return 1;
  if (cfg.base_learner == "mlp") return cfg.t;
  throw ConfigError("base_learner must be 'lr' or 'mlp', got '" +
                    cfg.base_learner + "'");
}

}  // namespace

FeedForward fit_lr(const Dataset& ds, const ModelConfig& cfg, TrainLog* log) {
  return fit_plain(ds, cfg, 1, log, "fit");
}

FeedForward fit_mlp(const Dataset& ds, const ModelConfig& cfg,
                    TrainLog* log) {
  return fit_plain(ds, cfg, cfg.t, log, "fit");
}

FeedForward fit_self_training(const Dataset& ds, const ModelConfig& cfg,
                              TrainLog* log, StTrace* trace) {
  const int n_layers = base_layer_count(cfg);
  std::vector<std::size_t> rows = ds.default_task_rows();
  if (rows.empty())
    throw ConfigError("fit_self_training: no approved training rows");
  std::vector<double> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    labels[i] = ds.train_label(rows[i]);

  std::vector<std::size_t> remaining = ds.rejected_rows();
  const std::size_t n_add = static_cast<std::size_t>(
      std::ceil(cfg.st_add_fraction * static_cast<double>(remaining.size())));

  FeedForward model(ds.bin_counts(), cfg, n_layers);
  append_log(log, model.fit(ds, rows, labels, {}, "st-round-0"));

  for (int round = 1; round <= cfg.st_rounds; ++round) {
    if (remaining.empty() || n_add == 0) break;
    // score the untouched rejected rows and pseudo-label the riskiest
    FeedForward::Workspace ws = model.make_workspace();
    std::vector<double> scores(remaining.size());
    for (std::size_t i = 0; i < remaining.size(); ++i)
      scores[i] = model.forward(ds.bins(remaining[i]), ws);
    std::vector<std::size_t> rank(remaining.size());
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) {
                       return scores[a] > scores[b];
                     });
    const std::size_t take = std::min(n_add, remaining.size());
    std::vector<bool> taken(remaining.size(), false);
    std::vector<std::size_t> added;
    for (std::size_t i = 0; i < take; ++i) {
      rows.push_back(remaining[rank[i]]);
      labels.push_back(1.0);
      taken[rank[i]] = true;
      added.push_back(remaining[rank[i]]);
    }
    if (trace) trace->added_per_round.push_back(std::move(added));
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < remaining.size(); ++i)
      if (!taken[i]) next.push_back(remaining[i]);
    remaining = std::move(next);

    model = FeedForward(ds.bin_counts(), cfg, n_layers);
    append_log(log,
               model.fit(ds, rows, labels, {},
                         "st-round-" + std::to_string(round)));
  }
  return model;
}

FeedForward fit_ips(const Dataset& ds, const ModelConfig& cfg, TrainLog* log,
                    std::vector<double>* weights_out) {
  const int n_layers = base_layer_count(cfg);

  // propensity: logistic model for P(reject | x) over every row
  std::vector<std::size_t> all_rows(ds.n_rows());
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<double> r_labels(all_rows.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i)
    r_labels[i] = ds.rejection_label(all_rows[i]);
  FeedForward propensity(ds.bin_counts(), cfg, 1);
  append_log(log,
             propensity.fit(ds, all_rows, r_labels, {}, "propensity", false));

  const std::vector<std::size_t> rows = ds.default_task_rows();
  if (rows.empty()) throw ConfigError("fit_ips: no approved training rows");
  std::vector<double> labels(rows.size()), weights(rows.size());
  FeedForward::Workspace ws = propensity.make_workspace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    labels[i] = ds.train_label(rows[i]);
    const double p_rej = propensity.forward(ds.bins(rows[i]), ws);
    const double w = 1.0 / std::max(1.0 - p_rej, 1e-12);
    weights[i] = std::min(std::max(w, 1.0), cfg.ips_weight_clip);
  }
  if (weights_out) *weights_out = weights;

  FeedForward model(ds.bin_counts(), cfg, n_layers);
  append_log(log, model.fit(ds, rows, labels, weights, "fit"));
  return model;
}

}  // namespace rmt::models

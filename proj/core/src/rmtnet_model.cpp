#include "rmtnet/rmtnet_model.hpp"

#include <algorithm>
#include <cmath>

#include "rmtnet/error.hpp"
#include "rmtnet/train_loop.hpp"

namespace rmt::models {

void ModelConfig::validate() const {
  if (t < 2) throw ConfigError("ModelConfig: t must be >= 2");
  // eta = 1 is allowed as the pure-default-loss limit
  if (!(eta > 0.0) || eta > 1.0)
    throw ConfigError("ModelConfig: eta must be in (0,1]");
  if (n_policies < 1) throw ConfigError("ModelConfig: M must be >= 1");
  if (k < 1) throw ConfigError("ModelConfig: k must be >= 1");
  if (hidden < 1) throw ConfigError("ModelConfig: hidden must be >= 1");
  if (learning_rate <= 0.0)
    throw ConfigError("ModelConfig: learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("ModelConfig: epochs must be >= 1");
  if (min_epochs < 0)
    throw ConfigError("ModelConfig: min_epochs must be >= 0");
  if (batch < 0) throw ConfigError("ModelConfig: batch must be >= 0");
  if (st_rounds < 0) throw ConfigError("ModelConfig: st_rounds must be >= 0");
  if (st_add_fraction < 0.0 || st_add_fraction > 1.0)
    throw ConfigError("ModelConfig: st_add_fraction must be in [0,1]");
  if (ips_weight_clip < 1.0)
    throw ConfigError("ModelConfig: ips_weight_clip must be >= 1");
  if (base_learner != "lr" && base_learner != "mlp")
    throw ConfigError("ModelConfig: base_learner must be 'lr' or 'mlp'");
}

RmtNet::RmtNet(std::vector<int> bin_counts, const ModelConfig& cfg)
    : cfg_(cfg), bin_counts_(std::move(bin_counts)) {
  cfg_.validate();
  const std::size_t d = bin_counts_.size();
  if (d == 0) throw ConfigError("RmtNet: no features");
  const std::size_t t = static_cast<std::size_t>(cfg_.t);
  const std::size_t M = static_cast<std::size_t>(cfg_.n_policies);

  widths_.resize(t + 1);
  widths_[0] = d * static_cast<std::size_t>(cfg_.k);
  for (std::size_t j = 1; j < t; ++j)
    widths_[j] = static_cast<std::size_t>(cfg_.hidden);
  widths_[t] = 1;

  for (std::size_t f = 0; f < d; ++f) {
    embed_.push_back(params_.add("embed.f" + std::to_string(f),
                                 static_cast<std::size_t>(bin_counts_[f]),
                                 static_cast<std::size_t>(cfg_.k)));
  }
  ra_w_.resize(M);
  ra_b_.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 1; j <= t; ++j) {
      const std::string tag = std::to_string(m + 1);
      ra_w_[m].push_back(params_.add(
          "ra" + tag + ".W" + std::to_string(j), widths_[j - 1], widths_[j]));
      ra_b_[m].push_back(
          params_.add("ra" + tag + ".b" + std::to_string(j), 1, widths_[j]));
    }
  }
  for (std::size_t j = 1; j <= t; ++j) {
    dn_w_.push_back(
        params_.add("dn.W" + std::to_string(j), widths_[j - 1], widths_[j]));
    dn_b_.push_back(
        params_.add("dn.b" + std::to_string(j), 1, widths_[j]));
  }
  gate_a_.resize(M);
  gate_b_.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 1; j < t; ++j) {
      const std::string tag = std::to_string(m + 1);
      gate_a_[m].push_back(
          params_.add("gate" + tag + ".alpha" + std::to_string(j), 1, 1));
      gate_b_[m].push_back(
          params_.add("gate" + tag + ".beta" + std::to_string(j), 1, 1));
    }
  }

  // seeded init: Glorot-uniform weights and embedding tables, zero biases,
  // gates start at g(p) = sigmoid(p), leaning on the rejection signal
  Rng rng(cfg_.seed);
  for (std::size_t f = 0; f < d; ++f) {
    nn::glorot_init(params_.data(embed_[f]),
                    static_cast<std::size_t>(bin_counts_[f]),
                    static_cast<std::size_t>(cfg_.k), rng);
  }
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t j = 0; j < t; ++j)
      nn::glorot_init(params_.data(ra_w_[m][j]), widths_[j], widths_[j + 1],
                      rng);
  for (std::size_t j = 0; j < t; ++j)
    nn::glorot_init(params_.data(dn_w_[j]), widths_[j], widths_[j + 1], rng);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t j = 0; j + 1 < t; ++j) {
      params_.data(gate_a_[m][j])[0] = 1.0;
      params_.data(gate_b_[m][j])[0] = 0.0;
    }
}

RmtNet::Workspace RmtNet::make_workspace() const {
  Workspace ws;
  const std::size_t t = static_cast<std::size_t>(cfg_.t);
  const std::size_t M = static_cast<std::size_t>(cfg_.n_policies);
  ws.embed.resize(widths_[0]);
  ws.dembed.resize(widths_[0]);
  ws.p_pre.resize(M);
  ws.p_post.resize(M);
  ws.dp_post.resize(M);
  ws.gate.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    ws.p_pre[m].resize(t);
    ws.p_post[m].resize(t);
    ws.dp_post[m].resize(t);
    for (std::size_t j = 0; j < t; ++j) {
      ws.p_pre[m][j].resize(widths_[j + 1]);
      ws.p_post[m][j].resize(widths_[j + 1]);
      ws.dp_post[m][j].resize(widths_[j + 1]);
    }
    ws.gate[m].resize(t - 1);
  }
  ws.q_pre.resize(t);
  ws.q_post.resize(t);
  ws.dq_post.resize(t);
  for (std::size_t j = 0; j < t; ++j) {
    ws.q_pre[j].resize(widths_[j + 1]);
    ws.q_post[j].resize(widths_[j + 1]);
    ws.dq_post[j].resize(widths_[j + 1]);
  }
  ws.p_t.resize(M);
  std::size_t widest = 1;
  for (std::size_t w : widths_) widest = std::max(widest, w);
  ws.pre_buf.resize(widest);
  return ws;
}

void RmtNet::check_bins(std::span<const int> bins) const {
  if (bins.size() != bin_counts_.size())
    throw ContractError("RmtNet: feature count mismatch");
  for (std::size_t f = 0; f < bins.size(); ++f)
    if (bins[f] < 0 || bins[f] >= bin_counts_[f])
      throw ContractError("RmtNet: bin index out of range for feature " +
                          std::to_string(f));
}

void RmtNet::embed_row(std::span<const int> bins,
                       std::span<double> out) const {
  const std::size_t k = static_cast<std::size_t>(cfg_.k);
  for (std::size_t f = 0; f < bins.size(); ++f) {
    const auto table = params_.data(embed_[f]);
    const double* src = table.data() + static_cast<std::size_t>(bins[f]) * k;
    std::copy(src, src + k, out.data() + f * k);
  }
}

void RmtNet::forward(std::span<const int> bins, Workspace& ws) const {
  check_bins(bins);
  const std::size_t t = static_cast<std::size_t>(cfg_.t);
  const std::size_t M = static_cast<std::size_t>(cfg_.n_policies);
  embed_row(bins, ws.embed);

  for (std::size_t m = 0; m < M; ++m) {
    std::span<const double> x(ws.embed);
    for (std::size_t j = 0; j < t; ++j) {
      const auto act = j + 1 < t ? nn::Activation::Relu
                                 : nn::Activation::Sigmoid;
      nn::affine_forward(x, params_.data(ra_w_[m][j]),
                         params_.data(ra_b_[m][j]), act,
                         std::span<double>(ws.p_pre[m][j]),
                         std::span<double>(ws.p_post[m][j]));
      x = std::span<const double>(ws.p_post[m][j]);
    }
    ws.p_t[m] = ws.p_post[m][t - 1][0];
  }

  std::span<const double> qx(ws.embed);
  for (std::size_t j = 0; j + 1 < t; ++j) {
    nn::affine_forward(qx, params_.data(dn_w_[j]), params_.data(dn_b_[j]),
                       nn::Activation::Relu, std::span<double>(ws.q_pre[j]),
                       std::span<double>(ws.q_post[j]));
    for (std::size_t m = 0; m < M; ++m) {
      const double g = nn::sigmoid(params_.data(gate_a_[m][j])[0] * ws.p_t[m] +
                                   params_.data(gate_b_[m][j])[0]);
      ws.gate[m][j] = g;
      const auto& pm = ws.p_post[m][j];
      for (std::size_t o = 0; o < ws.q_post[j].size(); ++o)
        ws.q_post[j][o] += g * pm[o];
    }
    qx = std::span<const double>(ws.q_post[j]);
  }
  nn::affine_forward(qx, params_.data(dn_w_[t - 1]),
                     params_.data(dn_b_[t - 1]), nn::Activation::Sigmoid,
                     std::span<double>(ws.q_pre[t - 1]),
                     std::span<double>(ws.q_post[t - 1]));
  ws.q_t = ws.q_post[t - 1][0];
}

RmtNet::RowOutput RmtNet::predict_row(std::span<const int> bins) const {
  Workspace ws = make_workspace();
  forward(bins, ws);
  RowOutput out;
  out.rejection_prob = ws.p_t;
  out.default_prob = ws.q_t;
  return out;
}

RmtNet::LossParts RmtNet::loss_and_grad(const Dataset& ds,
                                        std::span<const std::size_t> rows,
                                        std::span<double> grads,
                                        Workspace& ws) const {
  if (ds.n_policies() > cfg_.n_policies)
    throw ContractError("RmtNet: dataset has more policies than the model");
  const bool want_grads = !grads.empty();
  if (want_grads && grads.size() != params_.size())
    throw ContractError("RmtNet: gradient buffer size mismatch");

  const std::size_t t = static_cast<std::size_t>(cfg_.t);
  const std::size_t M = static_cast<std::size_t>(cfg_.n_policies);
  const double coef_l1 = (1.0 - cfg_.eta) / static_cast<double>(M);
  const double coef_l2 = cfg_.eta;
  const std::size_t k = static_cast<std::size_t>(cfg_.k);

  LossParts parts;
  std::vector<double> dpt_extra(M);

  auto grad_of = [&](const nn::ParamView& v) {
    return grads.subspan(v.offset, v.size());
  };

  for (std::size_t row : rows) {
    const auto bins = ds.bins(row);
    forward(bins, ws);

    const double r = ds.rejection_label(row);
    const int policy = ds.policy(row);
    const bool approved = !ds.rejected(row);
    // Rejected rows never reach train_label(); the mask keeps their hidden
    // labels out of both the loss and the gradient.
    const double y = approved ? ds.train_label(row) : 0.0;

    for (std::size_t m = 0; m < M; ++m) {
      const bool own = static_cast<int>(m) + 1 == policy;
      if (cfg_.per_policy_strict_masking && !own) continue;
      parts.rejection += nn::bce(ws.p_t[m], r);
    }
    if (approved) parts.default_ += nn::bce(ws.q_t, y);

    if (!want_grads) continue;

    // ---- backward ----
    std::fill(ws.dembed.begin(), ws.dembed.end(), 0.0);
    std::fill(dpt_extra.begin(), dpt_extra.end(), 0.0);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t j = 0; j < t; ++j)
        std::fill(ws.dp_post[m][j].begin(), ws.dp_post[m][j].end(), 0.0);
    for (std::size_t j = 0; j < t; ++j)
      std::fill(ws.dq_post[j].begin(), ws.dq_post[j].end(), 0.0);

    // default head (through the final sigmoid)
    const double dz_qt =
        approved ? coef_l2 * nn::bce_sigmoid_dz(ws.q_t, y) : 0.0;
    if (dz_qt != 0.0) {
      const double dz[1] = {dz_qt};
      nn::affine_backward(std::span<const double>(ws.q_post[t - 2]),
                          params_.data(dn_w_[t - 1]), nn::Activation::None,
                          std::span<const double>(ws.q_pre[t - 1]),
                          std::span<const double>(dz, 1),
                          std::span<double>(ws.pre_buf.data(), 1),
                          grad_of(dn_w_[t - 1]), grad_of(dn_b_[t - 1]),
                          std::span<double>(ws.dq_post[t - 2]));
    }

    // default tower hidden layers, top down
    for (std::size_t j = t - 1; j-- > 0;) {
      auto& dq = ws.dq_post[j];
      bool any = false;
      for (double v : dq)
        if (v != 0.0) { any = true; break; }
      if (any) {
        for (std::size_t m = 0; m < M; ++m) {
          const double g = ws.gate[m][j];
          const auto& pm = ws.p_post[m][j];
          double dg = 0.0;
          for (std::size_t o = 0; o < dq.size(); ++o) {
            dg += dq[o] * pm[o];
            ws.dp_post[m][j][o] += g * dq[o];
          }
          const double sg = dg * g * (1.0 - g);
          grad_of(gate_a_[m][j])[0] += sg * ws.p_t[m];
          grad_of(gate_b_[m][j])[0] += sg;
          if (cfg_.share_gradient_through_gate)
            dpt_extra[m] += sg * params_.data(gate_a_[m][j])[0];
        }
        const std::span<const double> x =
            j == 0 ? std::span<const double>(ws.embed)
                   : std::span<const double>(ws.q_post[j - 1]);
        std::span<double> dx =
            j == 0 ? std::span<double>(ws.dembed)
                   : std::span<double>(ws.dq_post[j - 1]);
        nn::affine_backward(x, params_.data(dn_w_[j]), nn::Activation::Relu,
                            std::span<const double>(ws.q_pre[j]),
                            std::span<const double>(dq),
                            std::span<double>(ws.pre_buf.data(), dq.size()),
                            grad_of(dn_w_[j]), grad_of(dn_b_[j]), dx);
      }
    }

    // rejection towers
    for (std::size_t m = 0; m < M; ++m) {
      double dz_pt = 0.0;
      const bool own = static_cast<int>(m) + 1 == policy;
      if (!cfg_.per_policy_strict_masking || own)
        dz_pt += coef_l1 * nn::bce_sigmoid_dz(ws.p_t[m], r);
      // gate-argument route from the default loss
      dz_pt += dpt_extra[m] * ws.p_t[m] * (1.0 - ws.p_t[m]);

      if (dz_pt != 0.0) {
        const double dz[1] = {dz_pt};
        nn::affine_backward(std::span<const double>(ws.p_post[m][t - 2]),
                            params_.data(ra_w_[m][t - 1]),
                            nn::Activation::None,
                            std::span<const double>(ws.p_pre[m][t - 1]),
                            std::span<const double>(dz, 1),
                            std::span<double>(ws.pre_buf.data(), 1),
                            grad_of(ra_w_[m][t - 1]),
                            grad_of(ra_b_[m][t - 1]),
                            std::span<double>(ws.dp_post[m][t - 2]));
      }
      for (std::size_t j = t - 1; j-- > 0;) {
        auto& dp = ws.dp_post[m][j];
        bool any = false;
        for (double v : dp)
          if (v != 0.0) { any = true; break; }
        if (!any) continue;
        const std::span<const double> x =
            j == 0 ? std::span<const double>(ws.embed)
                   : std::span<const double>(ws.p_post[m][j - 1]);
        std::span<double> dx =
            j == 0 ? std::span<double>(ws.dembed)
                   : std::span<double>(ws.dp_post[m][j - 1]);
        nn::affine_backward(x, params_.data(ra_w_[m][j]),
                            nn::Activation::Relu,
                            std::span<const double>(ws.p_pre[m][j]),
                            std::span<const double>(dp),
                            std::span<double>(ws.pre_buf.data(), dp.size()),
                            grad_of(ra_w_[m][j]), grad_of(ra_b_[m][j]), dx);
      }
    }

    // scatter the embedding gradient into the looked-up table rows
    for (std::size_t f = 0; f < bins.size(); ++f) {
      auto gtable = grad_of(embed_[f]);
      double* dst = gtable.data() + static_cast<std::size_t>(bins[f]) * k;
      const double* src = ws.dembed.data() + f * k;
      for (std::size_t c = 0; c < k; ++c) dst[c] += src[c];
    }
  }

  parts.total = coef_l1 * parts.rejection + coef_l2 * parts.default_;
  return parts;
}

TrainLog RmtNet::fit(const Dataset& ds) {
  if (ds.n_policies() != cfg_.n_policies)
    throw ContractError("RmtNet::fit: config M does not match dataset");
  const std::vector<std::size_t> pool = ds.rejection_task_rows();
  if (ds.default_task_rows().empty())
    throw ConfigError("RmtNet::fit: no approved training rows");

  std::vector<std::size_t> val_rows;
  for (std::size_t i : ds.rows_with_split(Split::Val))
    if (!ds.rejected(i)) val_rows.push_back(i);

  Workspace ws = make_workspace();
  auto loss_grad = [&](std::span<const std::size_t> rows,
                       std::span<double> grads) {
    const LossParts p = loss_and_grad(ds, rows, grads, ws);
    return detail::BatchLoss{p.total, p.rejection, p.default_};
  };

  std::function<double()> val_metric;
  if (!val_rows.empty()) {
    bool pos = false, neg = false;
    for (std::size_t i : val_rows) (ds.train_label(i) > 0.5 ? pos : neg) = true;
    if (pos && neg) {
      val_metric = [this, &ds, val_rows, &ws]() {
        std::vector<double> scores(val_rows.size()), labels(val_rows.size());
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
          forward(ds.bins(val_rows[i]), ws);
          scores[i] = ws.q_t;
          labels[i] = ds.train_label(val_rows[i]);
        }
        return eval::ks(scores, labels);
      };
    }
  }

  return detail::run_training(params_.values(), cfg_, pool, loss_grad,
                              val_metric, "fit");
}

double RmtNet::gate_alpha(int policy_m, int layer_j) const {
  return params_.data(gate_a_.at(policy_m - 1).at(layer_j - 1))[0];
}

double RmtNet::gate_beta(int policy_m, int layer_j) const {
  return params_.data(gate_b_.at(policy_m - 1).at(layer_j - 1))[0];
}

std::vector<std::vector<eval::GateParams>> RmtNet::gate_params() const {
  std::vector<std::vector<eval::GateParams>> out(gate_a_.size());
  for (std::size_t m = 0; m < gate_a_.size(); ++m) {
    for (std::size_t j = 0; j < gate_a_[m].size(); ++j) {
      out[m].push_back(eval::GateParams{params_.data(gate_a_[m][j])[0],
                                        params_.data(gate_b_[m][j])[0]});
    }
  }
  return out;
}

}  // namespace rmt::models

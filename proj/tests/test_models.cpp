#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <vector>

#include "rmtnet/baselines.hpp"
#include "rmtnet/dataset.hpp"
#include "rmtnet/error.hpp"
#include "rmtnet/evaluate.hpp"
#include "rmtnet/metrics.hpp"
#include "rmtnet/model_api.hpp"
#include "rmtnet/rmtnet_model.hpp"
#include "rmtnet/rng.hpp"
#include "rmtnet/synth.hpp"

using namespace rmt;
using models::FeedForward;
using models::ModelConfig;
using models::RmtNet;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Independent straight-loop forward pass used as the oracle for the model's
// forward path. Deliberately written from the layer equations, not shared
// with the implementation.
struct NaiveParams {
  std::vector<std::vector<std::vector<double>>> embed;  // [f][bin][k]
  // [m][layer]: row-major (in x out) weights and out-sized biases
  std::vector<std::vector<std::vector<double>>> ra_w;
  std::vector<std::vector<std::vector<double>>> ra_b;
  std::vector<std::vector<double>> dn_w;
  std::vector<std::vector<double>> dn_b;
  std::vector<std::vector<double>> gate_a;  // [m][j]
  std::vector<std::vector<double>> gate_b;
  std::vector<std::size_t> widths;
};

std::vector<double> naive_affine(const std::vector<double>& x,
                                 const std::vector<double>& W,
                                 const std::vector<double>& b) {
  const std::size_t out = b.size();
  const std::size_t in = x.size();
  std::vector<double> z = b;
  for (std::size_t i = 0; i < in; ++i)
    for (std::size_t o = 0; o < out; ++o) z[o] += x[i] * W[i * out + o];
  return z;
}

struct NaiveOut {
  std::vector<double> p_t;
  double q_t;
};

NaiveOut naive_rmt_forward(const NaiveParams& np,
                           const std::vector<int>& bins) {
  const std::size_t M = np.ra_w.size();
  const std::size_t t = np.dn_w.size();
  const std::size_t k = np.embed[0][0].size();
  std::vector<double> e;
  for (std::size_t f = 0; f < bins.size(); ++f)
    for (std::size_t c = 0; c < k; ++c)
      e.push_back(np.embed[f][static_cast<std::size_t>(bins[f])][c]);

  std::vector<std::vector<std::vector<double>>> p(M);
  std::vector<double> p_t(M);
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<double> x = e;
    for (std::size_t j = 0; j < t; ++j) {
      std::vector<double> z = naive_affine(x, np.ra_w[m][j], np.ra_b[m][j]);
      if (j + 1 < t) {
        for (auto& v : z) v = std::max(0.0, v);
      } else {
        for (auto& v : z) v = sig(v);
      }
      p[m].push_back(z);
      x = z;
    }
    p_t[m] = p[m].back()[0];
  }

  std::vector<double> q = e;
  for (std::size_t j = 0; j + 1 < t; ++j) {
    std::vector<double> z = naive_affine(q, np.dn_w[j], np.dn_b[j]);
    for (auto& v : z) v = std::max(0.0, v);
    for (std::size_t m = 0; m < M; ++m) {
      const double g = sig(np.gate_a[m][j] * p_t[m] + np.gate_b[m][j]);
      for (std::size_t o = 0; o < z.size(); ++o) z[o] += g * p[m][j][o];
    }
    q = z;
  }
  std::vector<double> zt = naive_affine(q, np.dn_w[t - 1], np.dn_b[t - 1]);
  return NaiveOut{p_t, sig(zt[0])};
}

NaiveParams extract_params(const RmtNet& net) {
  const auto& cfg = net.config();
  const auto& store = net.params();
  NaiveParams np;
  const std::size_t d = net.bin_counts().size();
  const std::size_t M = static_cast<std::size_t>(cfg.n_policies);
  const std::size_t t = static_cast<std::size_t>(cfg.t);
  const std::size_t k = static_cast<std::size_t>(cfg.k);
  np.embed.resize(d);
  for (std::size_t f = 0; f < d; ++f) {
    const auto v = store.data(store.view("embed.f" + std::to_string(f)));
    np.embed[f].resize(static_cast<std::size_t>(net.bin_counts()[f]));
    for (std::size_t bin = 0; bin < np.embed[f].size(); ++bin)
      np.embed[f][bin] = {v.begin() + static_cast<long>(bin * k),
                          v.begin() + static_cast<long>((bin + 1) * k)};
  }
  np.ra_w.resize(M);
  np.ra_b.resize(M);
  np.gate_a.resize(M);
  np.gate_b.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 1; j <= t; ++j) {
      const std::string tag = std::to_string(m + 1);
      auto w = store.data(store.view("ra" + tag + ".W" + std::to_string(j)));
      auto b = store.data(store.view("ra" + tag + ".b" + std::to_string(j)));
      np.ra_w[m].push_back({w.begin(), w.end()});
      np.ra_b[m].push_back({b.begin(), b.end()});
      if (j < t) {
        np.gate_a[m].push_back(
            store.data(store.view("gate" + tag + ".alpha" +
                                  std::to_string(j)))[0]);
        np.gate_b[m].push_back(
            store.data(store.view("gate" + tag + ".beta" +
                                  std::to_string(j)))[0]);
      }
    }
  }
  for (std::size_t j = 1; j <= t; ++j) {
    auto w = store.data(store.view("dn.W" + std::to_string(j)));
    auto b = store.data(store.view("dn.b" + std::to_string(j)));
    np.dn_w.push_back({w.begin(), w.end()});
    np.dn_b.push_back({b.begin(), b.end()});
  }
  return np;
}

Dataset probe_dataset(std::size_t n, std::size_t d, int bins,
                      std::uint64_t seed, int n_policies = 1) {
  Rng rng(seed);
  Dataset::Builder b;
  b.bin_counts.assign(d, bins);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f)
      b.bins.push_back(static_cast<int>(rng.uniform_int(bins)));
    const bool rejected = rng.uniform() < 0.5;
    b.r.push_back(rejected ? 1 : 0);
    const int y = rng.uniform() < 0.4 ? 1 : 0;
    b.y_visible.push_back(rejected ? -1 : y);
    b.y_hidden.push_back(rejected ? y : -1);
    b.policy.push_back(1 + static_cast<int>(i % n_policies));
  }
  return std::move(b).build();
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Benchmark-style small dataset with real signal, splits assigned. The
// generous default rate keeps both classes present in small validation
// splits.
Dataset toy_mnar_dataset(std::size_t n, std::uint64_t seed) {
  const RawTable raw = make_synthetic_raw(n, 6, 0.3, seed, 0.45);
  const SynthResult synth =
      generate_synthetic_rejection(raw, 1.0, seed + 1, 8);
  return synth.dataset.assign_splits(seed + 2, SplitMode::ApprovalRejection);
}

}  // namespace

TEST_CASE("embedding looks up and concatenates per-feature vectors") {
  ModelConfig cfg;
  cfg.k = 4;
  cfg.seed = 1;
  RmtNet one({5}, cfg);
  std::vector<double> out(4);
  const std::vector<int> bins = {2};
  one.embed_row(bins, out);
  const auto table = one.params().data(one.params().view("embed.f0"));
  for (int c = 0; c < 4; ++c) CHECK(out[c] == table[2 * 4 + c]);

  // zero table -> zero vector
  std::fill(one.params().values().begin(),
            one.params().values().begin() + 5 * 4, 0.0);
  one.embed_row(bins, out);
  CHECK(out == std::vector<double>(4, 0.0));

  // d=3, k=2: hand-assembled concatenation
  ModelConfig cfg2;
  cfg2.k = 2;
  cfg2.seed = 2;
  RmtNet three({2, 2, 2}, cfg2);
  auto& vals = three.params().values();
  for (std::size_t f = 0; f < 3; ++f) {
    const auto view = three.params().view("embed.f" + std::to_string(f));
    for (std::size_t i = 0; i < view.size(); ++i)
      vals[view.offset + i] = static_cast<double>(f * 10 + i);
  }
  std::vector<double> out3(6);
  three.embed_row(std::vector<int>{1, 0, 1}, out3);
  CHECK(out3 == std::vector<double>{2, 3, 10, 11, 22, 23});

  CHECK_THROWS_AS(three.predict_row(std::vector<int>{1, 0, 5}),
                  ContractError);
}

TEST_CASE("all-zero parameters give rejection probability one half") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 3;
  cfg.t = 2;
  cfg.seed = 3;
  RmtNet net({4, 4}, cfg);
  std::fill(net.params().values().begin(), net.params().values().end(), 0.0);
  const auto out = net.predict_row(std::vector<int>{1, 2});
  CHECK(out.rejection_prob[0] == 0.5);
  CHECK(out.default_prob == 0.5);
}

TEST_CASE("forward pass matches the straight-loop oracle") {
  for (int t : {2, 3, 4}) {
    for (int M : {1, 2, 3}) {
      ModelConfig cfg;
      cfg.k = 2;
      cfg.hidden = 4;
      cfg.t = t;
      cfg.n_policies = M;
      cfg.seed = static_cast<std::uint64_t>(100 * t + M);
      const Dataset ds = probe_dataset(8, 5, 3, cfg.seed, M);
      RmtNet net(ds.bin_counts(), cfg);
      const NaiveParams np = extract_params(net);
      auto ws = net.make_workspace();
      for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        net.forward(ds.bins(i), ws);
        const auto bins = ds.bins(i);
        const NaiveOut ref =
            naive_rmt_forward(np, {bins.begin(), bins.end()});
        CHECK(ws.q_t == doctest::Approx(ref.q_t).epsilon(1e-14));
        for (int m = 0; m < M; ++m)
          CHECK(ws.p_t[static_cast<std::size_t>(m)] ==
                doctest::Approx(ref.p_t[static_cast<std::size_t>(m)])
                    .epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("identical per-policy parameters give identical heads") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 3;
  cfg.t = 2;
  cfg.n_policies = 2;
  cfg.seed = 5;
  const Dataset ds = probe_dataset(4, 3, 3, 9, 2);
  RmtNet net(ds.bin_counts(), cfg);
  // copy policy 1's tower into policy 2
  auto& vals = net.params().values();
  for (int j = 1; j <= 2; ++j) {
    for (const char* what : {"W", "b"}) {
      const auto src =
          net.params().view("ra1." + std::string(what) + std::to_string(j));
      const auto dst =
          net.params().view("ra2." + std::string(what) + std::to_string(j));
      std::copy_n(vals.begin() + static_cast<long>(src.offset), src.size(),
                  vals.begin() + static_cast<long>(dst.offset));
    }
  }
  const auto out = net.predict_row(ds.bins(0));
  CHECK(out.rejection_prob[0] == out.rejection_prob[1]);
}

TEST_CASE("gate: flat at alpha=0, monotone in p, sigmoid substitution") {
  CHECK(sig(0.0 * 0.3 + 0.0) == 0.5);
  // alpha=2, beta=-1 at p=0.5 -> sigmoid(0) = 0.5
  CHECK(sig(2.0 * 0.5 - 1.0) == 0.5);

  const auto curve = eval::gate_curve({{eval::GateParams{2.0, -1.0}}}, 5);
  REQUIRE(curve.p.size() == 5);
  CHECK(curve.p[0] == 0.0);
  CHECK(curve.p[4] == 1.0);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(curve.g[0][0][i] ==
          doctest::Approx(sig(2.0 * curve.p[i] - 1.0)).epsilon(1e-15));
  for (std::size_t i = 1; i < 5; ++i)
    CHECK(curve.g[0][0][i] > curve.g[0][0][i - 1]);

  const auto flat = eval::gate_curve({{eval::GateParams{0.0, -0.4}}}, 7);
  for (double g : flat.g[0][0])
    CHECK(g == doctest::Approx(sig(-0.4)).epsilon(1e-15));

  const auto falling = eval::gate_curve({{eval::GateParams{-1.5, 0.2}}}, 9);
  for (std::size_t i = 1; i < 9; ++i)
    CHECK(falling.g[0][0][i] < falling.g[0][0][i - 1]);
}

TEST_CASE("gates forced shut reduce the default tower to a plain MLP") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 8;
  const Dataset ds = probe_dataset(6, 4, 3, 77);
  RmtNet net(ds.bin_counts(), cfg);
  auto& vals = net.params().values();
  const auto a = net.params().view("gate1.alpha1");
  const auto b = net.params().view("gate1.beta1");
  vals[a.offset] = 0.0;
  vals[b.offset] = -40.0;

  const NaiveParams np = extract_params(net);
  auto ws = net.make_workspace();
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    net.forward(ds.bins(i), ws);
    // naive MLP on the embedding using only the default-tower weights
    const auto bins = ds.bins(i);
    std::vector<double> e;
    for (std::size_t f = 0; f < bins.size(); ++f)
      for (std::size_t c = 0; c < 2; ++c)
        e.push_back(np.embed[f][static_cast<std::size_t>(bins[f])][c]);
    std::vector<double> h = naive_affine(e, np.dn_w[0], np.dn_b[0]);
    for (auto& v : h) v = std::max(0.0, v);
    const double q =
        sig(naive_affine(h, np.dn_w[1], np.dn_b[1])[0]);
    CHECK(ws.q_t == doctest::Approx(q).epsilon(1e-12));
  }
}

TEST_CASE("duplicated policies are summed, not averaged") {
  ModelConfig cfg1;
  cfg1.k = 2;
  cfg1.hidden = 3;
  cfg1.t = 2;
  cfg1.seed = 13;
  const Dataset ds = probe_dataset(4, 3, 4, 123);
  RmtNet single(ds.bin_counts(), cfg1);

  ModelConfig cfg2 = cfg1;
  cfg2.n_policies = 2;
  RmtNet twin(ds.bin_counts(), cfg2);
  // copy every shared parameter from the single-policy net, duplicate the
  // tower and gate parameters into both policies
  const auto& sv = single.params();
  auto& tvals = twin.params().values();
  for (const auto& view : twin.params().views()) {
    std::string src_name = view.name;
    if (src_name.rfind("ra2.", 0) == 0) src_name = "ra1." + src_name.substr(4);
    if (src_name.rfind("gate2.", 0) == 0)
      src_name = "gate1." + src_name.substr(6);
    const auto sview = sv.view(src_name);
    const auto sdata = sv.data(sview);
    std::copy(sdata.begin(), sdata.end(),
              tvals.begin() + static_cast<long>(view.offset));
  }

  const auto out1 = single.predict_row(ds.bins(0));
  const auto out2 = twin.predict_row(ds.bins(0));
  CHECK(out2.rejection_prob[0] == out1.rejection_prob[0]);
  CHECK(out2.rejection_prob[1] == out1.rejection_prob[0]);
  // the doubled share term moves the default probability
  CHECK(out2.default_prob != doctest::Approx(out1.default_prob).epsilon(1e-9));

  // halving both gates pointwise at this row's p restores this row's output
  const double p_t = out1.rejection_prob[0];
  const auto a1 = single.params().view("gate1.alpha1");
  const auto b1 = single.params().view("gate1.beta1");
  const double alpha = sv.data(a1)[0];
  const double beta = sv.data(b1)[0];
  const double g = sig(alpha * p_t + beta);
  const double beta_half = std::log((g / 2.0) / (1.0 - g / 2.0)) - alpha * p_t;
  for (const char* name : {"gate1.beta1", "gate2.beta1"}) {
    const auto view = twin.params().view(name);
    tvals[view.offset] = beta_half;
  }
  const auto out3 = twin.predict_row(ds.bins(0));
  CHECK(out3.default_prob == doctest::Approx(out1.default_prob).epsilon(1e-12));
  // but not globally: another row with a different p no longer matches
  const auto other1 = single.predict_row(ds.bins(2));
  const auto other3 = twin.predict_row(ds.bins(2));
  CHECK(other3.default_prob !=
        doctest::Approx(other1.default_prob).epsilon(1e-9));
}

TEST_CASE("loss: masking, balance, and the two-sample hand case") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 3;
  cfg.t = 2;
  cfg.eta = 0.3;
  cfg.seed = 21;

  // all rejected -> the default loss vanishes exactly
  Dataset::Builder ball;
  ball.bin_counts = {3};
  ball.bins = {0, 1, 2};
  ball.r = {1, 1, 1};
  ball.y_hidden = {1, 0, 1};
  const Dataset rejected_only = std::move(ball).build();
  RmtNet net(rejected_only.bin_counts(), cfg);
  auto ws = net.make_workspace();
  const auto parts =
      net.loss_and_grad(rejected_only, all_rows(rejected_only), {}, ws);
  CHECK(parts.default_ == 0.0);
  CHECK(parts.total == doctest::Approx(0.7 * parts.rejection).epsilon(1e-15));

  // eta = 1 -> the total equals the default loss alone
  ModelConfig cfg_eta1 = cfg;
  cfg_eta1.eta = 1.0;
  Dataset::Builder bmix;
  bmix.bin_counts = {3};
  bmix.bins = {0, 2};
  bmix.r = {0, 1};
  bmix.y_visible = {1, -1};
  bmix.y_hidden = {-1, 1};
  const Dataset mixed = std::move(bmix).build();
  RmtNet net_eta1(mixed.bin_counts(), cfg_eta1);
  auto ws1 = net_eta1.make_workspace();
  const auto p1 = net_eta1.loss_and_grad(mixed, all_rows(mixed), {}, ws1);
  CHECK(p1.total == p1.default_);

  // two-sample hand case, eta = 0.3: L = 0.7*(bce(pA,0)+bce(pB,1)) +
  // 0.3*bce(qA,1), all probabilities taken from the forward pass
  RmtNet net2(mixed.bin_counts(), cfg);
  auto ws2 = net2.make_workspace();
  net2.forward(mixed.bins(0), ws2);
  const double pA = ws2.p_t[0], qA = ws2.q_t;
  net2.forward(mixed.bins(1), ws2);
  const double pB = ws2.p_t[0];
  auto bce = [](double p, double y) {
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  };
  const double expected =
      0.7 * (bce(pA, 0.0) + bce(pB, 1.0)) + 0.3 * bce(qA, 1.0);
  const auto p2 = net2.loss_and_grad(mixed, all_rows(mixed), {}, ws2);
  CHECK(p2.total == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gradients match finite differences for t x M configurations") {
  for (int t : {2, 3, 4}) {
    for (int M : {1, 2, 3}) {
      ModelConfig cfg;
      cfg.k = 2;
      cfg.hidden = 4;
      cfg.t = t;
      cfg.n_policies = M;
      const Dataset ds = probe_dataset(10, 5, 3, 1000 + t * 10 + M, M);
      const auto rows = all_rows(ds);

      // nudge away from relu kinks: retry seeds until every hidden
      // pre-activation clears the finite-difference step by a wide margin
      double max_err = 1.0;
      for (std::uint64_t attempt = 0; attempt < 25; ++attempt) {
        cfg.seed = 7 + 100 * attempt + static_cast<std::uint64_t>(t + M);
        RmtNet net(ds.bin_counts(), cfg);
        // jitter all parameters (zero biases included) off the relu kinks
        Rng jitter(cfg.seed + 500000);
        for (double& v : net.params().values())
          v += jitter.uniform(-0.2, 0.2);
        auto ws = net.make_workspace();
        bool clean = true;
        for (std::size_t i = 0; i < ds.n_rows() && clean; ++i) {
          net.forward(ds.bins(i), ws);
          for (int m = 0; m < M && clean; ++m)
            for (int j = 0; j + 1 < t && clean; ++j)
              for (double v : ws.p_pre[m][j])
                if (std::abs(v) < 1e-4) clean = false;
          for (int j = 0; j + 1 < t && clean; ++j)
            for (double v : ws.q_pre[j])
              if (std::abs(v) < 1e-4) clean = false;
        }
        if (!clean) continue;

        std::vector<double> analytic(net.params().size(), 0.0);
        net.loss_and_grad(ds, rows, analytic, ws);
        auto loss_fn = [&](std::span<const double> theta) {
          RmtNet probe(ds.bin_counts(), cfg);
          std::copy(theta.begin(), theta.end(),
                    probe.params().values().begin());
          auto pws = probe.make_workspace();
          return probe.loss_and_grad(ds, rows, {}, pws).total;
        };
        max_err = nn::grad_check(loss_fn, analytic, net.params().values(),
                                 1e-5)
                      .max_rel_err;
        break;
      }
      INFO("t=", t, " M=", M);
      CHECK(max_err < 1e-4);
    }
  }
}

TEST_CASE("stop-gradient flag cuts only the gate-argument route") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 3;
  cfg.t = 2;
  cfg.eta = 1.0;  // no rejection loss: RA heads see gradients only via gates
  cfg.seed = 31;
  const Dataset ds = probe_dataset(8, 4, 3, 99);
  const auto rows = all_rows(ds);

  RmtNet with(ds.bin_counts(), cfg);
  ModelConfig cfg_off = cfg;
  cfg_off.share_gradient_through_gate = false;
  RmtNet without(ds.bin_counts(), cfg_off);

  auto ws = with.make_workspace();
  std::vector<double> g_with(with.params().size(), 0.0);
  with.loss_and_grad(ds, rows, g_with, ws);
  std::vector<double> g_without(without.params().size(), 0.0);
  without.loss_and_grad(ds, rows, g_without, ws);

  const auto head_w = with.params().view("ra1.W2");
  double with_norm = 0.0, without_norm = 0.0;
  for (std::size_t i = 0; i < head_w.size(); ++i) {
    with_norm += std::abs(g_with[head_w.offset + i]);
    without_norm += std::abs(g_without[head_w.offset + i]);
  }
  CHECK(with_norm > 0.0);       // gate argument carries gradient
  CHECK(without_norm == 0.0);   // stop-gradient kills exactly that route
  // the shared-representation route must stay alive either way
  const auto lower_w = with.params().view("ra1.W1");
  double lower_norm = 0.0;
  for (std::size_t i = 0; i < lower_w.size(); ++i)
    lower_norm += std::abs(g_without[lower_w.offset + i]);
  CHECK(lower_norm > 0.0);
}

TEST_CASE("hidden labels are invisible to loss, gradient and fit") {
  const Dataset ds = toy_mnar_dataset(240, 40);
  const Dataset permuted = ds.with_permuted_hidden_labels(999);

  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 5;
  cfg.epochs = 25;
  cfg.patience = 50;

  RmtNet a(ds.bin_counts(), cfg);
  RmtNet b(ds.bin_counts(), cfg);
  auto wsa = a.make_workspace();
  auto wsb = b.make_workspace();
  const auto rows = ds.rejection_task_rows();
  std::vector<double> ga(a.params().size(), 0.0), gb(b.params().size(), 0.0);
  const auto la = a.loss_and_grad(ds, rows, ga, wsa);
  const auto lb = b.loss_and_grad(permuted, rows, gb, wsb);
  CHECK(la.total == lb.total);
  CHECK(la.rejection == lb.rejection);
  CHECK(la.default_ == lb.default_);
  CHECK(ga == gb);

  a.fit(ds);
  b.fit(permuted);
  CHECK(a.params().values() == b.params().values());
}

TEST_CASE("training is deterministic and the loss decreases") {
  const Dataset ds = toy_mnar_dataset(240, 11);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 3;
  cfg.epochs = 30;
  cfg.patience = 100;

  RmtNet a(ds.bin_counts(), cfg);
  const auto log = a.fit(ds);
  REQUIRE(log.epochs.size() >= 10);
  // descent sanity over the first epochs
  CHECK(log.epochs[4].loss < log.epochs[0].loss);
  CHECK(log.epochs[9].loss < log.epochs[4].loss);

  RmtNet b(ds.bin_counts(), cfg);
  b.fit(ds);
  CHECK(std::memcmp(a.params().values().data(), b.params().values().data(),
                    a.params().values().size() * sizeof(double)) == 0);
}

TEST_CASE("multi-policy model with M=1 degenerates to the single model") {
  const Dataset ds = toy_mnar_dataset(240, 17);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 9;
  cfg.epochs = 30;
  cfg.patience = 100;

  auto single = models::fit_model(models::ModelKind::RmtNet, ds, cfg);
  auto multi = models::fit_model(models::ModelKind::RmtNetPP, ds, cfg);
  REQUIRE(single.log.epochs.size() == multi.log.epochs.size());
  for (std::size_t e = 0; e < single.log.epochs.size(); ++e) {
    CHECK(single.log.epochs[e].loss == multi.log.epochs[e].loss);
    CHECK(single.log.epochs[e].loss_rejection ==
          multi.log.epochs[e].loss_rejection);
    CHECK(single.log.epochs[e].loss_default ==
          multi.log.epochs[e].loss_default);
  }
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    CHECK(single.model->predict_row(ds, i).default_prob ==
          multi.model->predict_row(ds, i).default_prob);
  }
}

TEST_CASE("per-policy masking trains each head on its own rows only") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 3;
  cfg.t = 2;
  cfg.n_policies = 2;
  cfg.eta = 0.5;
  cfg.seed = 41;
  const Dataset ds = probe_dataset(8, 3, 3, 321, 2);

  RmtNet net(ds.bin_counts(), cfg);
  auto ws = net.make_workspace();
  // rows of policy 1 only: policy 2's head must receive no rejection-loss
  // gradient through its final bias when gates are shut
  auto& vals = net.params().values();
  for (const char* name : {"gate1.beta1", "gate2.beta1"}) {
    const auto v = net.params().view(name);
    vals[v.offset] = -40.0;
  }
  for (const char* name : {"gate1.alpha1", "gate2.alpha1"}) {
    const auto v = net.params().view(name);
    vals[v.offset] = 0.0;
  }
  std::vector<std::size_t> p1_rows;
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    if (ds.policy(i) == 1) p1_rows.push_back(i);
  std::vector<double> grads(net.params().size(), 0.0);
  net.loss_and_grad(ds, p1_rows, grads, ws);
  const auto b2 = net.params().view("ra2.b2");
  CHECK(grads[b2.offset] == 0.0);
  const auto b1 = net.params().view("ra1.b2");
  CHECK(grads[b1.offset] != 0.0);

  // ablation: heads train on all rows
  ModelConfig cfg_all = cfg;
  cfg_all.per_policy_strict_masking = false;
  RmtNet net_all(ds.bin_counts(), cfg_all);
  auto& avals = net_all.params().values();
  for (const char* name : {"gate1.beta1", "gate2.beta1"}) {
    const auto v = net_all.params().view(name);
    avals[v.offset] = -40.0;
  }
  for (const char* name : {"gate1.alpha1", "gate2.alpha1"}) {
    const auto v = net_all.params().view(name);
    avals[v.offset] = 0.0;
  }
  std::vector<double> grads_all(net_all.params().size(), 0.0);
  auto ws_all = net_all.make_workspace();
  net_all.loss_and_grad(ds, p1_rows, grads_all, ws_all);
  CHECK(grads_all[net_all.params().view("ra2.b2").offset] != 0.0);
}

TEST_CASE("logistic baseline separates separable data") {
  // two informative binned features, clean threshold rule
  Dataset::Builder b;
  b.bin_counts = {4, 4};
  Rng rng(6);
  for (int i = 0; i < 120; ++i) {
    const int bin0 = static_cast<int>(rng.uniform_int(4));
    const int bin1 = static_cast<int>(rng.uniform_int(4));
    b.bins.push_back(bin0);
    b.bins.push_back(bin1);
    b.r.push_back(0);
    b.y_visible.push_back(bin0 >= 2 ? 1 : 0);
    b.y_hidden.push_back(-1);
  }
  b.split.assign(120, Split::Train);
  const Dataset ds = std::move(b).build();

  ModelConfig cfg;
  cfg.k = 2;
  cfg.epochs = 400;
  cfg.patience = 400;
  cfg.learning_rate = 0.05;
  cfg.seed = 2;
  models::TrainLog log;
  const FeedForward lr = models::fit_lr(ds, cfg, &log);

  std::vector<double> scores, labels;
  auto ws = lr.make_workspace();
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    scores.push_back(lr.forward(ds.bins(i), ws));
    labels.push_back(ds.train_label(i));
  }
  CHECK(eval::auc(scores, labels) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mlp has strictly more parameters than lr") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 8;
  cfg.t = 2;
  FeedForward lr({4, 4}, cfg, 1);
  FeedForward mlp({4, 4}, cfg, cfg.t);
  CHECK(mlp.params().size() > lr.params().size());
}

TEST_CASE("self-training: zero rounds equals the base learner") {
  const Dataset ds = toy_mnar_dataset(200, 23);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 4;
  cfg.epochs = 20;
  cfg.patience = 50;
  cfg.st_rounds = 0;

  const FeedForward base = models::fit_mlp(ds, cfg, nullptr);
  const FeedForward st = models::fit_self_training(ds, cfg, nullptr);
  CHECK(base.params().values() == st.params().values());
}

TEST_CASE("self-training pool evolution follows the scores") {
  const Dataset ds = toy_mnar_dataset(200, 29);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 4;
  cfg.epochs = 15;
  cfg.patience = 50;
  cfg.st_rounds = 2;
  cfg.st_add_fraction = 0.1;

  models::StTrace trace;
  models::fit_self_training(ds, cfg, nullptr, &trace);
  REQUIRE(trace.added_per_round.size() == 2);

  const std::size_t n_rejected = ds.rejected_rows().size();
  const std::size_t n_add = static_cast<std::size_t>(
      std::ceil(0.1 * static_cast<double>(n_rejected)));
  CHECK(trace.added_per_round[0].size() == n_add);
  CHECK(trace.added_per_round[1].size() == n_add);

  // round 1's additions are exactly the top-scored rejected rows under the
  // round-0 model, which we rebuild independently
  const FeedForward round0 = models::fit_mlp(ds, cfg, nullptr);
  auto ws = round0.make_workspace();
  std::vector<std::size_t> rejected = ds.rejected_rows();
  std::vector<double> scores(rejected.size());
  for (std::size_t i = 0; i < rejected.size(); ++i)
    scores[i] = round0.forward(ds.bins(rejected[i]), ws);
  std::vector<std::size_t> rank(rejected.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < n_add; ++i)
    expected.push_back(rejected[rank[i]]);
  CHECK(trace.added_per_round[0] == expected);

  // no row is pseudo-labeled twice
  std::vector<std::size_t> all_added;
  for (const auto& round : trace.added_per_round)
    all_added.insert(all_added.end(), round.begin(), round.end());
  std::sort(all_added.begin(), all_added.end());
  CHECK(std::adjacent_find(all_added.begin(), all_added.end()) ==
        all_added.end());
}

TEST_CASE("self-training can pseudo-label the whole rejected pool") {
  const Dataset ds = toy_mnar_dataset(120, 31);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 4;
  cfg.epochs = 10;
  cfg.patience = 50;
  cfg.st_rounds = 3;  // later rounds stop early: the pool is exhausted
  cfg.st_add_fraction = 1.0;

  models::StTrace trace;
  models::fit_self_training(ds, cfg, nullptr, &trace);
  REQUIRE(trace.added_per_round.size() == 1);
  CHECK(trace.added_per_round[0].size() == ds.rejected_rows().size());
}

TEST_CASE("ips: clipped-to-one weights reduce to the plain baseline") {
  const Dataset ds = toy_mnar_dataset(200, 37);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 4;
  cfg.epochs = 15;
  cfg.patience = 50;
  cfg.ips_weight_clip = 1.0;

  std::vector<double> weights;
  const FeedForward ips = models::fit_ips(ds, cfg, nullptr, &weights);
  for (double w : weights) CHECK(w == 1.0);
  const FeedForward mlp = models::fit_mlp(ds, cfg, nullptr);
  CHECK(ips.params().values() == mlp.params().values());
}

TEST_CASE("ips: featureless rejections give uniform weights near 1/(1-rate)") {
  // constant feature -> the propensity model can only learn the base rate
  Dataset::Builder b;
  b.bin_counts = {1};
  for (int i = 0; i < 200; ++i) {
    b.bins.push_back(0);
    const bool rejected = i % 2 == 0;  // rate 0.5
    b.r.push_back(rejected ? 1 : 0);
    b.y_visible.push_back(rejected ? -1 : (i % 4 == 1 ? 1 : 0));
    b.y_hidden.push_back(rejected ? (i % 4 == 0 ? 1 : 0) : -1);
  }
  const Dataset ds = std::move(b).build();

  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 4;
  cfg.epochs = 300;
  cfg.patience = 300;

  std::vector<double> weights;
  models::fit_ips(ds, cfg, nullptr, &weights);
  REQUIRE(!weights.empty());
  for (double w : weights) {
    CHECK(w == doctest::Approx(2.0).epsilon(0.02));
    CHECK(w == doctest::Approx(weights.front()).epsilon(1e-9));
  }
}

TEST_CASE("constant weights leave the learned ranking unchanged") {
  // w = 2 everywhere scales the loss; with the scale-invariant optimizer the
  // trajectory is near-identical, so the score ordering must match
  const Dataset ds = toy_mnar_dataset(200, 59);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 4;
  cfg.epochs = 20;
  cfg.patience = 50;

  const std::vector<std::size_t> rows = ds.default_task_rows();
  std::vector<double> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    labels[i] = ds.train_label(rows[i]);

  FeedForward plain(ds.bin_counts(), cfg, cfg.t);
  plain.fit(ds, rows, labels, {}, "fit");
  FeedForward doubled(ds.bin_counts(), cfg, cfg.t);
  doubled.fit(ds, rows, labels, std::vector<double>(rows.size(), 2.0), "fit");

  auto ws1 = plain.make_workspace();
  auto ws2 = doubled.make_workspace();
  std::vector<std::pair<double, std::size_t>> o1, o2;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    o1.emplace_back(plain.forward(ds.bins(i), ws1), i);
    o2.emplace_back(doubled.forward(ds.bins(i), ws2), i);
  }
  std::stable_sort(o1.begin(), o1.end());
  std::stable_sort(o2.begin(), o2.end());
  for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o1[i].second == o2[i].second);
}

TEST_CASE("weighted loss equals the hand-computed weighted sum") {
  const Dataset ds = probe_dataset(5, 3, 3, 61);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.seed = 8;
  FeedForward net(ds.bin_counts(), cfg, 1);

  std::vector<std::size_t> rows = {0, 1, 2, 3, 4};
  std::vector<double> labels = {1, 0, 1, 1, 0};
  std::vector<double> weights = {2.0, 0.5, 1.0, 3.0, 7.5};
  std::vector<std::size_t> pos = {0, 1, 2, 3, 4};
  auto ws = net.make_workspace();
  const double loss =
      net.loss_and_grad(ds, pos, rows, labels, weights, {}, ws);

  double expected = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double p = net.forward(ds.bins(rows[i]), ws);
    expected -= weights[i] * (labels[i] * std::log(p) +
                              (1.0 - labels[i]) * std::log(1.0 - p));
  }
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("all learner kinds fit and score through the common interface") {
  const Dataset ds = toy_mnar_dataset(240, 43);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 12;
  cfg.epochs = 15;
  cfg.patience = 50;
  cfg.st_rounds = 1;

  for (const char* name : {"lr", "mlp", "st", "ips", "rmtnet", "rmtnetpp"}) {
    const auto kind = models::model_kind_from_string(name);
    const auto fit = models::fit_model(kind, ds, cfg);
    const auto entry = eval::evaluate_model(*fit.model, ds);
    CHECK(entry.combined_test.defined);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
      const double q = fit.model->predict_row(ds, i).default_prob;
      CHECK(q > 0.0);
      CHECK(q < 1.0);
    }
  }
  CHECK_THROWS_AS(models::model_kind_from_string("xgb"), ConfigError);
}

TEST_CASE("snapshots round-trip bit-exactly") {
  const Dataset ds = toy_mnar_dataset(200, 47);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 14;
  cfg.epochs = 10;
  cfg.patience = 50;

  const auto dir =
      std::filesystem::temp_directory_path() / "rmtnet_model_tests";
  std::filesystem::create_directories(dir);
  for (const char* name : {"mlp", "rmtnet"}) {
    const auto kind = models::model_kind_from_string(name);
    const auto fit = models::fit_model(kind, ds, cfg);
    const std::string path =
        (dir / ("snapshot_roundtrip_" + std::string(name) + ".bin")).string();
    fit.model->save(path);
    const auto loaded = models::load_model(path);
    CHECK(loaded->kind() == kind);
    for (std::size_t i = 0; i < ds.n_rows(); i += 7) {
      CHECK(loaded->predict_row(ds, i).default_prob ==
            fit.model->predict_row(ds, i).default_prob);
    }
  }
}

TEST_CASE("fixed fixture and seed give a reproducible validation KS") {
  const Dataset ds = toy_mnar_dataset(800, 53);
  ModelConfig cfg;
  cfg.k = 2;
  cfg.hidden = 4;
  cfg.t = 2;
  cfg.seed = 15;
  cfg.epochs = 40;
  cfg.patience = 100;

  models::TrainLog log1, log2;
  models::fit_mlp(ds, cfg, &log1);
  models::fit_mlp(ds, cfg, &log2);
  CHECK(log1.best_val_ks == log2.best_val_ks);
  // regression pins from the first verified run of this fixture
  CHECK(log1.best_val_ks ==
        doctest::Approx(0.56521739130434778).epsilon(1e-12));
  const auto fit = models::fit_model(models::ModelKind::Mlp, ds, cfg);
  const auto entry = eval::evaluate_model(*fit.model, ds);
  CHECK(entry.combined_test.auc ==
        doctest::Approx(0.50671399907393111).epsilon(1e-12));
  CHECK(entry.combined_test.ks ==
        doctest::Approx(0.054616012171190442).epsilon(1e-12));
}

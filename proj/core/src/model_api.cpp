#include "rmtnet/model_api.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rmtnet/error.hpp"

namespace rmt::models {

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "lr") return ModelKind::Lr;
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "st") return ModelKind::SelfTraining;
  if (s == "ips") return ModelKind::Ips;
  if (s == "rmtnet") return ModelKind::RmtNet;
  if (s == "rmtnetpp") return ModelKind::RmtNetPP;
  throw ConfigError("unknown model kind: '" + s + "'");
}

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Lr: return "lr";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::SelfTraining: return "st";
    case ModelKind::Ips: return "ips";
    case ModelKind::RmtNet: return "rmtnet";
    case ModelKind::RmtNetPP: return "rmtnetpp";
  }
  return "?";
}

namespace {

constexpr char kMagic[8] = {'R', 'M', 'T', 'S', 'N', 'A', 'P', '1'};

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["k"] = c.k;
  j["hidden"] = c.hidden;
  j["t"] = c.t;
  j["eta"] = c.eta;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["min_epochs"] = c.min_epochs;
  j["batch"] = c.batch;
  j["seed"] = c.seed;
  j["n_policies"] = c.n_policies;
  j["share_gradient_through_gate"] = c.share_gradient_through_gate;
  j["per_policy_strict_masking"] = c.per_policy_strict_masking;
  j["st_rounds"] = c.st_rounds;
  j["st_add_fraction"] = c.st_add_fraction;
  j["ips_weight_clip"] = c.ips_weight_clip;
  j["base_learner"] = c.base_learner;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.k = j.at("k");
  c.hidden = j.at("hidden");
  c.t = j.at("t");
  c.eta = j.at("eta");
  c.learning_rate = j.at("learning_rate");
  c.epochs = j.at("epochs");
  c.patience = j.at("patience");
  c.min_epochs = j.at("min_epochs");
  c.batch = j.at("batch");
  c.seed = j.at("seed");
  c.n_policies = j.at("n_policies");
  c.share_gradient_through_gate = j.at("share_gradient_through_gate");
  c.per_policy_strict_masking = j.at("per_policy_strict_masking");
  c.st_rounds = j.at("st_rounds");
  c.st_add_fraction = j.at("st_add_fraction");
  c.ips_weight_clip = j.at("ips_weight_clip");
  c.base_learner = j.at("base_learner");
  return c;
}

void write_snapshot(const std::string& path, ModelKind kind,
                    const ModelConfig& cfg, const std::vector<int>& bins,
                    int n_layers, const nn::ParamStore& params) {
  nlohmann::json header;
  header["format"] = "rmtnet-snapshot";
  header["version"] = 1;
  header["kind"] = model_kind_name(kind);
  header["config"] = config_to_json(cfg);
  header["bin_counts"] = bins;
  header["n_layers"] = n_layers;
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& v : params.views()) {
    plist.push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols}});
  }
  header["params"] = plist;
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  const auto& vals = params.values();
  out.write(reinterpret_cast<const char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path);

  // human-readable sidecar with the same header
  std::ofstream side(path + ".json", std::ios::binary);
  if (!side) throw IoError("cannot write " + path + ".json");
  side << header.dump(2) << "\n";
}

void read_values_into(std::ifstream& in, const nlohmann::json& header,
                      nn::ParamStore& params, const std::string& path) {
  // shape check against the declared list
  const auto& plist = header.at("params");
  const auto& views = params.views();
  if (plist.size() != views.size())
    throw ParseError(path + ": parameter list mismatch");
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (plist[i].at("name") != views[i].name ||
        plist[i].at("rows") != views[i].rows ||
        plist[i].at("cols") != views[i].cols)
      throw ParseError(path + ": parameter layout mismatch at index " +
                       std::to_string(i));
  }
  auto& vals = params.values();
  in.read(reinterpret_cast<char*>(vals.data()),
          static_cast<std::streamsize>(vals.size() * sizeof(double)));
  if (!in) throw ParseError(path + ": truncated parameter payload");
}

class RmtNetModel final : public CreditModel {
 public:
  RmtNetModel(ModelKind kind, RmtNet net) : kind_(kind), net_(std::move(net)) {}

  ModelKind kind() const override { return kind_; }

  Prediction predict_row(const Dataset& ds, std::size_t row) const override {
    auto out = net_.predict_row(ds.bins(row));
    return Prediction{std::move(out.rejection_prob), out.default_prob};
  }

  std::vector<double> default_scores(
      const Dataset& ds, const std::vector<std::size_t>& rows) const override {
    RmtNet::Workspace ws = net_.make_workspace();
    std::vector<double> scores(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      net_.forward(ds.bins(rows[i]), ws);
      scores[i] = ws.q_t;
    }
    return scores;
  }

  void save(const std::string& path) const override {
    write_snapshot(path, kind_, net_.config(), net_.bin_counts(),
                   net_.config().t, net_.params());
  }

  const RmtNet* rmtnet() const override { return &net_; }

 private:
  ModelKind kind_;
  RmtNet net_;
};

class FeedForwardModel final : public CreditModel {
 public:
  FeedForwardModel(ModelKind kind, FeedForward net)
      : kind_(kind), net_(std::move(net)) {}

  ModelKind kind() const override { return kind_; }

  Prediction predict_row(const Dataset& ds, std::size_t row) const override {
    return Prediction{{}, net_.predict_row(ds.bins(row))};
  }

  std::vector<double> default_scores(
      const Dataset& ds, const std::vector<std::size_t>& rows) const override {
    FeedForward::Workspace ws = net_.make_workspace();
    std::vector<double> scores(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      scores[i] = net_.forward(ds.bins(rows[i]), ws);
    return scores;
  }

  void save(const std::string& path) const override {
    write_snapshot(path, kind_, net_.config(), net_.bin_counts(),
                   net_.n_layers(), net_.params());
  }

 private:
  ModelKind kind_;
  FeedForward net_;
};

}  // namespace

FitResult fit_model(ModelKind kind, const Dataset& ds,
                    const ModelConfig& cfg) {
  cfg.validate();
  FitResult res;
  switch (kind) {
    case ModelKind::RmtNet: {
      if (cfg.n_policies != 1)
        throw ConfigError("rmtnet is the single-policy model; use rmtnetpp "
                          "for M > 1");
      RmtNet net(ds.bin_counts(), cfg);
      res.log = net.fit(ds);
      res.model = std::make_unique<RmtNetModel>(kind, std::move(net));
      break;
    }
    case ModelKind::RmtNetPP: {
      RmtNet net(ds.bin_counts(), cfg);
      res.log = net.fit(ds);
      res.model = std::make_unique<RmtNetModel>(kind, std::move(net));
      break;
    }
    case ModelKind::Lr: {
      FeedForward net = fit_lr(ds, cfg, &res.log);
      res.model = std::make_unique<FeedForwardModel>(kind, std::move(net));
      break;
    }
    case ModelKind::Mlp: {
      FeedForward net = fit_mlp(ds, cfg, &res.log);
      res.model = std::make_unique<FeedForwardModel>(kind, std::move(net));
      break;
    }
    case ModelKind::SelfTraining: {
      FeedForward net = fit_self_training(ds, cfg, &res.log);
      res.model = std::make_unique<FeedForwardModel>(kind, std::move(net));
      break;
    }
    case ModelKind::Ips: {
      FeedForward net = fit_ips(ds, cfg, &res.log);
      res.model = std::make_unique<FeedForwardModel>(kind, std::move(net));
      break;
    }
  }
  return res;
}

std::unique_ptr<CreditModel> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ParseError(path + ": not a model snapshot");
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in) throw ParseError(path + ": truncated header");
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw ParseError(path + ": truncated header");
  nlohmann::json header = nlohmann::json::parse(htext);
  if (header.at("version") != 1)
    throw ParseError(path + ": unsupported snapshot version");

  const ModelKind kind = model_kind_from_string(header.at("kind"));
  const ModelConfig cfg = config_from_json(header.at("config"));
  const std::vector<int> bins = header.at("bin_counts");
  const int n_layers = header.at("n_layers");

  if (kind == ModelKind::RmtNet || kind == ModelKind::RmtNetPP) {
    RmtNet net(bins, cfg);
    read_values_into(in, header, net.params(), path);
    return std::make_unique<RmtNetModel>(kind, std::move(net));
  }
  FeedForward net(bins, cfg, n_layers);
  read_values_into(in, header, net.params(), path);
  return std::make_unique<FeedForwardModel>(kind, std::move(net));
}

}  // namespace rmt::models

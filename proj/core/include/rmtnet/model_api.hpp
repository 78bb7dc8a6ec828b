#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rmtnet/baselines.hpp"
#include "rmtnet/dataset.hpp"
#include "rmtnet/model_config.hpp"
#include "rmtnet/rmtnet_model.hpp"

namespace rmt::models {

enum class ModelKind { Lr, Mlp, SelfTraining, Ips, RmtNet, RmtNetPP };

ModelKind model_kind_from_string(const std::string& s);
const char* model_kind_name(ModelKind k);

struct Prediction {
  std::vector<double> rejection_prob;  // per policy; empty for baselines
  double default_prob = 0.0;
};

/// A trained model of any kind, with a uniform scoring surface.
class CreditModel {
 public:
  virtual ~CreditModel() = default;
  virtual ModelKind kind() const = 0;
  virtual Prediction predict_row(const Dataset& ds, std::size_t row) const = 0;
  virtual std::vector<double> default_scores(
      const Dataset& ds, const std::vector<std::size_t>& rows) const = 0;
  /// Snapshot: versioned header plus a flat ordered list of named arrays.
  virtual void save(const std::string& path) const = 0;
  /// Non-null for the gated kinds; used for gate-curve extraction.
  virtual const class RmtNet* rmtnet() const { return nullptr; }
};

struct FitResult {
  std::unique_ptr<CreditModel> model;
  TrainLog log;
};

/// Trains a model of the requested kind on the dataset. All kinds share the
/// same contract: fit on the training split (plus whatever unlabeled rows
/// the kind is allowed to see), early-stop on approved-validation KS.
FitResult fit_model(ModelKind kind, const Dataset& ds,
                    const ModelConfig& cfg);

std::unique_ptr<CreditModel> load_model(const std::string& path);

}  // namespace rmt::models

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rmtnet/rng.hpp"

namespace rmt::nn {

/// Numerically stable logistic function.
double sigmoid(double z);

void relu_inplace(std::span<double> v);

/// Predictions are clamped into [kProbClamp, 1 - kProbClamp] before the
/// logs, so the loss is always finite.
inline constexpr double kProbClamp = 1e-7;

double clamp_prob(double p);

/// Binary cross entropy -[y log p + (1-y) log(1-p)] on the clamped p.
double bce(double p, double y);

/// d bce(sigmoid(z), y) / dz. Zero when the clamp is active (the loss is
/// locally flat there), which keeps analytic gradients consistent with
/// finite differences.
double bce_sigmoid_dz(double p, double y);

enum class Activation { None, Relu, Sigmoid };

/// Named view into a flat parameter vector; row-major rows x cols.
struct ParamView {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

/// All parameters of a model in one flat vector. Keeping them flat makes the
/// optimizer, the gradient checker, and serialization trivial: each works on
/// a single contiguous array with named slices.
class ParamStore {
 public:
  ParamView add(const std::string& name, std::size_t rows, std::size_t cols);

  std::span<double> data(const ParamView& v) {
    return std::span<double>(values_).subspan(v.offset, v.size());
  }
  std::span<const double> data(const ParamView& v) const {
    return std::span<const double>(values_).subspan(v.offset, v.size());
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<ParamView>& views() const { return views_; }
  const ParamView& view(const std::string& name) const;

 private:
  std::vector<ParamView> views_;
  std::vector<double> values_;
};

/// out = act(x . W + b); `preact` receives the pre-activation values.
void affine_forward(std::span<const double> x, std::span<const double> W,
                    std::span<const double> b, Activation act,
                    std::span<double> preact, std::span<double> out);

/// Backward pass of affine_forward. `grad_out` is dL/d(out); gradients are
/// accumulated into grad_W / grad_b, and dL/dx is accumulated into grad_x
/// unless it is empty.
void affine_backward(std::span<const double> x, std::span<const double> W,
                     Activation act, std::span<const double> preact,
                     std::span<const double> grad_out,
                     std::span<double> grad_pre_buf, std::span<double> grad_W,
                     std::span<double> grad_b, std::span<double> grad_x);

/// Glorot-uniform weight initialization.
void glorot_init(std::span<double> w, std::size_t fan_in, std::size_t fan_out,
                 Rng& rng);

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grads);

  std::size_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<double> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

/// Central-difference check of an analytic gradient. `loss` must be a pure
/// function of the parameter vector.
GradCheckReport grad_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> analytic, std::vector<double> theta,
    double step = 1e-5);

}  // namespace rmt::nn

#include "rmtnet/nn.hpp"

#include <algorithm>
#include <cmath>

#include "rmtnet/error.hpp"

namespace rmt::nn {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void relu_inplace(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

double bce(double p, double y) {
  const double c = clamp_prob(p);
  return -(y * std::log(c) + (1.0 - y) * std::log(1.0 - c));
}

double bce_sigmoid_dz(double p, double y) {
  if (p <= kProbClamp || p >= 1.0 - kProbClamp) return 0.0;
  return p - y;
}

ParamView ParamStore::add(const std::string& name, std::size_t rows,
                          std::size_t cols) {
  ParamView v{name, values_.size(), rows, cols};
  values_.resize(values_.size() + rows * cols, 0.0);
  views_.push_back(v);
  return v;
}

const ParamView& ParamStore::view(const std::string& name) const {
  for (const auto& v : views_)
    if (v.name == name) return v;
  throw ContractError("no such parameter: " + name);
}

void affine_forward(std::span<const double> x, std::span<const double> W,
                    std::span<const double> b, Activation act,
                    std::span<double> preact, std::span<double> out) {
  const std::size_t in = x.size();
  const std::size_t n_out = b.size();
  for (std::size_t o = 0; o < n_out; ++o) preact[o] = b[o];
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wrow = W.data() + i * n_out;
    for (std::size_t o = 0; o < n_out; ++o) preact[o] += xi * wrow[o];
  }
  switch (act) {
    case Activation::None:
      std::copy(preact.begin(), preact.end(), out.begin());
      break;
    case Activation::Relu:
      for (std::size_t o = 0; o < n_out; ++o)
        out[o] = preact[o] > 0.0 ? preact[o] : 0.0;
      break;
    case Activation::Sigmoid:
      for (std::size_t o = 0; o < n_out; ++o) out[o] = sigmoid(preact[o]);
      break;
  }
}

void affine_backward(std::span<const double> x, std::span<const double> W,
                     Activation act, std::span<const double> preact,
                     std::span<const double> grad_out,
                     std::span<double> grad_pre_buf, std::span<double> grad_W,
                     std::span<double> grad_b, std::span<double> grad_x) {
  const std::size_t in = x.size();
  const std::size_t n_out = grad_out.size();
  switch (act) {
    case Activation::None:
      std::copy(grad_out.begin(), grad_out.end(), grad_pre_buf.begin());
      break;
    case Activation::Relu:
      for (std::size_t o = 0; o < n_out; ++o)
        grad_pre_buf[o] = preact[o] > 0.0 ? grad_out[o] : 0.0;
      break;
    case Activation::Sigmoid:
      for (std::size_t o = 0; o < n_out; ++o) {
        const double s = sigmoid(preact[o]);
        grad_pre_buf[o] = grad_out[o] * s * (1.0 - s);
      }
      break;
  }
  for (std::size_t o = 0; o < n_out; ++o) grad_b[o] += grad_pre_buf[o];
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    double* gwrow = grad_W.data() + i * n_out;
    const double* wrow = W.data() + i * n_out;
    double gx = 0.0;
    for (std::size_t o = 0; o < n_out; ++o) {
      gwrow[o] += xi * grad_pre_buf[o];
      gx += wrow[o] * grad_pre_buf[o];
    }
    if (!grad_x.empty()) grad_x[i] += gx;
  }
}

void glorot_init(std::span<double> w, std::size_t fan_in, std::size_t fan_out,
                 Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w) x = rng.uniform(-limit, limit);
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2,
           double eps)
    : m_(n, 0.0), v_(n, 0.0), lr_(learning_rate), beta1_(beta1),
      beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ContractError("Adam: size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

GradCheckReport grad_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> analytic, std::vector<double> theta,
    double step) {
  GradCheckReport rep;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + step;
    const double up = loss(theta);
    theta[i] = orig - step;
    const double down = loss(theta);
    theta[i] = orig;
    const double fd = (up - down) / (2.0 * step);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
    const double rel = std::abs(analytic[i] - fd) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace rmt::nn

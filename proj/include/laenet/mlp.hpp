#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "laenet/rng.hpp"

namespace laenet {

// Fully-connected network with tanh hidden layers and a linear output,
// parameters kept in one flat vector (per layer: row-major W, then b).
class Mlp {
 public:
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("need at least input and output layer");
    std::size_t count = 0;
    for (std::size_t l = 1; l < sizes_.size(); ++l)
      count += static_cast<std::size_t>(sizes_[l - 1] + 1) * sizes_[l];
    params_.assign(count, 0.0);
  }

  const std::vector<int>& sizes() const { return sizes_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }

  // He-style scaled uniform init.
  void randomize(RngStream& rng) {
    std::size_t off = 0;
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      const int in = sizes_[l - 1], out = sizes_[l];
      const double bound = std::sqrt(6.0 / (in + out));
      for (int i = 0; i < in * out; ++i) params_[off + i] = rng.uniform(-bound, bound);
      off += static_cast<std::size_t>(in) * out;
      for (int i = 0; i < out; ++i) params_[off + i] = 0.0;
      off += out;
    }
  }

  struct Cache {
    std::vector<std::vector<double>> activations;  // per layer, post-activation
  };

  std::vector<double> forward(std::span<const double> obs, Cache* cache = nullptr) const {
    if (static_cast<int>(obs.size()) != in_dim())
      throw std::invalid_argument("observation dimension mismatch");
    std::vector<double> x(obs.begin(), obs.end());
    if (cache) cache->activations = {x};
    std::size_t off = 0;
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      const int in = sizes_[l - 1], out = sizes_[l];
      std::vector<double> y(out);
      for (int j = 0; j < out; ++j) {
        double s = params_[off + static_cast<std::size_t>(in) * out + j];  // bias
        const double* w = &params_[off + static_cast<std::size_t>(j) * in];
        for (int i = 0; i < in; ++i) s += w[i] * x[i];
        y[j] = (l + 1 < sizes_.size()) ? std::tanh(s) : s;
      }
      off += static_cast<std::size_t>(in + 1) * out;
      x = std::move(y);
      if (cache) cache->activations.push_back(x);
    }
    return x;
  }

  // Accumulates d(out_grad . output)/d(params) into param_grad.
  void backward(const Cache& cache, std::span<const double> out_grad,
                std::vector<double>& param_grad) const {
    if (param_grad.size() != params_.size())
      throw std::invalid_argument("param_grad size mismatch");
    std::vector<double> delta(out_grad.begin(), out_grad.end());
    // layer offsets
    std::vector<std::size_t> offs(sizes_.size());
    std::size_t off = 0;
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      offs[l] = off;
      off += static_cast<std::size_t>(sizes_[l - 1] + 1) * sizes_[l];
    }
    for (std::size_t l = sizes_.size() - 1; l >= 1; --l) {
      const int in = sizes_[l - 1], out = sizes_[l];
      const auto& x = cache.activations[l - 1];
      const std::size_t o = offs[l];
      for (int j = 0; j < out; ++j) {
        const double d = delta[j];
        double* gw = &param_grad[o + static_cast<std::size_t>(j) * in];
        for (int i = 0; i < in; ++i) gw[i] += d * x[i];
        param_grad[o + static_cast<std::size_t>(in) * out + j] += d;
      }
      if (l == 1) break;
      std::vector<double> prev(in, 0.0);
      for (int i = 0; i < in; ++i) {
        double s = 0.0;
        for (int j = 0; j < out; ++j)
          s += params_[o + static_cast<std::size_t>(j) * in + i] * delta[j];
        // previous layer output is tanh(z); d tanh = 1 - a^2
        prev[i] = s * (1.0 - x[i] * x[i]);
      }
      delta = std::move(prev);
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
};

}  // namespace laenet

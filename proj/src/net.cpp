#include "mcs/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcs {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least two layer sizes");
  for (int s : sizes_)
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights_.emplace_back(static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1], 0.0);
    biases_.emplace_back(sizes_[l + 1], 0.0);
  }
}

void Mlp::init_weights(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x4D4C50ULL));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double scale = std::sqrt(2.0 / sizes_[l]);
    for (auto& w : weights_[l]) w = scale * rng.normal();
    for (auto& b : biases_[l]) b = 0.0;
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

void Mlp::Grads::zero() {
  for (auto& g : w) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : b) std::fill(g.begin(), g.end(), 0.0);
}

void Mlp::Grads::add_scaled(const Grads& other, double scale) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i) w[l][i] += scale * other.w[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += scale * other.b[l][i];
  }
}

void Mlp::Grads::scale(double s) {
  for (auto& g : w)
    for (auto& v : g) v *= s;
  for (auto& g : b)
    for (auto& v : g) v *= s;
}

Mlp::Grads Mlp::make_grads() const {
  Grads g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.w.emplace_back(weights_[l].size(), 0.0);
    g.b.emplace_back(biases_[l].size(), 0.0);
  }
  return g;
}

void Mlp::forward(const std::vector<double>& x, int batch, std::vector<double>& y,
                  Cache* cache) const {
  if (static_cast<int>(x.size()) != batch * input_dim())
    throw std::invalid_argument("input size does not match batch * input_dim");
  const int layers = layer_count();
  std::vector<double> current = x;
  if (cache) {
    cache->activations.assign(1, current);
    cache->pre.assign(layers, {});
    cache->batch = batch;
  }
  for (int l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    std::vector<double> next(static_cast<std::size_t>(batch) * out);
    const double* wl = weights_[l].data();
    for (int bi = 0; bi < batch; ++bi) {
      double* row = next.data() + static_cast<std::size_t>(bi) * out;
      const double* bias = biases_[l].data();
      for (int o = 0; o < out; ++o) row[o] = bias[o];
      const double* xin = current.data() + static_cast<std::size_t>(bi) * in;
      for (int i = 0; i < in; ++i) {
        const double xi = xin[i];
        const double* wrow = wl + static_cast<std::size_t>(i) * out;
        for (int o = 0; o < out; ++o) row[o] += xi * wrow[o];
      }
    }
    if (cache) cache->pre[l] = next;
    if (l + 1 < layers)
      for (auto& v : next) v = silu(v);
    if (cache) cache->activations.push_back(next);
    current = std::move(next);
  }
  y = std::move(current);
}

void Mlp::backward(const Cache& cache, const std::vector<double>& dy, Grads& grads,
                   std::vector<double>* dx) const {
  const int layers = layer_count();
  const int batch = cache.batch;
  std::vector<double> delta = dy;  // w.r.t. the current layer's output activation
  for (int l = layers - 1; l >= 0; --l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    if (l + 1 < layers) {  // chain through the SiLU of this (hidden) layer
      const auto& pre = cache.pre[l];
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= silu_deriv(pre[i]);
    }
    const auto& a = cache.activations[l];
    double* gw = grads.w[l].data();
    double* gb = grads.b[l].data();
    for (int bi = 0; bi < batch; ++bi) {
      const double* drow = delta.data() + static_cast<std::size_t>(bi) * out;
      const double* arow = a.data() + static_cast<std::size_t>(bi) * in;
      for (int o = 0; o < out; ++o) gb[o] += drow[o];
      for (int i = 0; i < in; ++i) {
        const double ai = arow[i];
        double* grow = gw + static_cast<std::size_t>(i) * out;
        for (int o = 0; o < out; ++o) grow[o] += ai * drow[o];
      }
    }
    if (l > 0 || dx) {
      std::vector<double> prev(static_cast<std::size_t>(batch) * in, 0.0);
      const double* wl = weights_[l].data();
      for (int bi = 0; bi < batch; ++bi) {
        const double* drow = delta.data() + static_cast<std::size_t>(bi) * out;
        double* prow = prev.data() + static_cast<std::size_t>(bi) * in;
        for (int i = 0; i < in; ++i) {
          const double* wrow = wl + static_cast<std::size_t>(i) * out;
          double acc = 0.0;
          for (int o = 0; o < out; ++o) acc += drow[o] * wrow[o];
          prow[i] = acc;
        }
      }
      if (l == 0 && dx) *dx = prev;
      delta = std::move(prev);
    }
  }
}

std::vector<double> Mlp::flatten_params() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.insert(flat.end(), weights_[l].begin(), weights_[l].end());
    flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
  }
  return flat;
}

void Mlp::load_params(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("parameter count mismatch");
  std::size_t at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::copy(flat.begin() + at, flat.begin() + at + weights_[l].size(), weights_[l].begin());
    at += weights_[l].size();
    std::copy(flat.begin() + at, flat.begin() + at + biases_[l].size(), biases_[l].begin());
    at += biases_[l].size();
  }
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(net.make_grads()), v_(net.make_grads()) {}

void Adam::step(Mlp& net, const Mlp::Grads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    auto update = [&](std::vector<double>& params, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    };
    update(net.weights()[l], grads.w[l], m_.w[l], v_.w[l]);
    update(net.biases()[l], grads.b[l], m_.b[l], v_.b[l]);
  }
}

namespace {

double mse_loss(const Mlp& net, const std::vector<double>& x, const std::vector<double>& target,
                int batch) {
  std::vector<double> y;
  net.forward(x, batch, y);
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - target[i];
    loss += d * d;
  }
  return loss / static_cast<double>(y.size());
}

}  // namespace

double gradcheck_mse(const Mlp& net, const std::vector<double>& x,
                     const std::vector<double>& target, int batch,
                     const GradcheckOptions& options, std::uint64_t seed) {
  Mlp work = net;
  Mlp::Cache cache;
  std::vector<double> y;
  work.forward(x, batch, y, &cache);
  std::vector<double> dy(y.size());
  const double inv = 2.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dy[i] = inv * (y[i] - target[i]);
  auto grads = work.make_grads();
  work.backward(cache, dy, grads);
  if (options.corrupt_layer >= 0 && options.corrupt_layer < work.layer_count())
    for (auto& g : grads.w[options.corrupt_layer]) g *= options.corrupt_scale;

  Rng rng(derive_seed(seed, 0x47434BULL));
  double max_rel = 0.0;
  auto probe = [&](std::vector<double>& params, const std::vector<double>& analytic,
                   std::size_t idx) {
    const double saved = params[idx];
    params[idx] = saved + options.step;
    const double up = mse_loss(work, x, target, batch);
    params[idx] = saved - options.step;
    const double down = mse_loss(work, x, target, batch);
    params[idx] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
  };
  for (int l = 0; l < work.layer_count(); ++l) {
    for (int k = 0; k < options.probes_per_layer; ++k)
      probe(work.weights()[l], grads.w[l], rng.uniform_index(work.weights()[l].size()));
    for (int k = 0; k < 2; ++k)
      probe(work.biases()[l], grads.b[l], rng.uniform_index(work.biases()[l].size()));
  }
  return max_rel;
}

}  // namespace mcs

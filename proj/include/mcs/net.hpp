#pragma once

#include <cstdint>
#include <vector>

#include "mcs/rng.hpp"

namespace mcs {

// Dense feed-forward network with SiLU hidden activations and a linear output
// layer. Forward/backward are written by hand; gradcheck_mse verifies them
// against central finite differences.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  // Scaled normal init (He-style fan-in scaling), deterministic per seed.
  void init_weights(std::uint64_t seed);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(weights_.size()); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t parameter_count() const;

  struct Cache {
    // activations[0] is the input batch; pre[l] holds layer l pre-activations.
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre;
    int batch = 0;
  };

  struct Grads {
    std::vector<std::vector<double>> w, b;
    void zero();
    void add_scaled(const Grads& other, double scale);
    void scale(double s);
  };
  Grads make_grads() const;

  // x is batch * input_dim row-major; y is resized to batch * output_dim.
  void forward(const std::vector<double>& x, int batch, std::vector<double>& y,
               Cache* cache = nullptr) const;

  // dy is dLoss/dOutput for the cached batch; accumulates into grads.
  void backward(const Cache& cache, const std::vector<double>& dy, Grads& grads,
                std::vector<double>* dx = nullptr) const;

  std::vector<double> flatten_params() const;
  void load_params(const std::vector<double>& flat);

  std::vector<std::vector<double>>& weights() { return weights_; }
  std::vector<std::vector<double>>& biases() { return biases_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  const std::vector<std::vector<double>>& biases() const { return biases_; }

 private:
  std::vector<int> sizes_;
  std::vector<std::vector<double>> weights_;  // [layer][in * out], row-major [in][out]
  std::vector<std::vector<double>> biases_;   // [layer][out]
};

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_deriv(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// Adam with bias correction; deterministic.
class Adam {
 public:
  Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Mlp& net, const Mlp::Grads& grads);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  Mlp::Grads m_, v_;
};

struct GradcheckOptions {
  int probes_per_layer = 6;  // random weight probes (plus 2 bias probes) per layer
  double step = 1e-5;
  // Test fixture: scale one layer's analytic weight gradient to fake a bug.
  int corrupt_layer = -1;
  double corrupt_scale = 1.05;
};

// Mean-squared-error gradcheck: loss = mean over batch rows and output dims of
// (y - target)^2. Returns the max relative error between analytic and central
// finite-difference gradients over the probed parameters.
double gradcheck_mse(const Mlp& net, const std::vector<double>& x,
                     const std::vector<double>& target, int batch,
                     const GradcheckOptions& options, std::uint64_t seed);

}  // namespace mcs

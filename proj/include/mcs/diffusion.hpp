#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mcs/net.hpp"
#include "mcs/synth_data.hpp"
#include "mcs/tensor.hpp"

namespace mcs {

struct NoiseSchedule {
  std::vector<double> betas;  // betas[u-1] is the variance added at step u

  // Linear beta ramp. Defaults (negative arguments) compress the classic
  // 1000-step ramp into `total_steps` (beta_start = 0.1/U, beta_end = 20/U
  // capped at 0.8) so that alpha_bar at the final step is close to zero and
  // sampling can start from a standard Gaussian.
  static NoiseSchedule linear(int total_steps, double beta_start = -1.0, double beta_end = -1.0);

  int total_steps() const { return static_cast<int>(betas.size()); }
  double beta(int u) const { return betas[u - 1]; }
  double alpha(int u) const { return 1.0 - betas[u - 1]; }
  // Cumulative product of alphas up to u; alpha_bar(0) == 1.
  double alpha_bar(int u) const;

  void validate() const;  // throws std::invalid_argument
};

// x_u = sqrt(alpha_bar_u) * x0 + sqrt(1 - alpha_bar_u) * noise
std::vector<double> forward_diffuse(const std::vector<double>& x0, int u,
                                    const std::vector<double>& noise,
                                    const NoiseSchedule& schedule);

struct DenoiserArch {
  int hidden = 256;
  int depth = 3;
  int time_embed = 32;
};

// The two-character clip generator: predicts the clean clip from a noised one.
// Operates in normalized space; `stats` converts to and from world units.
struct Denoiser {
  PairShape shape;
  int fps = 0;
  DenoiserArch arch;
  NoiseSchedule schedule;
  ChannelStats stats;
  Mlp net;
  std::uint64_t train_seed = 0;
  std::string style_name;

  // Deterministic forward pass, normalized space in and out.
  std::vector<double> predict_x0(const std::vector<double>& x_u, int u) const;
};

Denoiser make_denoiser(const PairShape& shape, int fps, const DenoiserArch& arch,
                       const NoiseSchedule& schedule, const ChannelStats& stats,
                       std::uint64_t weight_seed);

// Sinusoidal embedding of the diffusion timestep.
std::vector<double> timestep_embedding(int u, int dims);

struct TrainGenConfig {
  int steps = 2500;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int val_every = 100;
  DenoiserArch arch;
  NoiseSchedule schedule = NoiseSchedule::linear(50);
};

struct TrainGenResult {
  Denoiser model;
  std::vector<double> train_loss;                 // one entry per step
  std::vector<std::pair<int, double>> val_loss;   // (step, loss), step 0 included
};

// x-start prediction trained with per-element mean squared error. Throws
// std::runtime_error with a diagnostic if the loss turns non-finite.
TrainGenResult train_denoiser(const Corpus& corpus, const TrainGenConfig& config);

// Gradient check of the denoiser's training path on a small batch drawn from
// `clips` (world units). Returns max relative error.
double gradcheck_denoiser(const Denoiser& model, const std::vector<std::vector<double>>& clips,
                          int batch, const GradcheckOptions& options, std::uint64_t seed);

struct GuidanceEval {
  double value = 0.0;
  std::vector<double> grad;  // same length as the clip tensor, world units
};
using GuidanceFn = std::function<GuidanceEval(const std::vector<double>& candidate_world)>;

struct SampleOptions {
  double eta = 0.1;  // guidance step size on the predicted clean clip
  // Per-element cap on the guidance edit, in normalized units. The smoothness
  // gradient grows with fps^4, so an uncapped step can overwhelm the
  // prediction and destabilize the sampling loop.
  double max_guidance_step = 0.5;
  // Re-noising variance: the tighter posterior variance beta_u * (1 -
  // alpha_bar_{u-1}) / (1 - alpha_bar_u) instead of plain beta_u.
  bool tilde_variance = false;
};

struct SampleResult {
  std::vector<double> clip;   // world units
  int guidance_warnings = 0;  // steps where a non-finite gradient was dropped
};

// Guided inpainting sampler. `observed_world` may be null (then `mask` must be
// null or all zeros). Elements where mask == 1 equal observed bitwise in the
// returned clip. Pure function of its arguments and `seed`.
SampleResult sample(const Denoiser& model, const std::vector<double>* observed_world,
                    const std::vector<double>* mask, const GuidanceFn& guidance,
                    std::uint64_t seed, const SampleOptions& options = {});

void save_denoiser(const Denoiser& model, const std::string& path);
Denoiser load_denoiser(const std::string& path);  // throws SchemaError / std::invalid_argument

}  // namespace mcs

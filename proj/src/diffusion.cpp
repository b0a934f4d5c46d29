#include "mcs/diffusion.hpp"
#include <algorithm>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mcs/errors.hpp"

namespace mcs {

NoiseSchedule NoiseSchedule::linear(int total_steps, double beta_start, double beta_end) {
  if (total_steps < 2) throw std::invalid_argument("schedule needs at least 2 steps");
  if (beta_start <= 0.0) beta_start = 0.1 / total_steps;
  if (beta_end <= 0.0) beta_end = std::min(20.0 / total_steps, 0.8);
  NoiseSchedule s;
  s.betas.resize(total_steps);
  for (int u = 0; u < total_steps; ++u)
    s.betas[u] = beta_start + (beta_end - beta_start) * u / (total_steps - 1);
  s.validate();
  return s;
}

double NoiseSchedule::alpha_bar(int u) const {
  double prod = 1.0;
  for (int k = 1; k <= u; ++k) prod *= alpha(k);
  return prod;
}

void NoiseSchedule::validate() const {
  if (total_steps() < 2) throw std::invalid_argument("schedule needs at least 2 steps");
  double prev_bar = 1.0;
  for (int u = 1; u <= total_steps(); ++u) {
    if (!(betas[u - 1] > 0.0 && betas[u - 1] < 1.0))
      throw std::invalid_argument("betas must lie in (0, 1)");
    const double bar = prev_bar * alpha(u);
    if (!(bar < prev_bar)) throw std::invalid_argument("alpha_bar must be strictly decreasing");
    prev_bar = bar;
  }
}

std::vector<double> forward_diffuse(const std::vector<double>& x0, int u,
                                    const std::vector<double>& noise,
                                    const NoiseSchedule& schedule) {
  if (u < 1 || u > schedule.total_steps()) throw std::invalid_argument("timestep out of range");
  if (noise.size() != x0.size()) throw std::invalid_argument("noise shape mismatch");
  const double bar = schedule.alpha_bar(u);
  const double a = std::sqrt(bar), b = std::sqrt(1.0 - bar);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
  return out;
}

std::vector<double> timestep_embedding(int u, int dims) {
  std::vector<double> emb(dims);
  const int half = dims / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    emb[2 * i] = std::sin(u * freq);
    emb[2 * i + 1] = std::cos(u * freq);
  }
  if (dims % 2 == 1) emb[dims - 1] = 0.0;
  return emb;
}

Denoiser make_denoiser(const PairShape& shape, int fps, const DenoiserArch& arch,
                       const NoiseSchedule& schedule, const ChannelStats& stats,
                       std::uint64_t weight_seed) {
  schedule.validate();
  Denoiser d;
  d.shape = shape;
  d.fps = fps;
  d.arch = arch;
  d.schedule = schedule;
  d.stats = stats;
  std::vector<int> sizes;
  sizes.push_back(shape.dim() + arch.time_embed);
  for (int l = 0; l < arch.depth; ++l) sizes.push_back(arch.hidden);
  sizes.push_back(shape.dim());
  d.net = Mlp(sizes);
  d.net.init_weights(weight_seed);
  // Near-zero output layer: a fresh model predicts ~bias, which keeps the
  // sampling recursion contractive before and during training.
  for (auto& w : d.net.weights().back()) w *= 0.01;
  d.train_seed = weight_seed;
  return d;
}

namespace {

void fill_input_row(const Denoiser& model, const std::vector<double>& x_u, int u, double* row) {
  const int dim = model.shape.dim();
  std::memcpy(row, x_u.data(), dim * sizeof(double));
  const auto emb = timestep_embedding(u, model.arch.time_embed);
  std::memcpy(row + dim, emb.data(), emb.size() * sizeof(double));
}

}  // namespace

std::vector<double> Denoiser::predict_x0(const std::vector<double>& x_u, int u) const {
  if (static_cast<int>(x_u.size()) != shape.dim())
    throw std::invalid_argument("clip tensor shape mismatch");
  if (u < 1 || u > schedule.total_steps()) throw std::invalid_argument("timestep out of range");
  std::vector<double> input(shape.dim() + arch.time_embed);
  fill_input_row(*this, x_u, u, input.data());
  std::vector<double> out;
  net.forward(input, 1, out);
  return out;
}

TrainGenResult train_denoiser(const Corpus& corpus, const TrainGenConfig& config) {
  if (corpus.train.size() < 100) throw std::invalid_argument("need at least 100 training clips");
  config.schedule.validate();

  const PairShape shape = corpus.shape();
  const int dim = shape.dim();
  const int in_dim = dim + config.arch.time_embed;

  TrainGenResult result;
  result.model = make_denoiser(shape, corpus.style.fps, config.arch, config.schedule, corpus.stats,
                               derive_seed(config.seed, 0x57454947ULL));
  result.model.style_name = corpus.style.name;
  Denoiser& model = result.model;

  // Pre-normalized copies of both splits.
  std::vector<std::vector<double>> train = corpus.train;
  for (auto& clip : train) normalize(clip, shape, corpus.stats);
  std::vector<std::vector<double>> val = corpus.val;
  for (auto& clip : val) normalize(clip, shape, corpus.stats);

  // alpha_bar lookup
  std::vector<double> bars(config.schedule.total_steps() + 1, 1.0);
  for (int u = 1; u <= config.schedule.total_steps(); ++u)
    bars[u] = bars[u - 1] * config.schedule.alpha(u);

  // Fixed validation batch: one (u, noise) draw per val clip.
  Rng val_rng(derive_seed(config.seed, 0x56414CULL));
  std::vector<double> val_x, val_t;
  int val_batch = static_cast<int>(val.size());
  if (val_batch > 0) {
    val_x.resize(static_cast<std::size_t>(val_batch) * in_dim);
    val_t.resize(static_cast<std::size_t>(val_batch) * dim);
    for (int b = 0; b < val_batch; ++b) {
      const int u = 1 + static_cast<int>(val_rng.uniform_index(config.schedule.total_steps()));
      const double sa = std::sqrt(bars[u]), sb = std::sqrt(1.0 - bars[u]);
      double* row = val_x.data() + static_cast<std::size_t>(b) * in_dim;
      for (int d = 0; d < dim; ++d) row[d] = sa * val[b][d] + sb * val_rng.normal();
      const auto emb = timestep_embedding(u, config.arch.time_embed);
      std::memcpy(row + dim, emb.data(), emb.size() * sizeof(double));
      std::memcpy(val_t.data() + static_cast<std::size_t>(b) * dim, val[b].data(),
                  dim * sizeof(double));
    }
  }
  auto eval_val = [&]() {
    if (val_batch == 0) return 0.0;
    std::vector<double> y;
    model.net.forward(val_x, val_batch, y);
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - val_t[i];
      loss += d * d;
    }
    return loss / static_cast<double>(y.size());
  };
  result.val_loss.emplace_back(0, eval_val());

  Rng rng(derive_seed(config.seed, 0x545241494EULL));
  Adam adam(model.net, config.lr);
  Mlp::Cache cache;
  auto grads = model.net.make_grads();
  std::vector<double> batch_x(static_cast<std::size_t>(config.batch) * in_dim);
  std::vector<double> batch_t(static_cast<std::size_t>(config.batch) * dim);
  std::vector<double> y, dy;

  for (int step = 1; step <= config.steps; ++step) {
    for (int b = 0; b < config.batch; ++b) {
      const auto& clip = train[rng.uniform_index(train.size())];
      const int u = 1 + static_cast<int>(rng.uniform_index(config.schedule.total_steps()));
      const double sa = std::sqrt(bars[u]), sb = std::sqrt(1.0 - bars[u]);
      double* row = batch_x.data() + static_cast<std::size_t>(b) * in_dim;
      for (int d = 0; d < dim; ++d) row[d] = sa * clip[d] + sb * rng.normal();
      const auto emb = timestep_embedding(u, config.arch.time_embed);
      std::memcpy(row + dim, emb.data(), emb.size() * sizeof(double));
      std::memcpy(batch_t.data() + static_cast<std::size_t>(b) * dim, clip.data(),
                  dim * sizeof(double));
    }
    model.net.forward(batch_x, config.batch, y, &cache);
    double loss = 0.0;
    dy.resize(y.size());
    const double inv = 2.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - batch_t[i];
      loss += d * d;
      dy[i] = inv * d;
    }
    loss /= static_cast<double>(y.size());
    if (!std::isfinite(loss))
      throw std::runtime_error("training diverged: non-finite loss at step " +
                               std::to_string(step));
    result.train_loss.push_back(loss);
    grads.zero();
    model.net.backward(cache, dy, grads);
    // step decay keeps the tail of training from bouncing around the optimum
    const double progress = static_cast<double>(step) / config.steps;
    adam.set_learning_rate(config.lr * (progress < 0.7 ? 1.0 : progress < 0.9 ? 0.3 : 0.1));
    adam.step(model.net, grads);
    if (config.val_every > 0 && (step % config.val_every == 0 || step == config.steps))
      result.val_loss.emplace_back(step, eval_val());
  }
  return result;
}

double gradcheck_denoiser(const Denoiser& model, const std::vector<std::vector<double>>& clips,
                          int batch, const GradcheckOptions& options, std::uint64_t seed) {
  if (clips.empty()) throw std::invalid_argument("gradcheck needs at least one clip");
  const int dim = model.shape.dim();
  const int in_dim = dim + model.arch.time_embed;
  Rng rng(derive_seed(seed, 0x444743ULL));
  std::vector<double> x(static_cast<std::size_t>(batch) * in_dim);
  std::vector<double> target(static_cast<std::size_t>(batch) * dim);
  for (int b = 0; b < batch; ++b) {
    std::vector<double> clip = clips[rng.uniform_index(clips.size())];
    normalize(clip, model.shape, model.stats);
    const int u = 1 + static_cast<int>(rng.uniform_index(model.schedule.total_steps()));
    std::vector<double> noise(dim);
    for (auto& n : noise) n = rng.normal();
    const auto x_u = forward_diffuse(clip, u, noise, model.schedule);
    fill_input_row(model, x_u, u, x.data() + static_cast<std::size_t>(b) * in_dim);
    std::memcpy(target.data() + static_cast<std::size_t>(b) * dim, clip.data(),
                dim * sizeof(double));
  }
  return gradcheck_mse(model.net, x, target, batch, options, seed);
}

SampleResult sample(const Denoiser& model, const std::vector<double>* observed_world,
                    const std::vector<double>* mask, const GuidanceFn& guidance,
                    std::uint64_t seed, const SampleOptions& options) {
  const PairShape shape = model.shape;
  const int dim = shape.dim();
  if (observed_world && static_cast<int>(observed_world->size()) != dim)
    throw std::invalid_argument("observed clip shape mismatch");
  if (mask) {
    if (static_cast<int>(mask->size()) != dim) throw std::invalid_argument("mask shape mismatch");
    for (double m : *mask)
      if (m != 0.0 && m != 1.0) throw std::invalid_argument("mask entries must be 0 or 1");
    if (!observed_world)
      for (double m : *mask)
        if (m != 0.0) throw std::invalid_argument("empty observed requires an all-zero mask");
  }

  std::vector<double> observed_norm;
  if (observed_world && mask) {
    observed_norm = *observed_world;
    normalize(observed_norm, shape, model.stats);
    // Channels with a clamped (degenerate) standard deviation can normalize a
    // benign observation to astronomic values and blow up the feedback loop;
    // the conditioning signal is clipped to the model's numeric range. The
    // final world-space mask overwrite still returns observed values bitwise.
    for (auto& v : observed_norm) v = std::clamp(v, -8.0, 8.0);
  }

  const int total = model.schedule.total_steps();
  std::vector<double> bars(total + 1, 1.0);
  for (int u = 1; u <= total; ++u) bars[u] = bars[u - 1] * model.schedule.alpha(u);

  Rng rng(derive_seed(seed, 0x53414D50ULL));
  std::vector<double> x(dim);
  for (auto& v : x) v = rng.normal();

  SampleResult result;
  std::vector<double> x0hat, world;
  for (int u = total; u >= 1; --u) {
    x0hat = model.predict_x0(x, u);
    // clip-denoised: predictions stay within the (normalized) data range
    for (auto& v : x0hat) v = std::clamp(v, -5.0, 5.0);
    if (mask && observed_world)
      for (int d = 0; d < dim; ++d)
        if ((*mask)[d] != 0.0) x0hat[d] = observed_norm[d];
    if (guidance && options.eta != 0.0) {
      world = x0hat;
      denormalize(world, shape, model.stats);
      GuidanceEval eval = guidance(world);
      bool ok = static_cast<int>(eval.grad.size()) == dim;
      if (ok)
        for (double g : eval.grad)
          if (!std::isfinite(g)) {
            ok = false;
            break;
          }
      if (!ok) {
        ++result.guidance_warnings;
      } else {
        // Gradient arrives in world units; the chain rule through
        // denormalization multiplies by the channel standard deviation.
        // The edit is capped per element so a steep constraint cannot blow
        // up the x0 feedback loop.
        double largest = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double step = options.eta * eval.grad[d] * model.stats.stdev[stat_index(shape, d)];
          largest = std::max(largest, std::abs(step));
        }
        const double scale =
            largest > options.max_guidance_step ? options.max_guidance_step / largest : 1.0;
        for (int d = 0; d < dim; ++d)
          x0hat[d] +=
              scale * options.eta * eval.grad[d] * model.stats.stdev[stat_index(shape, d)];
      }
    }
    if (u > 1) {
      // DDPM posterior mean around the edited clean prediction.
      const double beta = model.schedule.beta(u);
      const double c0 = std::sqrt(bars[u - 1]) * beta / (1.0 - bars[u]);
      const double cx = std::sqrt(model.schedule.alpha(u)) * (1.0 - bars[u - 1]) / (1.0 - bars[u]);
      const double variance =
          options.tilde_variance ? beta * (1.0 - bars[u - 1]) / (1.0 - bars[u]) : beta;
      const double sigma = std::sqrt(variance);
      for (int d = 0; d < dim; ++d) x[d] = c0 * x0hat[d] + cx * x[d] + sigma * rng.normal();
    }
  }

  denormalize(x0hat, shape, model.stats);
  rebuild_velocities(x0hat, shape, model.fps);
  renormalize_rotations(x0hat, shape);
  if (mask && observed_world)
    for (int d = 0; d < dim; ++d)
      if ((*mask)[d] != 0.0) x0hat[d] = (*observed_world)[d];
  result.clip = std::move(x0hat);
  return result;
}

namespace {
constexpr const char* kCkptMagic = "MCS-GEN-CKPT-V1\n";
}

void save_denoiser(const Denoiser& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  nlohmann::ordered_json header;
  header["shape"] = {{"clip_len", model.shape.clip_len}, {"joints", model.shape.joints}};
  header["fps"] = model.fps;
  header["arch"] = {{"hidden", model.arch.hidden},
                    {"depth", model.arch.depth},
                    {"time_embed", model.arch.time_embed}};
  header["betas"] = model.schedule.betas;
  header["mean"] = model.stats.mean;
  header["stdev"] = model.stats.stdev;
  header["stats_clamped"] = model.stats.clamped;
  header["train_seed"] = model.train_seed;
  header["style"] = model.style_name;
  header["sizes"] = model.net.sizes();
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  out << kCkptMagic;
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto params = model.net.flatten_params();
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw std::invalid_argument("write failed: " + path);
}

Denoiser load_denoiser(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  std::string magic(std::strlen(kCkptMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCkptMagic)
    throw SchemaError("not a generator checkpoint (magic mismatch)");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ULL << 30)) throw SchemaError("bad checkpoint header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("truncated checkpoint header");

  Denoiser model;
  std::vector<int> sizes;
  try {
    auto header = nlohmann::ordered_json::parse(text);
    model.shape.clip_len = header.at("shape").at("clip_len").get<int>();
    model.shape.joints = header.at("shape").at("joints").get<int>();
    model.fps = header.at("fps").get<int>();
    model.arch.hidden = header.at("arch").at("hidden").get<int>();
    model.arch.depth = header.at("arch").at("depth").get<int>();
    model.arch.time_embed = header.at("arch").at("time_embed").get<int>();
    model.schedule.betas = header.at("betas").get<std::vector<double>>();
    model.stats.mean = header.at("mean").get<std::vector<double>>();
    model.stats.stdev = header.at("stdev").get<std::vector<double>>();
    model.stats.clamped = header.at("stats_clamped").get<bool>();
    model.train_seed = header.at("train_seed").get<std::uint64_t>();
    model.style_name = header.at("style").get<std::string>();
    sizes = header.at("sizes").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header parse error: ") + e.what());
  }
  try {
    model.schedule.validate();
    model.net = Mlp(sizes);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid checkpoint content: ") + e.what());
  }
  std::vector<double> params(model.net.parameter_count());
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!in) throw SchemaError("truncated checkpoint weights");
  model.net.load_params(params);
  return model;
}

}  // namespace mcs

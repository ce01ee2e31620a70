#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "pcforge/diffusion.hpp"
#include "pcforge/features.hpp"
#include "pcforge/raster.hpp"

namespace pcforge {

// Interleaved (sin, cos) of t/T at D/2 geometric frequencies running from pi
// up to roughly pi*T/2. Throws ConfigError for odd D.
std::vector<double> time_embedding(int t, int steps, int dim);

// Noise-prediction model. Implementations must be deterministic and apply the
// same function to every point so predictions are permutation-equivariant.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual int feature_channels() const = 0;
  virtual NoiseField predict(const PointCloud& x_t, const FeatureCloud& features, int t) const = 0;

  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;

  // Loss is training_loss(target, prediction) where the prediction is centered
  // first in CDPM mode. Writes dLoss/dParameters into grad (size = parameter count).
  virtual double loss_and_gradient(const PointCloud& x_t, const FeatureCloud& features, int t,
                                   const NoiseField& target, SamplerMode mode, std::span<double> grad) const = 0;
};

// What the network head outputs. `sample` predicts x0 and converts it to a
// noise estimate through the schedule, eps = (x_t - sqrt(abar) x0) / sqrt(1 - abar);
// the model still presents a noise prediction to callers.
enum class Parameterization { epsilon, sample };
std::string to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& s);

struct DenoiserConfig {
  int feature_channels = 3;
  std::vector<int> hidden = {64, 64};
  int time_dim = 16;
  int steps = 100;  // T used by the time embedding
  bool zero_init_output = false;
  std::uint64_t init_seed = 0;
  Parameterization output = Parameterization::epsilon;

  int input_width() const { return 3 + feature_channels + time_dim; }
};

// Fully connected SiLU network applied to [xyz, features, time embedding] of
// every point independently.
class ToyPointwiseDenoiser final : public Denoiser {
 public:
  // `schedule` is required for Parameterization::sample and must have cfg.steps steps.
  explicit ToyPointwiseDenoiser(DenoiserConfig cfg, const NoiseSchedule* schedule = nullptr);

  const DenoiserConfig& config() const { return cfg_; }
  std::size_t parameter_count() const { return params_.size(); }

  int feature_channels() const override { return cfg_.feature_channels; }
  NoiseField predict(const PointCloud& x_t, const FeatureCloud& features, int t) const override;
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  double loss_and_gradient(const PointCloud& x_t, const FeatureCloud& features, int t, const NoiseField& target,
                           SamplerMode mode, std::span<double> grad) const override;

  struct Layer {
    int in = 0;
    int out = 0;
    std::size_t weight_offset = 0;  // out x in, row-major
    std::size_t bias_offset = 0;
  };
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  // Per-step affine map from the network head to a noise estimate:
  // eps = head_x[t] * x_t + head_f[t] * F. Identity for epsilon output.
  std::pair<double, double> head(int t) const;

  DenoiserConfig cfg_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
  std::vector<double> head_x_, head_f_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int warmup_steps = 100;
  int total_steps = 1000;
  int batch_size = 8;
  std::uint64_t seed = 0;
  SamplerMode mode = SamplerMode::cdpm;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t points_per_item = 0;  // 0 keeps every point of x0
  int splat_radius = 1;
  double fill = 0.0;
  // Reuse each batch slot's first (t, x0, eps) draw on every step; a
  // single-example overfitting check.
  bool fixed_draw = false;
  int fixed_t = 0;  // > 0 pins every draw to this step instead of sampling t

  void validate() const;
};

// Decoupled weight decay with bias-corrected adaptive moments.
class AdamW {
 public:
  AdamW(std::size_t n, double beta1, double beta2, double eps, double weight_decay);
  void update(std::span<double> params, std::span<const double> grad, double lr);
  long steps() const { return steps_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long steps_ = 0;
  std::vector<double> m_, v_;
};

struct TrainItem {
  const PointCloud* x0 = nullptr;
  const FeatureImage* condition = nullptr;
  CameraPose pose;
};

// What one batch item saw inside a training step.
struct TrainTrace {
  int t;
  const PointCloud& x0;
  const NoiseField& eps;
  const PointCloud& x_t;
  const NoiseField& eps_hat;
  double loss;
};

class Trainer {
 public:
  Trainer(Denoiser& model, const NoiseSchedule& schedule, const Intrinsics& k, TrainConfig cfg);

  // One optimizer update on the batch; returns the pre-update batch loss.
  // Throws DivergenceError on a non-finite loss.
  double step(std::span<const TrainItem> batch);

  double learning_rate_at(long step) const;
  long steps_taken() const { return optimizer_.steps(); }
  const TrainConfig& config() const { return cfg_; }

  std::function<void(const TrainTrace&)> on_item;

 private:
  Denoiser& model_;
  const NoiseSchedule& schedule_;
  Intrinsics k_;
  TrainConfig cfg_;
  AdamW optimizer_;
  std::mt19937_64 rng_;
  std::vector<double> grad_, item_grad_;

  struct Draw {
    int t = 1;
    PointCloud x0;
    NoiseField eps;
  };
  Draw draw_;
  std::vector<Draw> fixed_draws_;
};

struct SampleOptions {
  int splat_radius = 1;
  double fill = 0.0;
};

using SampleObserver = std::function<void(int t, const PointCloud& x)>;

// Reverse chain from Gaussian x_T with per-step feature projection. The
// observer sees x_{t-1} after every step. Deterministic for a fixed seed.
PointCloud sample_pointcloud(const Denoiser& model, const FeatureImage& condition, const CameraPose& pose,
                             const Intrinsics& k, const NoiseSchedule& schedule, SamplerMode mode, std::size_t n,
                             std::uint64_t seed, const SampleOptions& opt = {}, const SampleObserver& observer = {});

struct Checkpoint {
  DenoiserConfig arch;
  NoiseSchedule schedule;
  SamplerMode mode;
  Intrinsics intrinsics;
  std::vector<double> parameters;

  ToyPointwiseDenoiser make_model() const;
};

// One JSON header line followed by the raw little-endian float64 parameters.
void save_checkpoint(const std::filesystem::path& path, const ToyPointwiseDenoiser& model,
                     const NoiseSchedule& schedule, SamplerMode mode, const Intrinsics& k);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pcforge

#include "pcforge/denoiser.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Core>

#include "json.hpp"
#include "pcforge/seed.hpp"

namespace pcforge {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMat>;
using Weights = Eigen::Map<RowMat>;

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

struct Activations {
  std::vector<RowMat> pre;   // per hidden layer, before SiLU
  std::vector<RowMat> post;  // post[0] = input, post[l+1] = SiLU(pre[l])
  RowMat output;
};

RowMat assemble_input(const DenoiserConfig& cfg, const PointCloud& x_t, const FeatureCloud& features, int t) {
  if (features.points != x_t.size()) throw ShapeError("feature rows do not match the cloud length");
  if (features.channels != cfg.feature_channels)
    throw ShapeError("feature width " + std::to_string(features.channels) + " does not match model input width " +
                     std::to_string(cfg.feature_channels));
  const auto temb = time_embedding(t, cfg.steps, cfg.time_dim);
  const auto n = static_cast<Eigen::Index>(x_t.size());
  RowMat in(n, cfg.input_width());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = x_t[static_cast<std::size_t>(i)];
    in(i, 0) = p.x;
    in(i, 1) = p.y;
    in(i, 2) = p.z;
    const auto row = features.row(static_cast<std::size_t>(i));
    for (int c = 0; c < cfg.feature_channels; ++c) in(i, 3 + c) = row[c];
    for (int d = 0; d < cfg.time_dim; ++d) in(i, 3 + cfg.feature_channels + d) = temb[d];
  }
  return in;
}

Activations forward(const ToyPointwiseDenoiser& m, std::span<const double> params, RowMat input) {
  Activations act;
  act.post.push_back(std::move(input));
  const auto& layers = m.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    ConstWeights w(params.data() + L.weight_offset, L.out, L.in);
    Eigen::Map<const Eigen::RowVectorXd> b(params.data() + L.bias_offset, L.out);
    RowMat a = act.post.back() * w.transpose();
    a.rowwise() += b;
    if (l + 1 == layers.size()) {
      act.output = std::move(a);
    } else {
      RowMat h = a.unaryExpr([](double v) { return v * sigmoid(v); });
      act.pre.push_back(std::move(a));
      act.post.push_back(std::move(h));
    }
  }
  return act;
}

NoiseField to_noise(const RowMat& out) {
  NoiseField eps(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) eps[static_cast<std::size_t>(i)] = {out(i, 0), out(i, 1), out(i, 2)};
  return eps;
}

}  // namespace

std::vector<double> time_embedding(int t, int steps, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("time embedding width must be a positive even number");
  if (steps < 1 || t < 1 || t > steps) throw StepError("time embedding step out of range");
  const int pairs = dim / 2;
  const double ratio = pairs > 1 ? std::pow(std::max(steps / 2.0, 1.0), 1.0 / (pairs - 1)) : 1.0;
  const double phase = static_cast<double>(t) / steps;
  std::vector<double> e(static_cast<std::size_t>(dim));
  double freq = std::numbers::pi;
  for (int k = 0; k < pairs; ++k, freq *= ratio) {
    e[2 * k] = std::sin(freq * phase);
    e[2 * k + 1] = std::cos(freq * phase);
  }
  return e;
}

std::string to_string(Parameterization p) { return p == Parameterization::epsilon ? "epsilon" : "sample"; }

Parameterization parameterization_from_string(const std::string& s) {
  if (s == "epsilon") return Parameterization::epsilon;
  if (s == "sample") return Parameterization::sample;
  throw ConfigError("unknown parameterization '" + s + "' (expected epsilon or sample)");
}

ToyPointwiseDenoiser::ToyPointwiseDenoiser(DenoiserConfig cfg, const NoiseSchedule* schedule) : cfg_(std::move(cfg)) {
  if (cfg_.feature_channels < 0) throw ConfigError("negative feature width");
  if (cfg_.time_dim <= 0 || cfg_.time_dim % 2) throw ConfigError("time embedding width must be a positive even number");
  if (cfg_.steps < 1) throw ConfigError("model steps must be positive");
  for (int h : cfg_.hidden)
    if (h <= 0) throw ConfigError("hidden sizes must be positive");

  std::vector<int> widths{cfg_.input_width()};
  widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  widths.push_back(3);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer L{widths[l], widths[l + 1], offset, offset + static_cast<std::size_t>(widths[l]) * widths[l + 1]};
    offset = L.bias_offset + static_cast<std::size_t>(L.out);
    layers_.push_back(L);
  }
  params_.assign(offset, 0.0);

  if (cfg_.output == Parameterization::sample) {
    if (!schedule) throw ConfigError("sample parameterization needs the noise schedule");
    if (schedule->steps() != cfg_.steps) throw ConfigError("schedule length differs from model steps");
    for (int t = 1; t <= cfg_.steps; ++t) {
      const double ab = schedule->alpha_bar(t), s1 = std::sqrt(1.0 - ab);
      head_x_.push_back(1.0 / s1);
      head_f_.push_back(-std::sqrt(ab) / s1);
    }
  }

  std::mt19937_64 rng(cfg_.init_seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (l + 1 == layers_.size() && cfg_.zero_init_output) continue;
    const double bound = std::sqrt(6.0 / (L.in + L.out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < static_cast<std::size_t>(L.in) * L.out; ++i) params_[L.weight_offset + i] = u(rng);
  }
}

std::pair<double, double> ToyPointwiseDenoiser::head(int t) const {
  if (head_x_.empty()) return {0.0, 1.0};
  const auto i = static_cast<std::size_t>(t - 1);
  return {head_x_.at(i), head_f_.at(i)};
}

NoiseField ToyPointwiseDenoiser::predict(const PointCloud& x_t, const FeatureCloud& features, int t) const {
  NoiseField eps = to_noise(forward(*this, params_, assemble_input(cfg_, x_t, features, t)).output);
  const auto [hx, hf] = head(t);
  if (hx != 0.0 || hf != 1.0)
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = hx * x_t[i] + hf * eps[i];
  return eps;
}

double ToyPointwiseDenoiser::loss_and_gradient(const PointCloud& x_t, const FeatureCloud& features, int t,
                                               const NoiseField& target, SamplerMode mode,
                                               std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ShapeError("gradient buffer has the wrong size");
  if (target.size() != x_t.size()) throw ShapeError("target noise length differs from cloud length");
  const Activations act = forward(*this, params_, assemble_input(cfg_, x_t, features, t));
  const auto n = act.output.rows();

  const auto [hx, hf] = head(t);
  RowMat pred = hf * act.output;
  if (hx != 0.0)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = x_t[static_cast<std::size_t>(i)];
      pred(i, 0) += hx * p.x;
      pred(i, 1) += hx * p.y;
      pred(i, 2) += hx * p.z;
    }
  if (mode == SamplerMode::cdpm) pred.rowwise() -= pred.colwise().mean();

  RowMat diff(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = target[static_cast<std::size_t>(i)];
    diff(i, 0) = pred(i, 0) - e.x;
    diff(i, 1) = pred(i, 1) - e.y;
    diff(i, 2) = pred(i, 2) - e.z;
  }
  const double loss = diff.squaredNorm() / static_cast<double>(n);

  RowMat g = diff * (2.0 / static_cast<double>(n));
  // Centering is an orthogonal projection, so its Jacobian is itself.
  if (mode == SamplerMode::cdpm) g.rowwise() -= g.colwise().mean();
  if (hf != 1.0) g *= hf;

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& L = layers_[li];
    const RowMat& input = act.post[li];
    Weights dw(grad.data() + L.weight_offset, L.out, L.in);
    Eigen::Map<Eigen::RowVectorXd> db(grad.data() + L.bias_offset, L.out);
    dw.noalias() = g.transpose() * input;
    db = g.colwise().sum();
    if (li == 0) break;
    ConstWeights w(params_.data() + L.weight_offset, L.out, L.in);
    RowMat gh = g * w;
    const RowMat& pre = act.pre[li - 1];
    g = gh.binaryExpr(pre, [](double dh, double a) {
      const double s = sigmoid(a);
      return dh * s * (1.0 + a * (1.0 - s));
    });
  }
  return loss;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (warmup_steps < 0 || total_steps < 0) throw ConfigError("step counts must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (fixed_t < 0) throw ConfigError("fixed step must be non-negative");
}

AdamW::AdamW(std::size_t n, double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::update(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("optimizer state size mismatch");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * params[i]);
  }
}

Trainer::Trainer(Denoiser& model, const NoiseSchedule& schedule, const Intrinsics& k, TrainConfig cfg)
    : model_(model),
      schedule_(schedule),
      k_(k),
      cfg_(cfg),
      optimizer_(model.parameters().size(), cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay),
      rng_(cfg.seed),
      grad_(model.parameters().size()),
      item_grad_(model.parameters().size()) {
  cfg_.validate();
  k_.validate();
  if (cfg_.fixed_t > schedule_.steps()) throw ConfigError("fixed step exceeds the schedule length");
}

double Trainer::learning_rate_at(long step) const {
  if (cfg_.warmup_steps <= 0) return cfg_.learning_rate;
  return cfg_.learning_rate * std::min(1.0, static_cast<double>(step) / cfg_.warmup_steps);
}

double Trainer::step(std::span<const TrainItem> batch) {
  if (batch.empty()) throw ConfigError("training batch is empty");
  std::fill(grad_.begin(), grad_.end(), 0.0);
  std::uniform_int_distribution<int> pick_t(1, schedule_.steps());
  double batch_loss = 0.0;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& item = batch[b];
    if (!item.x0 || !item.condition) throw ConfigError("training item is missing its cloud or condition");
    if (!cfg_.fixed_draw || b >= fixed_draws_.size()) {
      Draw d;
      d.t = cfg_.fixed_t > 0 ? cfg_.fixed_t : pick_t(rng_);
      const std::size_t full = item.x0->size();
      if (cfg_.points_per_item > 0 && cfg_.points_per_item < full) {
        std::vector<std::size_t> idx(full);
        for (std::size_t i = 0; i < full; ++i) idx[i] = i;
        for (std::size_t i = 0; i < cfg_.points_per_item; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, full - 1);
          std::swap(idx[i], idx[pick(rng_)]);
        }
        d.x0.points.resize(cfg_.points_per_item);
        for (std::size_t i = 0; i < cfg_.points_per_item; ++i) d.x0[i] = (*item.x0)[idx[i]];
      } else {
        d.x0 = *item.x0;
      }
      d.eps = gaussian_noise(d.x0.size(), rng_);
      if (cfg_.mode == SamplerMode::cdpm) {
        d.x0 = center_cloud(d.x0);
        d.eps = center_noise(d.eps);
      }
      if (cfg_.fixed_draw) fixed_draws_.push_back(d);
      draw_ = std::move(d);
    } else {
      draw_ = fixed_draws_[b];
    }
    const int t = draw_.t;
    const PointCloud& x0 = draw_.x0;
    const NoiseField& eps = draw_.eps;
    const PointCloud x_t = forward_sample(x0, t, eps, schedule_);
    const FeatureCloud features = project_features(x_t, item.pose, k_, *item.condition, cfg_.fill, cfg_.splat_radius);

    const double loss = model_.loss_and_gradient(x_t, features, t, eps, cfg_.mode, item_grad_);
    if (on_item) {
      NoiseField eps_hat = model_.predict(x_t, features, t);
      if (cfg_.mode == SamplerMode::cdpm) eps_hat = center_noise(eps_hat);
      on_item(TrainTrace{t, x0, eps, x_t, eps_hat, loss});
    }
    batch_loss += loss;
    for (std::size_t i = 0; i < grad_.size(); ++i) grad_[i] += item_grad_[i];
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  batch_loss *= inv;
  if (!std::isfinite(batch_loss))
    throw DivergenceError("non-finite training loss", static_cast<int>(optimizer_.steps() + 1));
  for (double& g : grad_) g *= inv;
  optimizer_.update(model_.parameters(), grad_, learning_rate_at(optimizer_.steps() + 1));
  return batch_loss;
}

PointCloud sample_pointcloud(const Denoiser& model, const FeatureImage& condition, const CameraPose& pose,
                             const Intrinsics& k, const NoiseSchedule& schedule, SamplerMode mode, std::size_t n,
                             std::uint64_t seed, const SampleOptions& opt, const SampleObserver& observer) {
  if (n == 0) throw ConfigError("sample needs at least one point");
  if (condition.channels != model.feature_channels())
    throw ShapeError("condition has " + std::to_string(condition.channels) + " channels, model expects " +
                     std::to_string(model.feature_channels()));
  std::mt19937_64 rng(seed);
  const NoiseField init = gaussian_noise(n, rng);
  PointCloud x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = init[i];
  if (mode == SamplerMode::cdpm) x = center_cloud(x);

  for (int t = schedule.steps(); t >= 1; --t) {
    const FeatureCloud f = project_features(x, pose, k, condition, opt.fill, opt.splat_radius);
    const NoiseField eps_hat = model.predict(x, f, t);
    x = reverse_step(x, t, eps_hat, schedule, mode, mix_seed(seed, static_cast<std::uint64_t>(t)));
    for (const auto& p : x)
      if (!p.finite()) throw DivergenceError("non-finite coordinates at step " + std::to_string(t), t);
    if (observer) observer(t - 1, x);
  }
  return x;
}

ToyPointwiseDenoiser Checkpoint::make_model() const {
  ToyPointwiseDenoiser m(arch, &schedule);
  if (m.parameter_count() != parameters.size()) throw ShapeError("checkpoint parameter count mismatch");
  std::copy(parameters.begin(), parameters.end(), m.parameters().begin());
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const ToyPointwiseDenoiser& model,
                     const NoiseSchedule& schedule, SamplerMode mode, const Intrinsics& k) {
  const auto& a = model.config();
  nlohmann::ordered_json header = {
      {"format", "pcforge-checkpoint-1"},
      {"architecture", "toy-pointwise-silu"},
      {"feature_channels", a.feature_channels},
      {"hidden", a.hidden},
      {"time_dim", a.time_dim},
      {"steps", a.steps},
      {"output", to_string(a.output)},
      {"mode", to_string(mode)},
      {"schedule", nlohmann::json::parse(schedule.to_json())},
      {"intrinsics", {{"focal", k.focal}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
      {"param_count", model.parameter_count()},
      {"dtype", "float64"},
      {"endianness", "little"}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << header.dump() << '\n';
  const auto p = model.parameters();
  out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  try {
    const auto h = nlohmann::json::parse(line);
    if (h.at("format").get<std::string>() != "pcforge-checkpoint-1") throw ParseError(path.string() + ": unknown format");
    DenoiserConfig arch;
    arch.feature_channels = h.at("feature_channels").get<int>();
    arch.hidden = h.at("hidden").get<std::vector<int>>();
    arch.time_dim = h.at("time_dim").get<int>();
    arch.steps = h.at("steps").get<int>();
    arch.output = parameterization_from_string(h.value("output", "epsilon"));
    const auto& ki = h.at("intrinsics");
    Intrinsics k{ki.at("focal").get<double>(), ki.at("cx").get<double>(), ki.at("cy").get<double>(),
                 ki.at("width").get<int>(), ki.at("height").get<int>()};
    Checkpoint ck{arch, NoiseSchedule::from_json(h.at("schedule").dump()),
                  sampler_mode_from_string(h.at("mode").get<std::string>()), k, {}};
    const auto count = h.at("param_count").get<std::size_t>();
    ck.parameters.resize(count);
    if (!in.read(reinterpret_cast<char*>(ck.parameters.data()), static_cast<std::streamsize>(count * sizeof(double))))
      throw ParseError(path.string() + ": truncated parameter block");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace pcforge

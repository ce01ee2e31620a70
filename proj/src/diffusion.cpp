#include "pcforge/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "pcforge/errors.hpp"

namespace pcforge {

std::string to_string(SamplerMode m) { return m == SamplerMode::cdpm ? "cdpm" : "ddpm"; }

SamplerMode sampler_mode_from_string(const std::string& s) {
  if (s == "ddpm" || s == "DDPM") return SamplerMode::ddpm;
  if (s == "cdpm" || s == "CDPM") return SamplerMode::cdpm;
  throw ConfigError("unknown sampler mode '" + s + "'");
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, int steps, double beta_start, double beta_end)
    : kind_(kind), steps_(steps), beta_start_(beta_start), beta_end_(beta_end) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
  beta_.resize(steps);
  alpha_.resize(steps);
  alpha_bar_.resize(steps);
  double running = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    beta_[i] = beta_start + frac * (beta_end - beta_start);
    alpha_[i] = 1.0 - beta_[i];
    running *= alpha_[i];
    alpha_bar_[i] = running;
  }
}

std::size_t NoiseSchedule::check(int t) const {
  if (t < 1 || t > steps_) throw StepError("step " + std::to_string(t) + " outside 1.." + std::to_string(steps_));
  return static_cast<std::size_t>(t - 1);
}

std::string NoiseSchedule::to_json() const {
  nlohmann::ordered_json j = {{"kind", "linear"}, {"T", steps_}, {"beta_start", beta_start_}, {"beta_end", beta_end_}};
  return j.dump();
}

NoiseSchedule NoiseSchedule::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("kind").get<std::string>() != "linear") throw ConfigError("unsupported schedule kind");
    return NoiseSchedule(ScheduleKind::linear, j.at("T").get<int>(), j.at("beta_start").get<double>(),
                         j.at("beta_end").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schedule: ") + e.what());
  }
}

NoiseSchedule make_schedule(ScheduleKind kind, int steps, double beta_start, double beta_end) {
  return NoiseSchedule(kind, steps, beta_start, beta_end);
}

NoiseSchedule make_default_schedule(int steps) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  const double scale = 1000.0 / steps;
  const double end = std::min(0.02 * scale, 0.999);
  const double start = std::min(1e-4 * scale, end);
  return make_schedule(ScheduleKind::linear, steps, start, end);
}

NoiseField gaussian_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  NoiseField eps(n);
  for (auto& e : eps.values) {
    e.x = normal(rng);
    e.y = normal(rng);
    e.z = normal(rng);
  }
  return eps;
}

PointCloud forward_sample(const PointCloud& x0, int t, const NoiseField& eps, const NoiseSchedule& s) {
  if (eps.size() != x0.size()) throw ShapeError("forward_sample: noise length differs from cloud length");
  const double ab = s.alpha_bar(t);
  const double signal = std::sqrt(ab), noise = std::sqrt(1.0 - ab);
  PointCloud out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = signal * x0[i] + noise * eps[i];
  return out;
}

Point3 mean_of(const NoiseField& eps) {
  if (eps.size() == 0) throw ShapeError("mean of an empty noise field");
  Point3 sum;
  for (const auto& e : eps.values) sum += e;
  return sum * (1.0 / static_cast<double>(eps.size()));
}

NoiseField center_noise(const NoiseField& eps) {
  const Point3 m = mean_of(eps);
  NoiseField out(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) out[i] = eps[i] - m;
  return out;
}

PointCloud reverse_step(const PointCloud& x_t, int t, const NoiseField& eps_hat, const NoiseSchedule& s,
                        SamplerMode mode, const NoiseField& z) {
  if (eps_hat.size() != x_t.size()) throw ShapeError("reverse_step: eps_hat length differs from cloud length");
  if (t > 1 && z.size() != x_t.size()) throw ShapeError("reverse_step: z length differs from cloud length");
  const double alpha = s.alpha(t), beta = s.beta(t), ab = s.alpha_bar(t);
  // The posterior mean uses sqrt(1 - alpha_bar_t) in the noise coefficient.
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double eps_coef = beta / std::sqrt(1.0 - ab);
  const double sigma = t > 1 ? std::sqrt(beta) : 0.0;

  const NoiseField eps_used = mode == SamplerMode::cdpm ? center_noise(eps_hat) : eps_hat;
  PointCloud out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    Point3 mu = inv_sqrt_alpha * (x_t[i] - eps_coef * eps_used[i]);
    if (t > 1) mu += sigma * z[i];
    out[i] = mu;
  }
  return mode == SamplerMode::cdpm ? center_cloud(out) : out;
}

PointCloud reverse_step(const PointCloud& x_t, int t, const NoiseField& eps_hat, const NoiseSchedule& s,
                        SamplerMode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const NoiseField z = t > 1 ? gaussian_noise(x_t.size(), rng) : NoiseField{};
  return reverse_step(x_t, t, eps_hat, s, mode, z);
}

double training_loss(const NoiseField& eps, const NoiseField& eps_hat) {
  if (eps.size() != eps_hat.size()) throw ShapeError("training_loss: length mismatch");
  if (eps.size() == 0) throw ShapeError("training_loss: empty noise field");
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) sum += squared_distance(eps[i], eps_hat[i]);
  return sum / static_cast<double>(eps.size());
}

}  // namespace pcforge

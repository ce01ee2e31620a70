#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pcforge/geometry.hpp"

namespace pcforge {

enum class SamplerMode { ddpm, cdpm };

std::string to_string(SamplerMode m);
SamplerMode sampler_mode_from_string(const std::string& s);

// Per-point 3D noise offsets, index-aligned with a PointCloud.
struct NoiseField {
  std::vector<Point3> values;

  NoiseField() = default;
  explicit NoiseField(std::size_t n) : values(n) {}
  explicit NoiseField(std::vector<Point3> v) : values(std::move(v)) {}
  std::size_t size() const { return values.size(); }
  Point3& operator[](std::size_t i) { return values[i]; }
  const Point3& operator[](std::size_t i) const { return values[i]; }
  friend bool operator==(const NoiseField&, const NoiseField&) = default;
};

enum class ScheduleKind { linear };

// Steps are 1-based: beta(1) .. beta(T).
class NoiseSchedule {
 public:
  NoiseSchedule(ScheduleKind kind, int steps, double beta_start, double beta_end);

  int steps() const { return steps_; }
  ScheduleKind kind() const { return kind_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  double beta(int t) const { return beta_[check(t)]; }
  double alpha(int t) const { return alpha_[check(t)]; }
  double alpha_bar(int t) const { return alpha_bar_[check(t)]; }

  std::string to_json() const;
  static NoiseSchedule from_json(const std::string& text);

 private:
  std::size_t check(int t) const;

  ScheduleKind kind_;
  int steps_;
  double beta_start_, beta_end_;
  std::vector<double> beta_, alpha_, alpha_bar_;
};

// Throws ConfigError unless T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(ScheduleKind kind, int steps, double beta_start, double beta_end);

// Linear bounds 1e-4 -> 0.02 rescaled by 1000 / T (identity at T = 1000).
NoiseSchedule make_default_schedule(int steps);

NoiseField gaussian_noise(std::size_t n, std::mt19937_64& rng);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
PointCloud forward_sample(const PointCloud& x0, int t, const NoiseField& eps, const NoiseSchedule& s);

NoiseField center_noise(const NoiseField& eps);
Point3 mean_of(const NoiseField& eps);

// Posterior-mean step with sigma_t^2 = beta_t and no noise at t = 1. In CDPM
// mode eps_hat is centered before use and x_{t-1} is centered after.
PointCloud reverse_step(const PointCloud& x_t, int t, const NoiseField& eps_hat, const NoiseSchedule& s,
                        SamplerMode mode, const NoiseField& z);
PointCloud reverse_step(const PointCloud& x_t, int t, const NoiseField& eps_hat, const NoiseSchedule& s,
                        SamplerMode mode, std::uint64_t seed);

// Mean over points of the squared Euclidean error.
double training_loss(const NoiseField& eps, const NoiseField& eps_hat);

}  // namespace pcforge

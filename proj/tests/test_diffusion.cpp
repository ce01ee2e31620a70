#include <cmath>
#include <random>

#include "doctest.h"
#include "pcforge/diffusion.hpp"
#include "pcforge/errors.hpp"
#include "test_util.hpp"

using namespace pcforge;

namespace {

NoiseField noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gaussian_noise(n, rng);
}

}  // namespace

TEST_CASE("schedule construction") {
  const auto one = make_schedule(ScheduleKind::linear, 1, 0.5, 0.5);
  CHECK(one.steps() == 1);
  CHECK(one.beta(1) == 0.5);
  CHECK(one.alpha(1) == 0.5);
  CHECK(one.alpha_bar(1) == 0.5);

  const auto s = make_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(1000) == doctest::Approx(0.02));
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    const double beta = 1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0;
    CHECK(s.beta(t) == doctest::Approx(beta).epsilon(1e-14));
    prod *= 1.0 - beta;
  }
  CHECK(s.alpha_bar(1000) == doctest::Approx(prod).epsilon(1e-12));
  CHECK(s.alpha_bar(1000) < 1e-4);

  for (const auto& sc : {s, make_default_schedule(100), make_schedule(ScheduleKind::linear, 50, 0.01, 0.01)}) {
    double prev = 1.0;
    for (int t = 1; t <= sc.steps(); ++t) {
      CHECK(sc.alpha_bar(t) < prev);
      CHECK(std::abs(sc.alpha_bar(t) - prev * sc.alpha(t)) <= 1e-15 * sc.alpha_bar(t));
      CHECK(sc.alpha(t) == 1.0 - sc.beta(t));
      prev = sc.alpha_bar(t);
    }
  }
}

TEST_CASE("default schedule rescales with T") {
  const auto d = make_default_schedule(1000);
  CHECK(d.beta(1) == doctest::Approx(1e-4));
  CHECK(d.beta(1000) == doctest::Approx(0.02));
  const auto h = make_default_schedule(100);
  CHECK(h.beta(1) == doctest::Approx(1e-3));
  CHECK(h.beta(100) == doctest::Approx(0.2));
}

TEST_CASE("schedule errors and serialization") {
  CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 0, 0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 10, 0.0, 0.2), ConfigError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 10, 0.3, 0.2), ConfigError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 10, 0.1, 1.0), ConfigError);
  const auto s = make_default_schedule(64);
  CHECK_THROWS_AS(s.beta(0), StepError);
  CHECK_THROWS_AS(s.alpha_bar(65), StepError);
  const auto back = NoiseSchedule::from_json(s.to_json());
  CHECK(back.steps() == 64);
  for (int t = 1; t <= 64; ++t) CHECK(back.alpha_bar(t) == s.alpha_bar(t));
}

TEST_CASE("forward_sample") {
  const auto s = make_default_schedule(100);
  const auto x0 = testutil::random_cloud(20, 1);
  const auto eps = noise(20, 2);
  const auto a = forward_sample(x0, 30, NoiseField(20), s);
  const auto b = forward_sample(PointCloud(20), 30, eps, s);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(a[i] == std::sqrt(s.alpha_bar(30)) * x0[i]);
    CHECK(b[i] == std::sqrt(1 - s.alpha_bar(30)) * eps[i]);
  }
  CHECK_THROWS_AS(forward_sample(x0, 30, NoiseField(19), s), ShapeError);
  CHECK_THROWS_AS(forward_sample(x0, 101, eps, s), StepError);
}

TEST_CASE("forward variance matches 1 - alpha_bar") {
  const auto s = make_default_schedule(100);
  for (int t : {5, 40, 100}) {
    const auto x = forward_sample(PointCloud(10000), t, noise(10000, 7 + t), s);
    for (int c = 0; c < 3; ++c) {
      double sum = 0, sq = 0;
      for (const auto& p : x.points) {
        const double v = c == 0 ? p.x : c == 1 ? p.y : p.z;
        sum += v;
        sq += v * v;
      }
      const double mean = sum / 1e4, var = sq / 1e4 - mean * mean;
      CHECK(std::abs(var - (1 - s.alpha_bar(t))) <= 0.03 * (1 - s.alpha_bar(t)));
    }
  }
}

TEST_CASE("two incremental steps match the closed form") {
  const auto s = make_default_schedule(100);
  const int t = 20;
  const std::size_t n = 10000;
  const auto x0 = testutil::random_cloud(n, 3, -0.5, 0.5);
  const auto e1 = noise(n, 10), e2 = noise(n, 11);
  // x_{t-1} from the closed form, then one incremental transition to x_t.
  const auto xa = forward_sample(x0, t - 1, e1, s);
  PointCloud xt(n);
  for (std::size_t i = 0; i < n; ++i) xt[i] = std::sqrt(s.alpha(t)) * xa[i] + std::sqrt(s.beta(t)) * e2[i];
  const double expect_mean = std::sqrt(s.alpha_bar(t));
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 r = xt[i] - expect_mean * x0[i];
    var += (r.x * r.x + r.y * r.y + r.z * r.z) / 3.0;
  }
  var /= static_cast<double>(n);
  CHECK(std::abs(var - (1 - s.alpha_bar(t))) <= 0.03 * (1 - s.alpha_bar(t)));
}

TEST_CASE("center_noise") {
  NoiseField e({{2, 0, 1}, {0, 2, 1}, {1, 1, 1}});
  const auto c = center_noise(e);
  const Point3 m = mean_of(c);
  CHECK(std::abs(m.x) < 1e-15);
  CHECK(std::abs(m.y) < 1e-15);
  CHECK(std::abs(m.z) < 1e-15);
  CHECK(center_noise(c) == c);

  const auto r = noise(50, 4);
  auto perm = r;
  std::reverse(perm.values.begin(), perm.values.end());
  const auto cr = center_noise(r), cp = center_noise(perm);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(cp[i].x == doctest::Approx(cr[49 - i].x).epsilon(1e-13));
    CHECK(cp[i].y == doctest::Approx(cr[49 - i].y).epsilon(1e-13));
    CHECK(cp[i].z == doctest::Approx(cr[49 - i].z).epsilon(1e-13));
  }
}

TEST_CASE("reverse_step algebra") {
  const auto s = make_default_schedule(100);
  SUBCASE("zero prediction at t > 1") {
    const auto x = testutil::random_cloud(5, 9);
    const int t = 37;
    const auto z = noise(5, 123);
    const auto y = reverse_step(x, t, NoiseField(5), s, SamplerMode::ddpm, z);
    for (std::size_t i = 0; i < 5; ++i) {
      const Point3 hand = (1.0 / std::sqrt(s.alpha(t))) * x[i] + std::sqrt(s.beta(t)) * z[i];
      CHECK(y[i].x == doctest::Approx(hand.x).epsilon(1e-14));
      CHECK(y[i].y == doctest::Approx(hand.y).epsilon(1e-14));
      CHECK(y[i].z == doctest::Approx(hand.z).epsilon(1e-14));
    }
    std::mt19937_64 rng(77);
    CHECK(reverse_step(x, t, NoiseField(5), s, SamplerMode::ddpm, std::uint64_t{77}) ==
          reverse_step(x, t, NoiseField(5), s, SamplerMode::ddpm, gaussian_noise(5, rng)));
  }
  SUBCASE("t = 1 with the true noise recovers x0") {
    const PointCloud x0({{0.1, -0.2, 0.3}, {-0.4, 0.5, 0.0}, {0.2, 0.2, -0.6}});
    const auto eps = noise(3, 5);
    const auto x1 = forward_sample(x0, 1, eps, s);
    const auto back = reverse_step(x1, 1, eps, s, SamplerMode::ddpm, std::uint64_t{0});
    // At t = 1, alpha_bar = alpha = 1 - beta, so the posterior mean collapses to x0.
    const double a = s.alpha(1), b = s.beta(1);
    for (std::size_t i = 0; i < 3; ++i) {
      const Point3 hand = (1 / std::sqrt(a)) * ((std::sqrt(a) * x0[i] + std::sqrt(b) * eps[i]) - (b / std::sqrt(b)) * eps[i]);
      CHECK(back[i].x == doctest::Approx(hand.x).epsilon(1e-13));
      CHECK(back[i].x == doctest::Approx(x0[i].x).epsilon(1e-12));
      CHECK(back[i].y == doctest::Approx(x0[i].y).epsilon(1e-12));
      CHECK(back[i].z == doctest::Approx(x0[i].z).epsilon(1e-12));
    }
  }
  SUBCASE("cdpm output is centered") {
    const auto x = testutil::random_cloud(100, 10, 0.0, 2.0);
    for (int t : {1, 2, 50, 100}) {
      const auto y = reverse_step(x, t, noise(100, 20 + t), s, SamplerMode::cdpm, std::uint64_t(t));
      const Point3 m = centroid(y);
      CHECK(std::abs(m.x) <= 1e-12);
      CHECK(std::abs(m.y) <= 1e-12);
      CHECK(std::abs(m.z) <= 1e-12);
    }
  }
  SUBCASE("errors") {
    const auto x = testutil::random_cloud(4, 1);
    CHECK_THROWS_AS(reverse_step(x, 0, NoiseField(4), s, SamplerMode::ddpm, std::uint64_t{1}), StepError);
    CHECK_THROWS_AS(reverse_step(x, 101, NoiseField(4), s, SamplerMode::ddpm, std::uint64_t{1}), StepError);
    CHECK_THROWS_AS(reverse_step(x, 5, NoiseField(3), s, SamplerMode::ddpm, std::uint64_t{1}), ShapeError);
  }
}

TEST_CASE("cdpm chain stays centered at every step") {
  const auto s = make_default_schedule(60);
  auto x = testutil::random_cloud(200, 31);
  std::mt19937_64 rng(1);
  x = center_cloud(x);
  for (int t = s.steps(); t >= 1; --t) {
    // An arbitrary biased prediction; centering must remove the drift.
    auto eps_hat = gaussian_noise(200, rng);
    for (auto& e : eps_hat.values) e += Point3{0.3, -0.2, 0.5};
    x = reverse_step(x, t, eps_hat, s, SamplerMode::cdpm, std::uint64_t(1000 + t));
    const Point3 m = centroid(x);
    CHECK(std::max({std::abs(m.x), std::abs(m.y), std::abs(m.z)}) <= 1e-9);
  }
}

TEST_CASE("training_loss") {
  const auto e = noise(10, 3);
  CHECK(training_loss(e, e) == 0.0);
  CHECK(training_loss(NoiseField({{1, 0, 0}}), NoiseField(1)) == 1.0);
  CHECK(training_loss(NoiseField({{1, 2, 2}}), NoiseField(1)) == 9.0);
  CHECK_THROWS_AS(training_loss(NoiseField(2), NoiseField(3)), ShapeError);
}

TEST_CASE("mode names") {
  CHECK(to_string(SamplerMode::cdpm) == "cdpm");
  CHECK(sampler_mode_from_string("ddpm") == SamplerMode::ddpm);
  CHECK_THROWS_AS(sampler_mode_from_string("ddim"), ConfigError);
}

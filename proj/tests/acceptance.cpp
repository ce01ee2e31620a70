// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cli_util.hpp"
#include "pcforge/dataset.hpp"
#include "pcforge/denoiser.hpp"
#include "pcforge/edgemap.hpp"
#include "pcforge/metrics.hpp"
#include "pcforge/reference.hpp"
#include "pcforge/seed.hpp"
#include "test_util.hpp"

using namespace pcforge;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double max_abs(const Point3& p) { return std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)}); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

FeatureImage building_condition(const DatasetSample& s) { return build_condition_image(s.image, s.mask, s.sobel); }

// ---------------------------------------------------------------------------

Outcome cdpm_zero_mean() {
  const Intrinsics k;
  const auto rec = make_synthetic_buildings(1, 3, k);
  const auto s = generate_sample(rec[0], GenerationConfig{});
  if (!s.sample) return {false, "could not build a condition image: " + s.error};
  const auto cond = building_condition(*s.sample);
  const auto pose = CameraPose::from_translation(s.sample->pose.translation.as_point());
  const auto sched = make_default_schedule(50);
  DenoiserConfig dc;
  dc.steps = 50;
  dc.init_seed = 17;  // untrained and therefore biased predictions
  const ToyPointwiseDenoiser model(dc);

  double worst = 0.0;
  int steps_seen = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    sample_pointcloud(model, cond, pose, k, sched, SamplerMode::cdpm, 1024, seed, {}, [&](int, const PointCloud& x) {
      worst = std::max(worst, max_abs(centroid(x)));
      ++steps_seen;
    });
  }
  return {worst <= 1e-9 && steps_seen == 20 * 50, fmt("max |mean| %.3g", worst) + " over " + std::to_string(steps_seen) + " steps"};
}

Outcome forward_statistics() {
  const int T = 100;
  const auto sched = make_default_schedule(T);
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t : {1, T / 2, T}) {
    const auto x = forward_sample(PointCloud(10000), t, gaussian_noise(10000, rng), sched);
    for (int c = 0; c < 3; ++c) {
      double sum = 0, sq = 0;
      for (const auto& p : x.points) {
        const double v = c == 0 ? p.x : c == 1 ? p.y : p.z;
        sum += v;
        sq += v * v;
      }
      const double mean = sum / 1e4, var = sq / 1e4 - mean * mean, want = 1 - sched.alpha_bar(t);
      worst = std::max(worst, std::abs(var - want) / want);
    }
  }
  // A 10,000-sample variance has relative standard error sqrt(2 / 10000).
  return {worst < 0.03, fmt("max relative variance error %.4f", worst) +
                            fmt(" (%.1f standard errors)", worst / std::sqrt(2.0 / 1e4))};
}

Outcome gradient_check() {
  const auto sched = make_default_schedule(20);
  DenoiserConfig dc;
  dc.feature_channels = 3;
  dc.hidden = {8, 6};
  dc.time_dim = 4;
  dc.steps = 20;
  double worst = 0.0;
  std::size_t params = 0, checked = 0, vanishing = 0;
  bool vanishing_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    ToyPointwiseDenoiser m(dc, &sched);
    params = m.parameter_count();
    std::mt19937_64 rng(500 + trial);
    std::normal_distribution<double> g(0.0, 0.5);
    for (double& p : m.parameters()) p = g(rng);
    const auto x = testutil::random_cloud(8, 600 + trial);
    FeatureCloud f{8, 3, std::vector<double>(24)};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : f.data) v = u(rng);
    const auto target = gaussian_noise(8, rng);
    const int t = 1 + trial * 2;
    const auto mode = trial % 2 ? SamplerMode::cdpm : SamplerMode::ddpm;

    std::vector<double> grad(params), scratch(params);
    m.loss_and_gradient(x, f, t, target, mode, grad);
    for (std::size_t i = 0; i < params; ++i) {
      const double keep = m.parameters()[i], h = 1e-6;
      m.parameters()[i] = keep + h;
      const double up = m.loss_and_gradient(x, f, t, target, mode, scratch);
      m.parameters()[i] = keep - h;
      const double down = m.loss_and_gradient(x, f, t, target, mode, scratch);
      m.parameters()[i] = keep;
      const double fd = (up - down) / (2 * h);
      // Relative error is undefined for gradients that vanish up to rounding
      // (output biases under centering); those must agree in absolute terms.
      if (std::abs(grad[i]) <= 1e-12) {
        ++vanishing;
        vanishing_ok = vanishing_ok && std::abs(fd) <= 1e-9;
        continue;
      }
      ++checked;
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max(std::abs(fd), std::abs(grad[i])));
    }
  }
  return {params <= 200 && worst < 1e-4 && vanishing_ok,
          std::to_string(params) + " parameters, " + fmt("max relative error %.3g", worst) + " over " +
              std::to_string(checked) + " derivatives (" + std::to_string(vanishing) + " vanishing)"};
}

// Criteria 4 and 5 share the trained models.
struct OverfitResults {
  std::vector<double> cdpm_first_seed;    // per building
  std::map<SamplerMode, double> mean;     // over buildings and sampling seeds
  std::string error;
};

OverfitResults overfit_suite() {
  OverfitResults res;
  const Intrinsics k;
  const int T = 100, steps = 10000, n = 512, sample_seeds = 5;
  const auto recs = make_synthetic_buildings(4, 7, k);
  const auto sched = make_default_schedule(T);
  GenerationConfig gen;  // 10,000-point ground truth

  for (auto mode : {SamplerMode::cdpm, SamplerMode::ddpm}) {
    double total = 0.0;
    int count = 0;
    for (std::size_t b = 0; b < recs.size(); ++b) {
      const auto out = generate_sample(recs[b], gen);
      if (out.status != SampleStatus::emitted) {
        res.error = recs[b].id + " was not emitted";
        return res;
      }
      const auto& s = *out.sample;
      const auto cond = building_condition(s);
      const auto pose = CameraPose::from_translation(s.pose.translation.as_point());

      DenoiserConfig dc;
      dc.steps = T;
      dc.init_seed = mix_seed(11, b);
      ToyPointwiseDenoiser model(dc);
      TrainConfig tc;
      tc.batch_size = 4;
      tc.points_per_item = n;
      tc.total_steps = steps;
      tc.seed = mix_seed(12, b);
      tc.mode = mode;
      Trainer trainer(model, sched, k, tc);
      const std::vector<TrainItem> batch(static_cast<std::size_t>(tc.batch_size), TrainItem{&s.cloud, &cond, pose});
      const auto t0 = std::chrono::steady_clock::now();
      double tail = 0.0;
      for (int i = 1; i <= steps; ++i) {
        const double l = trainer.step(batch);
        if (i > steps - 500) tail += l / 500;
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      std::printf("  %s %s: trained %.0fs, final loss %.4f, chamfer", to_string(mode).c_str(), recs[b].id.c_str(), secs,
                  tail);
      for (int seed = 0; seed < sample_seeds; ++seed) {
        const auto x = sample_pointcloud(model, cond, pose, k, sched, mode, n, static_cast<std::uint64_t>(seed));
        const double cd = chamfer(x, s.cloud);
        std::printf(" %.4f", cd);
        if (mode == SamplerMode::cdpm && seed == 0) res.cdpm_first_seed.push_back(cd);
        total += cd;
        ++count;
      }
      std::printf("\n");
      std::fflush(stdout);
    }
    res.mean[mode] = total / count;
  }
  return res;
}

Outcome overfit_reconstruction(const OverfitResults& r) {
  if (!r.error.empty()) return {false, r.error};
  double worst = 0.0;
  std::string per;
  for (double cd : r.cdpm_first_seed) {
    worst = std::max(worst, cd);
    per += fmt(" %.4f", cd);
  }
  return {r.cdpm_first_seed.size() == 4 && worst < 0.05, "chamfer per building" + per + " (threshold 0.05)"};
}

Outcome cdpm_vs_ddpm(const OverfitResults& r) {
  if (!r.error.empty()) return {false, r.error};
  const double c = r.mean.at(SamplerMode::cdpm), d = r.mean.at(SamplerMode::ddpm);
  return {c <= d, fmt("mean chamfer cdpm %.4f", c) + fmt(" vs ddpm %.4f", d)};
}

Outcome pose_recovery() {
  const Intrinsics k;
  const PoseFitOptions opt;
  const auto recs = make_synthetic_buildings(20, 99, k);
  GenerationConfig gen;
  int passed = 0, tz_ok = 0, loop_ok = 0;
  double worst_tz = 0.0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& rec = recs[i];
    const auto cloud = normalize_unit_sphere(sample_mesh(rec.mesh, 10000, mix_seed(99, i))).first;
    const auto truth = *rec.true_translation;
    const auto mask = rasterize_points(cloud, CameraPose::from_translation(truth.as_point()), k, opt.splat_radius).mask;
    const auto r = optimize_camera_translation(cloud, mask, {0, 0, 1}, k, opt);
    const double tz_err = std::abs(r.translation.tz - truth.tz) / truth.tz;
    if (r.iterations >= 1 && r.iterations <= opt.max_iterations) ++loop_ok;
    if (r.iou > 0.93) {
      ++passed;
      worst_tz = std::max(worst_tz, tz_err);
      if (tz_err <= 0.05) ++tz_ok;
    }
  }
  return {passed >= 18 && tz_ok == passed && loop_ok == 20,
          std::to_string(passed) + "/20 above the IoU gate, " + fmt("worst tz error %.4f", worst_tz) +
              " among them, loop bounds respected in " + std::to_string(loop_ok) + "/20"};
}

Outcome metrics_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> size(1, 500);
  double worst = 0.0;
  bool self_ok = true;
  for (int pair = 0; pair < 100; ++pair) {
    const auto p = testutil::random_cloud(size(rng), 1000 + pair), g = testutil::random_cloud(size(rng), 2000 + pair);
    const double tau = 0.05 + 0.01 * (pair % 20);
    worst = std::max({worst, std::abs(chamfer(p, g) - reference::brute_force_chamfer(p, g, false)),
                      std::abs(chamfer(p, g, true) - reference::brute_force_chamfer(p, g, true)),
                      std::abs(fscore(p, g, tau).fscore - reference::brute_force_fscore(p, g, tau))});
    self_ok = self_ok && chamfer(p, p) == 0.0 && fscore(p, p, 0.001).fscore == 1.0;
  }
  return {worst <= 1e-12 && self_ok, fmt("max deviation from brute force %.3g", worst) +
                                         (self_ok ? ", self-comparison exact" : ", self-comparison NOT exact")};
}

Outcome sobel_oracle() {
  int identical = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto img = testutil::random_image(3 + static_cast<int>(seed * 13 % 120), 3 + static_cast<int>(seed * 29 % 110), seed);
    identical += sobel(img) == reference::sobel_direct(img);
  }
  bool constant_zero = true;
  for (double c : {0.0, 0.1, 0.3, 0.7, 1.0})
    for (double v : sobel(GrayImage(64, 48, c)).data) constant_zero = constant_zero && v == 0.0;
  return {identical == 50 && constant_zero, std::to_string(identical) + "/50 bit-identical, constant images " +
                                                (constant_zero ? "all zero" : "NOT zero")};
}

Outcome projection_membership() {
  const Intrinsics k;
  const auto img = testutil::random_image(224, 224, 5), edges = testutil::random_image(224, 224, 6);
  BinaryMask mask(224, 224);
  for (int y = 40; y < 180; ++y)
    for (int x = 60; x < 170; ++x) mask(x, y) = 1;
  const auto fi = build_condition_image(img, mask, edges);
  std::set<std::vector<double>> pixels;
  for (int y = 0; y < 224; ++y)
    for (int x = 0; x < 224; ++x) pixels.insert(std::vector<double>(fi.at(x, y).begin(), fi.at(x, y).end()));

  const double fill = -1.0;
  std::size_t rows = 0, bad = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pc = testutil::random_cloud(2000, 300 + seed, -1.5, 1.5);
    const auto fc = project_features(pc, CameraPose::from_translation({0.1, -0.1, 1.0 + 0.3 * seed}), k, fi, fill);
    for (std::size_t i = 0; i < pc.size(); ++i, ++rows) {
      const std::vector<double> row(fc.row(i).begin(), fc.row(i).end());
      const bool is_fill = std::all_of(row.begin(), row.end(), [&](double v) { return v == fill; });
      if (!is_fill && !pixels.count(row)) ++bad;
    }
  }

  // Two points on the optical axis at depths 1 and 2: the z-buffer gives the pixel to the nearer one.
  const auto pose = CameraPose::from_translation({0, 0, 1});
  const PointCloud two({{0, 0, 1}, {0, 0, 0}});
  const auto fc = project_features(two, pose, k, fi, fill);
  const auto oracle = reference::zbuffer_scan(two, pose, k, 1);
  const auto px = fi.at(112, 112);
  const bool near_ok = std::equal(px.begin(), px.end(), fc.row(1).begin()) && oracle.owner_at(112, 112) == 1;
  const bool far_ok = std::all_of(fc.row(0).begin(), fc.row(0).end(), [&](double v) { return v == fill; });
  return {bad == 0 && near_ok && far_ok, std::to_string(bad) + "/" + std::to_string(rows) +
                                             " rows outside {pixel vectors, fill}; occlusion case " +
                                             (near_ok && far_ok ? "correct" : "WRONG")};
}

Outcome replay_determinism() {
  namespace fs = std::filesystem;
  using testutil::q;
  const auto dir = testutil::scratch_dir("acceptance_replay");
  const auto run = [&](const std::string& args) { return testutil::run_cli(args, dir).code; };
  std::vector<fs::path> outputs;

  // Run, stash the outputs, replay the stored config in place, compare bytes.
  const auto snapshot = [&](const fs::path& root) {
    std::map<std::string, std::string> files;
    if (fs::is_directory(root)) {
      for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = testutil::read_file(e.path());
    } else {
      for (const auto& e : fs::directory_iterator(root.parent_path()))
        if (e.path().filename().string().rfind(root.filename().string(), 0) == 0)
          files[e.path().filename().string()] = testutil::read_file(e.path());
    }
    return files;
  };
  struct Step {
    std::string name, args;
    fs::path out, config;
  };
  const auto ds = dir / "ds";
  std::vector<Step> steps = {
      {"gen-dataset", "gen-dataset --synthetic 3 --seed 8 --points 3000 --out " + q(ds), ds, ds / "runconfig.json"},
      {"train",
       "train --dataset " + q(ds) + " --split all --steps 60 --T 30 --batch 2 --points 256 --seed 4 --out " +
           q(dir / "m.ckpt"),
       dir / "m.ckpt", dir / "m.ckpt.runconfig.json"},
  };
  std::string detail;
  bool ok = true;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i == 2) {
      const auto m = read_manifest(ds);
      const auto it = std::find_if(m.entries.begin(), m.entries.end(), [](const auto& e) { return e.status == "emitted"; });
      if (it == m.entries.end()) return {false, "no emitted sample to condition on"};
      steps.push_back({"sample",
                       "sample --ckpt " + q(dir / "m.ckpt") + " --image " + q(ds / it->image) + " --mask " +
                           q(ds / it->mask) + " --sobel " + q(ds / it->sobel) + " --n 400 --seed 9 --out " +
                           q(dir / "s.ply"),
                       dir / "s.ply", dir / "s.ply.runconfig.json"});
    }
    const auto& st = steps[i];
    if (run(st.args) != 0) return {false, st.name + " failed"};
    const auto before = snapshot(st.out);
    const auto stash = dir / ("stash_" + st.name);
    fs::copy(st.config, stash);
    if (fs::is_directory(st.out)) fs::remove_all(st.out);
    else
      for (const auto& [name, _] : before) fs::remove(st.out.parent_path() / name);
    if (run("replay " + q(stash)) != 0) return {false, st.name + " replay failed"};
    const bool same = snapshot(st.out) == before;
    ok = ok && same;
    detail += st.name + (same ? " identical" : " DIFFERS") + (i < 2 ? ", " : "");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  std::vector<std::pair<int, std::function<Outcome()>>> fast = {
      {1, cdpm_zero_mean}, {2, forward_statistics}, {3, gradient_check}};
  std::map<int, Outcome> results;
  for (auto& [id, fn] : fast) results[id] = fn();

  std::printf("overfit suite (4 buildings x {cdpm, ddpm}, 10000 steps each):\n");
  std::fflush(stdout);
  const auto ov = overfit_suite();
  results[4] = overfit_reconstruction(ov);
  results[5] = cdpm_vs_ddpm(ov);
  results[6] = pose_recovery();
  results[7] = metrics_oracle();
  results[8] = sobel_oracle();
  results[9] = projection_membership();
  results[10] = replay_determinism();

  int failures = 0;
  for (const auto& [id, r] : results) {
    std::printf("CRITERION %d: %s - %s\n", id, r.pass ? "PASS" : "FAIL", r.detail.c_str());
    failures += !r.pass;
  }
  return failures == 0 ? 0 : 1;
}

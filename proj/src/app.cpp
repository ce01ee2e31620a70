#include "pcforge/app.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pcforge/dataset.hpp"
#include "pcforge/denoiser.hpp"
#include "pcforge/errors.hpp"
#include "pcforge/io.hpp"
#include "pcforge/metrics.hpp"
#include "pcforge/seed.hpp"

namespace pcforge::app {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenDatasetArgs, geometry, synthetic, out, seed, points, split)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PoseFitArgs, cloud, mask, t0, out)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainArgs, dataset, mode, steps, T, out, seed, batch, lr, warmup,
                                                weight_decay, hidden, time_dim, points, split, fixed_draw,
                                                fixed_t)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SampleArgs, ckpt, image, mask, sobel, pose, n, seed, out)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalArgs, pred, gt, tau, out)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RenderArgs, cloud, pose, out, splat)

namespace {

constexpr const char* kRunConfigFormat = "pcforge-runconfig-1";

// Snapshots store absolute paths so a replay does not depend on the cwd.
std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

template <class Args>
RunConfig snapshot(const std::string& command, Args a) {
  nlohmann::json j = a;
  return {command, j.dump()};
}

void write_run_config(const RunConfig& rc, const fs::path& out) {
  io::write_text(run_config_path(rc.command, out), rc.to_json() + "\n");
}

std::string json_line(const nlohmann::json& j) { return j.dump() + "\n"; }

}  // namespace

std::string RunConfig::to_json() const {
  nlohmann::json j = {{"format", kRunConfigFormat}, {"command", command}, {"params", nlohmann::json::parse(params)}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kRunConfigFormat) throw ParseError("unsupported run config format");
    return {j.at("command").get<std::string>(), j.at("params").dump()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
}

RunConfig RunConfig::read(const fs::path& path) { return from_json(io::read_text(path)); }

RunConfig make_run_config(const GenDatasetArgs& a) {
  auto r = a;
  r.geometry = absolute(r.geometry);
  r.out = absolute(r.out);
  return snapshot("gen-dataset", r);
}
RunConfig make_run_config(const PoseFitArgs& a) {
  auto r = a;
  r.cloud = absolute(r.cloud);
  r.mask = absolute(r.mask);
  r.out = absolute(r.out);
  return snapshot("pose-fit", r);
}
RunConfig make_run_config(const TrainArgs& a) {
  auto r = a;
  r.dataset = absolute(r.dataset);
  r.out = absolute(r.out);
  return snapshot("train", r);
}
RunConfig make_run_config(const SampleArgs& a) {
  auto r = a;
  r.ckpt = absolute(r.ckpt);
  r.image = absolute(r.image);
  r.mask = absolute(r.mask);
  r.sobel = absolute(r.sobel);
  r.out = absolute(r.out);
  return snapshot("sample", r);
}
RunConfig make_run_config(const EvalArgs& a) {
  auto r = a;
  r.pred = absolute(r.pred);
  r.gt = absolute(r.gt);
  r.out = absolute(r.out);
  return snapshot("eval", r);
}
RunConfig make_run_config(const RenderArgs& a) {
  auto r = a;
  r.cloud = absolute(r.cloud);
  r.out = absolute(r.out);
  return snapshot("render", r);
}

fs::path run_config_path(const std::string& command, const fs::path& out) {
  if (command == "gen-dataset") return out / "runconfig.json";
  fs::path p = out;
  p += ".runconfig.json";
  return p;
}

// ---------------------------------------------------------------- gen-dataset

int gen_dataset(const GenDatasetArgs& a, std::ostream& out, std::ostream& err) {
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.geometry.empty() == (a.synthetic == 0)) throw ConfigError("give exactly one of --geometry or --synthetic");
  if (a.points == 0) throw ConfigError("--points must be positive");

  GenerationConfig cfg;
  cfg.seed = a.seed;
  cfg.cloud_points = a.points;

  std::vector<BuildingRecord> records =
      a.geometry.empty() ? make_synthetic_buildings(a.synthetic, a.seed, cfg.intrinsics) : load_geometry_dir(a.geometry);
  if (records.empty()) err << "warning: no buildings found in " << a.geometry << "\n";

  fs::create_directories(a.out);
  const auto outcomes = generate_all(records, cfg);
  Manifest manifest = write_dataset(a.out, outcomes, cfg);
  manifest = split_dataset(std::move(manifest), a.split, a.seed);
  write_manifest(a.out, manifest);

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& o : outcomes) ++counts[static_cast<int>(o.status)];
  for (const auto& o : outcomes)
    if (o.status == SampleStatus::failed) err << "building " << o.id << " failed: " << o.error << "\n";
  const nlohmann::json summary = {{"emitted", counts[0]}, {"rejected", counts[1]}, {"failed", counts[2]},
                                  {"config_hash", cfg.hash()}};
  io::write_text(fs::path(a.out) / "summary.json", json_line(summary));
  out << json_line(summary);
  write_run_config(make_run_config(a), a.out);
  return kSuccess;
}

// ---------------------------------------------------------------- pose-fit

int pose_fit(const PoseFitArgs& a, std::ostream& out, std::ostream&) {
  const PointCloud cloud = io::read_ply(a.cloud);
  const BinaryMask mask = io::read_mask_pgm(a.mask);
  Intrinsics k;
  if (!mask.same_shape(k.width, k.height))
    throw ShapeError("mask must be " + std::to_string(k.width) + "x" + std::to_string(k.height));
  const PoseFitReport report = optimize_camera_translation(cloud, mask, {a.t0[0], a.t0[1], a.t0[2]}, k);
  const std::string text = to_json(report) + "\n";
  out << text;
  if (!a.out.empty()) {
    io::write_text(a.out, text);
    write_run_config(make_run_config(a), a.out);
  }
  return report.accepted ? kSuccess : kGateFailure;
}

// ---------------------------------------------------------------- train

namespace {

struct LoadedItem {
  DatasetSample sample;
  FeatureImage condition;
};

nlohmann::json checkpoint_state(const Trainer& trainer, const std::string& what) {
  return {{"error", what}, {"steps_taken", trainer.steps_taken()}};
}

}  // namespace

int train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.steps < 0) throw ConfigError("--steps must be non-negative");
  const SamplerMode mode = sampler_mode_from_string(a.mode);

  const GenerationConfig gen = read_generation_config(a.dataset);
  const Manifest manifest = read_manifest(a.dataset);
  validate_manifest(a.dataset, manifest);
  std::vector<LoadedItem> items;
  for (const auto& e : manifest.entries) {
    if (e.status != "emitted" || (a.split != "all" && e.split != a.split)) continue;
    LoadedItem it;
    it.sample = load_sample(a.dataset, e);
    it.condition = build_condition_image(it.sample.image, it.sample.mask, it.sample.sobel);
    items.push_back(std::move(it));
  }
  if (items.empty()) throw ConfigError("no emitted samples in split '" + a.split + "'");

  const NoiseSchedule schedule = make_default_schedule(a.T);
  DenoiserConfig dc;
  dc.feature_channels = items.front().condition.channels;
  dc.hidden = a.hidden;
  dc.time_dim = a.time_dim;
  dc.steps = a.T;
  dc.init_seed = mix_seed(a.seed, 1);
  ToyPointwiseDenoiser model(dc);

  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.warmup_steps = a.warmup;
  tc.total_steps = a.steps;
  tc.batch_size = a.batch;
  tc.seed = mix_seed(a.seed, 2);
  tc.mode = mode;
  tc.weight_decay = a.weight_decay;
  tc.points_per_item = a.points;
  tc.fixed_draw = a.fixed_draw;
  tc.fixed_t = a.fixed_t;
  Trainer trainer(model, schedule, gen.intrinsics, tc);

  std::mt19937_64 pick_rng(mix_seed(a.seed, 3));
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  std::vector<std::size_t> fixed_batch;
  for (int b = 0; b < a.batch; ++b) fixed_batch.push_back(pick(pick_rng));

  fs::path log_path = a.out;
  log_path += ".log.jsonl";
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());

  double first_loss = 0.0, last_loss = 0.0;
  std::vector<TrainItem> batch(static_cast<std::size_t>(a.batch));
  for (int step = 1; step <= a.steps; ++step) {
    for (int b = 0; b < a.batch; ++b) {
      const std::size_t idx = a.fixed_draw ? fixed_batch[static_cast<std::size_t>(b)] : pick(pick_rng);
      const auto& it = items[idx];
      batch[static_cast<std::size_t>(b)] = {&it.sample.cloud, &it.condition,
                                            CameraPose::from_translation(it.sample.pose.translation.as_point())};
    }
    const double lr = trainer.learning_rate_at(step);
    double loss = 0.0;
    try {
      loss = trainer.step(batch);
    } catch (const DivergenceError& e) {
      log.flush();
      fs::path dump = a.out;
      dump += ".divergence.json";
      nlohmann::json state = checkpoint_state(trainer, e.what());
      state["step"] = step;
      state["lr"] = lr;
      io::write_text(dump, json_line(state));
      fs::path partial = a.out;
      partial += ".diverged";
      save_checkpoint(partial, model, schedule, mode, gen.intrinsics);
      err << "training diverged at step " << step << ": " << e.what() << " (state in " << dump.string() << ")\n";
      return kDivergence;
    }
    if (step == 1) first_loss = loss;
    last_loss = loss;
    log << json_line({{"step", step}, {"loss", loss}, {"lr", lr}});
  }
  log.close();

  save_checkpoint(a.out, model, schedule, mode, gen.intrinsics);
  write_run_config(make_run_config(a), a.out);
  out << json_line({{"steps", a.steps},
                    {"parameters", model.parameter_count()},
                    {"initial_loss", first_loss},
                    {"final_loss", last_loss},
                    {"checkpoint", a.out}});
  return kSuccess;
}

// ---------------------------------------------------------------- sample

int sample(const SampleArgs& a, std::ostream& out, std::ostream&) {
  if (a.out.empty()) throw ConfigError("--out is required");
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const ToyPointwiseDenoiser model = ckpt.make_model();
  const Intrinsics& k = ckpt.intrinsics;

  const GrayImage image = io::read_gray_image(a.image);
  const BinaryMask mask = io::read_mask_pgm(a.mask);
  const GrayImage sobel = io::read_gray_raw(a.sobel);
  if (!image.same_shape(k.width, k.height) || !mask.same_shape(k.width, k.height) ||
      !sobel.same_shape(k.width, k.height))
    throw ShapeError("condition inputs must be " + std::to_string(k.width) + "x" + std::to_string(k.height));
  const FeatureImage condition = build_condition_image(image, mask, sobel);

  const CameraPose pose = CameraPose::from_translation({a.pose[0], a.pose[1], a.pose[2]});
  const PointCloud cloud = sample_pointcloud(model, condition, pose, k, ckpt.schedule, ckpt.mode, a.n, a.seed);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  io::write_ply(a.out, cloud);
  write_run_config(make_run_config(a), a.out);
  out << json_line({{"points", cloud.size()}, {"mode", to_string(ckpt.mode)}, {"out", a.out}});
  return kSuccess;
}

// ---------------------------------------------------------------- eval

int eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  struct Pair {
    std::string id;
    fs::path pred, gt;
  };
  std::vector<Pair> pairs;
  const bool pred_dir = fs::is_directory(a.pred), gt_dir = fs::is_directory(a.gt);
  if (pred_dir != gt_dir) throw ConfigError("--pred and --gt must both be files or both be directories");
  if (!pred_dir) {
    pairs.push_back({fs::path(a.pred).stem().string(), a.pred, a.gt});
  } else {
    auto list = [](const fs::path& dir) {
      std::map<std::string, fs::path> m;
      for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".ply") m[e.path().stem().string()] = e.path();
      return m;
    };
    const auto preds = list(a.pred), gts = list(a.gt);
    std::vector<std::string> unmatched;
    for (const auto& [id, p] : preds)
      if (!gts.count(id)) unmatched.push_back(id);
    for (const auto& [id, g] : gts)
      if (!preds.count(id)) unmatched.push_back(id);
    if (!unmatched.empty()) {
      std::sort(unmatched.begin(), unmatched.end());
      std::string list_text;
      for (const auto& id : unmatched) list_text += " " + id;
      err << "unmatched ids:" << list_text << "\n";
      return kInputError;
    }
    for (const auto& [id, p] : preds) pairs.push_back({id, p, gts.at(id)});
    if (pairs.empty()) throw ConfigError("no .ply files to evaluate");
  }

  std::vector<MetricReport> reports(pairs.size());
  std::vector<std::string> errors(pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      reports[u] = fscore(io::read_ply(pairs[u].pred), io::read_ply(pairs[u].gt), a.tau);
    } catch (const std::exception& e) {
      errors[u] = e.what();
    }
  }
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (!errors[i].empty()) throw ParseError(pairs[i].id + ": " + errors[i]);

  std::string text;
  MetricReport mean;
  mean.tau = a.tau;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto j = nlohmann::json::parse(reports[i].to_json());
    j["id"] = pairs[i].id;
    j["pred"] = pairs[i].pred.string();
    j["gt"] = pairs[i].gt.string();
    text += json_line(j);
    mean.chamfer += reports[i].chamfer;
    mean.chamfer_squared += reports[i].chamfer_squared;
    mean.fscore += reports[i].fscore;
    mean.precision += reports[i].precision;
    mean.recall += reports[i].recall;
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  mean.chamfer *= inv;
  mean.chamfer_squared *= inv;
  mean.fscore *= inv;
  mean.precision *= inv;
  mean.recall *= inv;
  auto agg = nlohmann::json::parse(mean.to_json());
  agg["aggregate"] = true;
  agg["pairs"] = pairs.size();
  text += json_line(agg);

  out << text;
  if (!a.out.empty()) {
    io::write_text(a.out, text);
    write_run_config(make_run_config(a), a.out);
  }
  return kSuccess;
}

// ---------------------------------------------------------------- render

int render(const RenderArgs& a, std::ostream& out, std::ostream&) {
  if (a.out.empty()) throw ConfigError("--out is required");
  const PointCloud cloud = io::read_ply(a.cloud);
  if (cloud.size() == 0) throw ShapeError("cloud is empty");
  Intrinsics k;
  const Rasterization r = rasterize_points(cloud, CameraPose::from_translation({a.pose[0], a.pose[1], a.pose[2]}), k, a.splat);
  if (count_set(r.mask) == 0) throw NotVisibleError("no point is visible from this pose");

  // Height is along -z, the side facing the default camera.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (long owner : r.depth.owner)
    if (owner >= 0) {
      lo = std::min(lo, -cloud[static_cast<std::size_t>(owner)].z);
      hi = std::max(hi, -cloud[static_cast<std::size_t>(owner)].z);
    }
  GrayImage img(k.width, k.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const long owner = r.depth.owner[i];
    if (owner < 0) continue;
    const double h = -cloud[static_cast<std::size_t>(owner)].z;
    img.data[i] = 0.25 + 0.75 * (hi > lo ? (h - lo) / (hi - lo) : 1.0);
  }
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  io::write_pgm(a.out, img);
  write_run_config(make_run_config(a), a.out);
  out << json_line({{"visible_pixels", count_set(r.mask)}, {"out", a.out}});
  return kSuccess;
}

// ---------------------------------------------------------------- dispatch

namespace {

template <class Args, class Fn>
int dispatch(const RunConfig& rc, const std::string& out_override, Fn fn, std::ostream& out, std::ostream& err) {
  Args a = nlohmann::json::parse(rc.params).get<Args>();
  if (!out_override.empty()) a.out = out_override;
  return fn(a, out, err);
}

int run_unchecked(const RunConfig& rc, std::ostream& out, std::ostream& err, const std::string& o) {
  if (rc.command == "gen-dataset") return dispatch<GenDatasetArgs>(rc, o, gen_dataset, out, err);
  if (rc.command == "pose-fit") return dispatch<PoseFitArgs>(rc, o, pose_fit, out, err);
  if (rc.command == "train") return dispatch<TrainArgs>(rc, o, train, out, err);
  if (rc.command == "sample") return dispatch<SampleArgs>(rc, o, sample, out, err);
  if (rc.command == "eval") return dispatch<EvalArgs>(rc, o, eval, out, err);
  if (rc.command == "render") return dispatch<RenderArgs>(rc, o, render, out, err);
  throw ConfigError("unknown command '" + rc.command + "'");
}

}  // namespace

int run(const RunConfig& rc, std::ostream& out, std::ostream& err, const std::string& out_override) {
  try {
    return run_unchecked(rc, out, err, out_override);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const nlohmann::json::exception& e) {
    err << "error: bad run config: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

void apply_thread_limit(std::ostream& err) {
  const char* env = std::getenv("PCFORGE_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    err << "warning: ignoring PCFORGE_THREADS='" << env << "'\n";
    return;
  }
  omp_set_num_threads(static_cast<int>(n));
}

}  // namespace pcforge::app

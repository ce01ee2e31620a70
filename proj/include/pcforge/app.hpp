#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pcforge::app {

namespace fs = std::filesystem;

enum ExitCode : int { kSuccess = 0, kGateFailure = 1, kInputError = 2, kDivergence = 3 };

struct GenDatasetArgs {
  std::string geometry;        // directory of <id>.obj / .vertices.txt / .faces.txt
  std::size_t synthetic = 0;   // used when geometry is empty
  std::string out;
  std::uint64_t seed = 0;
  std::size_t points = 10000;
  std::vector<double> split = {0.8, 0.1, 0.1};
};

struct PoseFitArgs {
  std::string cloud;
  std::string mask;
  std::array<double, 3> t0 = {0.0, 0.0, 1.0};
  std::string out;  // optional report file
};

struct TrainArgs {
  std::string dataset;
  std::string mode = "cdpm";
  int steps = 1000;
  int T = 100;
  std::string out;
  std::uint64_t seed = 0;
  int batch = 8;
  double lr = 1e-3;
  int warmup = 100;
  double weight_decay = 1e-4;
  std::vector<int> hidden = {64, 64};
  int time_dim = 16;
  std::size_t points = 512;   // points drawn from each cloud per step
  std::string split = "train";  // "all" uses every emitted sample
  bool fixed_draw = false;
  int fixed_t = 0;  // 0 samples t per draw
};

struct SampleArgs {
  std::string ckpt;
  std::string image;
  std::string mask;
  std::string sobel;
  std::array<double, 3> pose = {0.0, 0.0, 1.0};
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

struct EvalArgs {
  std::string pred;
  std::string gt;
  double tau = 0.001;
  std::string out;  // optional JSON-lines file
};

struct RenderArgs {
  std::string cloud;
  std::array<double, 3> pose = {0.0, 0.0, 1.0};
  std::string out;
  int splat = 1;
};

// Resolved snapshot of one invocation: {"format", "command", "params"}.
struct RunConfig {
  std::string command;
  std::string params;  // JSON object text

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig read(const fs::path& path);
};

RunConfig make_run_config(const GenDatasetArgs& a);
RunConfig make_run_config(const PoseFitArgs& a);
RunConfig make_run_config(const TrainArgs& a);
RunConfig make_run_config(const SampleArgs& a);
RunConfig make_run_config(const EvalArgs& a);
RunConfig make_run_config(const RenderArgs& a);

// Where the snapshot of a run writing `out` lives: <out>/runconfig.json for
// directory outputs, <out>.runconfig.json otherwise.
fs::path run_config_path(const std::string& command, const fs::path& out);

// Each command returns an ExitCode. Library errors propagate as exceptions;
// run() maps them to exit codes and prints the message to err.
int gen_dataset(const GenDatasetArgs& a, std::ostream& out, std::ostream& err);
int pose_fit(const PoseFitArgs& a, std::ostream& out, std::ostream& err);
int train(const TrainArgs& a, std::ostream& out, std::ostream& err);
int sample(const SampleArgs& a, std::ostream& out, std::ostream& err);
int eval(const EvalArgs& a, std::ostream& out, std::ostream& err);
int render(const RenderArgs& a, std::ostream& out, std::ostream& err);

// Re-runs a stored snapshot; a non-empty out_override redirects its output.
int run(const RunConfig& rc, std::ostream& out, std::ostream& err, const std::string& out_override = "");

// Caps OpenMP workers from PCFORGE_THREADS when set.
void apply_thread_limit(std::ostream& err);

}  // namespace pcforge::app

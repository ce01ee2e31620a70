// Serial reference kernels vs the OpenMP implementations. Thread count follows
// OMP_NUM_THREADS / PCFORGE_THREADS as usual.

#include <benchmark/benchmark.h>

#include <cstdlib>
#include <random>

#include <omp.h>

#include "pcforge/edgemap.hpp"
#include "pcforge/metrics.hpp"
#include "pcforge/raster.hpp"
#include "pcforge/reference.hpp"

using namespace pcforge;

namespace {

PointCloud cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud pc(n);
  for (auto& p : pc.points) p = {u(rng), u(rng), u(rng)};
  return pc;
}

GrayImage image(int w, int h) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage img(w, h);
  for (auto& v : img.data) v = u(rng);
  return img;
}

void BM_Chamfer_Reference(benchmark::State& st) {
  const auto p = cloud(static_cast<std::size_t>(st.range(0)), 1), g = cloud(static_cast<std::size_t>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(reference::brute_force_chamfer(p, g, false));
  st.SetItemsProcessed(st.iterations() * st.range(0) * 2);
}
void BM_Chamfer_KdTreeOmp(benchmark::State& st) {
  const auto p = cloud(static_cast<std::size_t>(st.range(0)), 1), g = cloud(static_cast<std::size_t>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(chamfer(p, g));
  st.SetItemsProcessed(st.iterations() * st.range(0) * 2);
}
BENCHMARK(BM_Chamfer_Reference)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Chamfer_KdTreeOmp)->Arg(1000)->Arg(4000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Sobel_Reference(benchmark::State& st) {
  const auto img = image(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(reference::sobel_direct(img));
}
void BM_Sobel_Omp(benchmark::State& st) {
  const auto img = image(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sobel(img));
}
BENCHMARK(BM_Sobel_Reference)->Arg(224)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Sobel_Omp)->Arg(224)->Arg(1024)->Unit(benchmark::kMicrosecond);

void BM_ZBuffer_Reference(benchmark::State& st) {
  const auto pc = cloud(static_cast<std::size_t>(st.range(0)), 4);
  const auto pose = CameraPose::from_translation({0, 0, 2});
  for (auto _ : st) benchmark::DoNotOptimize(reference::zbuffer_scan(pc, pose, Intrinsics{}, 1));
}
void BM_ZBuffer_Fast(benchmark::State& st) {
  const auto pc = cloud(static_cast<std::size_t>(st.range(0)), 4);
  const auto pose = CameraPose::from_translation({0, 0, 2});
  for (auto _ : st) benchmark::DoNotOptimize(rasterize_points(pc, pose, Intrinsics{}, 1));
}
BENCHMARK(BM_ZBuffer_Reference)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ZBuffer_Fast)->Arg(512)->Arg(2048)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_Polygon_Reference(benchmark::State& st) {
  const std::vector<PixelCoord> v{{20, 30}, {200, 25}, {190, 200}, {110, 150}, {30, 190}};
  const std::vector<std::vector<std::uint32_t>> f{{0, 1, 2, 3, 4}};
  for (auto _ : st) benchmark::DoNotOptimize(reference::polygon_mask_scan(v, f, 224, 224));
}
void BM_Polygon_Scanline(benchmark::State& st) {
  const std::vector<PixelCoord> v{{20, 30}, {200, 25}, {190, 200}, {110, 150}, {30, 190}};
  const std::vector<std::vector<std::uint32_t>> f{{0, 1, 2, 3, 4}};
  for (auto _ : st) benchmark::DoNotOptimize(rasterize_polygon_mask(v, f, 224, 224));
}
BENCHMARK(BM_Polygon_Reference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Polygon_Scanline)->Unit(benchmark::kMicrosecond);

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("PCFORGE_THREADS")) omp_set_num_threads(std::max(1, std::atoi(env)));
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcforge/geometry.hpp"
#include "pcforge/grid.hpp"
#include "pcforge/pose.hpp"
#include "pcforge/raster.hpp"

namespace pcforge {

namespace fs = std::filesystem;

// Roof segments in image coordinates: vertices plus zero-based index lists.
struct RoofPolygons {
  std::vector<PixelCoord> vertices;
  std::vector<std::vector<std::uint32_t>> faces;
};

// Vertex source: one "x y" pair per line. Face source: one polygon per line
// of whitespace-separated indices. Blank lines and '#' comments are skipped.
// Throws ParseError naming the offending line.
RoofPolygons parse_building_geometry(std::istream& vertices, std::istream& faces,
                                     const std::string& vertex_source = "vertices",
                                     const std::string& face_source = "faces");
RoofPolygons parse_building_geometry(const fs::path& vertex_file, const fs::path& face_file);

struct BuildingRecord {
  std::string id;
  TriangleMesh mesh;
  fs::path mesh_path;  // empty for in-memory meshes
  RoofPolygons roof;
  std::optional<GrayImage> image;
  std::optional<TranslationParams> true_translation;  // known for synthetic buildings
};

struct GenerationConfig {
  std::uint64_t seed = 0;
  std::size_t cloud_points = 10000;
  Intrinsics intrinsics;
  TranslationParams initial{0.0, 0.0, 1.0};
  PoseFitOptions pose;

  std::string to_json() const;
  static GenerationConfig from_json(const std::string& text);
  std::string hash() const;  // 16 hex digits of FNV-1a over to_json()
};

GenerationConfig read_generation_config(const fs::path& root);  // <root>/config.json

struct DatasetSample {
  std::string id;
  GrayImage image;
  BinaryMask mask;
  GrayImage sobel;
  PointCloud cloud;
  UnitSphereTransform transform;
  PoseFitReport pose;
  std::string split;
};

enum class SampleStatus { emitted, rejected, failed };
std::string to_string(SampleStatus s);

struct GenerationOutcome {
  std::string id;
  SampleStatus status = SampleStatus::failed;
  std::optional<DatasetSample> sample;  // set for emitted and rejected
  std::string error;                    // set for failed
};

// mask -> masked Sobel -> sampled, normalized cloud -> pose fit -> IoU gate.
// Never throws for per-building problems; those become a failed outcome.
GenerationOutcome generate_sample(const BuildingRecord& rec, const GenerationConfig& cfg);
std::vector<GenerationOutcome> generate_all(const std::vector<BuildingRecord>& records, const GenerationConfig& cfg);

// Parametric flat / gable / hip buildings already in unit-sphere coordinates,
// with roof polygons projected under a random true translation
// (tz in [0.8, 1.5], |tx|, |ty| <= 0.2) and a shaded grayscale image.
std::vector<BuildingRecord> make_synthetic_buildings(std::size_t count, std::uint64_t seed, const Intrinsics& k = {});

struct ManifestEntry {
  std::string id;
  std::string status;
  std::string split;
  std::string image, mask, sobel, cloud, pose;  // paths relative to the dataset root
  double iou = 0.0;
  bool accepted = false;
  std::string error;
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static ManifestEntry from_json(const std::string& line);
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

// Contiguous assignment after a seeded shuffle of the emitted entries; with
// three fractions the tags are train/val/test, otherwise split0, split1, ...
Manifest split_dataset(Manifest manifest, const std::vector<double>& fractions, std::uint64_t seed);

// Writes <root>/{images,masks,sobel,clouds,poses}/<id>.*, config.json and manifest.jsonl.
Manifest write_dataset(const fs::path& root, const std::vector<GenerationOutcome>& outcomes,
                       const GenerationConfig& cfg);
void write_manifest(const fs::path& root, const Manifest& manifest);
Manifest read_manifest(const fs::path& root);
// Throws unless every referenced file exists and parses and every entry's
// config hash matches <root>/config.json.
void validate_manifest(const fs::path& root, const Manifest& manifest);
DatasetSample load_sample(const fs::path& root, const ManifestEntry& entry);

// <dir>/<id>.obj, <id>.vertices.txt, <id>.faces.txt and optional <id>.pgm / <id>.ppm.
std::vector<BuildingRecord> load_geometry_dir(const fs::path& dir);
void write_geometry_dir(const fs::path& dir, const std::vector<BuildingRecord>& records);

}  // namespace pcforge

#include "pcforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pcforge/edgemap.hpp"
#include "pcforge/io.hpp"
#include "pcforge/seed.hpp"

namespace pcforge {

namespace {

bool skippable(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

RoofPolygons parse_building_geometry(std::istream& vertices, std::istream& faces, const std::string& vertex_source,
                                     const std::string& face_source) {
  RoofPolygons roof;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(vertices, line)) {
    ++lineno;
    if (skippable(line)) continue;
    std::istringstream ls(line);
    PixelCoord p;
    std::string extra;
    if (!(ls >> p.u >> p.v) || (ls >> extra) || !std::isfinite(p.u) || !std::isfinite(p.v))
      throw ParseError(vertex_source, lineno, "expected two coordinates");
    roof.vertices.push_back(p);
  }
  lineno = 0;
  while (std::getline(faces, line)) {
    ++lineno;
    if (skippable(line)) continue;
    std::istringstream ls(line);
    std::vector<std::uint32_t> face;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      long v = -1;
      try {
        v = std::stol(tok, &used);
      } catch (const std::exception&) {
        throw ParseError(face_source, lineno, "unparseable index '" + tok + "'");
      }
      if (used != tok.size()) throw ParseError(face_source, lineno, "unparseable index '" + tok + "'");
      if (v < 0 || static_cast<std::size_t>(v) >= roof.vertices.size())
        throw ParseError(face_source, lineno,
                         "index " + tok + " out of range for " + std::to_string(roof.vertices.size()) + " vertices");
      face.push_back(static_cast<std::uint32_t>(v));
    }
    if (face.size() < 3) throw ParseError(face_source, lineno, "face needs at least 3 vertices");
    roof.faces.push_back(std::move(face));
  }
  return roof;
}

RoofPolygons parse_building_geometry(const fs::path& vertex_file, const fs::path& face_file) {
  std::ifstream v(vertex_file), f(face_file);
  if (!v) throw IoError("cannot open " + vertex_file.string());
  if (!f) throw IoError("cannot open " + face_file.string());
  return parse_building_geometry(v, f, vertex_file.string(), face_file.string());
}

std::string GenerationConfig::to_json() const {
  const auto& k = intrinsics;
  nlohmann::ordered_json j = {
      {"seed", seed},
      {"cloud_points", cloud_points},
      {"intrinsics", {{"focal", k.focal}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}},
      {"initial", {initial.tx, initial.ty, initial.tz}},
      {"pose",
       {{"tz_bracket", {pose.tz_lo, pose.tz_hi}},
        {"txy_bracket", {pose.txy_lo, pose.txy_hi}},
        {"step_tol", pose.step_tol},
        {"min_improvement", pose.min_improvement},
        {"max_iterations", pose.max_iterations},
        {"max_eval_per_search", pose.max_eval_per_search},
        {"splat_radius", pose.splat_radius},
        {"iou_gate", pose.iou_gate}}}};
  return j.dump();
}

GenerationConfig GenerationConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GenerationConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.cloud_points = j.at("cloud_points").get<std::size_t>();
    const auto& k = j.at("intrinsics");
    c.intrinsics = {k.at("focal").get<double>(), k.at("cx").get<double>(), k.at("cy").get<double>(),
                    k.at("width").get<int>(), k.at("height").get<int>()};
    const auto& t0 = j.at("initial");
    c.initial = {t0.at(0).get<double>(), t0.at(1).get<double>(), t0.at(2).get<double>()};
    const auto& p = j.at("pose");
    c.pose.tz_lo = p.at("tz_bracket").at(0).get<double>();
    c.pose.tz_hi = p.at("tz_bracket").at(1).get<double>();
    c.pose.txy_lo = p.at("txy_bracket").at(0).get<double>();
    c.pose.txy_hi = p.at("txy_bracket").at(1).get<double>();
    c.pose.step_tol = p.at("step_tol").get<double>();
    c.pose.min_improvement = p.at("min_improvement").get<double>();
    c.pose.max_iterations = p.at("max_iterations").get<int>();
    c.pose.max_eval_per_search = p.at("max_eval_per_search").get<int>();
    c.pose.splat_radius = p.at("splat_radius").get<int>();
    c.pose.iou_gate = p.at("iou_gate").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("generation config: ") + e.what());
  }
}

GenerationConfig read_generation_config(const fs::path& root) {
  return GenerationConfig::from_json(io::read_text(root / "config.json"));
}

std::string GenerationConfig::hash() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(to_json());
  return os.str();
}

std::string to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::emitted: return "emitted";
    case SampleStatus::rejected: return "rejected";
    case SampleStatus::failed: return "failed";
  }
  return "?";
}

namespace {

GrayImage resize_bilinear(const GrayImage& src, int width, int height) {
  GrayImage out(width, height);
  const double sx = static_cast<double>(src.width) / width, sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double ax = fx - x0, ay = fy - y0;
      out(x, y) = (1 - ay) * ((1 - ax) * src(x0, y0) + ax * src(x1, y0)) + ay * ((1 - ax) * src(x0, y1) + ax * src(x1, y1));
    }
  }
  return out;
}

}  // namespace

GenerationOutcome generate_sample(const BuildingRecord& rec, const GenerationConfig& cfg) {
  GenerationOutcome outcome;
  outcome.id = rec.id;
  try {
    const Intrinsics& k = cfg.intrinsics;
    k.validate();
    RoofPolygons roof = rec.roof;
    GrayImage image;
    if (rec.image) {
      image = *rec.image;
      if (!image.same_shape(k.width, k.height)) {
        const double sx = static_cast<double>(k.width) / image.width;
        const double sy = static_cast<double>(k.height) / image.height;
        for (auto& p : roof.vertices) p = {(p.u + 0.5) * sx - 0.5, (p.v + 0.5) * sy - 0.5};
        image = resize_bilinear(image, k.width, k.height);
      }
    }
    for (auto& p : roof.vertices)
      p = {std::clamp(p.u, 0.0, k.width - 1.0), std::clamp(p.v, 0.0, k.height - 1.0)};

    DatasetSample s;
    s.id = rec.id;
    s.mask = rasterize_polygon_mask(roof.vertices, roof.faces, k.width, k.height);
    if (count_set(s.mask) == 0) throw EmptyMaskError("roof polygons rasterize to an empty mask");
    if (!rec.image) {
      image = GrayImage(k.width, k.height);
      for (std::size_t i = 0; i < image.data.size(); ++i) image.data[i] = s.mask.data[i] ? 1.0 : 0.0;
    }
    s.image = image;
    s.sobel = masked_sobel(image, s.mask);

    const std::uint64_t cloud_seed = mix_seed(cfg.seed, fnv1a(rec.id));
    auto [cloud, xf] = normalize_unit_sphere(sample_mesh(rec.mesh, cfg.cloud_points, cloud_seed));
    s.cloud = std::move(cloud);
    s.transform = xf;
    s.pose = optimize_camera_translation(s.cloud, s.mask, cfg.initial, k, cfg.pose);
    outcome.status = s.pose.accepted ? SampleStatus::emitted : SampleStatus::rejected;
    outcome.sample = std::move(s);
  } catch (const std::exception& e) {
    outcome.status = SampleStatus::failed;
    outcome.sample.reset();
    outcome.error = e.what();
  }
  return outcome;
}

std::vector<GenerationOutcome> generate_all(const std::vector<BuildingRecord>& records, const GenerationConfig& cfg) {
  std::vector<GenerationOutcome> out(records.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i)
    out[static_cast<std::size_t>(i)] = generate_sample(records[static_cast<std::size_t>(i)], cfg);
  return out;
}

namespace {

enum class RoofKind { flat, gable, hip };

struct RawBuilding {
  TriangleMesh mesh;
  std::vector<std::vector<std::uint32_t>> roof_faces;  // indices into mesh.vertices
};

// Footprint on the z = 0 ground plane, roof toward -z (the camera side).
RawBuilding build_raw(RoofKind kind, double length, double width, double wall, double rise, double yaw,
                      double hip_inset) {
  RawBuilding b;
  const double hl = length / 2, hw = width / 2;
  const double c = std::cos(yaw), s = std::sin(yaw);
  auto place = [&](double x, double y, double z) { return Point3{c * x - s * y, s * x + c * y, z}; };
  const double fx[4] = {-hl, hl, hl, -hl};
  const double fy[4] = {-hw, -hw, hw, hw};
  auto& v = b.mesh.vertices;
  for (int i = 0; i < 4; ++i) v.push_back(place(fx[i], fy[i], 0.0));    // 0..3 ground
  for (int i = 0; i < 4; ++i) v.push_back(place(fx[i], fy[i], -wall));  // 4..7 eaves
  // No floor: it is never visible from above and aerial meshes lack one.
  auto& f = b.mesh.faces;
  for (std::uint32_t i = 0; i < 4; ++i) {
    const std::uint32_t j = (i + 1) % 4;
    f.push_back({i, j, j + 4});
    f.push_back({i, j + 4, i + 4});
  }
  if (kind == RoofKind::flat) {
    f.push_back({4, 5, 6});
    f.push_back({4, 6, 7});
    b.roof_faces = {{4, 5, 6, 7}};
    return b;
  }
  const double ridge_half = kind == RoofKind::gable ? hl : std::max(hl - hip_inset * hw, 0.05 * hl);
  v.push_back(place(-ridge_half, 0.0, -wall - rise));  // 8
  v.push_back(place(ridge_half, 0.0, -wall - rise));   // 9
  // Slopes: y < 0 side (4, 5, 9, 8) and y > 0 side (6, 7, 8, 9).
  f.push_back({4, 5, 9});
  f.push_back({4, 9, 8});
  f.push_back({6, 7, 8});
  f.push_back({6, 8, 9});
  // Gable ends are vertical wall triangles; hip ends are sloped roof faces.
  f.push_back({5, 6, 9});
  f.push_back({7, 4, 8});
  b.roof_faces = {{4, 5, 9, 8}, {6, 7, 8, 9}};
  if (kind == RoofKind::hip) {
    b.roof_faces.push_back({5, 6, 9});
    b.roof_faces.push_back({7, 4, 8});
  }
  return b;
}

double face_shade(const TriangleMesh& mesh, const std::vector<std::uint32_t>& face) {
  const Point3 n = (mesh.vertices[face[1]] - mesh.vertices[face[0]]).cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
  const Point3 light{0.45, -0.35, -0.82};
  const double cosine = std::abs(n.dot(light)) / (n.norm() * light.norm());
  return 0.35 + 0.6 * cosine;
}

}  // namespace

std::vector<BuildingRecord> make_synthetic_buildings(std::size_t count, std::uint64_t seed, const Intrinsics& k) {
  if (count < 1) throw ConfigError("synthetic building count must be at least 1");
  k.validate();
  std::vector<BuildingRecord> out;
  for (std::size_t b = 0; b < count; ++b) {
    std::mt19937_64 rng(mix_seed(seed, b));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

    const auto kind = static_cast<RoofKind>(b % 3);
    const double length = range(1.4, 2.0);
    const double width = range(0.8, 1.3);
    const double wall = range(0.3, 0.5);
    const double rise = kind == RoofKind::flat ? 0.0 : range(0.15, 0.3);
    const double yaw = range(-0.35, 0.35);
    const double inset = range(0.6, 1.0);
    RawBuilding raw = build_raw(kind, length, width, wall, rise, yaw, inset);

    // Bring the mesh into the unit-sphere frame of its own dense sample.
    const auto xf = normalize_unit_sphere(sample_mesh(raw.mesh, 10000, mix_seed(seed, 1000003 + b))).second;
    for (auto& v : raw.mesh.vertices) v = xf.apply(v);

    BuildingRecord rec;
    std::ostringstream id;
    id << "synthetic_" << std::setw(4) << std::setfill('0') << b;
    rec.id = id.str();
    rec.true_translation = TranslationParams{range(-0.2, 0.2), range(-0.2, 0.2), range(0.8, 1.5)};

    const CameraPose pose = CameraPose::from_translation(rec.true_translation->as_point());
    std::vector<std::uint32_t> used;
    for (const auto& face : raw.roof_faces)
      for (auto idx : face)
        if (std::find(used.begin(), used.end(), idx) == used.end()) used.push_back(idx);
    std::sort(used.begin(), used.end());
    PointCloud roof_vertices;
    for (auto idx : used) roof_vertices.points.push_back(raw.mesh.vertices[idx]);
    const auto projected = project_points(roof_vertices, pose, k);
    if (projected.size() != used.size()) throw ConfigError("synthetic roof vertex behind the camera");
    for (const auto& p : projected) rec.roof.vertices.push_back(p.pixel);
    for (const auto& face : raw.roof_faces) {
      std::vector<std::uint32_t> local;
      for (auto idx : face)
        local.push_back(static_cast<std::uint32_t>(std::lower_bound(used.begin(), used.end(), idx) - used.begin()));
      rec.roof.faces.push_back(std::move(local));
    }

    // Smooth textured ground, then each roof face with its own shade.
    GrayImage img(k.width, k.height);
    const double f1 = range(0.05, 0.15), f2 = range(0.05, 0.15), p1 = range(0, 6.28), p2 = range(0, 6.28);
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x)
        img(x, y) = 0.3 + 0.08 * std::sin(f1 * x + p1) * std::sin(f2 * y + p2) + 0.04 * u(rng);
    for (std::size_t fi = 0; fi < raw.roof_faces.size(); ++fi) {
      const double shade = face_shade(raw.mesh, raw.roof_faces[fi]);
      const BinaryMask m = rasterize_polygon_mask(rec.roof.vertices, {rec.roof.faces[fi]}, k.width, k.height);
      for (std::size_t i = 0; i < m.data.size(); ++i)
        if (m.data[i]) img.data[i] = std::clamp(shade + 0.03 * (u(rng) - 0.5), 0.0, 1.0);
    }
    rec.image = std::move(img);
    rec.mesh = std::move(raw.mesh);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string ManifestEntry::to_json() const {
  nlohmann::ordered_json j = {{"id", id},       {"status", status}, {"split", split}, {"image", image},
                              {"mask", mask},   {"sobel", sobel},   {"cloud", cloud}, {"pose", pose},
                              {"iou", iou},     {"accepted", accepted}, {"error", error},
                              {"config_hash", config_hash}, {"seed", seed}};
  return j.dump();
}

ManifestEntry ManifestEntry::from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.status = j.at("status").get<std::string>();
    e.split = j.value("split", "");
    e.image = j.value("image", "");
    e.mask = j.value("mask", "");
    e.sobel = j.value("sobel", "");
    e.cloud = j.value("cloud", "");
    e.pose = j.value("pose", "");
    e.iou = j.value("iou", 0.0);
    e.accepted = j.value("accepted", false);
    e.error = j.value("error", "");
    e.config_hash = j.value("config_hash", "");
    e.seed = j.value("seed", std::uint64_t{0});
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("manifest line: ") + ex.what());
  }
}

Manifest split_dataset(Manifest manifest, const std::vector<double>& fractions, std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split needs at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (manifest.entries[i].status == "emitted") order.push_back(i);
    else manifest.entries[i].split.clear();
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }

  auto name = [&](std::size_t k) {
    if (fractions.size() == 3) return std::string(k == 0 ? "train" : k == 1 ? "val" : "test");
    return "split" + std::to_string(k);
  };
  const auto n = static_cast<double>(order.size());
  std::size_t begin = 0;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    cumulative += fractions[k];
    const std::size_t end = k + 1 == fractions.size() ? order.size() : static_cast<std::size_t>(std::llround(n * cumulative));
    for (std::size_t i = begin; i < std::min(end, order.size()); ++i) manifest.entries[order[i]].split = name(k);
    begin = std::max(begin, end);
  }
  return manifest;
}

Manifest write_dataset(const fs::path& root, const std::vector<GenerationOutcome>& outcomes,
                       const GenerationConfig& cfg) {
  for (const char* sub : {"images", "masks", "sobel", "clouds", "poses"}) fs::create_directories(root / sub);
  io::write_text(root / "config.json", cfg.to_json() + "\n");
  Manifest manifest;
  const std::string hash = cfg.hash();
  for (const auto& o : outcomes) {
    ManifestEntry e;
    e.id = o.id;
    e.status = to_string(o.status);
    e.config_hash = hash;
    e.seed = cfg.seed;
    e.error = o.error;
    if (o.sample) {
      const auto& s = *o.sample;
      e.iou = s.pose.iou;
      e.accepted = s.pose.accepted;
      e.pose = "poses/" + o.id + ".json";
      io::write_text(root / e.pose, to_json(s.pose) + "\n");
      if (o.status == SampleStatus::emitted) {
        e.image = "images/" + o.id + ".pgm";
        e.mask = "masks/" + o.id + ".pgm";
        e.sobel = "sobel/" + o.id + ".raw";
        e.cloud = "clouds/" + o.id + ".ply";
        io::write_pgm(root / e.image, s.image);
        io::write_mask_pgm(root / e.mask, s.mask);
        io::write_gray_raw(root / e.sobel, s.sobel);
        io::write_ply(root / e.cloud, s.cloud);
      }
    }
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(root, manifest);
  return manifest;
}

void write_manifest(const fs::path& root, const Manifest& manifest) {
  std::string text;
  for (const auto& e : manifest.entries) text += e.to_json() + "\n";
  io::write_text(root / "manifest.jsonl", text);
}

Manifest read_manifest(const fs::path& root) {
  std::ifstream in(root / "manifest.jsonl");
  if (!in) throw IoError("cannot open " + (root / "manifest.jsonl").string());
  Manifest m;
  std::string line;
  while (std::getline(in, line))
    if (!skippable(line)) m.entries.push_back(ManifestEntry::from_json(line));
  return m;
}

void validate_manifest(const fs::path& root, const Manifest& manifest) {
  const std::string hash = read_generation_config(root).hash();
  for (const auto& e : manifest.entries) {
    if (e.config_hash != hash) throw ConfigError("manifest entry " + e.id + " was generated with a different config");
    if (!e.pose.empty()) pose_report_from_json(io::read_text(root / e.pose));
    if (e.status == "emitted") load_sample(root, e);
  }
}

DatasetSample load_sample(const fs::path& root, const ManifestEntry& e) {
  DatasetSample s;
  s.id = e.id;
  s.split = e.split;
  s.image = io::read_pgm(root / e.image);
  s.mask = io::read_mask_pgm(root / e.mask);
  s.sobel = io::read_gray_raw(root / e.sobel);
  s.cloud = io::read_ply(root / e.cloud);
  s.pose = pose_report_from_json(io::read_text(root / e.pose));
  if (!s.image.same_shape(s.mask) || !s.image.same_shape(s.sobel))
    throw ShapeError("sample " + e.id + " has inconsistent image sizes");
  return s;
}

std::vector<BuildingRecord> load_geometry_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> objs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".obj") objs.push_back(entry.path());
  std::sort(objs.begin(), objs.end());
  std::vector<BuildingRecord> out;
  for (const auto& obj : objs) {
    BuildingRecord rec;
    rec.id = obj.stem().string();
    rec.mesh_path = obj;
    rec.mesh = io::read_obj(obj);
    rec.roof = parse_building_geometry(dir / (rec.id + ".vertices.txt"), dir / (rec.id + ".faces.txt"));
    for (const char* ext : {".pgm", ".ppm"}) {
      const auto img = dir / (rec.id + ext);
      if (fs::exists(img)) {
        rec.image = io::read_gray_image(img);
        break;
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_geometry_dir(const fs::path& dir, const std::vector<BuildingRecord>& records) {
  fs::create_directories(dir);
  for (const auto& rec : records) {
    io::write_obj(dir / (rec.id + ".obj"), rec.mesh);
    std::ostringstream v, f;
    v.precision(17);
    for (const auto& p : rec.roof.vertices) v << p.u << ' ' << p.v << '\n';
    for (const auto& face : rec.roof.faces) {
      for (std::size_t i = 0; i < face.size(); ++i) f << (i ? " " : "") << face[i];
      f << '\n';
    }
    io::write_text(dir / (rec.id + ".vertices.txt"), v.str());
    io::write_text(dir / (rec.id + ".faces.txt"), f.str());
    if (rec.image) io::write_pgm(dir / (rec.id + ".pgm"), *rec.image);
  }
}

}  // namespace pcforge

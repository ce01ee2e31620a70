#include "pcforge/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pcforge::io {

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType parse_ply_type(const std::string& s, const std::string& source, std::size_t line) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  throw ParseError(source, line, "unknown PLY type '" + s + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8: case PlyType::u8: return 1;
    case PlyType::i16: case PlyType::u16: return 2;
    case PlyType::i32: case PlyType::u32: case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

double decode(PlyType t, const char* p) {
  switch (t) {
    case PlyType::i8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::u8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case PlyType::i16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::u16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case PlyType::i32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::u32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case PlyType::f32: { float v; std::memcpy(&v, p, 4); return v; }
    case PlyType::f64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

}  // namespace

PointCloud read_ply(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError(source, 1, "missing 'ply' magic");
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    if (!next_line()) throw ParseError(source, lineno, "unterminated PLY header");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw ParseError(source, lineno, "unsupported PLY format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      if (!ls) throw ParseError(source, lineno, "bad element line");
      elements.push_back(std::move(e));
    } else if (key == "property") {
      if (elements.empty()) throw ParseError(source, lineno, "property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(ct, source, lineno);
        p.type = parse_ply_type(it, source, lineno);
      } else {
        p.type = parse_ply_type(t, source, lineno);
        ls >> p.name;
      }
      elements.back().props.push_back(std::move(p));
    } else if (key == "end_header") {
      break;
    } else if (key == "comment" || key == "obj_info" || key.empty()) {
      continue;
    } else {
      throw ParseError(source, lineno, "unexpected header keyword '" + key + "'");
    }
  }
  if (!have_format) throw ParseError(source, lineno, "PLY header lacks a format line");

  PointCloud pc;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    int ix = -1, iy = -1, iz = -1;
    if (is_vertex) {
      for (std::size_t k = 0; k < e.props.size(); ++k) {
        if (e.props[k].name == "x") ix = static_cast<int>(k);
        if (e.props[k].name == "y") iy = static_cast<int>(k);
        if (e.props[k].name == "z") iz = static_cast<int>(k);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw ParseError(source, lineno, "vertex element lacks x/y/z");
      pc.points.resize(e.count);
    }
    std::vector<double> vals(e.props.size());
    for (std::size_t r = 0; r < e.count; ++r) {
      if (binary) {
        char buf[8];
        for (std::size_t k = 0; k < e.props.size(); ++k) {
          const auto& p = e.props[k];
          if (p.is_list) {
            if (!in.read(buf, static_cast<std::streamsize>(ply_size(p.count_type))))
              throw ParseError("truncated binary PLY in " + source);
            const auto n = static_cast<std::size_t>(decode(p.count_type, buf));
            in.ignore(static_cast<std::streamsize>(n * ply_size(p.type)));
            continue;
          }
          if (!in.read(buf, static_cast<std::streamsize>(ply_size(p.type))))
            throw ParseError("truncated binary PLY in " + source);
          vals[k] = decode(p.type, buf);
        }
      } else {
        if (!next_line()) throw ParseError(source, lineno, "unexpected end of PLY body");
        std::istringstream ls(line);
        for (std::size_t k = 0; k < e.props.size(); ++k) {
          const auto& p = e.props[k];
          if (p.is_list) {
            std::size_t n = 0;
            ls >> n;
            double skip;
            for (std::size_t j = 0; j < n; ++j) ls >> skip;
            continue;
          }
          ls >> vals[k];
        }
        if (!ls) throw ParseError(source, lineno, "bad PLY record");
      }
      if (is_vertex) pc[r] = {vals[ix], vals[iy], vals[iz]};
    }
  }
  for (const auto& p : pc)
    if (!p.finite()) throw ParseError("non-finite point in " + source);
  return pc;
}

PointCloud read_ply(const fs::path& path) {
  auto in = open_in(path);
  return read_ply(in, path.string());
}

void write_ply(std::ostream& out, const PointCloud& pc, PlyFormat format) {
  out << "ply\n"
      << (format == PlyFormat::ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << pc.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\nend_header\n";
  if (format == PlyFormat::ascii) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& p : pc) os << p.x << ' ' << p.y << ' ' << p.z << '\n';
    out << os.str();
  } else {
    for (const auto& p : pc) {
      const double xyz[3] = {p.x, p.y, p.z};
      out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
    }
  }
  if (!out) throw IoError("failed writing PLY");
}

void write_ply(const fs::path& path, const PointCloud& pc, PlyFormat format) {
  auto out = open_out(path);
  write_ply(out, pc, format);
}

TriangleMesh read_obj(std::istream& in, const std::string& source) {
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    if (key == "v") {
      Point3 p;
      if (!(ls >> p.x >> p.y >> p.z)) throw ParseError(source, lineno, "bad vertex record");
      mesh.vertices.push_back(p);
    } else if (key == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        long v = 0;
        try {
          v = std::stol(tok.substr(0, slash));
        } catch (const std::exception&) {
          throw ParseError(source, lineno, "bad face index '" + tok + "'");
        }
        const long nv = static_cast<long>(mesh.vertices.size());
        const long resolved = v < 0 ? nv + v : v - 1;
        if (v == 0 || resolved < 0 || resolved >= nv)
          throw ParseError(source, lineno, "face index out of range '" + tok + "'");
        idx.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (idx.size() < 3) throw ParseError(source, lineno, "face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return mesh;
}

TriangleMesh read_obj(const fs::path& path) {
  auto in = open_in(path);
  return read_obj(in, path.string());
}

void write_obj(const fs::path& path, const TriangleMesh& mesh) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& v : mesh.vertices) os << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const auto& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  write_text(path, os.str());
}

namespace {

// Netpbm header tokens, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

struct Pnm {
  int width = 0, height = 0, channels = 1;
  std::vector<double> values;  // scaled to [0,1]
};

Pnm read_pnm(const fs::path& path) {
  auto in = open_in(path);
  const std::string src = path.string();
  const std::string magic = pnm_token(in);
  Pnm img;
  bool binary;
  if (magic == "P2") { binary = false; img.channels = 1; }
  else if (magic == "P5") { binary = true; img.channels = 1; }
  else if (magic == "P3") { binary = false; img.channels = 3; }
  else if (magic == "P6") { binary = true; img.channels = 3; }
  else throw ParseError(src, 1, "not a PGM/PPM file");
  int maxval = 0;
  try {
    img.width = std::stoi(pnm_token(in));
    img.height = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw ParseError(src, 1, "bad netpbm header");
  }
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255)
    throw ParseError(src, 1, "unsupported netpbm dimensions or maxval");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.values.resize(n);
  if (binary) {
    std::vector<unsigned char> raw(n);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n)))
      throw ParseError(src, 1, "truncated netpbm body");
    for (std::size_t i = 0; i < n; ++i) img.values[i] = raw[i] / static_cast<double>(maxval);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      int v;
      if (!(in >> v)) throw ParseError(src, 1, "truncated netpbm body");
      img.values[i] = v / static_cast<double>(maxval);
    }
  }
  return img;
}

}  // namespace

GrayImage read_gray_image(const fs::path& path) {
  const Pnm p = read_pnm(path);
  GrayImage img(p.width, p.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    if (p.channels == 1) {
      img.data[i] = p.values[i];
    } else {
      const double r = p.values[3 * i], g = p.values[3 * i + 1], b = p.values[3 * i + 2];
      img.data[i] = 0.299 * r + 0.587 * g + 0.114 * b;
    }
  }
  return img;
}

GrayImage read_pgm(const fs::path& path) {
  const Pnm p = read_pnm(path);
  if (p.channels != 1) throw ParseError(path.string(), 1, "expected a grayscale PGM");
  GrayImage img(p.width, p.height);
  img.data = p.values;
  return img;
}

BinaryMask read_mask_pgm(const fs::path& path) {
  const GrayImage g = read_pgm(path);
  BinaryMask m(g.width, g.height);
  for (std::size_t i = 0; i < g.data.size(); ++i) m.data[i] = g.data[i] > 0.5 ? 1 : 0;
  return m;
}

void write_pgm(const fs::path& path, const GrayImage& img) {
  auto out = open_out(path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_mask_pgm(const fs::path& path, const BinaryMask& mask) {
  auto out = open_out(path);
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  std::vector<unsigned char> raw(mask.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.data[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path sidecar_path(const fs::path& raw) {
  fs::path p = raw;
  p.replace_extension(".json");
  return p;
}

FloatGrid read_float_grid(const fs::path& raw) {
  const auto side = sidecar_path(raw);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_text(side));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(side.string() + ": " + e.what());
  }
  FloatGrid g;
  try {
    g.height = header.at("height").get<int>();
    g.width = header.at("width").get<int>();
    g.channels = header.value("channels", 1);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(side.string() + ": " + e.what());
  }
  if (g.width <= 0 || g.height <= 0 || g.channels <= 0) throw ParseError(side.string() + ": bad dimensions");
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height * g.channels;
  std::vector<float> buf(n);
  auto in = open_in(raw);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float))))
    throw ParseError(raw.string() + ": raw grid shorter than its header declares");
  g.data.assign(buf.begin(), buf.end());
  return g;
}

void write_float_grid(const fs::path& raw, const FloatGrid& grid) {
  nlohmann::ordered_json header = {{"height", grid.height}, {"width", grid.width},
                                   {"channels", grid.channels}, {"dtype", "float32"},
                                   {"layout", "HWC"}, {"endianness", "little"}};
  write_text(sidecar_path(raw), header.dump(2) + "\n");
  std::vector<float> buf(grid.data.begin(), grid.data.end());
  auto out = open_out(raw);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + raw.string());
}

GrayImage read_gray_raw(const fs::path& raw) {
  const FloatGrid g = read_float_grid(raw);
  if (g.channels != 1) throw ShapeError(raw.string() + ": expected a single-channel grid");
  GrayImage img(g.width, g.height);
  img.data = g.data;
  return img;
}

void write_gray_raw(const fs::path& raw, const GrayImage& img) {
  write_float_grid(raw, FloatGrid{img.width, img.height, 1, img.data});
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace pcforge::io

#include "mvspl/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <png.h>

namespace fs = std::filesystem;

namespace mvspl {

namespace {

bool is_little_endian() {
  const uint16_t probe = 1;
  return *reinterpret_cast<const uint8_t*>(&probe) == 1;
}

void byteswap32(char* p, size_t count) {
  for (size_t i = 0; i < count; ++i, p += 4) {
    std::swap(p[0], p[3]);
    std::swap(p[1], p[2]);
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cameras
// ---------------------------------------------------------------------------

Camera load_camera(const std::string& path) {
  auto lines = read_lines(path);
  // Tokenize everything except the "extrinsic"/"intrinsic" tag lines,
  // remembering the source line of each number for error messages.
  std::vector<double> nums;
  std::vector<int> num_line;
  for (size_t li = 0; li < lines.size(); ++li) {
    std::istringstream ss(lines[li]);
    std::string tok;
    while (ss >> tok) {
      if (tok == "extrinsic" || tok == "intrinsic") continue;
      try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        nums.push_back(v);
        num_line.push_back(static_cast<int>(li) + 1);
      } catch (const std::exception&) {
        throw IoError(path + ": line " + std::to_string(li + 1) +
                      ": expected a number, got '" + tok + "'");
      }
    }
  }
  if (nums.size() < 16 + 9 + 2)
    throw IoError(path + ": line " +
                  std::to_string(nums.empty() ? 1 : num_line.back()) +
                  ": truncated camera file (need 4x4 extrinsic, 3x3 intrinsic,"
                  " d_min d_interval)");
  Camera cam;
  Eigen::Matrix4d E;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) E(r, c) = nums[r * 4 + c];
  if (std::abs(E(3, 0)) > 1e-12 || std::abs(E(3, 1)) > 1e-12 ||
      std::abs(E(3, 2)) > 1e-12 || std::abs(E(3, 3) - 1.0) > 1e-9)
    throw IoError(path + ": line " + std::to_string(num_line[12]) +
                  ": extrinsic bottom row must be 0 0 0 1");
  cam.R = E.block<3, 3>(0, 0);
  cam.t = E.block<3, 1>(0, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.K(r, c) = nums[16 + r * 3 + c];
  double dmin = nums[25];
  double dinterval = nums[26];
  cam.d_min = dmin;
  cam.d_max = dmin + 191.0 * dinterval;
  if (std::abs(cam.K.determinant()) < 1e-12)
    throw IoError(path + ": singular intrinsic matrix");
  try {
    validate_camera(cam);
  } catch (const std::invalid_argument& e) {
    throw IoError(path + ": " + e.what());
  }
  return cam;
}

void save_camera(const Camera& cam, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "extrinsic\n";
  for (int r = 0; r < 3; ++r)
    out << cam.R(r, 0) << " " << cam.R(r, 1) << " " << cam.R(r, 2) << " "
        << cam.t(r) << "\n";
  out << "0 0 0 1\n\nintrinsic\n";
  for (int r = 0; r < 3; ++r)
    out << cam.K(r, 0) << " " << cam.K(r, 1) << " " << cam.K(r, 2) << "\n";
  out << "\n" << cam.d_min << " " << (cam.d_max - cam.d_min) / 191.0 << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

namespace {

struct PfmData {
  int width = 0, height = 0;
  std::vector<float> values;  // top-down row order after loading
};

PfmData load_pfm_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "Pf")
    throw IoError(path + ": not a grayscale PFM (header '" + magic + "')");
  int w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (!in || w <= 0 || h <= 0)
    throw IoError(path + ": bad PFM dimensions");
  if (scale == 0.0) throw IoError(path + ": PFM scale must be nonzero");
  in.get();  // single whitespace after the scale
  PfmData pfm;
  pfm.width = w;
  pfm.height = h;
  std::vector<float> raw(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size() * sizeof(float));
  if (static_cast<size_t>(in.gcount()) != raw.size() * sizeof(float))
    throw IoError(path + ": truncated PFM payload");
  bool file_little = scale < 0.0;
  if (file_little != is_little_endian())
    byteswap32(reinterpret_cast<char*>(raw.data()), raw.size());
  // PFM stores rows bottom-up.
  pfm.values.resize(raw.size());
  for (int y = 0; y < h; ++y)
    std::memcpy(&pfm.values[static_cast<size_t>(y) * w],
                &raw[static_cast<size_t>(h - 1 - y) * w], w * sizeof(float));
  return pfm;
}

void save_pfm_raw(const float* values, int width, int height,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "Pf\n" << width << " " << height << "\n"
      << (is_little_endian() ? "-1.0" : "1.0") << "\n";
  for (int y = height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(values + static_cast<size_t>(y) * width),
              static_cast<size_t>(width) * sizeof(float));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

DepthMap load_depth_pfm(const std::string& path) {
  PfmData pfm = load_pfm_raw(path);
  DepthMap d(pfm.width, pfm.height);
  for (size_t i = 0; i < pfm.values.size(); ++i) {
    float v = pfm.values[i];
    if (std::isfinite(v) && v > 0.f) {
      d.depth[i] = v;
      d.valid[i] = 1;
    }
  }
  return d;
}

void save_depth_pfm(const DepthMap& depth, const std::string& path) {
  std::vector<float> vals(depth.depth.size());
  for (size_t i = 0; i < vals.size(); ++i)
    vals[i] = depth.valid[i] ? depth.depth[i] : 0.f;
  save_pfm_raw(vals.data(), depth.width, depth.height, path);
}

Image load_grid_pfm(const std::string& path) {
  PfmData pfm = load_pfm_raw(path);
  Image img(pfm.width, pfm.height, 1);
  img.data = std::move(pfm.values);
  return img;
}

void save_grid_pfm(const Image& grid, const std::string& path) {
  if (grid.channels != 1)
    throw std::invalid_argument("save_grid_pfm: single-channel grids only");
  save_pfm_raw(grid.data.data(), grid.width, grid.height, path);
}

// ---------------------------------------------------------------------------
// PPM / PGM / PNG
// ---------------------------------------------------------------------------

namespace {

int read_pnm_token(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments.
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      in.unget();
      break;
    }
  }
  int v;
  if (!(in >> v)) throw IoError(path + ": truncated PNM header");
  return v;
}

Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '2' && m1 != '3' && m1 != '5' && m1 != '6'))
    throw IoError(path + ": unsupported PNM magic");
  bool binary = (m1 == '5' || m1 == '6');
  int channels = (m1 == '3' || m1 == '6') ? 3 : 1;
  int w = read_pnm_token(in, path);
  int h = read_pnm_token(in, path);
  int maxval = read_pnm_token(in, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw IoError(path + ": unsupported PNM dimensions/maxval");
  Image img(w, h, channels);
  size_t n = static_cast<size_t>(w) * h * channels;
  if (binary) {
    in.get();  // single whitespace byte
    std::vector<uint8_t> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), n);
    if (static_cast<size_t>(in.gcount()) != n)
      throw IoError(path + ": truncated PNM payload");
    for (size_t i = 0; i < n; ++i)
      img.data[i] = static_cast<float>(raw[i]) / maxval;
  } else {
    for (size_t i = 0; i < n; ++i) {
      int v;
      if (!(in >> v)) throw IoError(path + ": truncated PNM payload");
      img.data[i] = static_cast<float>(v) / maxval;
    }
  }
  return img;
}

Image load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path + ": libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path + ": PNG decode failed");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);          // palettes, low bit depths, tRNS
  png_set_strip_16(png);        // 16 -> 8 bit
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  int w = static_cast<int>(png_get_image_width(png, info));
  int h = static_cast<int>(png_get_image_height(png, info));
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = raw.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  Image img(w, h, 3);
  for (size_t i = 0; i < raw.size(); ++i)
    img.data[i] = static_cast<float>(raw[i]) / 255.f;
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return load_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return load_pnm(path);
  throw IoError(path + ": unsupported image extension '" + ext + "'");
}

void save_image_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << (img.channels == 1 ? "P5\n" : "P6\n") << img.width << " "
      << img.height << "\n255\n";
  std::vector<uint8_t> raw(img.data.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    float v = std::min(1.f, std::max(0.f, img.data[i]));
    raw[i] = static_cast<uint8_t>(std::lround(v * 255.f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

namespace {

void require_finite(const Eigen::Vector3d& p, const std::string& what) {
  if (!p.allFinite())
    throw std::invalid_argument(what + ": non-finite coordinate");
}

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool ascii = true;
  std::vector<PlyElement> elements;
};

PlyHeader read_ply_header(std::istream& in, const std::string& path) {
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw IoError(path + ": missing 'ply' magic");
  PlyHeader hdr;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii")
        hdr.ascii = true;
      else if (fmt == "binary_little_endian")
        hdr.ascii = false;
      else
        throw IoError(path + ": unsupported PLY format " + fmt);
    } else if (tok == "element") {
      PlyElement el;
      ss >> el.name >> el.count;
      hdr.elements.push_back(el);
    } else if (tok == "property") {
      if (hdr.elements.empty()) throw IoError(path + ": property before element");
      PlyProperty prop;
      std::string t;
      ss >> t;
      if (t == "list") {
        prop.is_list = true;
        ss >> prop.count_type >> prop.type >> prop.name;
      } else {
        prop.type = t;
        ss >> prop.name;
      }
      hdr.elements.back().properties.push_back(prop);
    } else if (tok == "end_header") {
      return hdr;
    } else if (tok == "comment" || tok == "obj_info" || tok.empty()) {
      continue;
    } else {
      throw IoError(path + ": unexpected header token '" + tok + "'");
    }
  }
  throw IoError(path + ": unterminated PLY header");
}

size_t scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8")
    return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16")
    return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw IoError("unknown PLY scalar type " + type);
}

double read_binary_scalar(std::istream& in, const std::string& type) {
  char buf[8];
  size_t n = scalar_size(type);
  in.read(buf, n);
  if (type == "float" || type == "float32") {
    float v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  if (type == "double" || type == "float64") {
    double v;
    std::memcpy(&v, buf, 8);
    return v;
  }
  if (type == "char" || type == "int8") return static_cast<int8_t>(buf[0]);
  if (type == "uchar" || type == "uint8") return static_cast<uint8_t>(buf[0]);
  if (type == "short" || type == "int16") {
    int16_t v;
    std::memcpy(&v, buf, 2);
    return v;
  }
  if (type == "ushort" || type == "uint16") {
    uint16_t v;
    std::memcpy(&v, buf, 2);
    return v;
  }
  if (type == "int" || type == "int32") {
    int32_t v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

// Parsed vertex/face payload shared by the cloud and mesh loaders.
struct PlyContents {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<int32_t> view_ids;
  std::vector<Eigen::Vector2i> pixels;
  bool has_view_ids = false;
  std::vector<std::array<int, 3>> faces;
};

PlyContents read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  PlyHeader hdr = read_ply_header(in, path);
  PlyContents out;
  for (const PlyElement& el : hdr.elements) {
    if (el.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, iview = -1, ipx = -1, ipy = -1;
      for (size_t p = 0; p < el.properties.size(); ++p) {
        const std::string& n = el.properties[p].name;
        if (n == "x") ix = static_cast<int>(p);
        if (n == "y") iy = static_cast<int>(p);
        if (n == "z") iz = static_cast<int>(p);
        if (n == "view_id") iview = static_cast<int>(p);
        if (n == "px") ipx = static_cast<int>(p);
        if (n == "py") ipy = static_cast<int>(p);
      }
      if (ix < 0 || iy < 0 || iz < 0)
        throw IoError(path + ": vertex element lacks x/y/z");
      out.has_view_ids = iview >= 0;
      std::vector<double> row(el.properties.size());
      for (size_t v = 0; v < el.count; ++v) {
        for (size_t p = 0; p < el.properties.size(); ++p) {
          if (el.properties[p].is_list)
            throw IoError(path + ": list property on vertex unsupported");
          if (hdr.ascii) {
            if (!(in >> row[p])) throw IoError(path + ": truncated vertex data");
          } else {
            row[p] = read_binary_scalar(in, el.properties[p].type);
          }
        }
        if (!in) throw IoError(path + ": truncated vertex data");
        out.vertices.emplace_back(row[ix], row[iy], row[iz]);
        if (iview >= 0)
          out.view_ids.push_back(static_cast<int32_t>(row[iview]));
        if (ipx >= 0 && ipy >= 0)
          out.pixels.emplace_back(static_cast<int>(row[ipx]),
                                  static_cast<int>(row[ipy]));
      }
    } else if (el.name == "face") {
      for (size_t f = 0; f < el.count; ++f) {
        const PlyProperty& prop = el.properties.at(0);
        if (!prop.is_list) throw IoError(path + ": face property must be a list");
        size_t n;
        if (hdr.ascii) {
          if (!(in >> n)) throw IoError(path + ": truncated face data");
        } else {
          n = static_cast<size_t>(read_binary_scalar(in, prop.count_type));
        }
        if (n != 3) throw IoError(path + ": only triangle faces supported");
        std::array<int, 3> tri;
        for (int k = 0; k < 3; ++k) {
          if (hdr.ascii) {
            if (!(in >> tri[k])) throw IoError(path + ": truncated face data");
          } else {
            tri[k] = static_cast<int>(read_binary_scalar(in, prop.type));
          }
        }
        if (!in) throw IoError(path + ": truncated face data");
        out.faces.push_back(tri);
      }
    } else {
      throw IoError(path + ": unsupported element '" + el.name + "'");
    }
  }
  return out;
}

void write_double_le(std::ostream& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  if (!is_little_endian()) std::reverse(buf, buf + 8);
  out.write(buf, 8);
}

void write_int32_le(std::ostream& out, int32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  if (!is_little_endian()) std::reverse(buf, buf + 4);
  out.write(buf, 4);
}

}  // namespace

void save_pointcloud_ply(const PointCloud& cloud, const std::string& path,
                         bool ascii) {
  for (const auto& p : cloud.points) require_finite(p, "save_pointcloud_ply");
  bool with_trail = cloud.view_ids.size() == cloud.points.size() &&
                    cloud.pixels.size() == cloud.points.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian")
      << " 1.0\n";
  out << "element vertex " << cloud.points.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (with_trail)
    out << "property int view_id\nproperty int px\nproperty int py\n";
  out << "end_header\n";
  out.precision(17);
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (ascii) {
      out << p.x() << " " << p.y() << " " << p.z();
      if (with_trail)
        out << " " << cloud.view_ids[i] << " " << cloud.pixels[i].x() << " "
            << cloud.pixels[i].y();
      out << "\n";
    } else {
      write_double_le(out, p.x());
      write_double_le(out, p.y());
      write_double_le(out, p.z());
      if (with_trail) {
        write_int32_le(out, cloud.view_ids[i]);
        write_int32_le(out, cloud.pixels[i].x());
        write_int32_le(out, cloud.pixels[i].y());
      }
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

PointCloud load_pointcloud_ply(const std::string& path) {
  PlyContents c = read_ply(path);
  PointCloud cloud;
  cloud.points = std::move(c.vertices);
  if (c.has_view_ids && c.view_ids.size() == cloud.points.size())
    cloud.view_ids = std::move(c.view_ids);
  if (c.pixels.size() == cloud.points.size()) cloud.pixels = std::move(c.pixels);
  return cloud;
}

void save_mesh_ply(const TriangleMesh& mesh, const std::string& path,
                   bool ascii) {
  for (const auto& v : mesh.vertices) require_finite(v, "save_mesh_ply");
  for (const auto& t : mesh.triangles)
    for (int k : t)
      if (k < 0 || static_cast<size_t>(k) >= mesh.vertices.size())
        throw std::invalid_argument("save_mesh_ply: triangle index out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian")
      << " 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  out.precision(17);
  for (const auto& v : mesh.vertices) {
    if (ascii) {
      out << v.x() << " " << v.y() << " " << v.z() << "\n";
    } else {
      write_double_le(out, v.x());
      write_double_le(out, v.y());
      write_double_le(out, v.z());
    }
  }
  for (const auto& t : mesh.triangles) {
    if (ascii) {
      out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    } else {
      char n = 3;
      out.write(&n, 1);
      write_int32_le(out, t[0]);
      write_int32_le(out, t[1]);
      write_int32_le(out, t[2]);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

TriangleMesh load_mesh_ply(const std::string& path) {
  PlyContents c = read_ply(path);
  TriangleMesh mesh;
  mesh.vertices = std::move(c.vertices);
  mesh.triangles = std::move(c.faces);
  for (const auto& t : mesh.triangles)
    for (int k : t)
      if (k < 0 || static_cast<size_t>(k) >= mesh.vertices.size())
        throw IoError(path + ": face index out of range");
  return mesh;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void Config::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("config: " + what);
  };
  if (pyramid_levels_coarse < 1) fail("pyramid_levels_coarse must be >= 1");
  if (pyramid_levels_fine < pyramid_levels_coarse)
    fail("pyramid_levels_fine must be >= pyramid_levels_coarse");
  if (hypotheses_coarse < 2) fail("hypotheses_coarse must be >= 2");
  if (hypotheses_fine < 2 || hypotheses_fine % 2 != 0)
    fail("hypotheses_fine must be even and >= 2");
  if (!(softmax_temperature > 0)) fail("softmax_temperature must be > 0");
  if (alpha_gradient < 0 || alpha_ssim < 0 || alpha_perceptual < 0 ||
      alpha_smoothness < 0)
    fail("loss weights must be nonnegative");
  if (r_max < 0) fail("r_max must be > 0 (or 0 for auto)");
  if (n_min < 1) fail("n_min must be >= 1");
  if (voxel_size < 0) fail("voxel_size must be > 0 (or 0 for auto)");
  if (iterations < 0) fail("iterations must be >= 0");
  if (low_res_divisor < 1) fail("low_res_divisor must be >= 1");
  if (num_source_views < 1) fail("num_source_views must be >= 1");
  if (prior_bias < 0) fail("prior_bias must be >= 0");
  if (gate_margin < 0) fail("gate_margin must be >= 0");
  if (epsilon_stop_intervals < 0) fail("epsilon_stop_intervals must be >= 0");
}

namespace {

void apply_config_key(Config& cfg, const std::string& key,
                      const std::string& value) {
  auto as_int = [&](int& field) { field = std::stoi(value); };
  auto as_double = [&](double& field) { field = std::stod(value); };
  auto as_bool = [&](bool& field) {
    if (value == "true" || value == "1")
      field = true;
    else if (value == "false" || value == "0")
      field = false;
    else
      throw std::invalid_argument("config: bad boolean '" + value + "'");
  };
  if (key == "pyramid_levels_coarse") as_int(cfg.pyramid_levels_coarse);
  else if (key == "pyramid_levels_fine") as_int(cfg.pyramid_levels_fine);
  else if (key == "hypotheses_coarse") as_int(cfg.hypotheses_coarse);
  else if (key == "hypotheses_fine") as_int(cfg.hypotheses_fine);
  else if (key == "softmax_temperature") as_double(cfg.softmax_temperature);
  else if (key == "alpha_gradient") as_double(cfg.alpha_gradient);
  else if (key == "alpha_ssim") as_double(cfg.alpha_ssim);
  else if (key == "alpha_perceptual") as_double(cfg.alpha_perceptual);
  else if (key == "alpha_smoothness") as_double(cfg.alpha_smoothness);
  else if (key == "r_max") as_double(cfg.r_max);
  else if (key == "n_min") as_int(cfg.n_min);
  else if (key == "vote_inclusive") as_bool(cfg.vote_inclusive);
  else if (key == "voxel_size") as_double(cfg.voxel_size);
  else if (key == "iterations") as_int(cfg.iterations);
  else if (key == "prior_bias") as_double(cfg.prior_bias);
  else if (key == "low_res_divisor") as_int(cfg.low_res_divisor);
  else if (key == "num_source_views") as_int(cfg.num_source_views);
  else if (key == "gate_margin") as_double(cfg.gate_margin);
  else if (key == "epsilon_stop_intervals") as_double(cfg.epsilon_stop_intervals);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace

Config load_config(const std::string& path) {
  Config cfg;
  auto lines = read_lines(path);
  for (size_t li = 0; li < lines.size(); ++li) {
    std::string line = lines[li];
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string key, eq, value;
    if (!(ss >> key)) continue;  // blank line
    if (!(ss >> eq >> value) || eq != "=")
      throw IoError(path + ": line " + std::to_string(li + 1) +
                    ": expected 'key = value'");
    try {
      apply_config_key(cfg, key, value);
    } catch (const std::exception& e) {
      throw IoError(path + ": line " + std::to_string(li + 1) + ": " +
                    e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void save_config(const Config& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "pyramid_levels_coarse = " << cfg.pyramid_levels_coarse << "\n"
      << "pyramid_levels_fine = " << cfg.pyramid_levels_fine << "\n"
      << "hypotheses_coarse = " << cfg.hypotheses_coarse << "\n"
      << "hypotheses_fine = " << cfg.hypotheses_fine << "\n"
      << "softmax_temperature = " << cfg.softmax_temperature << "\n"
      << "alpha_gradient = " << cfg.alpha_gradient << "\n"
      << "alpha_ssim = " << cfg.alpha_ssim << "\n"
      << "alpha_perceptual = " << cfg.alpha_perceptual << "\n"
      << "alpha_smoothness = " << cfg.alpha_smoothness << "\n"
      << "r_max = " << cfg.r_max << "\n"
      << "n_min = " << cfg.n_min << "\n"
      << "vote_inclusive = " << (cfg.vote_inclusive ? "true" : "false") << "\n"
      << "voxel_size = " << cfg.voxel_size << "\n"
      << "iterations = " << cfg.iterations << "\n"
      << "prior_bias = " << cfg.prior_bias << "\n"
      << "low_res_divisor = " << cfg.low_res_divisor << "\n"
      << "num_source_views = " << cfg.num_source_views << "\n"
      << "gate_margin = " << cfg.gate_margin << "\n"
      << "epsilon_stop_intervals = " << cfg.epsilon_stop_intervals << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Config apply_config_overrides(
    Config cfg, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [key, value] : kv) apply_config_key(cfg, key, value);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Pair list + scene loading
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> load_pair_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  int n;
  if (!(in >> n) || n < 0) throw IoError(path + ": bad view count");
  std::vector<std::vector<int>> pairs(n);
  for (int i = 0; i < n; ++i) {
    int id, k;
    if (!(in >> id) || id < 0 || id >= n)
      throw IoError(path + ": bad view id in pair list");
    if (!(in >> k) || k < 0) throw IoError(path + ": bad source count");
    pairs[id].resize(k);
    for (int s = 0; s < k; ++s) {
      double score;
      if (!(in >> pairs[id][s] >> score))
        throw IoError(path + ": truncated pair entry");
      if (pairs[id][s] < 0 || pairs[id][s] >= n || pairs[id][s] == id)
        throw IoError(path + ": source index out of range for view " +
                      std::to_string(id));
    }
  }
  return pairs;
}

void save_pair_list(const std::vector<std::vector<int>>& pairs,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << pairs.size() << "\n";
  for (size_t i = 0; i < pairs.size(); ++i) {
    out << i << "\n" << pairs[i].size();
    for (int s : pairs[i]) out << " " << s << " " << 1.0;
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

Scene load_scene(const std::string& dir, int low_res_divisor) {
  if (!fs::is_directory(dir)) throw IoError("scene directory not found: " + dir);
  fs::path images_dir = fs::path(dir) / "images";
  fs::path cams_dir = fs::path(dir) / "cams";
  fs::path pair_path = fs::path(dir) / "pair.txt";
  if (!fs::is_directory(images_dir))
    throw IoError("missing images/ under " + dir);
  if (!fs::is_directory(cams_dir)) throw IoError("missing cams/ under " + dir);
  if (!fs::exists(pair_path)) throw IoError("missing pair.txt under " + dir);

  std::map<std::string, std::string> stems;  // sorted by stem
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm")
      stems[entry.path().stem().string()] = entry.path().string();
  }
  if (stems.size() < 2)
    throw IoError("scene " + dir + " needs at least 2 views, found " +
                  std::to_string(stems.size()));

  Scene scene;
  scene.manifest.scene_id = fs::path(dir).filename().string();
  for (const auto& [stem, img_path] : stems) {
    fs::path cam_path = cams_dir / (stem + "_cam.txt");
    if (!fs::exists(cam_path))
      throw IoError("missing camera file " + cam_path.string());
    scene.manifest.image_paths.push_back(img_path);
    scene.manifest.camera_paths.push_back(cam_path.string());
  }
  scene.manifest.pair_list = load_pair_list(pair_path.string());
  if (scene.manifest.pair_list.size() != scene.manifest.image_paths.size())
    throw IoError(dir + ": pair.txt view count (" +
                  std::to_string(scene.manifest.pair_list.size()) +
                  ") does not match image count (" +
                  std::to_string(scene.manifest.image_paths.size()) + ")");

  for (int i = 0; i < scene.manifest.view_count(); ++i) {
    scene.images.push_back(load_image(scene.manifest.image_paths[i]));
    scene.cameras.push_back(load_camera(scene.manifest.camera_paths[i]));
    if (scene.images.back().width != scene.images[0].width ||
        scene.images.back().height != scene.images[0].height)
      throw IoError(dir + ": inconsistent image resolutions across views");
  }
  scene.manifest.high_width = scene.images[0].width;
  scene.manifest.high_height = scene.images[0].height;
  if (scene.manifest.high_width % low_res_divisor != 0 ||
      scene.manifest.high_height % low_res_divisor != 0)
    throw IoError(dir + ": resolution not divisible by low_res_divisor " +
                  std::to_string(low_res_divisor));
  scene.manifest.low_width = scene.manifest.high_width / low_res_divisor;
  scene.manifest.low_height = scene.manifest.high_height / low_res_divisor;
  return scene;
}

}  // namespace mvspl

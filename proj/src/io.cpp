#include "splatalign/io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace splatalign {
namespace {

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

bool is_comment(const std::string& line) {
  const auto first = line.find_first_not_of(" \t");
  return first != std::string::npos && line[first] == '#';
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Reads exactly the tokens asked for; anything left over is an error.
class LineReader {
 public:
  LineReader(const std::string& line, int line_number) : in_(line), line_(line_number) {}

  template <typename T>
  T next(const char* what) {
    T value;
    if (!(in_ >> value)) throw ParseError(std::string("expected ") + what, line_);
    return value;
  }

  void finish() {
    std::string extra;
    if (in_ >> extra) throw ParseError("trailing garbage '" + extra + "'", line_);
  }

 private:
  std::istringstream in_;
  int line_;
};

}  // namespace

std::map<long, Intrinsics> parse_colmap_cameras(std::string_view text) {
  std::map<long, Intrinsics> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (is_blank(line) || is_comment(line)) continue;
    const int number = static_cast<int>(i) + 1;
    LineReader r(line, number);
    const long id = r.next<long>("CAMERA_ID");
    const std::string model = r.next<std::string>("MODEL");
    Intrinsics k;
    k.width = r.next<int>("WIDTH");
    k.height = r.next<int>("HEIGHT");
    if (model == "PINHOLE") {
      k.fx = r.next<double>("fx");
      k.fy = r.next<double>("fy");
    } else if (model == "SIMPLE_PINHOLE") {
      k.fx = k.fy = r.next<double>("f");
    } else {
      throw UnsupportedCameraModel(model);
    }
    k.cx = r.next<double>("cx");
    k.cy = r.next<double>("cy");
    r.finish();
    if (!(k.fx > 0 && k.fy > 0) || k.width <= 0 || k.height <= 0) {
      throw ParseError("non-positive focal length or image size", number);
    }
    if (!out.emplace(id, k).second) throw ParseError("duplicate camera id", number);
  }
  return out;
}

std::vector<ColmapImage> parse_colmap_images(std::string_view text,
                                             const std::map<long, Intrinsics>& intrinsics,
                                             double near_plane) {
  std::vector<ColmapImage> out;
  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& line = lines[i];
    if (is_blank(line) || is_comment(line)) {
      ++i;
      continue;
    }
    const int number = static_cast<int>(i) + 1;
    LineReader r(line, number);
    ColmapImage img;
    img.image_id = r.next<long>("IMAGE_ID");
    Eigen::Vector4d q;
    for (int a = 0; a < 4; ++a) q(a) = r.next<double>("quaternion component");
    Eigen::Vector3d t;
    for (int a = 0; a < 3; ++a) t(a) = r.next<double>("translation component");
    img.camera_id = r.next<long>("CAMERA_ID");
    img.name = r.next<std::string>("NAME");
    r.finish();
    if (q.norm() < 1e-12) throw ParseError("zero quaternion", number);

    const auto it = intrinsics.find(img.camera_id);
    if (it == intrinsics.end()) throw UnknownCameraId(img.camera_id);
    img.camera.intrinsics = it->second;
    img.camera.rotation = quaternion_to_rotation(q);
    img.camera.translation = t;
    img.camera.near_plane = near_plane;
    out.push_back(std::move(img));
    i += 2;  // record + its 2D points line
  }
  return out;
}

std::string emit_colmap_cameras(const std::map<long, Intrinsics>& intrinsics) {
  std::ostringstream out;
  out << "# Camera list with one line of data per camera:\n"
      << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
      << "# Number of cameras: " << intrinsics.size() << "\n";
  for (const auto& [id, k] : intrinsics) {
    out << id << " PINHOLE " << k.width << " " << k.height << " " << fmt_double(k.fx) << " "
        << fmt_double(k.fy) << " " << fmt_double(k.cx) << " " << fmt_double(k.cy) << "\n";
  }
  return out.str();
}

std::string emit_colmap_images(const std::vector<ColmapImage>& images) {
  std::ostringstream out;
  out << "# Image list with two lines of data per image:\n"
      << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
      << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n"
      << "# Number of images: " << images.size() << "\n";
  for (const auto& img : images) {
    const Eigen::Vector4d q = rotation_to_quaternion(img.camera.rotation);
    out << img.image_id;
    for (int a = 0; a < 4; ++a) out << " " << fmt_double(q(a));
    for (int a = 0; a < 3; ++a) out << " " << fmt_double(img.camera.translation(a));
    out << " " << img.camera_id << " " << img.name << "\n\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// FMAP

std::string encode_fmap(const FeatureImage& image) {
  std::string out(kFmapHeaderBytes, '\0');
  std::memcpy(out.data(), "FMAP", 4);
  out[4] = static_cast<char>(kFmapVersion);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(image.height),
                                 static_cast<std::uint32_t>(image.width),
                                 static_cast<std::uint32_t>(image.channels)};
  std::memcpy(out.data() + 5, dims, sizeof(dims));
  const Eigen::MatrixXf payload = image.data.cast<float>();
  out.append(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::size_t>(payload.size()) * sizeof(float));
  return out;
}

FeatureImage decode_fmap(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FMAP", 4) != 0) throw BadMagic();
  if (bytes.size() < kFmapHeaderBytes) throw TruncatedPayload(kFmapHeaderBytes, bytes.size());
  const unsigned version = static_cast<unsigned char>(bytes[4]);
  if (version != kFmapVersion) throw VersionUnsupported(static_cast<int>(version));
  std::uint32_t dims[3];
  std::memcpy(dims, bytes.data() + 5, sizeof(dims));
  const std::size_t expected = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * sizeof(float);
  const std::size_t actual = bytes.size() - kFmapHeaderBytes;
  if (actual < expected) throw TruncatedPayload(expected, actual);
  if (actual > expected) throw FormatError("trailing bytes after FMAP payload", kFmapHeaderBytes + expected);

  FeatureImage image(static_cast<int>(dims[1]), static_cast<int>(dims[0]), static_cast<int>(dims[2]));
  Eigen::MatrixXf payload(image.channels, image.pixel_count());
  std::memcpy(payload.data(), bytes.data() + kFmapHeaderBytes, expected);
  image.data = payload.cast<double>();
  return image;
}

void write_fmap(const FeatureImage& image, const std::filesystem::path& path) {
  write_file(path, encode_fmap(image));
}

FeatureImage read_fmap(const std::filesystem::path& path) { return decode_fmap(read_file(path)); }

// ---------------------------------------------------------------------------
// Benchmark directories

std::string format_tangent_records(const std::vector<TangentRecord>& records) {
  std::ostringstream out;
  out << "# id rho1 rho2 rho3 omega1 omega2 omega3 lambda\n";
  for (const auto& r : records) {
    out << r.id;
    for (int a = 0; a < 7; ++a) out << " " << fmt_double(r.xi(a));
    out << "\n";
  }
  return out.str();
}

std::vector<TangentRecord> parse_tangent_records(std::string_view text) {
  std::vector<TangentRecord> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i]) || is_comment(lines[i])) continue;
    LineReader r(lines[i], static_cast<int>(i) + 1);
    TangentRecord rec;
    rec.id = r.next<std::string>("id");
    for (int a = 0; a < 7; ++a) rec.xi(a) = r.next<double>("tangent component");
    r.finish();
    out.push_back(std::move(rec));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<std::string> save_benchmark(const Benchmark& bench, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& rel, std::string_view bytes) {
    write_file(dir / rel, bytes);
    written.push_back(rel);
  };

  put("scene.ply", scene_to_ply(bench.scene));

  std::vector<TangentRecord> gt, init;
  std::string outliers = "# meta_id image_name\n";
  for (std::size_t m = 0; m < bench.metas.size(); ++m) {
    const MetaImage& meta = bench.metas[m];
    fs::create_directories(dir / meta.id);
    std::map<long, Intrinsics> cams;
    std::vector<ColmapImage> images;
    for (std::size_t i = 0; i < meta.views.size(); ++i) {
      const MetaView& view = meta.views[i];
      const long id = static_cast<long>(i) + 1;
      cams[id] = view.camera.intrinsics;
      images.push_back({id, id, view.name, view.camera});
      put(meta.id + "/" + view.name + ".fmap", encode_fmap(view.target));
      if (view.color_target.channels > 0) {
        put(meta.id + "/" + view.name + ".rgb.fmap", encode_fmap(view.color_target));
      }
      if (m < bench.outliers.size() && i < bench.outliers[m].size() && bench.outliers[m][i]) {
        outliers += meta.id + " " + view.name + "\n";
      }
    }
    put(meta.id + "/cameras.txt", emit_colmap_cameras(cams));
    put(meta.id + "/images.txt", emit_colmap_images(images));
    if (meta.ground_truth) gt.push_back({meta.id, log_sim3(*meta.ground_truth)});
    if (m < bench.inits.size()) init.push_back({meta.id, log_sim3(bench.inits[m])});
  }
  put("gt.txt", format_tangent_records(gt));
  put("init.txt", format_tangent_records(init));
  put("outliers.txt", outliers);
  return written;
}

Benchmark load_benchmark(const std::filesystem::path& dir) {
  Benchmark bench;
  bench.scene = load_scene_ply(dir / "scene.ply");
  const auto gt = parse_tangent_records(read_file(dir / "gt.txt"));
  const auto init = parse_tangent_records(read_file(dir / "init.txt"));
  std::map<std::string, Tangent7d> gt_by_id;
  for (const auto& r : gt) gt_by_id[r.id] = r.xi;

  std::set<std::pair<std::string, std::string>> flagged;
  if (std::filesystem::exists(dir / "outliers.txt")) {
    const auto lines = split_lines(read_file(dir / "outliers.txt"));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i]) || is_comment(lines[i])) continue;
      LineReader r(lines[i], static_cast<int>(i) + 1);
      auto meta = r.next<std::string>("meta id");
      auto image = r.next<std::string>("image name");
      r.finish();
      flagged.emplace(std::move(meta), std::move(image));
    }
  }

  for (const auto& rec : init) {
    MetaImage meta;
    meta.id = rec.id;
    const auto it = gt_by_id.find(rec.id);
    if (it != gt_by_id.end()) meta.ground_truth = exp_sim3(it->second);
    const auto meta_dir = dir / rec.id;
    const auto intrinsics = parse_colmap_cameras(read_file(meta_dir / "cameras.txt"));
    const auto images = parse_colmap_images(read_file(meta_dir / "images.txt"), intrinsics);
    std::vector<bool> flags;
    for (const auto& img : images) {
      MetaView view;
      view.name = img.name;
      view.camera = img.camera;
      view.target = read_fmap(meta_dir / (img.name + ".fmap"));
      const auto rgb = meta_dir / (img.name + ".rgb.fmap");
      if (std::filesystem::exists(rgb)) view.color_target = read_fmap(rgb);
      flags.push_back(flagged.count({rec.id, img.name}) > 0);
      meta.views.push_back(std::move(view));
    }
    bench.metas.push_back(std::move(meta));
    bench.inits.push_back(exp_sim3(rec.xi));
    bench.outliers.push_back(std::move(flags));
  }
  return bench;
}

}  // namespace splatalign

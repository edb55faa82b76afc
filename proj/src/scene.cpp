#include "splatalign/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "splatalign/renderer.hpp"

namespace splatalign {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double GaussianSplat::opacity() const { return sigmoid(opacity_logit); }

Eigen::Matrix3d GaussianSplat::covariance() const {
  const Eigen::Matrix3d R = quaternion_to_rotation(rotation_q);
  const Eigen::Vector3d var = (2.0 * log_scales.array()).exp();
  return R * var.asDiagonal() * R.transpose();
}

void validate(const GaussianScene& scene) {
  if (scene.feature_dim < 1) throw SpecInvalid("feature_dim must be >= 1");
  if (!(scene.scene_unit > 0.0)) throw SpecInvalid("scene_unit must be positive");
  for (const auto& g : scene.splats) {
    if (g.feature.size() != scene.feature_dim) {
      throw DimensionMismatch("splat feature size differs from scene feature_dim");
    }
  }
}

void SyntheticBenchSpec::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw SpecInvalid(what);
  };
  require(n_splats >= 1, "n_splats must be >= 1");
  require(feature_dim >= 1, "feature_dim must be >= 1");
  require(n_reference_cameras >= 1, "n_reference_cameras must be >= 1");
  require(n_meta_images >= 1, "n_meta_images must be >= 1");
  require(images_per_meta >= 4, "images_per_meta must be >= 4");
  require(outlier_fraction >= 0.0 && outlier_fraction <= 1.0, "outlier_fraction must be in [0, 1]");
  require(occluder_coverage >= 0.0 && occluder_coverage <= 1.0,
          "occluder_coverage must be in [0, 1]");
  require(floater_fraction >= 0.0 && floater_fraction <= 1.0, "floater_fraction must be in [0, 1]");
  require(rotation_noise_deg >= 0.0, "rotation_noise_deg must be >= 0");
  require(translation_noise >= 0.0, "translation_noise must be >= 0");
  require(scale_min > 0.0 && scale_min <= scale_max, "scale interval must satisfy 0 < min <= max");
  require(feature_noise >= 0.0, "feature_noise must be >= 0");
  require(color_gain_jitter >= 0.0 && color_gain_jitter < 1.0, "color_gain_jitter must be in [0, 1)");
  require(image_width >= 1 && image_height >= 1, "image size must be >= 1");
  require(near_plane > 0.0, "near_plane must be positive");
}

namespace {

// Landmark occupies this box (z up) before normalization.
constexpr double kBoxHalfWidth = 0.4;
constexpr double kBoxTop = 0.7;
const Eigen::Vector3d kLookTarget(0.0, 0.0, 0.35);
const Eigen::Vector3d kUp(0.0, 0.0, 1.0);

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void round_to_f32(GaussianSplat& g) {
  g.rotation_q.normalize();
  for (auto* v : {&g.mean, &g.log_scales, &g.color}) {
    *v = v->unaryExpr(&round_f32);
  }
  g.rotation_q = g.rotation_q.unaryExpr(&round_f32);
  g.opacity_logit = round_f32(g.opacity_logit);
  g.feature = g.feature.unaryExpr(&round_f32);
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  Eigen::Vector3d unit_vector() {
    Eigen::Vector3d v;
    do {
      v = {normal(1.0), normal(1.0), normal(1.0)};
    } while (v.norm() < 1e-9);
    return v.normalized();
  }

  Eigen::Vector4d unit_quaternion() {
    Eigen::Vector4d q;
    do {
      q = {normal(1.0), normal(1.0), normal(1.0), normal(1.0)};
    } while (q.norm() < 1e-9);
    q.normalize();
    if (q(0) < 0) q = -q;
    return q;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

Eigen::Matrix3d euler_zyx(double x_rad, double y_rad, double z_rad) {
  return (Eigen::AngleAxisd(z_rad, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(y_rad, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(x_rad, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

std::vector<Eigen::VectorXd> make_prototypes(int clusters, int dim, Sampler& rng) {
  std::vector<Eigen::VectorXd> prototypes;
  for (int k = 0; k < clusters; ++k) {
    Eigen::VectorXd p(dim);
    for (int c = 0; c < dim; ++c) p(c) = rng.uniform(0.0, 0.1);
    p(k % dim) += 0.85;
    prototypes.push_back(p);
  }
  return prototypes;
}

}  // namespace

SyntheticBench generate_synthetic_bench(const SyntheticBenchSpec& spec) {
  spec.validate();
  Sampler rng(spec.seed);
  const int dim = spec.feature_dim;
  const int clusters = std::min(dim, 16);

  // Landmark: clusters of splats, each with a dominant feature prototype.
  const auto prototypes = make_prototypes(clusters, dim, rng);
  std::vector<Eigen::Vector3d> centers;
  std::vector<Eigen::Vector3d> cluster_colors;
  for (int k = 0; k < clusters; ++k) {
    centers.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.1, 0.6));
    cluster_colors.emplace_back(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
  }

  GaussianScene landmark;
  landmark.feature_dim = dim;
  for (int i = 0; i < spec.n_splats; ++i) {
    const int k = i % clusters;
    GaussianSplat g;
    for (int a = 0; a < 3; ++a) g.mean(a) = centers[static_cast<std::size_t>(k)](a) + rng.normal(0.1);
    g.mean.x() = std::clamp(g.mean.x(), -kBoxHalfWidth, kBoxHalfWidth);
    g.mean.y() = std::clamp(g.mean.y(), -kBoxHalfWidth, kBoxHalfWidth);
    g.mean.z() = std::clamp(g.mean.z(), 0.0, kBoxTop);
    for (int a = 0; a < 3; ++a) g.log_scales(a) = std::log(rng.uniform(0.03, 0.08));
    g.rotation_q = rng.unit_quaternion();
    g.opacity_logit = logit(rng.uniform(0.55, 0.95));
    for (int a = 0; a < 3; ++a) {
      g.color(a) = std::clamp(cluster_colors[static_cast<std::size_t>(k)](a) + rng.normal(0.03), 0.0, 1.0);
    }
    g.feature = prototypes[static_cast<std::size_t>(k)];
    for (int c = 0; c < dim; ++c) g.feature(c) += rng.normal(0.03);
    landmark.splats.push_back(g);
  }

  // Reference trajectory: an orbit around the landmark. Normalize so that the
  // RMS distance of its centers from their centroid is one scene unit.
  std::vector<Eigen::Vector3d> ref_centers;
  for (int i = 0; i < spec.n_reference_cameras; ++i) {
    const double az = 2.0 * M_PI * i / spec.n_reference_cameras;
    ref_centers.emplace_back(std::cos(az), std::sin(az), 0.9);
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : ref_centers) centroid += c;
  centroid /= static_cast<double>(ref_centers.size());
  double sq = 0.0;
  for (const auto& c : ref_centers) sq += (c - centroid).squaredNorm();
  double unit = std::sqrt(sq / static_cast<double>(ref_centers.size()));
  if (!(unit > 1e-9)) unit = 1.0;  // a single reference camera has no spread
  const double inv_unit = 1.0 / unit;
  for (auto& g : landmark.splats) {
    g.mean *= inv_unit;
    g.log_scales.array() -= std::log(unit);
    round_to_f32(g);
  }
  double sq_normalized = 0.0;
  for (const auto& c : ref_centers) sq_normalized += ((c - centroid) * inv_unit).squaredNorm();
  landmark.scene_unit = std::sqrt(sq_normalized / static_cast<double>(ref_centers.size()));
  if (spec.n_reference_cameras == 1) landmark.scene_unit = 1.0;
  const Eigen::Vector3d look_target = kLookTarget * inv_unit;

  // Floaters: faint blobs near the ground, outside the landmark box.
  GaussianScene reference = landmark;
  const int n_floaters = static_cast<int>(std::lround(spec.floater_fraction * spec.n_splats));
  for (int i = 0; i < n_floaters; ++i) {
    GaussianSplat g;
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    const double r = rng.uniform(0.6, 0.9);
    g.mean = Eigen::Vector3d(r * std::cos(az), r * std::sin(az), rng.uniform(0.0, 0.08)) * inv_unit;
    for (int a = 0; a < 3; ++a) g.log_scales(a) = std::log(rng.uniform(0.04, 0.1) * inv_unit);
    g.rotation_q = rng.unit_quaternion();
    g.opacity_logit = logit(rng.uniform(0.1, 0.28));
    for (int a = 0; a < 3; ++a) g.color(a) = rng.uniform(0.0, 1.0);
    g.feature = Eigen::VectorXd(dim);
    for (int c = 0; c < dim; ++c) g.feature(c) = rng.uniform(0.0, 0.6);
    round_to_f32(g);
    reference.splats.push_back(g);
  }

  SyntheticBench bench;
  bench.scene = std::move(reference);

  Intrinsics intrinsics;
  intrinsics.width = spec.image_width;
  intrinsics.height = spec.image_height;
  intrinsics.fx = intrinsics.fy = 0.9 * spec.image_width;
  intrinsics.cx = 0.5 * spec.image_width;
  intrinsics.cy = 0.5 * spec.image_height;

  const Eigen::VectorXd occluder_feature = Eigen::VectorXd::Constant(dim, 0.6);

  for (int m = 0; m < spec.n_meta_images; ++m) {
    Sim3d gt;
    gt.rotation = Eigen::AngleAxisd(rng.uniform(0.0, 0.85 * M_PI), rng.unit_vector()).toRotationMatrix();
    gt.translation = {rng.normal(1.0), rng.normal(1.0), rng.normal(1.0)};
    gt.log_scale = rng.uniform(-0.4, 0.4);
    const Sim3d gt_inv = inverse(gt);

    MetaImage meta;
    char id[32];
    std::snprintf(id, sizeof(id), "meta_%03d", m);
    meta.id = id;
    meta.ground_truth = gt;

    const double arc_start = rng.uniform(0.0, 2.0 * M_PI);
    const double arc_span = M_PI * 100.0 / 180.0;
    for (int i = 0; i < spec.images_per_meta; ++i) {
      const double t = (i + 0.5) / spec.images_per_meta + rng.uniform(-0.15, 0.15) / spec.images_per_meta;
      const double az = arc_start + arc_span * t;
      const double radius = rng.uniform(0.95, 1.2) * inv_unit;
      const double height = rng.uniform(0.7, 1.1) * inv_unit;
      const Eigen::Vector3d eye(radius * std::cos(az), radius * std::sin(az), height);
      const Eigen::Vector3d target =
          look_target + Eigen::Vector3d(rng.normal(0.03), rng.normal(0.03), rng.normal(0.03)) * inv_unit;
      const Camera ref_cam = look_at(intrinsics, eye, target, kUp, spec.near_plane);

      MetaView view;
      char name[32];
      std::snprintf(name, sizeof(name), "img_%03d", i);
      view.name = name;
      view.camera = transform_camera(gt_inv, ref_cam);
      view.target = render(landmark, view.camera, gt, Attribute::kFeature);
      if (spec.feature_noise > 0.0) {
        view.target.data = view.target.data.unaryExpr([&](double v) { return v + rng.normal(spec.feature_noise); });
      }
      view.color_target = render(landmark, view.camera, gt, Attribute::kColor);
      if (spec.color_gain_jitter > 0.0) {
        Eigen::Vector3d gain;
        for (int a = 0; a < 3; ++a) gain(a) = rng.uniform(1.0 - spec.color_gain_jitter, 1.0 + spec.color_gain_jitter);
        view.color_target.data = gain.asDiagonal() * view.color_target.data;
      }
      meta.views.push_back(std::move(view));
    }

    // Occluders on a random subset of images.
    const int n_images = spec.images_per_meta;
    const int n_out = static_cast<int>(std::lround(spec.outlier_fraction * n_images));
    std::vector<int> order(static_cast<std::size_t>(n_images));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<bool> flags(static_cast<std::size_t>(n_images), false);
    const double side = std::sqrt(spec.occluder_coverage);
    for (int j = 0; j < n_out; ++j) {
      const int i = order[static_cast<std::size_t>(j)];
      flags[static_cast<std::size_t>(i)] = true;
      MetaView& view = meta.views[static_cast<std::size_t>(i)];
      const int w = std::clamp(static_cast<int>(std::lround(side * spec.image_width)), 0, spec.image_width);
      const int h = std::clamp(static_cast<int>(std::lround(side * spec.image_height)), 0, spec.image_height);
      const int x0 = rng.index(spec.image_width - w + 1);
      const int y0 = rng.index(spec.image_height - h + 1);
      const Eigen::Vector3d occluder_color(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7));
      for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          view.target.pixel(x, y) = occluder_feature;
          view.color_target.pixel(x, y) = occluder_color;
        }
      }
    }

    // Initialization: ground truth perturbed on the reference side.
    Sim3d noise;
    const double r = spec.rotation_noise_deg * M_PI / 180.0;
    noise.rotation = euler_zyx(rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r));
    noise.translation = rng.unit_vector() * rng.uniform(0.0, spec.translation_noise);
    noise.log_scale = std::log(rng.uniform(spec.scale_min, spec.scale_max));
    if (spec.rotation_noise_deg == 0.0) noise.rotation.setIdentity();
    if (spec.translation_noise == 0.0) noise.translation.setZero();
    if (spec.scale_min == spec.scale_max) noise.log_scale = std::log(spec.scale_min);

    bench.inits.push_back(compose(noise, gt));
    bench.metas.push_back(std::move(meta));
    bench.outliers.push_back(std::move(flags));
  }
  return bench;
}

// ---------------------------------------------------------------------------
// PLY

namespace {

std::vector<std::string> base_properties() {
  return {"x",     "y",     "z",     "scale_0", "scale_1", "scale_2", "rot_0",
          "rot_1", "rot_2", "rot_3", "opacity", "f_dc_0",  "f_dc_1",  "f_dc_2"};
}

}  // namespace

std::string scene_to_ply(const GaussianScene& scene) {
  validate(scene);
  std::ostringstream header;
  header << "ply\n"
         << "format binary_little_endian 1.0\n"
         << "comment feature_dim " << scene.feature_dim << "\n";
  char unit[64];
  std::snprintf(unit, sizeof(unit), "%.17g", scene.scene_unit);
  header << "comment scene_unit " << unit << "\n"
         << "element vertex " << scene.splats.size() << "\n";
  for (const auto& name : base_properties()) header << "property float " << name << "\n";
  for (int c = 0; c < scene.feature_dim; ++c) header << "property float feature_" << c << "\n";
  header << "end_header\n";

  std::string out = header.str();
  const std::size_t stride = 14 + static_cast<std::size_t>(scene.feature_dim);
  std::vector<float> row(stride);
  out.reserve(out.size() + scene.splats.size() * stride * sizeof(float));
  for (const auto& g : scene.splats) {
    std::size_t n = 0;
    for (int a = 0; a < 3; ++a) row[n++] = static_cast<float>(g.mean(a));
    for (int a = 0; a < 3; ++a) row[n++] = static_cast<float>(g.log_scales(a));
    for (int a = 0; a < 4; ++a) row[n++] = static_cast<float>(g.rotation_q(a));
    row[n++] = static_cast<float>(g.opacity_logit);
    for (int a = 0; a < 3; ++a) row[n++] = static_cast<float>(g.color(a));
    for (int c = 0; c < scene.feature_dim; ++c) row[n++] = static_cast<float>(g.feature(c));
    out.append(reinterpret_cast<const char*>(row.data()), stride * sizeof(float));
  }
  return out;
}

GaussianScene scene_from_ply(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) throw FormatError("unterminated PLY header", pos);
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    return line;
  };

  if (next_line() != "ply") throw FormatError("missing 'ply' magic", 0);
  std::size_t line_start = pos;
  if (next_line() != "format binary_little_endian 1.0") {
    throw FormatError("only binary_little_endian 1.0 is supported", line_start);
  }

  int feature_dim = -1;
  double scene_unit = 1.0;
  long n_vertices = -1;
  std::vector<std::string> properties;
  for (;;) {
    line_start = pos;
    const std::string line = next_line();
    std::istringstream in(line);
    std::string keyword;
    in >> keyword;
    if (keyword == "end_header") break;
    if (keyword == "comment") {
      std::string key;
      in >> key;
      if (key == "feature_dim") {
        if (!(in >> feature_dim)) throw FormatError("bad feature_dim comment", line_start);
      } else if (key == "scene_unit") {
        if (!(in >> scene_unit)) throw FormatError("bad scene_unit comment", line_start);
      }
    } else if (keyword == "element") {
      std::string name;
      in >> name;
      if (name != "vertex" || !(in >> n_vertices) || n_vertices < 0) {
        throw FormatError("expected a single 'element vertex N'", line_start);
      }
    } else if (keyword == "property") {
      std::string type, name;
      in >> type >> name;
      if (type != "float") throw FormatError("only float properties are supported", line_start);
      properties.push_back(name);
    } else if (!keyword.empty()) {
      throw FormatError("unexpected header line '" + line + "'", line_start);
    }
  }
  if (feature_dim < 1) throw FormatError("missing 'comment feature_dim C'", pos);
  if (n_vertices < 0) throw FormatError("missing vertex element", pos);

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < properties.size(); ++i) column[properties[i]] = i;
  std::vector<std::size_t> base;
  for (const auto& name : base_properties()) {
    auto it = column.find(name);
    if (it == column.end()) throw FormatError("missing property " + name, pos);
    base.push_back(it->second);
  }
  const auto n_feature_props = std::count_if(properties.begin(), properties.end(), [](const std::string& p) {
    return p.rfind("feature_", 0) == 0;
  });
  if (n_feature_props != feature_dim) {
    throw DimensionMismatch("header declares feature_dim " + std::to_string(feature_dim) + " but has " +
                            std::to_string(n_feature_props) + " feature properties");
  }
  std::vector<std::size_t> feature_cols;
  for (int c = 0; c < feature_dim; ++c) {
    auto it = column.find("feature_" + std::to_string(c));
    if (it == column.end()) throw DimensionMismatch("missing property feature_" + std::to_string(c));
    feature_cols.push_back(it->second);
  }

  const std::size_t stride = properties.size();
  const std::size_t payload = static_cast<std::size_t>(n_vertices) * stride * sizeof(float);
  if (bytes.size() - pos < payload) {
    throw FormatError("truncated vertex data", bytes.size());
  }
  if (bytes.size() - pos > payload) {
    throw FormatError("trailing bytes after vertex data", pos + payload);
  }

  GaussianScene scene;
  scene.feature_dim = feature_dim;
  scene.scene_unit = scene_unit;
  scene.splats.resize(static_cast<std::size_t>(n_vertices));
  std::vector<float> row(stride);
  for (auto& g : scene.splats) {
    std::memcpy(row.data(), bytes.data() + pos, stride * sizeof(float));
    pos += stride * sizeof(float);
    auto v = [&](std::size_t i) { return static_cast<double>(row[base[i]]); };
    g.mean = {v(0), v(1), v(2)};
    g.log_scales = {v(3), v(4), v(5)};
    g.rotation_q = {v(6), v(7), v(8), v(9)};
    g.opacity_logit = v(10);
    g.color = {v(11), v(12), v(13)};
    g.feature.resize(feature_dim);
    for (int c = 0; c < feature_dim; ++c) g.feature(c) = row[feature_cols[static_cast<std::size_t>(c)]];
  }
  return scene;
}

void save_scene_ply(const GaussianScene& scene, const std::filesystem::path& path) {
  const std::string bytes = scene_to_ply(scene);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

GaussianScene load_scene_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return scene_from_ply(buffer.str());
}

}  // namespace splatalign

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "splatalign/feature_image.hpp"
#include "splatalign/geometry.hpp"
#include "splatalign/meta_image.hpp"
#include "splatalign/scene.hpp"

namespace splatalign {

// ---------------------------------------------------------------------------
// COLMAP text model (cameras.txt / images.txt). Only pinhole models.

std::map<long, Intrinsics> parse_colmap_cameras(std::string_view text);

struct ColmapImage {
  long image_id = 0;
  long camera_id = 0;
  std::string name;
  Camera camera;
};

/// Poses are world-to-camera, quaternion (qw, qx, qy, qz) as COLMAP writes
/// them. The 2D-points line after each record is skipped.
std::vector<ColmapImage> parse_colmap_images(std::string_view text,
                                             const std::map<long, Intrinsics>& intrinsics,
                                             double near_plane = kDefaultNearPlane);

std::string emit_colmap_cameras(const std::map<long, Intrinsics>& intrinsics);
std::string emit_colmap_images(const std::vector<ColmapImage>& images);

// ---------------------------------------------------------------------------
// FMAP feature maps: "FMAP", u8 version 1, u32 LE height, width, channels,
// then height*width*channels f32 LE, row-major, channels fastest.

inline constexpr std::size_t kFmapHeaderBytes = 17;
inline constexpr unsigned kFmapVersion = 1;

std::string encode_fmap(const FeatureImage& image);
FeatureImage decode_fmap(std::string_view bytes);
void write_fmap(const FeatureImage& image, const std::filesystem::path& path);
FeatureImage read_fmap(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Benchmark directories
//
//   scene.ply                    reference model
//   gt.txt, init.txt             "id rho1 rho2 rho3 w1 w2 w3 lambda" per line
//   outliers.txt                 "meta_id image_name" per occluded image
//   <meta_id>/cameras.txt        COLMAP intrinsics
//   <meta_id>/images.txt         COLMAP poses in the meta frame
//   <meta_id>/<name>.fmap        feature target
//   <meta_id>/<name>.rgb.fmap    color target

struct Benchmark {
  GaussianScene scene;
  std::vector<MetaImage> metas;
  std::vector<Sim3d> inits;
  std::vector<std::vector<bool>> outliers;
};

struct TangentRecord {
  std::string id;
  Tangent7d xi;
};

std::string format_tangent_records(const std::vector<TangentRecord>& records);
std::vector<TangentRecord> parse_tangent_records(std::string_view text);

/// Writes every file of the benchmark; returns the relative paths written.
std::vector<std::string> save_benchmark(const Benchmark& bench, const std::filesystem::path& dir);
Benchmark load_benchmark(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace splatalign

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "axp/geometry.hpp"
#include "axp/overlay.hpp"
#include "axp/raster.hpp"

namespace axp {

enum class Category { Chair = 0, Table = 1, Sofa = 2, Cabinet = 3 };

inline constexpr std::array<Category, 4> kAllCategories = {Category::Chair, Category::Table, Category::Sofa,
                                                           Category::Cabinet};

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);

/// Axis-aligned box in frame coordinates.
struct Box3D {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();

  double volume() const;
  double diagonal() const { return (max_corner - min_corner).norm(); }
  Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  /// The 8 corners, bit i of the index selecting max along axis i.
  std::array<Vec3, 8> corners() const;
  bool contains(const Vec3& p, double tol = 0.0) const;
};

void validate_box(const Box3D& b);

/// Ordered named dimensions in centimeters.
using Dimensions = std::vector<std::pair<std::string, double>>;

double dimension(const Dimensions& dims, std::string_view name);

/// Furniture built from axis-aligned cuboids, placed so
/// its frame origin sits at the back-left-bottom corner (keypoint "A").
struct SceneObject {
  Category category = Category::Chair;
  std::uint64_t seed = 0;
  Dimensions dims;
  std::vector<Box3D> parts;
  std::vector<Keypoint> gt_keypoints;
  Box3D gt_box;
  Rgb color{150, 110, 80};
};

/// Keypoint labelling order per category, in the order generate_object emits.
std::vector<std::string> keypoint_descriptions(Category c);

SceneObject generate_object(Category category, std::uint64_t seed);

/// Exact componentwise min/max of all part corners.
Box3D bounding_box(const std::vector<Box3D>& parts);

/// Flat-shaded painter's-algorithm rendering of the object's cuboid faces.
/// Throws ObjectBehindCamera when any part corner is not in front of the camera.
Image render_view(const SceneObject& object, const CameraModel& camera, const CoordinateFrame& frame, int width,
                  int height);

inline constexpr Rgb kBackground{238, 238, 238};

struct ViewRecord {
  std::string image;  // relative to the entry directory
  CameraModel camera;
  CoordinateFrame frame;
  OverlayStyle style;
};

struct DatasetEntry {
  std::string id;
  SceneObject object;
  std::vector<ViewRecord> views;
  std::uint64_t rng_seed = 0;
};

struct ViewRig {
  int width = 640;
  int height = 480;
  double horizontal_fov_deg = 50.0;
  double radius_factor = 3.0;
};

/// Canonical right-handed frame at the object origin, with a per-category tick unit.
CoordinateFrame default_frame(const SceneObject& object);
OverlayStyle default_style(const SceneObject& object, const CoordinateFrame& frame);

/// Cameras on a sphere of radius_factor x diagonal around the box center,
/// elevations alternating 20/40 degrees, azimuths evenly spaced.
std::vector<CameraModel> make_view_cameras(const SceneObject& object, const CoordinateFrame& frame, int count,
                                           const ViewRig& rig = {});

std::uint64_t derive_seed(std::uint64_t base, Category category, int index);

DatasetEntry make_entry(Category category, int index, std::uint64_t base_seed, int views_per_entry,
                        const ViewRig& rig = {});

struct DatasetConfig {
  int per_category = 5;
  int views_per_entry = 3;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
  ViewRig rig;
  bool force = false;
};

struct ManifestEntry {
  std::string id;
  Category category = Category::Chair;
  std::string annotation;  // relative path of annotation.json
  int views = 0;
};

struct Manifest {
  DatasetConfig config;
  std::vector<ManifestEntry> entries;
};

/// Writes <out>/<category>/<id>/{view_k.png, annotation.json} and
/// <out>/manifest.json. Throws InvalidConfig on bad counts and IoFailure when
/// out_dir is non-empty without force.
Manifest generate_dataset(const DatasetConfig& config);

DatasetEntry load_entry(const std::filesystem::path& annotation_json);
Manifest load_manifest(const std::filesystem::path& dataset_dir);
std::vector<DatasetEntry> load_dataset(const std::filesystem::path& dataset_dir);

/// Image of view k as stored on disk next to the entry's annotation.
Image load_view_image(const std::filesystem::path& dataset_dir, const ManifestEntry& m, int view);

}  // namespace axp

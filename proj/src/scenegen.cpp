#include "axp/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "axp/schema.hpp"

namespace axp {

namespace fs = std::filesystem;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Chair: return "chair";
    case Category::Table: return "table";
    case Category::Sofa: return "sofa";
    case Category::Cabinet: return "cabinet";
  }
  return "chair";
}

Category category_from_string(std::string_view s) {
  for (Category c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::SchemaError, "unknown category '" + std::string(s) + "'");
}

double Box3D::volume() const {
  const Vec3 d = (max_corner - min_corner).cwiseMax(0.0);
  return d.x() * d.y() * d.z();
}

std::array<Vec3, 8> Box3D::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    out[i] = Vec3((i & 1) ? max_corner.x() : min_corner.x(), (i & 2) ? max_corner.y() : min_corner.y(),
                  (i & 4) ? max_corner.z() : min_corner.z());
  }
  return out;
}

bool Box3D::contains(const Vec3& p, double tol) const {
  return (p.array() >= min_corner.array() - tol).all() && (p.array() <= max_corner.array() + tol).all();
}

void validate_box(const Box3D& b) {
  if (!b.min_corner.allFinite() || !b.max_corner.allFinite()) throw Error(ErrorCode::SchemaError, "box not finite");
  if ((b.min_corner.array() > b.max_corner.array()).any()) {
    throw Error(ErrorCode::SchemaError, "box min_corner exceeds max_corner");
  }
}

double dimension(const Dimensions& dims, std::string_view name) {
  for (const auto& [k, v] : dims) {
    if (k == name) return v;
  }
  throw Error(ErrorCode::SchemaError, "no dimension named '" + std::string(name) + "'");
}

namespace {

// Portable uniform draws: mt19937_64 is fully specified by the standard, the
// library distributions are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  /// Uniform in [lo, hi], snapped to half centimeters.
  double dim(double lo, double hi) { return std::round(uniform(lo, hi) * 2.0) / 2.0; }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

Box3D cuboid(double x0, double y0, double z0, double x1, double y1, double z1) {
  return {Vec3(x0, y0, z0), Vec3(x1, y1, z1)};
}

void add_corner_legs(std::vector<Box3D>& parts, double w, double d, double s, double h) {
  parts.push_back(cuboid(0, 0, 0, s, s, h));
  parts.push_back(cuboid(w - s, 0, 0, w, s, h));
  parts.push_back(cuboid(0, d - s, 0, s, d, h));
  parts.push_back(cuboid(w - s, d - s, 0, w, d, h));
}

void add_keypoints(SceneObject& obj, const std::vector<Vec3>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    obj.gt_keypoints.push_back({std::string(1, static_cast<char>('A' + i)), pts[i]});
  }
}

constexpr Rgb kPalette[] = {
    {150, 110, 80}, {120, 130, 150}, {170, 140, 100}, {110, 140, 110},
    {160, 120, 130}, {130, 120, 100}, {180, 160, 130}, {100, 120, 140},
};

}  // namespace

std::vector<std::string> keypoint_descriptions(Category c) {
  switch (c) {
    case Category::Chair:
      return {"A: back-left leg bottom (origin)", "B: back-right leg bottom", "C: front-left leg bottom",
              "D: front-right leg bottom", "E: back-left leg top", "F: front-right leg top",
              "G: backrest top-left", "H: backrest top-right"};
    case Category::Table:
      return {"A: back-left leg bottom (origin)", "B: back-right leg bottom", "C: front-left leg bottom",
              "D: front-right leg bottom", "E: tabletop back-left", "F: tabletop back-right",
              "G: tabletop front-left", "H: tabletop front-right"};
    case Category::Sofa:
      return {"A: back-left leg bottom (origin)", "B: back-right leg bottom", "C: front-left leg bottom",
              "D: front-right leg bottom", "E: left armrest front-top", "F: right armrest front-top",
              "G: backrest top-left", "H: backrest top-right"};
    case Category::Cabinet:
      return {"A: back-left bottom (origin)", "B: back-right bottom", "C: front-left bottom",
              "D: front-right bottom", "E: back-left top", "F: back-right top", "G: front-left top",
              "H: front-right top"};
  }
  return {};
}

SceneObject generate_object(Category category, std::uint64_t seed) {
  Rng rng(seed);
  SceneObject obj;
  obj.category = category;
  obj.seed = seed;

  switch (category) {
    case Category::Chair: {
      const double w = rng.dim(40, 50), d = rng.dim(38, 48), leg = rng.dim(35, 50);
      const double seat_t = rng.dim(3, 6), back_h = rng.dim(35, 50), leg_s = rng.dim(3, 5), back_t = rng.dim(3, 5);
      obj.dims = {{"seat_width", w},    {"seat_depth", d}, {"leg_height", leg},     {"seat_thickness", seat_t},
                  {"back_height", back_h}, {"leg_size", leg_s}, {"back_thickness", back_t}};
      add_corner_legs(obj.parts, w, d, leg_s, leg);
      obj.parts.push_back(cuboid(0, 0, leg, w, d, leg + seat_t));
      const double top = leg + seat_t + back_h;
      obj.parts.push_back(cuboid(0, 0, leg + seat_t, w, back_t, top));
      add_keypoints(obj, {{0, 0, 0}, {w, 0, 0}, {0, d, 0}, {w, d, 0}, {0, 0, leg}, {w, d, leg}, {0, 0, top}, {w, 0, top}});
      break;
    }
    case Category::Table: {
      const double w = rng.dim(80, 140), d = rng.dim(50, 90), h = rng.dim(70, 80);
      const double top_t = rng.dim(3, 6), leg_s = rng.dim(4, 7);
      obj.dims = {{"width", w}, {"depth", d}, {"height", h}, {"top_thickness", top_t}, {"leg_size", leg_s}};
      add_corner_legs(obj.parts, w, d, leg_s, h - top_t);
      obj.parts.push_back(cuboid(0, 0, h - top_t, w, d, h));
      add_keypoints(obj, {{0, 0, 0}, {w, 0, 0}, {0, d, 0}, {w, d, 0}, {0, 0, h}, {w, 0, h}, {0, d, h}, {w, d, h}});
      break;
    }
    case Category::Sofa: {
      const double w = rng.dim(150, 220), d = rng.dim(70, 95), leg = rng.dim(5, 12), seat = rng.dim(30, 40);
      const double back_h = rng.dim(35, 50), back_t = rng.dim(12, 20), arm_w = rng.dim(12, 20);
      const double arm_h = rng.dim(15, 25), leg_s = rng.dim(5, 8);
      obj.dims = {{"width", w},        {"depth", d},          {"leg_height", leg},  {"seat_height", seat},
                  {"back_height", back_h}, {"back_thickness", back_t}, {"arm_width", arm_w}, {"arm_height", arm_h},
                  {"leg_size", leg_s}};
      add_corner_legs(obj.parts, w, d, leg_s, leg);
      const double base_top = leg + seat;
      obj.parts.push_back(cuboid(0, 0, leg, w, d, base_top));
      obj.parts.push_back(cuboid(0, 0, base_top, w, back_t, base_top + back_h));
      obj.parts.push_back(cuboid(0, back_t, base_top, arm_w, d, base_top + arm_h));
      obj.parts.push_back(cuboid(w - arm_w, back_t, base_top, w, d, base_top + arm_h));
      const double arm_top = base_top + arm_h;
      const double back_top = base_top + back_h;
      add_keypoints(obj, {{0, 0, 0}, {w, 0, 0}, {0, d, 0}, {w, d, 0}, {0, d, arm_top}, {w, d, arm_top},
                          {0, 0, back_top}, {w, 0, back_top}});
      break;
    }
    case Category::Cabinet: {
      const double w = rng.dim(40, 100), d = rng.dim(35, 60), h = rng.dim(80, 180);
      const double handle_len = rng.dim(10, 20);
      obj.dims = {{"width", w}, {"depth", d}, {"height", h}, {"handle_length", handle_len}};
      obj.parts.push_back(cuboid(0, 0, 0, w, d, h));
      // Two door handles on the front face, either side of the centre line.
      const double hz = std::round(h * 0.55 * 2.0) / 2.0;
      obj.parts.push_back(cuboid(w / 2 - 4, d, hz, w / 2 - 2, d + 2, hz + handle_len));
      obj.parts.push_back(cuboid(w / 2 + 2, d, hz, w / 2 + 4, d + 2, hz + handle_len));
      add_keypoints(obj, {{0, 0, 0}, {w, 0, 0}, {0, d, 0}, {w, d, 0}, {0, 0, h}, {w, 0, h}, {0, d, h}, {w, d, h}});
      break;
    }
  }
  obj.gt_box = bounding_box(obj.parts);
  obj.color = kPalette[rng.next() % std::size(kPalette)];
  return obj;
}

Box3D bounding_box(const std::vector<Box3D>& parts) {
  if (parts.empty()) return {};
  Box3D b = parts.front();
  for (const auto& p : parts) {
    b.min_corner = b.min_corner.cwiseMin(p.min_corner);
    b.max_corner = b.max_corner.cwiseMax(p.max_corner);
  }
  return b;
}

Image render_view(const SceneObject& object, const CameraModel& camera, const CoordinateFrame& frame, int width,
                  int height) {
  Image img(width, height, kBackground);

  struct Face {
    std::array<Vec3, 4> world;
    Vec3 normal;
    double depth;
  };
  std::vector<Face> faces;
  const Vec3 eye = camera.center();
  // Face i of a cuboid: axis i / 2, max side when i is odd. Corner indices
  // follow Box3D::corners() and wind around the face.
  static constexpr int kFaceCorners[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                                             {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  for (const auto& part : object.parts) {
    const auto corners = part.corners();
    std::array<Vec3, 8> world;
    for (int i = 0; i < 8; ++i) {
      world[i] = frame_to_world(frame, corners[i]);
      if (!(camera.depth(world[i]) > kMinDepth)) {
        throw Error(ErrorCode::ObjectBehindCamera, "object part is not in front of the camera");
      }
    }
    for (int f = 0; f < 6; ++f) {
      Face face;
      Vec3 center = Vec3::Zero();
      for (int c = 0; c < 4; ++c) {
        face.world[c] = world[kFaceCorners[f][c]];
        center += face.world[c];
      }
      center /= 4.0;
      const double sign = (f % 2) ? 1.0 : -1.0;
      face.normal = sign * frame.axis(f / 2);
      if (face.normal.dot(eye - center) <= 0.0) continue;  // back face
      face.depth = camera.depth(center);
      faces.push_back(face);
    }
  }
  std::stable_sort(faces.begin(), faces.end(), [](const Face& a, const Face& b) { return a.depth > b.depth; });

  const Vec3 light = frame.basis() * Vec3(0.35, -0.5, 0.8).normalized();
  constexpr Rgb edge{40, 40, 40};
  for (const auto& face : faces) {
    std::vector<Pixel> poly;
    for (const auto& p : face.world) poly.push_back(project(camera, p));
    const double shade = 0.45 + 0.55 * std::max(0.0, face.normal.dot(light));
    auto channel = [&](std::uint8_t c) { return static_cast<std::uint8_t>(std::lround(std::min(255.0, c * shade))); };
    fill_convex_polygon(img, poly, {channel(object.color.r), channel(object.color.g), channel(object.color.b)});
    for (std::size_t i = 0; i < poly.size(); ++i) fill_capsule(img, poly[i], poly[(i + 1) % poly.size()], 0.5, edge);
  }
  return img;
}

CoordinateFrame default_frame(const SceneObject& object) {
  const double unit = object.category == Category::Chair ? 10.0 : 20.0;
  return build_frame(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), Handedness::Right, unit);
}

OverlayStyle default_style(const SceneObject& object, const CoordinateFrame& frame) {
  OverlayStyle s;
  const Vec3 ext = object.gt_box.max_corner.cwiseAbs().cwiseMax(object.gt_box.min_corner.cwiseAbs());
  s.ticks_per_direction = static_cast<int>(std::ceil(ext.maxCoeff() / frame.unit_length));
  s.negative_extent = false;
  return s;
}

std::vector<CameraModel> make_view_cameras(const SceneObject& object, const CoordinateFrame& frame, int count,
                                           const ViewRig& rig) {
  std::vector<CameraModel> cams;
  const Vec3 center = frame_to_world(frame, object.gt_box.center());
  const double radius = rig.radius_factor * std::max(object.gt_box.diagonal(), 1.0);
  const double f = (rig.width / 2.0) / std::tan(rig.horizontal_fov_deg * M_PI / 360.0);
  const Vec3 up = frame.axis_z;
  const Vec3 ex = frame.axis_x;
  const Vec3 ey = frame.axis_y;
  for (int k = 0; k < count; ++k) {
    const double elevation = (k % 2 == 0 ? 20.0 : 40.0) * M_PI / 180.0;
    const double azimuth = (-60.0 + 360.0 * k / count) * M_PI / 180.0;
    const Vec3 dir = std::cos(elevation) * (std::cos(azimuth) * ex + std::sin(azimuth) * ey) + std::sin(elevation) * up;
    cams.push_back(look_at(center + radius * dir, center, up, f, f, rig.width / 2.0, rig.height / 2.0, rig.width,
                           rig.height));
  }
  return cams;
}

std::uint64_t derive_seed(std::uint64_t base, Category category, int index) {
  // splitmix64 finalizer over the mixed inputs.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(category) * 1000003ULL +
                                                    static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

DatasetEntry make_entry(Category category, int index, std::uint64_t base_seed, int views_per_entry,
                        const ViewRig& rig) {
  DatasetEntry e;
  char id[64];
  std::snprintf(id, sizeof id, "%s_%03d", std::string(to_string(category)).c_str(), index);
  e.id = id;
  e.rng_seed = derive_seed(base_seed, category, index);
  e.object = generate_object(category, e.rng_seed);
  const CoordinateFrame frame = default_frame(e.object);
  const OverlayStyle style = default_style(e.object, frame);
  const auto cams = make_view_cameras(e.object, frame, views_per_entry, rig);
  for (int k = 0; k < views_per_entry; ++k) {
    e.views.push_back({"view_" + std::to_string(k) + ".png", cams[k], frame, style});
  }
  return e;
}

Manifest generate_dataset(const DatasetConfig& config) {
  if (config.per_category < 1) throw Error(ErrorCode::InvalidConfig, "per_category must be >= 1");
  if (config.views_per_entry < 2) throw Error(ErrorCode::InvalidConfig, "views_per_entry must be >= 2");
  if (config.out_dir.empty()) throw Error(ErrorCode::InvalidConfig, "out_dir is required");
  std::error_code ec;
  if (fs::exists(config.out_dir, ec)) {
    if (!fs::is_directory(config.out_dir, ec)) {
      throw Error(ErrorCode::IoFailure, config.out_dir.string() + " is not a directory");
    }
    if (!fs::is_empty(config.out_dir, ec) && !config.force) {
      throw Error(ErrorCode::IoFailure, config.out_dir.string() + " is not empty (use force to overwrite)");
    }
  }
  fs::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + config.out_dir.string() + ": " + ec.message());

  Manifest manifest;
  manifest.config = config;
  for (Category c : kAllCategories) {
    for (int i = 0; i < config.per_category; ++i) {
      const DatasetEntry e = make_entry(c, i, config.seed, config.views_per_entry, config.rig);
      const fs::path rel = fs::path(std::string(to_string(c))) / e.id;
      const fs::path dir = config.out_dir / rel;
      fs::create_directories(dir, ec);
      if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string());
      for (const auto& v : e.views) {
        write_png(dir / v.image, render_view(e.object, v.camera, v.frame, config.rig.width, config.rig.height));
      }
      write_file_atomic(dir / "annotation.json", dump_json(entry_to_json(e)));
      manifest.entries.push_back({e.id, c, (rel / "annotation.json").generic_string(),
                                  static_cast<int>(e.views.size())});
    }
  }
  write_file_atomic(config.out_dir / "manifest.json", dump_json(manifest_to_json(manifest)));
  return manifest;
}

DatasetEntry load_entry(const fs::path& annotation_json) {
  return entry_from_json(parse_json(read_text_file(annotation_json)));
}

Manifest load_manifest(const fs::path& dataset_dir) {
  Manifest m = manifest_from_json(parse_json(read_text_file(dataset_dir / "manifest.json")));
  m.config.out_dir = dataset_dir;
  return m;
}

std::vector<DatasetEntry> load_dataset(const fs::path& dataset_dir) {
  const Manifest m = load_manifest(dataset_dir);
  std::vector<DatasetEntry> out;
  for (const auto& me : m.entries) out.push_back(load_entry(dataset_dir / me.annotation));
  return out;
}

Image load_view_image(const fs::path& dataset_dir, const ManifestEntry& m, int view) {
  const fs::path dir = (dataset_dir / m.annotation).parent_path();
  return read_png(dir / ("view_" + std::to_string(view) + ".png"));
}

}  // namespace axp

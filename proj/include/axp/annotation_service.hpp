#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "axp/overlay.hpp"
#include "axp/schema.hpp"

namespace axp {

/// A human's frame specification on one image, in image space.
struct AnnotationDraft {
  std::string image_id;
  Pixel origin_px;
  std::array<Pixel, 2> axis_px;  // X and Y endpoint hints
  Handedness handedness = Handedness::Right;
  double unit_length = 10.0;
  int ticks_per_direction = 5;
  bool show_scale = true;
  /// "auto" uses the dataset camera when one is recorded, else the default;
  /// "default" always uses the default camera.
  std::string camera = "auto";
};

struct FieldError {
  std::string field;
  std::string message;
};

inline constexpr double kMinAxisHintDistancePx = 5.0;
inline constexpr int kMaxTicksPerDirection = 100;

/// Parses a draft; structural problems are reported per field instead of thrown.
AnnotationDraft draft_from_json(const Json& j, std::vector<FieldError>& errors);
Json draft_to_json(const AnnotationDraft& d);
/// Invariant checks against the image size.
std::vector<FieldError> validate_draft(const AnnotationDraft& d, int width, int height);
Json field_errors_to_json(const std::vector<FieldError>& errors);

/// Machine-readable validation rules, published in /api/health.
Json draft_validation_spec();

/// 60 degree horizontal FOV, principal point at the image center, 150 cm above
/// the ground plane z = 0, pitched 30 degrees down, looking along +Y.
CameraModel default_annotation_camera(int width, int height);

struct AssumedCamera {
  CameraModel camera;
  std::string source;  // "dataset" or "default"
};

/// The camera recorded for a dataset view (view_<k>.png next to an
/// annotation.json), or the default camera.
AssumedCamera camera_for_image(const std::filesystem::path& png, int width, int height, const std::string& mode);

struct LiftedAnnotation {
  CoordinateFrame frame;
  OverlayStyle style;
  AssumedCamera camera;
};

/// Back-projects the clicked origin and axis endpoints onto the ground plane
/// z = 0 and builds the frame from them. Returns field errors when a ray misses
/// the plane or the hints are degenerate.
std::optional<LiftedAnnotation> lift_draft(const AnnotationDraft& d, const AssumedCamera& camera,
                                           std::vector<FieldError>& errors);

/// The preview PNG for a draft on an image file. Empty optional plus field
/// errors on invalid drafts. Shared by the service and `axp annotate`.
std::optional<std::vector<std::uint8_t>> render_draft_png(const std::filesystem::path& png, const AnnotationDraft& d,
                                                          std::vector<FieldError>& errors);

struct ImageInfo {
  std::string id;  // path relative to the image root, without ".png"
  int width = 0;
  int height = 0;
  bool has_annotation = false;
};

class SaveConflict : public std::runtime_error {
 public:
  SaveConflict(int current, int base)
      : std::runtime_error("annotation changed: latest version " + std::to_string(current) + ", base " +
                           std::to_string(base)),
        current_version(current) {}
  int current_version;
};

/// Annotation files live under <annotations>/<image id>/annotation.v<N>.json
/// with a `latest` file naming the newest version. Versions are never rewritten.
class AnnotationStore {
 public:
  AnnotationStore(std::filesystem::path images_dir, std::filesystem::path annotations_dir);

  const std::filesystem::path& images_dir() const { return images_dir_; }

  /// Recursive listing of readable PNGs, sorted by id. Hidden directories are skipped.
  std::vector<ImageInfo> list_images() const;
  /// nullopt for ids that are malformed or do not name a PNG under the root.
  std::optional<std::filesystem::path> image_path(const std::string& id) const;

  int latest_version(const std::string& id) const;
  std::optional<Json> load(const std::string& id, int version = 0) const;

  /// Persists `record` as version latest+1. Throws SaveConflict when the latest
  /// version is not base_version.
  int save(const std::string& id, int base_version, Json record);

  /// Blocks until in-flight saves finish and refuses new ones.
  void close();

 private:
  std::mutex& lock_for(const std::string& id);

  std::filesystem::path images_dir_;
  std::filesystem::path annotations_dir_;
  std::mutex table_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
  std::shared_mutex closing_;
  bool closed_ = false;
};

struct ServiceConfig {
  std::filesystem::path images_dir;
  /// Empty selects <images>/.annotations.
  std::filesystem::path annotations_dir;
  /// Static UI bundle served at /; empty serves a placeholder page.
  std::filesystem::path ui_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
};

class AnnotationService {
 public:
  explicit AnnotationService(ServiceConfig config);
  ~AnnotationService();

  /// Binds the listening socket; port 0 picks a free port. False on bind failure.
  bool bind();
  int port() const { return port_; }
  /// Serves until stop(); call after a successful bind().
  void serve();
  /// Stops accepting requests and flushes pending annotation writes.
  void stop();

  AnnotationStore& store() { return *store_; }

 private:
  struct Impl;
  ServiceConfig config_;
  std::unique_ptr<AnnotationStore> store_;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace axp

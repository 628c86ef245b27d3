#include "axp/annotation_service.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>

#include "axp/scenegen.hpp"

namespace axp {

namespace fs = std::filesystem;

// --- drafts -------------------------------------------------------------------

namespace {

std::optional<Pixel> pixel_field(const Json& j, const std::string& field, std::vector<FieldError>& errors) {
  try {
    const Pixel p = pixel_from_json(j);
    if (!std::isfinite(p.u) || !std::isfinite(p.v)) throw Error(ErrorCode::SchemaError, "not finite");
    return p;
  } catch (const Error&) {
    errors.push_back({field, "expected [u, v] with finite numbers"});
    return std::nullopt;
  }
}

}  // namespace

AnnotationDraft draft_from_json(const Json& j, std::vector<FieldError>& errors) {
  AnnotationDraft d;
  if (!j.is_object()) {
    errors.push_back({"", "expected a JSON object"});
    return d;
  }
  if (const auto it = j.find("image_id"); it != j.end() && it->is_string() && !it->get<std::string>().empty()) {
    d.image_id = it->get<std::string>();
  } else {
    errors.push_back({"image_id", "required non-empty string"});
  }
  if (const auto it = j.find("origin_px"); it != j.end()) {
    if (auto p = pixel_field(*it, "origin_px", errors)) d.origin_px = *p;
  } else {
    errors.push_back({"origin_px", "required"});
  }
  if (const auto it = j.find("axis_px"); it != j.end() && it->is_array() && it->size() == 2) {
    for (int i = 0; i < 2; ++i) {
      if (auto p = pixel_field((*it)[i], "axis_px[" + std::to_string(i) + "]", errors)) d.axis_px[i] = *p;
    }
  } else {
    errors.push_back({"axis_px", "required: two [u, v] points (X and Y hints)"});
  }
  if (const auto it = j.find("handedness"); it != j.end()) {
    try {
      d.handedness = handedness_from_string(it->is_string() ? it->get<std::string>() : std::string());
    } catch (const Error&) {
      errors.push_back({"handedness", "must be \"left\" or \"right\""});
    }
  }
  if (const auto it = j.find("unit_length"); it != j.end()) {
    if (it->is_number()) {
      d.unit_length = it->get<double>();
    } else {
      errors.push_back({"unit_length", "must be a number"});
    }
  }
  if (const auto it = j.find("ticks_per_direction"); it != j.end()) {
    if (it->is_number_integer()) {
      d.ticks_per_direction = it->get<int>();
    } else {
      errors.push_back({"ticks_per_direction", "must be an integer"});
    }
  }
  if (const auto it = j.find("show_scale"); it != j.end()) {
    if (it->is_boolean()) {
      d.show_scale = it->get<bool>();
    } else {
      errors.push_back({"show_scale", "must be a boolean"});
    }
  }
  if (const auto it = j.find("camera"); it != j.end()) {
    if (it->is_string() && (*it == "auto" || *it == "default")) {
      d.camera = it->get<std::string>();
    } else {
      errors.push_back({"camera", "must be \"auto\" or \"default\""});
    }
  }
  return d;
}

Json draft_to_json(const AnnotationDraft& d) {
  Json j;
  j["image_id"] = d.image_id;
  j["origin_px"] = pixel_to_json(d.origin_px);
  j["axis_px"] = Json::array({pixel_to_json(d.axis_px[0]), pixel_to_json(d.axis_px[1])});
  j["handedness"] = to_string(d.handedness);
  j["unit_length"] = d.unit_length;
  j["ticks_per_direction"] = d.ticks_per_direction;
  j["show_scale"] = d.show_scale;
  j["camera"] = d.camera;
  return j;
}

std::vector<FieldError> validate_draft(const AnnotationDraft& d, int width, int height) {
  std::vector<FieldError> errors;
  const Pixel& o = d.origin_px;
  if (!(o.u >= 0.0 && o.v >= 0.0 && o.u <= width - 1.0 && o.v <= height - 1.0)) {
    errors.push_back({"origin_px", "must lie inside the " + std::to_string(width) + "x" + std::to_string(height) + " image"});
  }
  for (int i = 0; i < 2; ++i) {
    if (!(std::hypot(d.axis_px[i].u - o.u, d.axis_px[i].v - o.v) >= kMinAxisHintDistancePx)) {
      errors.push_back({"axis_px[" + std::to_string(i) + "]", "must be at least 5 px from the origin"});
    }
  }
  if (!(d.unit_length > 0.0) || !std::isfinite(d.unit_length)) errors.push_back({"unit_length", "must be > 0"});
  if (d.ticks_per_direction < 0 || d.ticks_per_direction > kMaxTicksPerDirection) {
    errors.push_back({"ticks_per_direction", "must be in [0, 100]"});
  }
  return errors;
}

Json field_errors_to_json(const std::vector<FieldError>& errors) {
  Json arr = Json::array();
  for (const auto& e : errors) arr.push_back({{"field", e.field}, {"message", e.message}});
  return {{"errors", std::move(arr)}};
}

Json draft_validation_spec() {
  return {
      {"origin_px", {{"inside_image", true}}},
      {"axis_px", {{"count", 2}, {"min_distance_from_origin_px", kMinAxisHintDistancePx}}},
      {"handedness", {{"enum", {"left", "right"}}}},
      {"unit_length", {{"exclusive_minimum", 0}}},
      {"ticks_per_direction", {{"minimum", 0}, {"maximum", kMaxTicksPerDirection}}},
      {"show_scale", {{"type", "boolean"}}},
      {"camera", {{"enum", {"auto", "default"}}}},
  };
}

// --- lifting ------------------------------------------------------------------

CameraModel default_annotation_camera(int width, int height) {
  const double f = (width / 2.0) / std::tan(30.0 * M_PI / 180.0);
  const Vec3 eye(0.0, 0.0, 150.0);
  const double pitch = 30.0 * M_PI / 180.0;
  const Vec3 target = eye + Vec3(0.0, std::cos(pitch), -std::sin(pitch));
  return look_at(eye, target, Vec3::UnitZ(), f, f, width / 2.0, height / 2.0, width, height);
}

AssumedCamera camera_for_image(const fs::path& png, int width, int height, const std::string& mode) {
  if (mode != "default") {
    const fs::path ann = png.parent_path() / "annotation.json";
    std::error_code ec;
    if (fs::exists(ann, ec)) {
      try {
        const DatasetEntry e = load_entry(ann);
        const std::string name = png.filename().string();
        for (const auto& v : e.views) {
          if (v.image == name && v.camera.image_width == width && v.camera.image_height == height) {
            return {v.camera, "dataset"};
          }
        }
      } catch (const Error&) {
        // Not a dataset annotation; fall through to the default camera.
      }
    }
  }
  return {default_annotation_camera(width, height), "default"};
}

std::optional<LiftedAnnotation> lift_draft(const AnnotationDraft& d, const AssumedCamera& camera,
                                           std::vector<FieldError>& errors) {
  const Vec3 up = Vec3::UnitZ();
  const auto o = intersect_ray_plane(camera.camera, d.origin_px, up, 0.0);
  const auto x = intersect_ray_plane(camera.camera, d.axis_px[0], up, 0.0);
  const auto y = intersect_ray_plane(camera.camera, d.axis_px[1], up, 0.0);
  if (!o) errors.push_back({"origin_px", "viewing ray does not meet the ground plane"});
  if (!x) errors.push_back({"axis_px[0]", "viewing ray does not meet the ground plane"});
  if (!y) errors.push_back({"axis_px[1]", "viewing ray does not meet the ground plane"});
  if (!o || !x || !y) return std::nullopt;
  LiftedAnnotation out;
  try {
    out.frame = build_frame(*o, *x - *o, *y - *o, d.handedness, d.unit_length);
  } catch (const Error& e) {
    errors.push_back({e.code() == ErrorCode::NonPositiveUnit ? "unit_length" : "axis_px", e.what()});
    return std::nullopt;
  }
  out.style.ticks_per_direction = d.ticks_per_direction;
  out.style.show_scale = d.show_scale;
  out.style.negative_extent = false;
  out.camera = camera;
  return out;
}

std::optional<std::vector<std::uint8_t>> render_draft_png(const fs::path& png, const AnnotationDraft& d,
                                                          std::vector<FieldError>& errors) {
  PngInfo info;
  if (!probe_png(png, info)) {
    errors.push_back({"image_id", "not a readable PNG"});
    return std::nullopt;
  }
  auto v = validate_draft(d, info.width, info.height);
  errors.insert(errors.end(), v.begin(), v.end());
  if (!errors.empty()) return std::nullopt;
  const auto lifted = lift_draft(d, camera_for_image(png, info.width, info.height, d.camera), errors);
  if (!lifted) return std::nullopt;
  AnnotatedImage a;
  a.image = read_png(png);
  a.camera = lifted->camera.camera;
  a.frame = lifted->frame;
  a.style = lifted->style;
  try {
    return encode_png(render_axes(a));
  } catch (const Error& e) {
    errors.push_back({"origin_px", e.what()});
    return std::nullopt;
  }
}

// --- storage ------------------------------------------------------------------

AnnotationStore::AnnotationStore(fs::path images_dir, fs::path annotations_dir)
    : images_dir_(std::move(images_dir)), annotations_dir_(std::move(annotations_dir)) {}

std::vector<ImageInfo> AnnotationStore::list_images() const {
  std::vector<ImageInfo> out;
  std::error_code ec;
  fs::recursive_directory_iterator it(images_dir_, fs::directory_options::skip_permission_denied, ec), end;
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + images_dir_.string() + ": " + ec.message());
  for (; it != end; it.increment(ec)) {
    if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + images_dir_.string() + ": " + ec.message());
    const fs::path& p = it->path();
    if (it->is_directory(ec) && p.filename().string().starts_with(".")) {
      it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file(ec) || p.extension() != ".png") continue;
    PngInfo info;
    if (!probe_png(p, info)) continue;
    ImageInfo ii;
    ii.id = fs::relative(p, images_dir_).replace_extension().generic_string();
    ii.width = info.width;
    ii.height = info.height;
    ii.has_annotation = latest_version(ii.id) > 0;
    out.push_back(std::move(ii));
  }
  std::sort(out.begin(), out.end(), [](const ImageInfo& a, const ImageInfo& b) { return a.id < b.id; });
  return out;
}

std::optional<fs::path> AnnotationStore::image_path(const std::string& id) const {
  if (id.empty() || id.front() == '/' || id.find('\\') != std::string::npos || id.find('\0') != std::string::npos) {
    return std::nullopt;
  }
  for (const auto& part : fs::path(id)) {
    const std::string s = part.string();
    if (s == ".." || s == "." || s.empty() || s.front() == '.') return std::nullopt;
  }
  const fs::path p = images_dir_ / (id + ".png");
  PngInfo info;
  if (!probe_png(p, info)) return std::nullopt;
  return p;
}

int AnnotationStore::latest_version(const std::string& id) const {
  const fs::path latest = annotations_dir_ / id / "latest";
  std::error_code ec;
  if (!fs::exists(latest, ec)) return 0;
  const std::string name = read_text_file(latest);
  // "annotation.v<N>.json"
  const auto a = name.find(".v");
  const auto b = name.find(".json");
  if (a == std::string::npos || b == std::string::npos || b <= a + 2) {
    throw Error(ErrorCode::SchemaError, "corrupt latest pointer for " + id);
  }
  return std::stoi(name.substr(a + 2, b - a - 2));
}

std::optional<Json> AnnotationStore::load(const std::string& id, int version) const {
  if (version <= 0) version = latest_version(id);
  if (version <= 0) return std::nullopt;
  const fs::path p = annotations_dir_ / id / ("annotation.v" + std::to_string(version) + ".json");
  std::error_code ec;
  if (!fs::exists(p, ec)) return std::nullopt;
  return parse_json(read_text_file(p));
}

std::mutex& AnnotationStore::lock_for(const std::string& id) {
  std::lock_guard<std::mutex> g(table_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

int AnnotationStore::save(const std::string& id, int base_version, Json record) {
  std::shared_lock<std::shared_mutex> open(closing_);
  if (closed_) throw Error(ErrorCode::IoFailure, "annotation store is closed");
  std::lock_guard<std::mutex> g(lock_for(id));
  const int current = latest_version(id);
  if (current != base_version) throw SaveConflict(current, base_version);
  const int version = current + 1;
  const fs::path dir = annotations_dir_ / id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  record["version"] = version;
  const std::string name = "annotation.v" + std::to_string(version) + ".json";
  write_file_atomic(dir / name, dump_json(record));
  write_file_atomic(dir / "latest", name + "\n");
  return version;
}

void AnnotationStore::close() {
  std::unique_lock<std::shared_mutex> lock(closing_);
  closed_ = true;
}

// --- HTTP ---------------------------------------------------------------------

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>axp annotator</title></head>\n"
    "<body><h1>axp annotation service</h1>\n"
    "<p>No UI bundle configured. The API is available under <code>/api/</code>.</p></body></html>\n";

void send_json(httplib::Response& res, int status, const Json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, {{"error", msg}});
}

}  // namespace

struct AnnotationService::Impl {
  httplib::Server server;
};

AnnotationService::AnnotationService(ServiceConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  if (config_.annotations_dir.empty()) config_.annotations_dir = config_.images_dir / ".annotations";
  store_ = std::make_unique<AnnotationStore>(config_.images_dir, config_.annotations_dir);
  auto& srv = impl_->server;
  AnnotationStore& store = *store_;

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"version", AXP_VERSION}, {"validation", draft_validation_spec()}});
  });

  srv.Get("/api/images", [&store](const httplib::Request&, httplib::Response& res) {
    try {
      Json arr = Json::array();
      for (const auto& i : store.list_images()) {
        arr.push_back({{"id", i.id}, {"width", i.width}, {"height", i.height}, {"has_annotation", i.has_annotation}});
      }
      send_json(res, 200, arr);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Get(R"(/api/images/(.+))", [&store](const httplib::Request& req, httplib::Response& res) {
    const auto p = store.image_path(req.matches[1]);
    if (!p) return send_error(res, 404, "no such image");
    try {
      const auto bytes = read_file_bytes(*p);
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Post("/api/preview", [&store](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return send_json(res, 422, field_errors_to_json({{"", "body is not valid JSON"}}));
    std::vector<FieldError> errors;
    const AnnotationDraft d = draft_from_json(body, errors);
    if (!errors.empty()) return send_json(res, 422, field_errors_to_json(errors));
    const auto p = store.image_path(d.image_id);
    if (!p) return send_json(res, 422, field_errors_to_json({{"image_id", "no such image"}}));
    try {
      const auto png = render_draft_png(*p, d, errors);
      if (!png) return send_json(res, 422, field_errors_to_json(errors));
      res.set_content(std::string(png->begin(), png->end()), "image/png");
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Post("/api/annotations", [&store](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return send_json(res, 422, field_errors_to_json({{"", "body is not valid JSON"}}));
    std::vector<FieldError> errors;
    const AnnotationDraft d = draft_from_json(body, errors);
    int base_version = 0;
    if (body.is_object() && body.contains("base_version")) {
      if (body["base_version"].is_number_integer() && body["base_version"].get<int>() >= 0) {
        base_version = body["base_version"].get<int>();
      } else {
        errors.push_back({"base_version", "must be a non-negative integer"});
      }
    }
    if (!errors.empty()) return send_json(res, 422, field_errors_to_json(errors));
    const auto p = store.image_path(d.image_id);
    if (!p) return send_json(res, 422, field_errors_to_json({{"image_id", "no such image"}}));
    try {
      PngInfo info;
      probe_png(*p, info);
      errors = validate_draft(d, info.width, info.height);
      if (!errors.empty()) return send_json(res, 422, field_errors_to_json(errors));
      const auto lifted = lift_draft(d, camera_for_image(*p, info.width, info.height, d.camera), errors);
      if (!lifted) return send_json(res, 422, field_errors_to_json(errors));
      Json record;
      record["image_id"] = d.image_id;
      record["version"] = 0;
      record["camera_source"] = lifted->camera.source;
      record["draft"] = draft_to_json(d);
      record["view"] = view_to_json({p->filename().string(), lifted->camera.camera, lifted->frame, lifted->style});
      const int version = store.save(d.image_id, base_version, std::move(record));
      send_json(res, 200, {{"id", d.image_id}, {"version", version}});
    } catch (const SaveConflict& c) {
      send_json(res, 409, {{"error", c.what()}, {"current_version", c.current_version}});
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Get(R"(/api/annotations/(.+))", [&store](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!store.image_path(id)) return send_error(res, 404, "no such image");
    try {
      int version = 0;
      if (req.has_param("version")) version = std::stoi(req.get_param_value("version"));
      const auto rec = store.load(id, version);
      if (!rec) return send_error(res, 404, "no annotation");
      send_json(res, 200, *rec);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  if (!config_.ui_dir.empty()) {
    srv.set_mount_point("/", config_.ui_dir.string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
    });
  }
}

AnnotationService::~AnnotationService() { stop(); }

bool AnnotationService::bind() {
  auto& srv = impl_->server;
  if (config_.port == 0) {
    port_ = srv.bind_to_any_port(config_.host);
    return port_ > 0;
  }
  if (!srv.bind_to_port(config_.host, config_.port)) return false;
  port_ = config_.port;
  return true;
}

void AnnotationService::serve() { impl_->server.listen_after_bind(); }

void AnnotationService::stop() {
  if (impl_) impl_->server.stop();
  if (store_) store_->close();
}

}  // namespace axp

#include "axp/schema.hpp"

namespace axp {

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::SchemaError, std::string("missing field '") + key + "'");
  return j.at(key);
}

double number(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number()) throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

int integer(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer()) throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

bool boolean(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_boolean()) throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string string_field(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_string()) throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

Json rgb_to_json(const Rgb& c) { return Json::array({c.r, c.g, c.b}); }

Rgb rgb_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::SchemaError, "color must be [r, g, b]");
  Rgb c;
  std::uint8_t* ch[3] = {&c.r, &c.g, &c.b};
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<int>() < 0 || j[i].get<int>() > 255) {
      throw Error(ErrorCode::SchemaError, "color channel must be an integer in [0, 255]");
    }
    *ch[i] = static_cast<std::uint8_t>(j[i].get<int>());
  }
  return c;
}

}  // namespace

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
    throw Error(ErrorCode::SchemaError, "expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json pixel_to_json(const Pixel& p) { return Json::array({p.u, p.v}); }

Pixel pixel_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::SchemaError, "expected [u, v]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Json camera_to_json(const CameraModel& c) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) rot.push_back(c.rotation(r, k));
  }
  Json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["rotation"] = rot;
  j["translation"] = vec3_to_json(c.translation);
  j["width"] = c.image_width;
  j["height"] = c.image_height;
  return j;
}

CameraModel camera_from_json(const Json& j) {
  CameraModel c;
  c.fx = number(j, "fx");
  c.fy = number(j, "fy");
  c.cx = number(j, "cx");
  c.cy = number(j, "cy");
  const Json& rot = field(j, "rotation");
  if (!rot.is_array() || rot.size() != 9) throw Error(ErrorCode::SchemaError, "rotation must have 9 entries");
  for (int i = 0; i < 9; ++i) {
    if (!rot[i].is_number()) throw Error(ErrorCode::SchemaError, "rotation entries must be numbers");
    c.rotation(i / 3, i % 3) = rot[i].get<double>();
  }
  c.translation = vec3_from_json(field(j, "translation"));
  c.image_width = integer(j, "width");
  c.image_height = integer(j, "height");
  validate_camera(c);
  return c;
}

Json frame_to_json(const CoordinateFrame& f) {
  Json j;
  j["origin"] = vec3_to_json(f.origin_world);
  j["axis_x"] = vec3_to_json(f.axis_x);
  j["axis_y"] = vec3_to_json(f.axis_y);
  j["axis_z"] = vec3_to_json(f.axis_z);
  j["handedness"] = std::string(to_string(f.handedness));
  j["unit_length"] = f.unit_length;
  return j;
}

CoordinateFrame frame_from_json(const Json& j) {
  CoordinateFrame f;
  f.origin_world = vec3_from_json(field(j, "origin"));
  f.axis_x = vec3_from_json(field(j, "axis_x"));
  f.axis_y = vec3_from_json(field(j, "axis_y"));
  f.axis_z = vec3_from_json(field(j, "axis_z"));
  f.handedness = handedness_from_string(string_field(j, "handedness"));
  f.unit_length = number(j, "unit_length");
  validate_frame(f);
  return f;
}

Json style_to_json(const OverlayStyle& s) {
  Json j;
  j["ticks_per_direction"] = s.ticks_per_direction;
  j["show_scale"] = s.show_scale;
  j["axis_colors"] = Json::array({rgb_to_json(s.axis_colors[0]), rgb_to_json(s.axis_colors[1]), rgb_to_json(s.axis_colors[2])});
  j["line_width"] = s.line_width;
  j["tick_length"] = s.tick_length;
  j["label_height"] = s.label_height;
  j["negative_extent"] = s.negative_extent;
  return j;
}

OverlayStyle style_from_json(const Json& j) {
  OverlayStyle s;
  s.ticks_per_direction = integer(j, "ticks_per_direction");
  s.show_scale = boolean(j, "show_scale");
  const Json& colors = field(j, "axis_colors");
  if (!colors.is_array() || colors.size() != 3) throw Error(ErrorCode::SchemaError, "axis_colors must have 3 entries");
  for (int i = 0; i < 3; ++i) s.axis_colors[i] = rgb_from_json(colors[i]);
  s.line_width = integer(j, "line_width");
  s.tick_length = integer(j, "tick_length");
  s.label_height = integer(j, "label_height");
  s.negative_extent = boolean(j, "negative_extent");
  try {
    validate_style(s);
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
  return s;
}

Json box_to_json(const Box3D& b) {
  Json j;
  j["min_corner"] = vec3_to_json(b.min_corner);
  j["max_corner"] = vec3_to_json(b.max_corner);
  return j;
}

Box3D box_from_json(const Json& j) {
  Box3D b{vec3_from_json(field(j, "min_corner")), vec3_from_json(field(j, "max_corner"))};
  validate_box(b);
  return b;
}

Json view_to_json(const ViewRecord& v) {
  Json j;
  j["image"] = v.image;
  j["camera"] = camera_to_json(v.camera);
  j["frame"] = frame_to_json(v.frame);
  j["style"] = style_to_json(v.style);
  return j;
}

ViewRecord view_from_json(const Json& j) {
  return {string_field(j, "image"), camera_from_json(field(j, "camera")), frame_from_json(field(j, "frame")),
          style_from_json(field(j, "style"))};
}

Json keypoints_to_json(const std::vector<Keypoint>& kps) {
  Json arr = Json::array();
  for (const auto& k : kps) {
    Json e;
    e["label"] = k.label;
    e["position"] = vec3_to_json(k.position_frame);
    arr.push_back(e);
  }
  return arr;
}

std::vector<Keypoint> keypoints_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::SchemaError, "keypoints must be an array");
  std::vector<Keypoint> out;
  for (const auto& e : j) {
    Keypoint k{string_field(e, "label"), vec3_from_json(field(e, "position"))};
    if (k.label.empty()) throw Error(ErrorCode::SchemaError, "keypoint label must be non-empty");
    out.push_back(std::move(k));
  }
  return out;
}

Json entry_to_json(const DatasetEntry& e) {
  const SceneObject& o = e.object;
  Json j;
  j["id"] = e.id;
  j["category"] = std::string(to_string(o.category));
  j["rng_seed"] = e.rng_seed;
  Json dims;
  for (const auto& [k, v] : o.dims) dims[k] = v;
  j["dims"] = dims;
  Json parts = Json::array();
  for (const auto& p : o.parts) parts.push_back(box_to_json(p));
  j["parts"] = parts;
  j["gt_keypoints"] = keypoints_to_json(o.gt_keypoints);
  j["gt_box"] = box_to_json(o.gt_box);
  j["color"] = rgb_to_json(o.color);
  Json views = Json::array();
  for (const auto& v : e.views) views.push_back(view_to_json(v));
  j["views"] = views;
  return j;
}

DatasetEntry entry_from_json(const Json& j) {
  DatasetEntry e;
  e.id = string_field(j, "id");
  const Json& seed = field(j, "rng_seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw Error(ErrorCode::SchemaError, "rng_seed must be an integer");
  e.rng_seed = seed.get<std::uint64_t>();
  SceneObject& o = e.object;
  o.category = category_from_string(string_field(j, "category"));
  o.seed = e.rng_seed;
  const Json& dims = field(j, "dims");
  if (!dims.is_object()) throw Error(ErrorCode::SchemaError, "dims must be an object");
  for (const auto& [k, v] : dims.items()) {
    if (!v.is_number()) throw Error(ErrorCode::SchemaError, "dimension values must be numbers");
    o.dims.emplace_back(k, v.get<double>());
  }
  const Json& parts = field(j, "parts");
  if (!parts.is_array()) throw Error(ErrorCode::SchemaError, "parts must be an array");
  for (const auto& p : parts) o.parts.push_back(box_from_json(p));
  o.gt_keypoints = keypoints_from_json(field(j, "gt_keypoints"));
  o.gt_box = box_from_json(field(j, "gt_box"));
  o.color = rgb_from_json(field(j, "color"));
  const Json& views = field(j, "views");
  if (!views.is_array()) throw Error(ErrorCode::SchemaError, "views must be an array");
  for (const auto& v : views) e.views.push_back(view_from_json(v));
  if (e.views.size() < 2) throw Error(ErrorCode::SchemaError, "an entry needs at least 2 views");
  return e;
}

Json manifest_to_json(const Manifest& m) {
  Json j;
  j["format"] = "axp-dataset";
  j["version"] = 1;
  Json cfg;
  cfg["per_category"] = m.config.per_category;
  cfg["views_per_entry"] = m.config.views_per_entry;
  cfg["seed"] = m.config.seed;
  cfg["width"] = m.config.rig.width;
  cfg["height"] = m.config.rig.height;
  cfg["horizontal_fov_deg"] = m.config.rig.horizontal_fov_deg;
  cfg["radius_factor"] = m.config.rig.radius_factor;
  j["config"] = cfg;
  Json entries = Json::array();
  for (const auto& e : m.entries) {
    Json je;
    je["id"] = e.id;
    je["category"] = std::string(to_string(e.category));
    je["annotation"] = e.annotation;
    je["views"] = e.views;
    entries.push_back(je);
  }
  j["entries"] = entries;
  return j;
}

Manifest manifest_from_json(const Json& j) {
  if (string_field(j, "format") != "axp-dataset") throw Error(ErrorCode::SchemaError, "not an axp dataset manifest");
  Manifest m;
  const Json& cfg = field(j, "config");
  m.config.per_category = integer(cfg, "per_category");
  m.config.views_per_entry = integer(cfg, "views_per_entry");
  m.config.seed = field(cfg, "seed").get<std::uint64_t>();
  m.config.rig.width = integer(cfg, "width");
  m.config.rig.height = integer(cfg, "height");
  m.config.rig.horizontal_fov_deg = number(cfg, "horizontal_fov_deg");
  m.config.rig.radius_factor = number(cfg, "radius_factor");
  for (const auto& je : field(j, "entries")) {
    m.entries.push_back({string_field(je, "id"), category_from_string(string_field(je, "category")),
                         string_field(je, "annotation"), integer(je, "views")});
  }
  return m;
}

}  // namespace axp

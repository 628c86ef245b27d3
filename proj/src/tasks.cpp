#include "axp/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <sstream>

#include "axp/default_templates.hpp"

namespace axp {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Reconstruction: return "reconstruction";
    case TaskKind::Matching: return "matching";
    case TaskKind::Detection: return "detection";
  }
  return "reconstruction";
}

TaskKind task_kind_from_string(std::string_view s) {
  for (TaskKind k : kAllTaskKinds) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidTask, "unknown task kind '" + std::string(s) + "'");
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Baseline: return "baseline";
    case Condition::Full: return "3dap";
    case Condition::NoScale: return "3dap-scale";
  }
  return "3dap";
}

Condition condition_from_string(std::string_view s) {
  for (Condition c : kAllConditions) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown condition '" + std::string(s) + "'");
}

std::string condition_label(std::string_view backend, Condition c) {
  std::string out(backend);
  if (c == Condition::Full) out += "+3DAP";
  if (c == Condition::NoScale) out += "+3DAP-scale";
  return out;
}

const PromptTemplate& TemplateSet::get(TaskKind k) const {
  const auto it = templates.find(k);
  if (it == templates.end()) {
    throw Error(ErrorCode::TemplateSyntax, "no template for " + std::string(to_string(k)));
  }
  return it->second;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

TemplateSet parse_templates(std::string_view text) {
  TemplateSet set;
  bool have_version = false;
  std::size_t pos = 0;
  int line_no = 0;
  std::optional<TaskKind> open;
  std::string body;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::TemplateSyntax, "line " + std::to_string(line_no) + ": " + msg);
  };
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string_view t = trim(line);

    if (open) {
      if (t == "[/template]") {
        // Drop the newline that precedes the closing tag.
        if (!body.empty() && body.back() == '\n') body.pop_back();
        set.templates[*open] = {*open, body};
        open.reset();
        body.clear();
      } else {
        body.append(line);
        body.push_back('\n');
      }
      continue;
    }
    if (t.empty() || t.front() == '#') continue;
    if (t.starts_with("[version ") && t.ends_with("]")) {
      const std::string_view num = t.substr(9, t.size() - 10);
      int v = 0;
      const auto r = std::from_chars(num.data(), num.data() + num.size(), v);
      if (r.ec != std::errc() || r.ptr != num.data() + num.size() || v < 1) fail("bad version");
      set.version = v;
      have_version = true;
    } else if (t.starts_with("[template ") && t.ends_with("]")) {
      const std::string_view kind = trim(t.substr(10, t.size() - 11));
      try {
        open = task_kind_from_string(kind);
      } catch (const Error&) {
        fail("unknown template kind '" + std::string(kind) + "'");
      }
      if (set.templates.count(*open)) fail("duplicate template '" + std::string(kind) + "'");
    } else {
      fail("text outside a template section");
    }
  }
  if (open) fail("unterminated template section");
  if (!have_version) fail("missing [version N] line");
  return set;
}

TemplateSet load_templates(const std::filesystem::path& path) { return parse_templates(read_text_file(path)); }

const TemplateSet& default_templates() {
  static const TemplateSet set = parse_templates(detail::kDefaultTemplateText);
  return set;
}

std::string compose_prompt(const PromptTemplate& tpl, const std::map<std::string, std::string>& bindings) {
  const std::string& t = tpl.text;
  std::string out;
  out.reserve(t.size() + 256);
  for (std::size_t i = 0; i < t.size();) {
    const char c = t[i];
    if (c == '{' && i + 1 < t.size() && t[i + 1] == '{') {
      out.push_back('{');
      i += 2;
    } else if (c == '}' && i + 1 < t.size() && t[i + 1] == '}') {
      out.push_back('}');
      i += 2;
    } else if (c == '{') {
      const std::size_t close = t.find('}', i + 1);
      if (close == std::string::npos) throw Error(ErrorCode::TemplateSyntax, "unterminated placeholder");
      const std::string name = t.substr(i + 1, close - i - 1);
      const bool ok_name = !name.empty() && std::all_of(name.begin(), name.end(), [](char ch) {
        return (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_';
      });
      if (!ok_name) throw Error(ErrorCode::TemplateSyntax, "bad placeholder '{" + name + "}'");
      const auto it = bindings.find(name);
      if (it == bindings.end()) throw Error(ErrorCode::UnboundPlaceholder, name);
      out += it->second;
      i = close + 1;
    } else if (c == '}') {
      throw Error(ErrorCode::TemplateSyntax, "stray '}'");
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_tuple(const Vec3& v) {
  return "(" + format_number(v.x()) + ", " + format_number(v.y()) + ", " + format_number(v.z()) + ")";
}

std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Image> render_entry_views(const DatasetEntry& entry) {
  std::vector<Image> out;
  for (const auto& v : entry.views) {
    out.push_back(render_view(entry.object, v.camera, v.frame, v.camera.image_width, v.camera.image_height));
  }
  return out;
}

namespace {

const TemplateSet& templates_of(const TaskOptions& o) { return o.templates ? *o.templates : default_templates(); }

void check_view(const DatasetEntry& entry, const std::vector<Image>& views, int view) {
  if (view < 0 || view >= static_cast<int>(entry.views.size())) {
    throw Error(ErrorCode::ViewIndexOutOfRange,
                "view " + std::to_string(view) + " of " + entry.id + " (" + std::to_string(entry.views.size()) + " views)");
  }
  if (views.size() != entry.views.size()) {
    throw Error(ErrorCode::InvalidTask, "expected " + std::to_string(entry.views.size()) + " view images for " + entry.id);
  }
}

const Keypoint& find_keypoint(const DatasetEntry& entry, const std::string& label) {
  for (const auto& k : entry.object.gt_keypoints) {
    if (k.label == label) return k;
  }
  throw Error(ErrorCode::UnknownLabel, "'" + label + "' in " + entry.id);
}

AnnotatedImage annotated(const DatasetEntry& entry, const std::vector<Image>& views, int view, Condition condition) {
  const ViewRecord& v = entry.views[view];
  AnnotatedImage a;
  a.image = views[view];
  a.camera = v.camera;
  a.frame = v.frame;
  a.style = v.style;
  a.show_axes = condition != Condition::Baseline;
  if (condition == Condition::NoScale) a.style.show_scale = false;
  return a;
}

std::string axis_description(const CoordinateFrame& frame, const std::string& origin_label) {
  std::string s = "Positions use a " + std::string(to_string(frame.handedness)) + "-handed 3D Cartesian coordinate system";
  if (!origin_label.empty()) s += " whose origin is point " + origin_label;
  s += ". The X axis runs along the object's width (left to right), the Y axis along its depth (back to front)";
  s += frame.handedness == Handedness::Right ? ", and the Z axis points upward." : ", and the Z axis points downward.";
  return s;
}

/// Label of the keypoint sitting at the frame origin, if any.
std::string origin_keypoint(const DatasetEntry& entry) {
  for (const auto& k : entry.object.gt_keypoints) {
    if (k.position_frame.isZero(0.0)) return k.label;
  }
  return {};
}

std::map<std::string, std::string> common_bindings(const DatasetEntry& entry, const CoordinateFrame& frame,
                                                   bool origin_hint) {
  return {{"category", std::string(to_string(entry.object.category))},
          {"unit", format_number(frame.unit_length)},
          {"axis_description", axis_description(frame, origin_hint ? origin_keypoint(entry) : std::string())}};
}

TaskInstance base_instance(const DatasetEntry& entry, TaskKind kind, const TaskOptions& o, const std::string& suffix) {
  TaskInstance inst;
  inst.id = entry.id + "_" + std::string(to_string(kind)) + "_" + suffix + "_" + std::string(to_string(o.condition));
  inst.kind = kind;
  inst.condition = o.condition;
  inst.entry_id = entry.id;
  inst.category = entry.object.category;
  inst.template_version = templates_of(o).version;
  inst.tolerance = o.tolerance;
  inst.object_diag = entry.object.gt_box.diagonal();
  return inst;
}

/// Seeded Fisher-Yates with a portable index draw.
template <typename T>
void shuffle(std::vector<T>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const auto j = static_cast<std::size_t>(u * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace

TaskInstance make_reconstruction_instance(const DatasetEntry& entry, const std::vector<Image>& views, int view,
                                          const std::set<std::string>& known, const std::set<std::string>& queried,
                                          const TaskOptions& options) {
  check_view(entry, views, view);
  if (known.empty()) throw Error(ErrorCode::EmptyKnownSet, entry.id);
  if (queried.empty()) throw Error(ErrorCode::InvalidTask, "no queried labels for " + entry.id);
  for (const auto& q : queried) {
    if (known.count(q)) throw Error(ErrorCode::InvalidTask, "label " + q + " is both known and queried");
  }
  TaskInstance inst = base_instance(entry, TaskKind::Reconstruction, options, "v" + std::to_string(view));
  AnnotatedImage img = annotated(entry, views, view, options.condition);

  std::string known_lines;
  for (const auto& k : entry.object.gt_keypoints) {
    if (known.count(k.label)) {
      img.keypoints.push_back(k);
      known_lines += k.label + ": " + format_tuple(k.position_frame) + "\n";
    } else if (queried.count(k.label)) {
      img.keypoints.push_back(k);
      inst.gt_points[k.label] = k.position_frame;
    }
  }
  for (const auto& l : known) find_keypoint(entry, l);
  for (const auto& l : queried) find_keypoint(entry, l);
  if (!known_lines.empty()) known_lines.pop_back();

  std::string query_labels;
  for (const auto& [label, p] : inst.gt_points) query_labels += (query_labels.empty() ? "" : ", ") + label;

  auto b = common_bindings(entry, img.frame, true);
  b["known_points"] = known_lines;
  b["query_labels"] = query_labels;
  inst.prompt = compose_prompt(templates_of(options).get(TaskKind::Reconstruction), b);
  inst.images.push_back(std::move(img));
  return inst;
}

TaskInstance make_matching_instance(const DatasetEntry& entry, const std::vector<Image>& views, int ref_view,
                                    const std::vector<int>& target_views, const std::string& label,
                                    const TaskOptions& options) {
  check_view(entry, views, ref_view);
  if (target_views.empty()) throw Error(ErrorCode::InvalidTask, "no target views");
  std::set<int> seen;
  for (int t : target_views) {
    check_view(entry, views, t);
    if (t == ref_view) throw Error(ErrorCode::InvalidTask, "reference view is also a target view");
    if (!seen.insert(t).second) throw Error(ErrorCode::InvalidTask, "duplicate target view");
  }
  const Keypoint& ref = find_keypoint(entry, label);
  TaskInstance inst = base_instance(entry, TaskKind::Matching, options, label + "_r" + std::to_string(ref_view));

  AnnotatedImage ref_img = annotated(entry, views, ref_view, options.condition);
  ref_img.keypoints.push_back(ref);
  inst.images.push_back(std::move(ref_img));

  const double min_sep = 2.0 * options.tolerance.pixel_tol;
  int next_label = 1;
  std::string lists;
  for (int t : target_views) {
    const ViewRecord& v = entry.views[t];
    AnnotatedImage img = annotated(entry, views, t, Condition::Baseline);
    const int image_index = static_cast<int>(inst.images.size());
    const std::uint64_t seed = entry.rng_seed ^ stable_hash(label + "/" + std::to_string(t));

    auto pixel_of = [&](const Keypoint& k) { return project(v.camera, frame_to_world(v.frame, k.position_frame)); };
    const Pixel truth = pixel_of(ref);
    std::vector<const Keypoint*> pool;
    for (const auto& k : entry.object.gt_keypoints) {
      if (k.label != label) pool.push_back(&k);
    }
    shuffle(pool, seed);
    std::vector<std::pair<const Keypoint*, Pixel>> chosen{{&ref, truth}};
    for (const Keypoint* k : pool) {
      if (chosen.size() == 4) break;
      const Pixel p = pixel_of(*k);
      const bool far = std::all_of(chosen.begin(), chosen.end(), [&](const auto& c) {
        return std::hypot(c.second.u - p.u, c.second.v - p.v) >= min_sep;
      });
      if (far) chosen.emplace_back(k, p);
    }
    shuffle(chosen, seed + 1);

    std::vector<MatchCandidate> cands;
    std::string line = "View " + std::to_string(image_index + 1) + ":";
    for (const auto& [k, p] : chosen) {
      MatchCandidate c{"P" + std::to_string(next_label++), k->label, p};
      img.keypoints.push_back({c.label, k->position_frame});
      line += (cands.empty() ? " " : ", ") + c.label;
      if (k == &ref) inst.gt_matches.push_back({image_index, c.label, p});
      cands.push_back(std::move(c));
    }
    lists += line + "\n";
    inst.candidates[image_index] = std::move(cands);
    inst.images.push_back(std::move(img));
  }
  if (!lists.empty()) lists.pop_back();

  auto b = common_bindings(entry, inst.images.front().frame, true);
  b["ref_label"] = label;
  b["ref_coordinates"] = format_tuple(ref.position_frame);
  b["candidate_lists"] = lists;
  inst.prompt = compose_prompt(templates_of(options).get(TaskKind::Matching), b);
  return inst;
}

TaskInstance make_detection_instance(const DatasetEntry& entry, const std::vector<Image>& views, int view,
                                     bool reference_dims_in_prompt, const TaskOptions& options) {
  check_view(entry, views, view);
  TaskInstance inst = base_instance(entry, TaskKind::Detection, options, "v" + std::to_string(view));
  AnnotatedImage img = annotated(entry, views, view, options.condition);
  inst.gt_box = entry.object.gt_box;

  auto b = common_bindings(entry, img.frame, false);
  std::string dims;
  if (reference_dims_in_prompt) {
    dims = "Reference dimensions of the object:";
    for (const auto& [name, value] : entry.object.dims) dims += " " + name + " " + format_number(value) + " cm;";
    dims.back() = '.';
  }
  b["object_dims"] = dims;
  inst.prompt = compose_prompt(templates_of(options).get(TaskKind::Detection), b);
  inst.images.push_back(std::move(img));
  return inst;
}

std::vector<Image> prompt_images(const TaskInstance& inst) {
  std::vector<Image> out;
  out.reserve(inst.images.size());
  for (const auto& a : inst.images) out.push_back(render_prompt_image(a));
  return out;
}

std::string format_ground_truth_answer(const TaskInstance& inst) {
  std::string out;
  switch (inst.kind) {
    case TaskKind::Reconstruction:
      for (const auto& [label, p] : inst.gt_points) out += label + ": " + format_tuple(p) + "\n";
      break;
    case TaskKind::Matching:
      for (const auto& m : inst.gt_matches) out += "View " + std::to_string(m.view + 1) + ": " + m.label + "\n";
      break;
    case TaskKind::Detection:
      for (int i = 0; i < 3; ++i) {
        out += std::string(1, axis_name(static_cast<Axis>(i))) + ": [" + format_number(inst.gt_box.min_corner[i]) +
               ", " + format_number(inst.gt_box.max_corner[i]) + "]\n";
      }
      break;
  }
  return out;
}

ParsedAnswer parse_answer(const TaskInstance& inst, std::string_view reply) {
  ParsedAnswer a;
  switch (inst.kind) {
    case TaskKind::Reconstruction:
      a.points = parse_points(reply);
      a.unparsed = a.points.empty();
      if (a.unparsed) a.diagnostic = "no labelled coordinate tuple found";
      break;
    case TaskKind::Matching:
      for (const auto& [index, cands] : inst.candidates) {
        std::vector<std::string> labels;
        for (const auto& c : cands) labels.push_back(c.label);
        if (auto choice = parse_choice(reply, labels)) a.choices[index] = *choice;
      }
      a.pixels = parse_view_pixels(reply);
      a.unparsed = a.choices.empty() && a.pixels.empty();
      if (a.unparsed) a.diagnostic = "no candidate choice or view pixel found";
      break;
    case TaskKind::Detection:
      a.ranges = parse_ranges(reply);
      a.unparsed = a.ranges.empty();
      if (a.unparsed) a.diagnostic = "no axis range found";
      break;
  }
  return a;
}

InstanceScore score_instance(const TaskInstance& inst, const ParsedAnswer& answer) {
  InstanceScore s;
  switch (inst.kind) {
    case TaskKind::Reconstruction:
      s = score_reconstruction(inst.id, answer.points, inst.gt_points, inst.object_diag, inst.tolerance);
      break;
    case TaskKind::Matching:
      s = score_matching(inst.id, answer.choices, answer.pixels, inst.gt_matches, inst.tolerance);
      break;
    case TaskKind::Detection:
      s = score_detection(inst.id, answer.ranges, inst.gt_box, inst.tolerance);
      break;
  }
  if (answer.unparsed) {
    s.parse_failed = true;
    s.accuracy = 0.0;
    if (s.diagnostic.empty()) s.diagnostic = answer.diagnostic;
  }
  return s;
}

Json instance_to_json(const TaskInstance& inst, const std::vector<std::string>& image_paths) {
  Json j;
  j["id"] = inst.id;
  j["kind"] = to_string(inst.kind);
  j["condition"] = to_string(inst.condition);
  j["entry_id"] = inst.entry_id;
  j["category"] = to_string(inst.category);
  j["template_version"] = inst.template_version;
  j["tolerance"] = {{"point_rel_tol", inst.tolerance.point_rel_tol},
                    {"pixel_tol", inst.tolerance.pixel_tol},
                    {"iou_threshold", inst.tolerance.iou_threshold}};
  j["object_diag"] = inst.object_diag;
  j["prompt"] = inst.prompt;
  Json images = Json::array();
  for (std::size_t i = 0; i < inst.images.size(); ++i) {
    const auto& a = inst.images[i];
    Json im;
    im["path"] = i < image_paths.size() ? image_paths[i] : std::string();
    im["show_axes"] = a.show_axes;
    im["camera"] = camera_to_json(a.camera);
    im["frame"] = frame_to_json(a.frame);
    im["style"] = style_to_json(a.style);
    im["keypoints"] = keypoints_to_json(a.keypoints);
    images.push_back(std::move(im));
  }
  j["images"] = std::move(images);
  Json gt;
  switch (inst.kind) {
    case TaskKind::Reconstruction:
      for (const auto& [label, p] : inst.gt_points) gt[label] = vec3_to_json(p);
      break;
    case TaskKind::Matching: {
      gt = Json::array();
      for (const auto& m : inst.gt_matches) {
        gt.push_back({{"view", m.view}, {"label", m.label}, {"pixel", pixel_to_json(m.pixel)}});
      }
      Json cands = Json::object();
      for (const auto& [index, list] : inst.candidates) {
        Json arr = Json::array();
        for (const auto& c : list) {
          arr.push_back({{"label", c.label}, {"keypoint", c.keypoint}, {"pixel", pixel_to_json(c.pixel)}});
        }
        cands[std::to_string(index)] = std::move(arr);
      }
      j["candidates"] = std::move(cands);
      break;
    }
    case TaskKind::Detection:
      gt = box_to_json(inst.gt_box);
      break;
  }
  j["ground_truth"] = std::move(gt);
  return j;
}

}  // namespace axp

#include "axp/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "axp/glyphs.hpp"

namespace axp {

char axis_name(Axis a) { return "XYZ"[static_cast<int>(a)]; }

void validate_style(const OverlayStyle& s) {
  if (s.ticks_per_direction < 0) throw Error(ErrorCode::InvalidStyle, "ticks_per_direction must be >= 0");
  if (s.line_width < 1) throw Error(ErrorCode::InvalidStyle, "line_width must be >= 1");
  if (s.tick_length < 2) throw Error(ErrorCode::InvalidStyle, "tick_length must be >= 2");
  if (s.label_height < 6) throw Error(ErrorCode::InvalidStyle, "label_height must be >= 6");
  const auto& c = s.axis_colors;
  if (c[0] == c[1] || c[0] == c[2] || c[1] == c[2]) {
    throw Error(ErrorCode::InvalidStyle, "axis colors must be pairwise distinct");
  }
}

std::vector<TickPoint> tick_points(const CoordinateFrame& frame, const OverlayStyle& style) {
  std::vector<TickPoint> out;
  const int n = style.ticks_per_direction;
  for (int a = 0; a < 3; ++a) {
    const Vec3& dir = frame.axis(a);
    for (int k = style.negative_extent ? -n : 1; k <= n; ++k) {
      if (k == 0) continue;
      out.push_back({static_cast<Axis>(a), k, Vec3(frame.origin_world + (k * frame.unit_length) * dir)});
    }
  }
  return out;
}

std::string format_tick_value(int k, double unit_length) {
  const double v = k * unit_length;
  char buf[64];
  if (unit_length == std::floor(unit_length)) {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(v)));
  } else {
    std::snprintf(buf, sizeof buf, "%.1f", v);
  }
  return buf;
}

namespace {

constexpr double kCoordLimit = 1e6;

int to_int(double x) { return static_cast<int>(std::lround(std::clamp(x, -kCoordLimit, kCoordLimit))); }

Pixel add(const Pixel& p, double du, double dv) { return {p.u + du, p.v + dv}; }

// Top-left corner placing a text box of `ext` centered at `c`.
void center_text(const Pixel& c, const TextExtent& ext, int& x, int& y) {
  x = to_int(c.u - ext.width / 2.0);
  y = to_int(c.v - ext.height / 2.0);
}

}  // namespace

AxesLayout layout_axes(const AnnotatedImage& base) {
  validate_style(base.style);
  const auto& cam = base.camera;
  const auto& frame = base.frame;
  const auto& style = base.style;

  AxesLayout layout;
  const auto origin = try_project(cam, frame.origin_world);
  if (!origin) throw Error(ErrorCode::FrameNotVisible, "frame origin projects behind the camera");
  layout.origin = *origin;
  layout.text_scale = glyph_scale(style.label_height);
  layout.name_scale = layout.text_scale + 1;

  const int n = style.ticks_per_direction;
  const double half_tick = style.tick_length / 2.0;
  const TextExtent name_ext = measure_text("X", layout.name_scale);

  for (int a = 0; a < 3; ++a) {
    const Vec3& dir = frame.axis(a);
    auto point_at = [&](int k) { return Vec3(frame.origin_world + (k * frame.unit_length) * dir); };

    // Depth is affine in k, so the visible ticks form one run around 0.
    int pos_k = 0;
    for (int k = 1; k <= std::max(n, 1); ++k) {
      if (!try_project(cam, point_at(k))) break;
      pos_k = k;
    }
    if (pos_k == 0) continue;
    int neg_k = 0;
    if (style.negative_extent) {
      for (int k = -1; k >= -n; --k) {
        if (!try_project(cam, point_at(k))) break;
        neg_k = k;
      }
    }

    AxisLayout& axis = layout.axes[a];
    axis.visible = true;
    axis.end = project(cam, point_at(pos_k));
    axis.start = neg_k == 0 ? layout.origin : project(cam, point_at(neg_k));

    double du = axis.end.u - layout.origin.u;
    double dv = axis.end.v - layout.origin.v;
    const double len = std::hypot(du, dv);
    if (len > 1e-9) {
      du /= len;
      dv /= len;
    } else {
      du = 1.0;
      dv = 0.0;
    }
    // Labels sit on the right-hand / lower side of the axis.
    double pu = -dv;
    double pv = du;
    if (pu < 0.0 || (pu == 0.0 && pv < 0.0)) {
      pu = -pu;
      pv = -pv;
    }

    const double name_gap = half_tick + 4.0 + std::max(name_ext.width, name_ext.height) / 2.0;
    center_text(add(axis.end, du * name_gap, dv * name_gap), name_ext, axis.name_x, axis.name_y);

    for (int k = neg_k; k <= std::min(pos_k, n); ++k) {
      if (k == 0) continue;
      TickLayout t;
      t.axis = static_cast<Axis>(a);
      t.k = k;
      t.world = point_at(k);
      t.center = project(cam, t.world);
      t.stroke_a = add(t.center, -pu * half_tick, -pv * half_tick);
      t.stroke_b = add(t.center, pu * half_tick, pv * half_tick);
      t.text = format_tick_value(k, frame.unit_length);
      const TextExtent ext = measure_text(t.text, layout.text_scale);
      const double half_along = 0.5 * (ext.width * std::abs(pu) + ext.height * std::abs(pv));
      const double gap = half_tick + 2.0 + half_along;
      center_text(add(t.center, pu * gap, pv * gap), ext, t.text_x, t.text_y);
      layout.ticks.push_back(std::move(t));
    }
  }
  return layout;
}

Image render_axes(const AnnotatedImage& base) {
  const AxesLayout layout = layout_axes(base);
  const auto& style = base.style;
  Image out = base.image;
  const double radius = style.line_width / 2.0;

  if (style.show_scale) {
    for (const auto& t : layout.ticks) {
      draw_text(out, t.text_x, t.text_y, t.text, layout.text_scale, style.axis_colors[static_cast<int>(t.axis)]);
    }
    for (const auto& t : layout.ticks) {
      fill_capsule(out, t.stroke_a, t.stroke_b, radius, style.axis_colors[static_cast<int>(t.axis)]);
    }
  }
  for (int a = 0; a < 3; ++a) {
    const auto& axis = layout.axes[a];
    if (!axis.visible) continue;
    fill_capsule(out, axis.start, axis.end, radius, style.axis_colors[a]);
  }
  for (int a = 0; a < 3; ++a) {
    const auto& axis = layout.axes[a];
    if (!axis.visible) continue;
    const char name[2] = {axis_name(static_cast<Axis>(a)), '\0'};
    draw_text(out, axis.name_x, axis.name_y, name, layout.name_scale, style.axis_colors[a]);
  }
  return out;
}

std::vector<KeypointLayout> layout_keypoints(const AnnotatedImage& base) {
  validate_style(base.style);
  std::vector<KeypointLayout> out;
  std::set<std::string> seen;
  const int scale = glyph_scale(base.style.label_height);
  const double radius = std::max(3.0, base.style.line_width + 2.0);
  struct Box {
    int x0, y0, x1, y1;
  };
  std::vector<Box> placed;
  for (const auto& kp : base.keypoints) {
    if (kp.label.empty()) throw Error(ErrorCode::UnknownLabel, "keypoint label must be non-empty");
    if (!seen.insert(kp.label).second) throw Error(ErrorCode::UnknownLabel, "duplicate keypoint label " + kp.label);
    const auto px = try_project(base.camera, frame_to_world(base.frame, kp.position_frame));
    if (!px) throw Error(ErrorCode::KeypointBehindCamera, kp.label);

    KeypointLayout k;
    k.label = kp.label;
    k.center = *px;
    k.radius = radius;
    k.text_scale = scale;
    const TextExtent ext = measure_text(kp.label, scale);
    k.text_x = to_int(px->u + radius + 3.0);
    k.text_y = to_int(px->v - ext.height / 2.0);
    if (px->v < base.style.label_height) k.text_y = to_int(px->v) + base.style.label_height;
    // Coincident or overlapping labels stack downward in keypoint order.
    auto overlaps = [&](const Box& b) {
      return !(k.text_x + ext.width + 1 < b.x0 || b.x1 < k.text_x - 1 || k.text_y + ext.height + 1 < b.y0 ||
               b.y1 < k.text_y - 1);
    };
    while (std::any_of(placed.begin(), placed.end(), overlaps)) k.text_y += ext.height + 3;
    placed.push_back({k.text_x - 1, k.text_y - 1, k.text_x + ext.width, k.text_y + ext.height});
    out.push_back(std::move(k));
  }
  return out;
}

namespace {

void draw_keypoints(Image& img, const std::vector<KeypointLayout>& layout) {
  for (const auto& k : layout) fill_disk(img, k.center, k.radius, kKeypointColor);
  for (const auto& k : layout) {
    const TextExtent ext = measure_text(k.label, k.text_scale);
    for (int y = k.text_y - 1; y <= k.text_y + ext.height; ++y) {
      for (int x = k.text_x - 1; x <= k.text_x + ext.width; ++x) img.put(x, y, kKeypointLabelBackground);
    }
    draw_text(img, k.text_x, k.text_y, k.label, k.text_scale, kKeypointLabelColor);
  }
}

}  // namespace

Image render_keypoints(const AnnotatedImage& base) {
  Image out = base.image;
  draw_keypoints(out, layout_keypoints(base));
  return out;
}

Image render_prompt_image(const AnnotatedImage& base) {
  Image out = base.show_axes ? render_axes(base) : base.image;
  draw_keypoints(out, layout_keypoints(base));
  return out;
}

}  // namespace axp

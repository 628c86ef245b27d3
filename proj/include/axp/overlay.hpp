#pragma once

#include <array>
#include <string>
#include <vector>

#include "axp/geometry.hpp"
#include "axp/raster.hpp"

namespace axp {

enum class Axis { X = 0, Y = 1, Z = 2 };

char axis_name(Axis a);

struct OverlayStyle {
  int ticks_per_direction = 5;
  /// false = axes only: no tick strokes and no numbers (the scale ablation).
  bool show_scale = true;
  std::array<Rgb, 3> axis_colors = {Rgb{220, 0, 0}, Rgb{0, 160, 0}, Rgb{0, 0, 230}};
  int line_width = 2;
  int tick_length = 8;
  int label_height = 7;
  bool negative_extent = true;

  friend bool operator==(const OverlayStyle&, const OverlayStyle&) = default;
};

/// Throws InvalidStyle when a field is out of bounds or colors collide.
void validate_style(const OverlayStyle& style);

struct Keypoint {
  std::string label;
  /// Frame coordinates.
  Vec3 position_frame = Vec3::Zero();
};

/// An input image plus everything needed to draw its 3D axis mark.
struct AnnotatedImage {
  Image image;
  CameraModel camera;
  CoordinateFrame frame;
  OverlayStyle style;
  std::vector<Keypoint> keypoints;
  /// false for the no-overlay baseline: only keypoints are drawn.
  bool show_axes = true;
};

struct TickPoint {
  Axis axis = Axis::X;
  int k = 0;
  Vec3 world = Vec3::Zero();
};

/// Ticks at origin + k * unit_length * axis for k in [-n, n] \ {0}; negative
/// k only with negative_extent. Ordered by axis, then k ascending.
std::vector<TickPoint> tick_points(const CoordinateFrame& frame, const OverlayStyle& style);

/// k * unit_length as an integer when unit_length is integral, else one decimal.
std::string format_tick_value(int k, double unit_length);

inline constexpr Rgb kKeypointColor{255, 0, 255};
inline constexpr Rgb kKeypointLabelColor{0, 0, 0};
inline constexpr Rgb kKeypointLabelBackground{255, 255, 255};

struct TickLayout {
  Axis axis = Axis::X;
  int k = 0;
  Vec3 world = Vec3::Zero();
  Pixel center;
  Pixel stroke_a;
  Pixel stroke_b;
  std::string text;
  int text_x = 0;
  int text_y = 0;
};

struct AxisLayout {
  bool visible = false;
  Pixel start;  // farthest visible negative tick, or the origin
  Pixel end;    // farthest visible positive tick
  int name_x = 0;
  int name_y = 0;
};

/// Everything render_axes() rasterizes, in subpixel image coordinates.
struct AxesLayout {
  Pixel origin;
  std::array<AxisLayout, 3> axes;
  std::vector<TickLayout> ticks;
  int text_scale = 1;
  int name_scale = 2;
};

/// Throws FrameNotVisible when the origin is behind the camera.
AxesLayout layout_axes(const AnnotatedImage& base);

/// Copy of base.image with the axis mark drawn. Draw order is numbers, tick
/// strokes, axis lines, axis names, so the scale ink never covers axis ink.
Image render_axes(const AnnotatedImage& base);

struct KeypointLayout {
  std::string label;
  Pixel center;
  double radius = 3.0;
  int text_x = 0;
  int text_y = 0;
  int text_scale = 1;
};

/// Throws KeypointBehindCamera naming the offending label.
std::vector<KeypointLayout> layout_keypoints(const AnnotatedImage& base);

/// Copy of base.image with keypoint disks and labels.
Image render_keypoints(const AnnotatedImage& base);

/// The image sent to a model: axes (when show_axes) then keypoints on top.
Image render_prompt_image(const AnnotatedImage& base);

}  // namespace axp

#pragma once

// Free-text answer extraction. Every parser is total: any byte string yields a
// (possibly empty) result and never throws.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "axp/geometry.hpp"
#include "axp/overlay.hpp"

namespace axp {

struct AxisRange {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

struct ParsedAnswer {
  /// Uppercased label -> frame coordinates.
  std::map<std::string, Vec3> points;
  /// Image index (0-based) -> pixel named for that image.
  std::map<int, Pixel> pixels;
  std::map<Axis, AxisRange> ranges;
  /// Image index (0-based) -> chosen candidate label.
  std::map<int, std::string> choices;
  bool unparsed = false;
  std::string diagnostic;
};

/// `B: (10, 0, 20)`, `point C is at (0, 35.5, -10) cm`, `the coordinates of
/// point D are (…)`. Labels are 1-3 letters, matched case-insensitively and
/// returned uppercased; a repeated label keeps its last value.
std::map<std::string, Vec3> parse_points(std::string_view text);

/// `X from a to b`, `X: [a, b]`, `X-range a–b`, `along the X axis between a
/// and b`. Ranges are normalized so lo <= hi; a repeated axis keeps its last value.
std::map<Axis, AxisRange> parse_ranges(std::string_view text);

/// The candidate named by the answer: the only one mentioned (ignoring negated
/// mentions such as "not P1"), else the one in the last clause of the last
/// sentence naming any candidate. nullopt when none or still ambiguous.
std::optional<std::string> parse_choice(std::string_view text, const std::vector<std::string>& candidates);

/// `View 2: (320, 240)` -> {1: (320, 240)}; views are numbered from 1 in text.
std::map<int, Pixel> parse_view_pixels(std::string_view text);

}  // namespace axp

#pragma once

// JSON encoding shared by the dataset files, run artifacts and the annotation
// service. Keys are emitted in a fixed order; doubles round-trip exactly.

#include <string>

#include <json.hpp>

#include "axp/geometry.hpp"
#include "axp/overlay.hpp"
#include "axp/scenegen.hpp"

namespace axp {

using Json = nlohmann::ordered_json;

/// Two-space indented, trailing newline.
std::string dump_json(const Json& j);
Json parse_json(const std::string& text);

Json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);
Json pixel_to_json(const Pixel& p);
Pixel pixel_from_json(const Json& j);

Json camera_to_json(const CameraModel& c);
CameraModel camera_from_json(const Json& j);
Json frame_to_json(const CoordinateFrame& f);
CoordinateFrame frame_from_json(const Json& j);
Json style_to_json(const OverlayStyle& s);
OverlayStyle style_from_json(const Json& j);
Json box_to_json(const Box3D& b);
Box3D box_from_json(const Json& j);
Json view_to_json(const ViewRecord& v);
ViewRecord view_from_json(const Json& j);
Json keypoints_to_json(const std::vector<Keypoint>& kps);
std::vector<Keypoint> keypoints_from_json(const Json& j);

Json entry_to_json(const DatasetEntry& e);
DatasetEntry entry_from_json(const Json& j);
Json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const Json& j);

}  // namespace axp

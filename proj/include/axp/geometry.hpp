#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <string_view>

#include "axp/error.hpp"

namespace axp {

/// World units are centimeters throughout.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class Handedness { Left, Right };

std::string_view to_string(Handedness h);
Handedness handedness_from_string(std::string_view s);

/// Image-space point: u rightward, v downward, origin at the top-left.
/// Pixel (i, j) of a raster has its center at u = i, v = j.
struct Pixel {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// The annotated object's Cartesian frame expressed in world coordinates.
struct CoordinateFrame {
  Vec3 origin_world = Vec3::Zero();
  Vec3 axis_x = Vec3::UnitX();
  Vec3 axis_y = Vec3::UnitY();
  Vec3 axis_z = Vec3::UnitZ();
  Handedness handedness = Handedness::Right;
  double unit_length = 1.0;

  /// Columns are axis_x, axis_y, axis_z.
  Mat3 basis() const;
  const Vec3& axis(int index) const;
};

/// Throws DegenerateAxes / NonPositiveUnit when the frame invariants do not hold.
void validate_frame(const CoordinateFrame& frame);

/// Orthonormalizes the hints with x dominant (Gram-Schmidt) and derives Z from
/// the handedness tag: Z = X x Y for Right, -(X x Y) for Left.
CoordinateFrame build_frame(const Vec3& origin, const Vec3& x_hint, const Vec3& y_hint,
                            Handedness handedness, double unit_length);

Vec3 frame_to_world(const CoordinateFrame& frame, const Vec3& local);
Vec3 world_to_frame(const CoordinateFrame& frame, const Vec3& world);

/// Pinhole camera, world -> camera by x_c = rotation * x_w + translation.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int image_width = 1;
  int image_height = 1;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  double depth(const Vec3& world) const { return to_camera(world).z(); }
  /// Camera center in world coordinates.
  Vec3 center() const { return -rotation.transpose() * translation; }
};

inline constexpr double kMinDepth = 1e-9;

void validate_camera(const CameraModel& camera);

/// Throws BehindCamera when the camera-frame depth is <= kMinDepth.
/// The result may lie outside the image.
Pixel project(const CameraModel& camera, const Vec3& world);

/// Same as project() but returns nullopt instead of throwing.
std::optional<Pixel> try_project(const CameraModel& camera, const Vec3& world);

/// Unit world-space direction of the viewing ray through a pixel.
Vec3 back_project_ray(const CameraModel& camera, const Pixel& px);

/// Intersects the viewing ray through px with the plane {p : normal . p = offset}.
/// nullopt when the ray is parallel to the plane or hits it behind the camera.
std::optional<Vec3> intersect_ray_plane(const CameraModel& camera, const Pixel& px,
                                        const Vec3& normal, double offset);

/// Camera at eye looking at target; `up` disambiguates roll (image v grows
/// opposite to up).
CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                    double cx, double cy, int width, int height);

}  // namespace axp

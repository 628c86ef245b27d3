#include "axp/geometry.hpp"

#include <cmath>
#include <string>

namespace axp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateAxes: return "DegenerateAxes";
    case ErrorCode::NonPositiveUnit: return "NonPositiveUnit";
    case ErrorCode::InvalidCamera: return "InvalidCamera";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::InvalidStyle: return "InvalidStyle";
    case ErrorCode::FrameNotVisible: return "FrameNotVisible";
    case ErrorCode::KeypointBehindCamera: return "KeypointBehindCamera";
    case ErrorCode::ObjectBehindCamera: return "ObjectBehindCamera";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyKnownSet: return "EmptyKnownSet";
    case ErrorCode::ViewIndexOutOfRange: return "ViewIndexOutOfRange";
    case ErrorCode::InvalidTask: return "InvalidTask";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::TemplateSyntax: return "TemplateSyntax";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::MissingFixture: return "MissingFixture";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

std::string_view to_string(Handedness h) { return h == Handedness::Right ? "right" : "left"; }

Handedness handedness_from_string(std::string_view s) {
  if (s == "right" || s == "Right") return Handedness::Right;
  if (s == "left" || s == "Left") return Handedness::Left;
  throw Error(ErrorCode::SchemaError, "handedness must be 'left' or 'right', got '" + std::string(s) + "'");
}

Mat3 CoordinateFrame::basis() const {
  Mat3 m;
  m.col(0) = axis_x;
  m.col(1) = axis_y;
  m.col(2) = axis_z;
  return m;
}

const Vec3& CoordinateFrame::axis(int index) const {
  switch (index) {
    case 0: return axis_x;
    case 1: return axis_y;
    default: return axis_z;
  }
}

void validate_frame(const CoordinateFrame& frame) {
  if (!(frame.unit_length > 0.0) || !std::isfinite(frame.unit_length)) {
    throw Error(ErrorCode::NonPositiveUnit, "unit_length must be > 0");
  }
  if (!frame.origin_world.allFinite()) {
    throw Error(ErrorCode::DegenerateAxes, "origin is not finite");
  }
  constexpr double tol = 1e-9;
  const Mat3 b = frame.basis();
  if (!b.allFinite()) throw Error(ErrorCode::DegenerateAxes, "axes are not finite");
  for (int i = 0; i < 3; ++i) {
    if (std::abs(b.col(i).norm() - 1.0) > tol) {
      throw Error(ErrorCode::DegenerateAxes, "axis " + std::to_string(i) + " is not unit length");
    }
  }
  if (std::abs(frame.axis_x.dot(frame.axis_y)) > tol || std::abs(frame.axis_x.dot(frame.axis_z)) > tol ||
      std::abs(frame.axis_y.dot(frame.axis_z)) > tol) {
    throw Error(ErrorCode::DegenerateAxes, "axes are not mutually perpendicular");
  }
  const double expected = frame.handedness == Handedness::Right ? 1.0 : -1.0;
  if (std::abs(b.determinant() - expected) > tol) {
    throw Error(ErrorCode::DegenerateAxes, "axis determinant does not match handedness tag");
  }
}

CoordinateFrame build_frame(const Vec3& origin, const Vec3& x_hint, const Vec3& y_hint,
                            Handedness handedness, double unit_length) {
  if (!(unit_length > 0.0) || !std::isfinite(unit_length)) {
    throw Error(ErrorCode::NonPositiveUnit, "unit_length must be > 0");
  }
  if (!origin.allFinite() || !x_hint.allFinite() || !y_hint.allFinite()) {
    throw Error(ErrorCode::DegenerateAxes, "non-finite input");
  }
  const double nx = x_hint.norm();
  const double ny = y_hint.norm();
  if (nx == 0.0 || ny == 0.0) throw Error(ErrorCode::DegenerateAxes, "zero axis hint");

  // Angle between the hints, robust near 0 and pi.
  const double angle = std::atan2(x_hint.cross(y_hint).norm(), x_hint.dot(y_hint));
  constexpr double min_angle = 1e-6;
  if (angle < min_angle || angle > M_PI - min_angle) {
    throw Error(ErrorCode::DegenerateAxes, "axis hints are parallel");
  }

  CoordinateFrame f;
  f.origin_world = origin;
  f.handedness = handedness;
  f.unit_length = unit_length;
  f.axis_x = x_hint / nx;
  Vec3 y = y_hint - y_hint.dot(f.axis_x) * f.axis_x;
  // A second pass keeps the residual dot product at rounding level.
  y -= y.dot(f.axis_x) * f.axis_x;
  f.axis_y = y.normalized();
  const Vec3 z = f.axis_x.cross(f.axis_y);
  f.axis_z = handedness == Handedness::Right ? z : Vec3(-z);
  return f;
}

Vec3 frame_to_world(const CoordinateFrame& frame, const Vec3& local) {
  return frame.origin_world + local.x() * frame.axis_x + local.y() * frame.axis_y + local.z() * frame.axis_z;
}

Vec3 world_to_frame(const CoordinateFrame& frame, const Vec3& world) {
  const Vec3 d = world - frame.origin_world;
  return {d.dot(frame.axis_x), d.dot(frame.axis_y), d.dot(frame.axis_z)};
}

void validate_camera(const CameraModel& camera) {
  if (!(camera.fx > 0.0) || !(camera.fy > 0.0)) {
    throw Error(ErrorCode::InvalidCamera, "focal lengths must be > 0");
  }
  if (camera.image_width <= 0 || camera.image_height <= 0) {
    throw Error(ErrorCode::InvalidCamera, "image size must be positive");
  }
  if (!std::isfinite(camera.cx) || !std::isfinite(camera.cy) || !camera.translation.allFinite()) {
    throw Error(ErrorCode::InvalidCamera, "non-finite camera parameter");
  }
  const Mat3& r = camera.rotation;
  if (!r.allFinite() || !(r * r.transpose()).isApprox(Mat3::Identity(), 1e-9) ||
      std::abs(r.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidCamera, "rotation must be orthonormal with determinant +1");
  }
}

std::optional<Pixel> try_project(const CameraModel& camera, const Vec3& world) {
  const Vec3 pc = camera.to_camera(world);
  if (!(pc.z() > kMinDepth)) return std::nullopt;
  return Pixel{camera.fx * pc.x() / pc.z() + camera.cx, camera.fy * pc.y() / pc.z() + camera.cy};
}

Pixel project(const CameraModel& camera, const Vec3& world) {
  if (auto px = try_project(camera, world)) return *px;
  throw Error(ErrorCode::BehindCamera, "point has depth <= 1e-9");
}

Vec3 back_project_ray(const CameraModel& camera, const Pixel& px) {
  const Vec3 dir_cam((px.u - camera.cx) / camera.fx, (px.v - camera.cy) / camera.fy, 1.0);
  return (camera.rotation.transpose() * dir_cam).normalized();
}

std::optional<Vec3> intersect_ray_plane(const CameraModel& camera, const Pixel& px, const Vec3& normal,
                                        double offset) {
  const Vec3 c = camera.center();
  const Vec3 d = back_project_ray(camera, px);
  const double denom = normal.dot(d);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = (offset - normal.dot(c)) / denom;
  if (!(t > 0.0)) return std::nullopt;
  return Vec3(c + t * d);
}

CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy, double cx,
                    double cy, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) right = forward.unitOrthogonal();
  right.normalize();
  const Vec3 down = forward.cross(right);

  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.rotation.row(0) = right;
  cam.rotation.row(1) = down;
  cam.rotation.row(2) = forward;
  cam.translation = -cam.rotation * eye;
  cam.image_width = width;
  cam.image_height = height;
  return cam;
}

}  // namespace axp

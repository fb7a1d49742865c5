#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "direct6d/rotation.hpp"

namespace direct6d {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  bool is_valid() const;
  Mat3 matrix() const;
  // Pixel -> normalized image coordinates.
  Vec2 normalize(const Vec2& px) const { return {(px.x() - cx) / fx, (px.y() - cy) / fy}; }
};

// Object-to-camera transform: X_cam = R(rotation) * X_obj + translation.
struct Pose {
  AbcRotation rotation;
  Vec3 translation = Vec3(0.0, 0.0, 1.0);

  RotationMatrix rotation_matrix() const { return abc_to_rotation(rotation); }
  Vec3 transform(const Vec3& x) const { return rotation_matrix() * x + translation; }
};

struct BoxDims {
  double length = 0.0;  // along object x
  double width = 0.0;   // along object y
  double height = 0.0;  // along object z
};

// Corner i sits at (+-L/2, +-W/2, +-H/2) where bit 0 of i selects the x sign,
// bit 1 the y sign and bit 2 the z sign (bit clear = negative).
using ModelCorners = std::vector<Vec3>;
using ProjectedPoints = std::vector<Vec2>;
// Per corner: d(u, v) / d(a, b, c, tx, ty, tz).
using ProjectionJacobian = std::vector<Mat26>;

ModelCorners box_corners(const BoxDims& dims);

inline constexpr double kDepthEpsilon = 1e-6;

// Throws DegenerateDepthError when a corner's camera depth <= depth_eps.
ProjectedPoints project(const CameraIntrinsics& K, const Pose& pose,
                        std::span<const Vec3> corners,
                        double depth_eps = kDepthEpsilon);

ProjectionJacobian projection_jacobian(const CameraIntrinsics& K,
                                       const Pose& pose,
                                       std::span<const Vec3> corners,
                                       double depth_eps = kDepthEpsilon);

// Sum of squared pixel residuals. Throws LengthMismatch.
double reprojection_loss(std::span<const Vec2> pred,
                         std::span<const Vec2> target);

// d loss / d (a, b, c, tx, ty, tz) = 2 * sum_i J_i^T (pred_i - target_i).
Vec6 loss_gradient(const CameraIntrinsics& K, const Pose& pose,
                   std::span<const Vec3> corners,
                   std::span<const Vec2> target,
                   double depth_eps = kDepthEpsilon);

}  // namespace direct6d

#include "direct6d/projection.hpp"

#include <cmath>
#include <string>

#include "direct6d/error.hpp"

namespace direct6d {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch,
                "point lists differ in length: " + std::to_string(a) + " vs " +
                    std::to_string(b));
  }
}

}  // namespace

bool CameraIntrinsics::is_valid() const {
  return fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy) &&
         std::isfinite(cx) && std::isfinite(cy);
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

ModelCorners box_corners(const BoxDims& dims) {
  ModelCorners corners(8);
  for (int i = 0; i < 8; ++i) {
    corners[i] = Vec3((i & 1 ? 0.5 : -0.5) * dims.length,
                      (i & 2 ? 0.5 : -0.5) * dims.width,
                      (i & 4 ? 0.5 : -0.5) * dims.height);
  }
  return corners;
}

ProjectedPoints project(const CameraIntrinsics& K, const Pose& pose,
                        std::span<const Vec3> corners, double depth_eps) {
  const RotationMatrix R = pose.rotation_matrix();
  ProjectedPoints pts;
  pts.reserve(corners.size());
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const Vec3 p = R * corners[i] + pose.translation;
    if (!(p.z() > depth_eps)) throw DegenerateDepthError(i, p.z());
    pts.emplace_back(K.cx + K.fx * p.x() / p.z(), K.cy + K.fy * p.y() / p.z());
  }
  return pts;
}

ProjectionJacobian projection_jacobian(const CameraIntrinsics& K,
                                       const Pose& pose,
                                       std::span<const Vec3> corners,
                                       double depth_eps) {
  const RotationMatrix R = pose.rotation_matrix();
  const RotationJacobian dR = rotation_jacobian(pose.rotation);
  ProjectionJacobian J;
  J.reserve(corners.size());
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const Vec3& X = corners[i];
    const Vec3 p = R * X + pose.translation;
    if (!(p.z() > depth_eps)) throw DegenerateDepthError(i, p.z());
    const double iz = 1.0 / p.z();

    // d(u, v) / d(camera point)
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << K.fx * iz, 0.0, -K.fx * p.x() * iz * iz,
             0.0, K.fy * iz, -K.fy * p.y() * iz * iz;

    Mat26 Ji;
    for (int k = 0; k < 3; ++k) Ji.col(k) = dproj * (dR[k] * X);
    Ji.rightCols<3>() = dproj;
    J.push_back(Ji);
  }
  return J;
}

double reprojection_loss(std::span<const Vec2> pred,
                         std::span<const Vec2> target) {
  require_same_length(pred.size(), target.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    loss += (pred[i] - target[i]).squaredNorm();
  }
  return loss;
}

Vec6 loss_gradient(const CameraIntrinsics& K, const Pose& pose,
                   std::span<const Vec3> corners,
                   std::span<const Vec2> target, double depth_eps) {
  require_same_length(corners.size(), target.size());
  const ProjectedPoints pred = project(K, pose, corners, depth_eps);
  const ProjectionJacobian J = projection_jacobian(K, pose, corners, depth_eps);
  Vec6 g = Vec6::Zero();
  for (std::size_t i = 0; i < corners.size(); ++i) {
    g += 2.0 * J[i].transpose() * (pred[i] - target[i]);
  }
  return g;
}

}  // namespace direct6d

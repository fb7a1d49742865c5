#pragma once

#include <array>

#include <Eigen/Core>

namespace direct6d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rotation matrices are indexed R(row, col); every serialized form in this
// project lists the nine entries row-major (r11 r12 r13 r21 ... r33).
using RotationMatrix = Mat3;

// Three-parameter rotation (Gibbs vector). The represented angle satisfies
// tan(theta / 2) = |(a, b, c)|, so a half turn has no finite encoding.
struct AbcRotation {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  Vec3 vec() const { return {a, b, c}; }
  static AbcRotation from_vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  bool is_finite() const;

  friend bool operator==(const AbcRotation&, const AbcRotation&) = default;
};

// dR/da, dR/db, dR/dc.
using RotationJacobian = std::array<Mat3, 3>;

inline constexpr double kTraceEpsilon = 1e-8;

RotationMatrix abc_to_rotation(const AbcRotation& r);

// Throws Error(SingularRotation) when 1 + trace(R) <= trace_eps.
AbcRotation rotation_to_abc(const RotationMatrix& R,
                            double trace_eps = kTraceEpsilon);

// Analytic partials of abc_to_rotation (quotient rule on each entry).
RotationJacobian rotation_jacobian(const AbcRotation& r);

// Geodesic angle of Ra * Rb^T in degrees.
double rotation_angle_between(const RotationMatrix& Ra,
                              const RotationMatrix& Rb);

RotationMatrix axis_angle_rotation(const Vec3& axis, double angle_rad);

// Nearest rotation in the Frobenius sense (polar factor with det = +1).
RotationMatrix nearest_rotation(const Mat3& M);

// The 24 proper rotations mapping the cube onto itself, identity first.
const std::array<RotationMatrix, 24>& cube_rotations();

std::array<double, 9> to_row_major(const RotationMatrix& R);
RotationMatrix from_row_major(const std::array<double, 9>& values);

}  // namespace direct6d

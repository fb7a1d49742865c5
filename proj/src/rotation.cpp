#include "direct6d/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "direct6d/error.hpp"

namespace direct6d {

bool AbcRotation::is_finite() const {
  return std::isfinite(a) && std::isfinite(b) && std::isfinite(c);
}

RotationMatrix abc_to_rotation(const AbcRotation& r) {
  const double a = r.a, b = r.b, c = r.c;
  const double aa = a * a, bb = b * b, cc = c * c;
  const double inv = 1.0 / (1.0 + aa + bb + cc);
  RotationMatrix R;
  R << 1.0 + aa - bb - cc, 2.0 * a * b - 2.0 * c, 2.0 * a * c + 2.0 * b,
      2.0 * a * b + 2.0 * c, 1.0 - aa + bb - cc, 2.0 * b * c - 2.0 * a,
      2.0 * a * c - 2.0 * b, 2.0 * b * c + 2.0 * a, 1.0 - aa - bb + cc;
  return R * inv;
}

AbcRotation rotation_to_abc(const RotationMatrix& R, double trace_eps) {
  const double denom = 1.0 + R.trace();
  if (!(denom > trace_eps)) {
    throw Error(ErrorCode::SingularRotation,
                "rotation is (near) a half turn; abc parameters undefined");
  }
  return {(R(2, 1) - R(1, 2)) / denom, (R(0, 2) - R(2, 0)) / denom,
          (R(1, 0) - R(0, 1)) / denom};
}

RotationJacobian rotation_jacobian(const AbcRotation& r) {
  const double a = r.a, b = r.b, c = r.c;
  const double aa = a * a, bb = b * b, cc = c * c;
  const double D = 1.0 + aa + bb + cc;

  // Numerator of the abc formula, before division by D.
  Mat3 M;
  M << 1.0 + aa - bb - cc, 2.0 * a * b - 2.0 * c, 2.0 * a * c + 2.0 * b,
      2.0 * a * b + 2.0 * c, 1.0 - aa + bb - cc, 2.0 * b * c - 2.0 * a,
      2.0 * a * c - 2.0 * b, 2.0 * b * c + 2.0 * a, 1.0 - aa - bb + cc;

  Mat3 dMa, dMb, dMc;
  dMa << 2.0 * a, 2.0 * b, 2.0 * c,
         2.0 * b, -2.0 * a, -2.0,
         2.0 * c, 2.0, -2.0 * a;
  dMb << -2.0 * b, 2.0 * a, 2.0,
         2.0 * a, 2.0 * b, 2.0 * c,
         -2.0, 2.0 * c, -2.0 * b;
  dMc << -2.0 * c, -2.0, 2.0 * a,
         2.0, -2.0 * c, 2.0 * b,
         2.0 * a, 2.0 * b, 2.0 * c;

  const double inv = 1.0 / D;
  const double inv2 = inv * inv;
  return {dMa * inv - M * (2.0 * a * inv2), dMb * inv - M * (2.0 * b * inv2),
          dMc * inv - M * (2.0 * c * inv2)};
}

double rotation_angle_between(const RotationMatrix& Ra,
                              const RotationMatrix& Rb) {
  // atan2 of the skew and trace parts stays accurate at both ends, where
  // acos of the trace alone loses half the digits near zero. D is summed by
  // hand so swapping the arguments yields exactly its transpose.
  Mat3 D;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      D(i, j) = Ra(i, 0) * Rb(j, 0) + Ra(i, 1) * Rb(j, 1) + Ra(i, 2) * Rb(j, 2);
    }
  }
  const double s = 0.5 * Vec3(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1)).norm();
  const double c = 0.5 * (D.trace() - 1.0);
  return std::atan2(s, c) * 180.0 / std::numbers::pi;
}

RotationMatrix axis_angle_rotation(const Vec3& axis, double angle_rad) {
  const Vec3 k = axis.normalized();
  Mat3 K;
  K << 0.0, -k.z(), k.y(), k.z(), 0.0, -k.x(), -k.y(), k.x(), 0.0;
  return Mat3::Identity() + std::sin(angle_rad) * K +
         (1.0 - std::cos(angle_rad)) * (K * K);
}

RotationMatrix nearest_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0
                  ? -1.0
                  : 1.0;
  return svd.matrixU() * fix * svd.matrixV().transpose();
}

const std::array<RotationMatrix, 24>& cube_rotations() {
  static const std::array<RotationMatrix, 24> table = [] {
    std::array<RotationMatrix, 24> out;
    std::size_t n = 0;
    out[n++] = Mat3::Identity();
    // Enumerate signed permutation matrices with det +1.
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                             {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) {
      for (int signs = 0; signs < 8; ++signs) {
        Mat3 R = Mat3::Zero();
        for (int row = 0; row < 3; ++row) {
          R(row, p[row]) = (signs >> row) & 1 ? -1.0 : 1.0;
        }
        if (R.determinant() < 0.0 || R.isIdentity()) continue;
        out[n++] = R;
      }
    }
    return out;
  }();
  return table;
}

std::array<double, 9> to_row_major(const RotationMatrix& R) {
  return {R(0, 0), R(0, 1), R(0, 2), R(1, 0), R(1, 1),
          R(1, 2), R(2, 0), R(2, 1), R(2, 2)};
}

RotationMatrix from_row_major(const std::array<double, 9>& v) {
  RotationMatrix R;
  R << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return R;
}

}  // namespace direct6d

#pragma once

#include <array>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "direct6d/projection.hpp"

namespace direct6d {

// Image line la*u + lb*v + lc = 0 with la^2 + lb^2 = 1.
struct ImageLine {
  double la = 1.0;
  double lb = 0.0;
  double lc = 0.0;

  // Normalizes; throws DegenerateAnnotation when la = lb = 0.
  static ImageLine from_coefficients(double a, double b, double c);
  static ImageLine through(const Vec2& p, const Vec2& q);
  // Line through two homogeneous image points.
  static ImageLine through_homogeneous(const Vec3& p, const Vec3& q);

  Vec3 vec() const { return {la, lb, lc}; }
  double distance(const Vec2& p) const { return la * p.x() + lb * p.y() + lc; }
};

struct AxisLine {
  Vec3 dir;  // unit axis in the object frame
  ImageLine line;
  // Arrow end of the drawn segment. The line alone fixes the axis only up to
  // sign; the tip says which way it points.
  std::optional<Vec2> tip;
};

// x, y, z axes in that order.
struct AxisAnnotation {
  std::array<AxisLine, 3> axes;
};

enum class BoxSide { Left, Right, Top, Bottom };

struct Tangency {
  BoxSide side = BoxSide::Left;
  double edge_coord = 0.0;  // u for Left/Right, v for Top/Bottom (pixels)
  Vec3 model_point = Vec3::Zero();
};

// Left, right, top, bottom in that order; v grows downward.
struct BoxTangency {
  std::array<Tangency, 4> rows;
};

struct BoxEdges {
  double left = 0.0;
  double right = 0.0;
  double top = 0.0;
  double bottom = 0.0;
};

struct RotationSolveConfig {
  int max_iters = 100;
  double initial_lambda = 1e-3;
  double tol = 1e-14;
  // Residual (sum of squares) above which the 24 cube seeds are also tried.
  double multistart_threshold = 1e-6;
};

struct RotationSolveResult {
  AbcRotation rotation;
  double residual = 0.0;  // sum of squared line residuals
  bool converged = false;
  int iterations = 0;
  int starts = 1;
};

// Sum over axes of (l_i^T K R d_i)^2.
double axis_residual(const CameraIntrinsics& K, const AxisAnnotation& ann,
                     const RotationMatrix& R);

// Levenberg-Marquardt over (a, b, c), with cube-symmetry multi-start when the
// single start leaves a residual.
//
// The lines share the image of the object origin, so every solution R comes
// with seven others: flips of two axes, and the turn by 180 degrees about the
// viewing ray of the origin (again with any pair of axes flipped). All eight
// are polished and compared. Among equally good minima the one agreeing with
// the most arrow tips wins, then the one nearest `init`.
//
// Throws DegenerateAnnotation when two lines coincide.
RotationSolveResult solve_rotation_from_axes(const CameraIntrinsics& K,
                                             const AxisAnnotation& ann,
                                             const AbcRotation& init,
                                             const RotationSolveConfig& cfg = {});

// Least-squares translation from the four box tangency rows. Throws
// RankDeficient when the 4x3 system is singular or its condition number
// exceeds 1e8.
Vec3 solve_translation_linear(const CameraIntrinsics& K, const RotationMatrix& R,
                              const BoxTangency& tangency);

struct TangentAssignment {
  BoxTangency tangency;
  std::array<int, 4> corner_index{};  // box corner per side (L, R, T, B)
  Vec3 translation = Vec3::Zero();
  int iterations = 0;
  bool fixed_point = false;
};

// Alternates between picking the extreme projected corner per box side and
// re-solving the translation until the assignment repeats (at most
// max_iters rounds; fixed_point = false otherwise).
TangentAssignment assign_tangent_corners(const CameraIntrinsics& K,
                                         const RotationMatrix& R,
                                         const BoxDims& dims, const BoxEdges& box,
                                         const Vec3& t_init, int max_iters = 50);

// Rough translation from a 2D box: along the ray through the box centre at
// the depth where the box diagonal matches the object diagonal.
Vec3 translation_from_box(const CameraIntrinsics& K, const BoxDims& dims,
                          const BoxEdges& box);

// Extreme projected box edges and the corners achieving them.
TangentAssignment box_tangency_from_pose(const CameraIntrinsics& K,
                                         const Pose& pose, const BoxDims& dims);

// x -> A x + b on pixel coordinates.
struct Affine2 {
  Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
  Vec2 b = Vec2::Zero();

  static Affine2 translation(double dx, double dy);
  static Affine2 scaling_about(const Vec2& center, double sx, double sy);
  static Affine2 rotation_about(const Vec2& center, double angle_rad);
  // Rotation about the centre of a width x height image.
  static Affine2 rotation_about_image_center(double width, double height,
                                             double angle_rad);

  Vec2 apply(const Vec2& p) const { return A * p + b; }
  // (*this after other)(x) = this(other(x)).
  Affine2 after(const Affine2& other) const;
};

// Throws SingularTransform when |det A| < 1e-12.
ProjectedPoints augment_affine(std::span<const Vec2> pts, const Affine2& transform);

}  // namespace direct6d

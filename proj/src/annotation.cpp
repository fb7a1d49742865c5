#include "direct6d/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "direct6d/error.hpp"

namespace direct6d {

namespace {

constexpr double kMaxCondition = 1e8;
constexpr double kCoincidentLines = 1e-9;

struct LocalSolve {
  Vec3 params = Vec3::Zero();
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Minimizes sum_i (w_i^T R(p) e_i)^2 with w_i = K^T l_i and e_i = Q d_i.
LocalSolve solve_local(const std::array<Vec3, 3>& w, const std::array<Vec3, 3>& e,
                       const Vec3& start, const RotationSolveConfig& cfg) {
  auto evaluate = [&](const Vec3& p, Vec3& r, Mat3* J) {
    const AbcRotation abc = AbcRotation::from_vec(p);
    const RotationMatrix R = abc_to_rotation(abc);
    for (int i = 0; i < 3; ++i) r(i) = w[i].dot(R * e[i]);
    if (J) {
      const RotationJacobian dR = rotation_jacobian(abc);
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) (*J)(i, k) = w[i].dot(dR[k] * e[i]);
      }
    }
  };

  LocalSolve out;
  out.params = start;
  Vec3 r;
  Mat3 J;
  evaluate(out.params, r, &J);
  double loss = r.squaredNorm();
  double lambda = cfg.initial_lambda;
  for (int iter = 1; iter <= cfg.max_iters && !out.converged; ++iter) {
    out.iterations = iter;
    const Mat3 H = J.transpose() * J;
    const Vec3 g = J.transpose() * r;
    const double floor = 1e-12 * std::max(H.diagonal().maxCoeff(), 1e-300);
    while (true) {
      Mat3 A = H;
      for (int k = 0; k < 3; ++k) A(k, k) += lambda * std::max(H(k, k), floor);
      const Vec3 candidate = out.params + A.ldlt().solve(-g);
      Vec3 rc;
      Mat3 Jc;
      double candidate_loss = std::numeric_limits<double>::infinity();
      if (candidate.allFinite()) {
        evaluate(candidate, rc, &Jc);
        candidate_loss = rc.squaredNorm();
      }
      if (candidate_loss < loss) {
        const double change = loss - candidate_loss;
        out.params = candidate;
        r = rc;
        J = Jc;
        loss = candidate_loss;
        lambda = std::max(lambda * 0.1, 1e-12);
        if (change < cfg.tol || loss < cfg.tol) out.converged = true;
        break;
      }
      if ((std::isfinite(candidate_loss) && candidate_loss - loss < cfg.tol) ||
          lambda > 1e16) {
        out.converged = true;
        break;
      }
      lambda *= 10.0;
    }
  }
  out.residual = loss;
  return out;
}

void check_annotation(const CameraIntrinsics& K, const AxisAnnotation& ann) {
  if (!K.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid intrinsics");
  const Mat3 Kt = K.matrix().transpose();
  std::array<Vec3, 3> normals;
  for (int i = 0; i < 3; ++i) {
    const auto& axis = ann.axes[i];
    if (!axis.dir.allFinite() || std::abs(axis.dir.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidArgument, "axis directions must be unit vectors");
    }
    const double ab = axis.line.la * axis.line.la + axis.line.lb * axis.line.lb;
    if (!axis.line.vec().allFinite() || std::abs(ab - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidArgument,
                  "image lines must be normalized so la^2 + lb^2 = 1");
    }
    normals[i] = (Kt * axis.line.vec()).normalized();
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (ann.axes[i].dir.dot(ann.axes[j].dir) > 1e-6 ||
          ann.axes[i].dir.dot(ann.axes[j].dir) < -1e-6) {
        throw Error(ErrorCode::InvalidArgument, "axis directions must be orthogonal");
      }
      if (normals[i].cross(normals[j]).norm() < kCoincidentLines) {
        throw Error(ErrorCode::DegenerateAnnotation,
                    "axis lines " + std::to_string(i) + " and " +
                        std::to_string(j) + " coincide");
      }
    }
  }
}

Vec2 project_point(const CameraIntrinsics& K, const RotationMatrix& R,
                   const Vec3& t, const Vec3& x, std::size_t index) {
  const Vec3 p = R * x + t;
  if (!(p.z() > kDepthEpsilon)) throw DegenerateDepthError(index, p.z());
  return {K.cx + K.fx * p.x() / p.z(), K.cy + K.fy * p.y() / p.z()};
}

std::array<int, 4> extreme_corners(const ProjectedPoints& pts) {
  std::array<int, 4> idx{0, 0, 0, 0};
  for (int i = 1; i < static_cast<int>(pts.size()); ++i) {
    if (pts[i].x() < pts[idx[0]].x()) idx[0] = i;
    if (pts[i].x() > pts[idx[1]].x()) idx[1] = i;
    if (pts[i].y() < pts[idx[2]].y()) idx[2] = i;
    if (pts[i].y() > pts[idx[3]].y()) idx[3] = i;
  }
  return idx;
}

BoxTangency make_tangency(const BoxEdges& box, const ModelCorners& corners,
                          const std::array<int, 4>& idx) {
  BoxTangency tang;
  tang.rows[0] = {BoxSide::Left, box.left, corners[idx[0]]};
  tang.rows[1] = {BoxSide::Right, box.right, corners[idx[1]]};
  tang.rows[2] = {BoxSide::Top, box.top, corners[idx[2]]};
  tang.rows[3] = {BoxSide::Bottom, box.bottom, corners[idx[3]]};
  return tang;
}

}  // namespace

ImageLine ImageLine::from_coefficients(double a, double b, double c) {
  const double n = std::hypot(a, b);
  if (!(n > 0.0) || !std::isfinite(n) || !std::isfinite(c)) {
    throw Error(ErrorCode::DegenerateAnnotation, "line has no direction");
  }
  return {a / n, b / n, c / n};
}

ImageLine ImageLine::through(const Vec2& p, const Vec2& q) {
  return through_homogeneous(Vec3(p.x(), p.y(), 1.0), Vec3(q.x(), q.y(), 1.0));
}

ImageLine ImageLine::through_homogeneous(const Vec3& p, const Vec3& q) {
  const Vec3 l = p.cross(q);
  return from_coefficients(l.x(), l.y(), l.z());
}

double axis_residual(const CameraIntrinsics& K, const AxisAnnotation& ann,
                     const RotationMatrix& R) {
  const Mat3 KR = K.matrix() * R;
  double sum = 0.0;
  for (const auto& axis : ann.axes) {
    const double r = axis.line.vec().dot(KR * axis.dir);
    sum += r * r;
  }
  return sum;
}

RotationSolveResult solve_rotation_from_axes(const CameraIntrinsics& K,
                                             const AxisAnnotation& ann,
                                             const AbcRotation& init,
                                             const RotationSolveConfig& cfg) {
  check_annotation(K, ann);
  if (!init.is_finite()) throw Error(ErrorCode::NonFinite, "initial rotation is not finite");

  const Mat3 Kt = K.matrix().transpose();
  std::array<Vec3, 3> w;
  for (int i = 0; i < 3; ++i) w[i] = Kt * ann.axes[i].line.vec();

  struct Candidate {
    LocalSolve local;
    RotationMatrix R;
  };
  RotationSolveResult result;
  result.starts = 0;
  std::vector<Candidate> candidates;
  auto run_from = [&](const Mat3& frame, const Vec3& start) {
    std::array<Vec3, 3> e;
    for (int i = 0; i < 3; ++i) e[i] = frame * ann.axes[i].dir;
    const LocalSolve local = solve_local(w, e, start, cfg);
    result.iterations += local.iterations;
    ++result.starts;
    candidates.push_back(
        {local, abc_to_rotation(AbcRotation::from_vec(local.params)) * frame});
  };

  run_from(Mat3::Identity(), init.vec());
  if (candidates.front().local.residual > cfg.multistart_threshold) {
    for (const RotationMatrix& seed : cube_rotations()) run_from(seed, Vec3::Zero());
  }
  auto best_residual = [&] {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) best = std::min(best, c.local.residual);
    return best;
  };

  // Image of the object origin: the common point of the three lines.
  Mat3 L;
  for (int i = 0; i < 3; ++i) L.row(i) = ann.axes[i].line.vec().transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(L), Eigen::ComputeFullV};
  const Vec3 origin_h = svd.matrixV().col(2);
  Vec3 ray = K.matrix().inverse() * origin_h;
  if (ray.z() < 0.0) ray = -ray;
  ray.normalize();

  // Polish the whole solution orbit of the best start.
  {
    double best = best_residual();
    RotationMatrix seed = candidates.front().R;
    for (const auto& c : candidates) {
      if (c.local.residual == best) {
        seed = c.R;
        break;
      }
    }
    const Mat3 half_turn = 2.0 * ray * ray.transpose() - Mat3::Identity();
    const Vec3 flips[4] = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
    for (const Mat3& turn : {Mat3(Mat3::Identity()), half_turn}) {
      for (const Vec3& f : flips) {
        const Mat3 frame = nearest_rotation(turn * seed * f.asDiagonal());
        run_from(frame, Vec3::Zero());
      }
    }
  }

  // Arrow directions, where drawn, in the image around the origin.
  std::array<std::optional<Vec2>, 3> arrows;
  if (std::abs(origin_h.z()) > 1e-12 * origin_h.norm()) {
    const Vec2 origin_px = origin_h.head<2>() / origin_h.z();
    for (int i = 0; i < 3; ++i) {
      if (ann.axes[i].tip) arrows[i] = *ann.axes[i].tip - origin_px;
    }
  }
  auto agreement = [&](const RotationMatrix& R) {
    int count = 0;
    for (int i = 0; i < 3; ++i) {
      if (!arrows[i]) continue;
      const Vec3 v = R * ann.axes[i].dir;
      const Vec2 image_dir(K.fx * (v.x() * ray.z() - ray.x() * v.z()),
                           K.fy * (v.y() * ray.z() - ray.y() * v.z()));
      if (image_dir.dot(*arrows[i]) > 0.0) ++count;
    }
    return count;
  };

  const double best = best_residual();
  const double tie = best + std::max(1e-10, 1e-6 * best);
  const RotationMatrix R_init = abc_to_rotation(init);
  const Candidate* chosen = nullptr;
  int chosen_agreement = -1;
  double chosen_angle = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (c.local.residual > tie) continue;
    const int agree = agreement(c.R);
    const double angle = rotation_angle_between(c.R, R_init);
    if (agree > chosen_agreement || (agree == chosen_agreement && angle < chosen_angle)) {
      chosen_agreement = agree;
      chosen_angle = angle;
      chosen = &c;
    }
  }
  result.rotation = rotation_to_abc(chosen->R);
  result.residual = chosen->local.residual;
  result.converged = chosen->local.converged;
  return result;
}

Vec3 solve_translation_linear(const CameraIntrinsics& K, const RotationMatrix& R,
                              const BoxTangency& tangency) {
  if (!K.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid intrinsics");
  Eigen::Matrix<double, 4, 3> A;
  Eigen::Vector4d rhs;
  for (int i = 0; i < 4; ++i) {
    const Tangency& row = tangency.rows[i];
    Eigen::RowVector3d coeff;
    if (row.side == BoxSide::Left || row.side == BoxSide::Right) {
      const double un = (row.edge_coord - K.cx) / K.fx;
      coeff = un * R.row(2) - R.row(0);
    } else {
      const double vn = (row.edge_coord - K.cy) / K.fy;
      coeff = vn * R.row(2) - R.row(1);
    }
    A.row(i) = coeff;
    rhs(i) = coeff.dot(row.model_point);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(A)};
  const auto& sv = svd.singularValues();
  if (!(sv(2) > 0.0) || sv(0) / sv(2) > kMaxCondition) {
    throw Error(ErrorCode::RankDeficient, "box tangency system is rank deficient");
  }
  // Solves for the camera centre T in the object frame; t = -R T.
  const Vec3 camera_center = A.colPivHouseholderQr().solve(rhs);
  return -R * camera_center;
}

TangentAssignment assign_tangent_corners(const CameraIntrinsics& K,
                                         const RotationMatrix& R,
                                         const BoxDims& dims, const BoxEdges& box,
                                         const Vec3& t_init, int max_iters) {
  if (!(dims.length > 0.0 && dims.width > 0.0 && dims.height > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "box dimensions must be positive");
  }
  if (!(box.left <= box.right && box.top <= box.bottom)) {
    throw Error(ErrorCode::InvalidArgument, "box edges out of order");
  }
  const ModelCorners corners = box_corners(dims);
  TangentAssignment out;
  out.translation = t_init;
  std::optional<std::array<int, 4>> previous;
  for (int iter = 1; iter <= max_iters; ++iter) {
    ProjectedPoints pts;
    for (std::size_t i = 0; i < corners.size(); ++i) {
      pts.push_back(project_point(K, R, out.translation, corners[i], i));
    }
    const std::array<int, 4> idx = extreme_corners(pts);
    out.iterations = iter;
    out.corner_index = idx;
    out.tangency = make_tangency(box, corners, idx);
    out.translation = solve_translation_linear(K, R, out.tangency);
    if (previous && *previous == idx) {
      out.fixed_point = true;
      return out;
    }
    previous = idx;
  }
  return out;
}

Vec3 translation_from_box(const CameraIntrinsics& K, const BoxDims& dims,
                          const BoxEdges& box) {
  const Vec2 center(0.5 * (box.left + box.right), 0.5 * (box.top + box.bottom));
  const double pixel_diag = std::hypot(box.right - box.left, box.bottom - box.top);
  const double model_diag = std::sqrt(dims.length * dims.length +
                                      dims.width * dims.width +
                                      dims.height * dims.height);
  const double focal = 0.5 * (K.fx + K.fy);
  double depth = pixel_diag > 0.0 ? focal * model_diag / pixel_diag : 1.0;
  depth = std::max(depth, model_diag);
  const Vec2 ray = K.normalize(center);
  return {depth * ray.x(), depth * ray.y(), depth};
}

TangentAssignment box_tangency_from_pose(const CameraIntrinsics& K,
                                         const Pose& pose, const BoxDims& dims) {
  const ModelCorners corners = box_corners(dims);
  const ProjectedPoints pts = project(K, pose, corners);
  TangentAssignment out;
  out.corner_index = extreme_corners(pts);
  const BoxEdges box{pts[out.corner_index[0]].x(), pts[out.corner_index[1]].x(),
                     pts[out.corner_index[2]].y(), pts[out.corner_index[3]].y()};
  out.tangency = make_tangency(box, corners, out.corner_index);
  out.translation = pose.translation;
  out.fixed_point = true;
  return out;
}

Affine2 Affine2::translation(double dx, double dy) {
  return {Eigen::Matrix2d::Identity(), Vec2(dx, dy)};
}

Affine2 Affine2::scaling_about(const Vec2& center, double sx, double sy) {
  Eigen::Matrix2d A = Eigen::Vector2d(sx, sy).asDiagonal();
  return {A, center - A * center};
}

Affine2 Affine2::rotation_about(const Vec2& center, double angle_rad) {
  Eigen::Matrix2d A;
  A << std::cos(angle_rad), -std::sin(angle_rad), std::sin(angle_rad),
      std::cos(angle_rad);
  return {A, center - A * center};
}

Affine2 Affine2::rotation_about_image_center(double width, double height,
                                             double angle_rad) {
  return rotation_about(Vec2(0.5 * width, 0.5 * height), angle_rad);
}

Affine2 Affine2::after(const Affine2& other) const {
  return {A * other.A, A * other.b + b};
}

ProjectedPoints augment_affine(std::span<const Vec2> pts, const Affine2& transform) {
  if (!(std::abs(transform.A.determinant()) >= 1e-12) || !transform.b.allFinite()) {
    throw Error(ErrorCode::SingularTransform, "affine transform is not invertible");
  }
  ProjectedPoints out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(transform.apply(p));
  return out;
}

}  // namespace direct6d

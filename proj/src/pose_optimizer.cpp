#include "direct6d/pose_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "direct6d/error.hpp"

namespace direct6d {

namespace {

using Residuals = Eigen::VectorXd;
using Jacobian = Eigen::Matrix<double, Eigen::Dynamic, 6>;
using Mat66 = Eigen::Matrix<double, 6, 6>;

constexpr double kMaxLambda = 1e16;
constexpr double kMinLambda = 1e-12;

// Residual model over six parameters. `evaluate` may throw
// DegenerateDepthError; `reparameterize` may rewrite the parameters in place
// without changing the residuals.
struct LmProblem {
  std::function<void(const Vec6&, Residuals&, Jacobian&)> evaluate;
  std::function<bool(Vec6&)> reparameterize;
};

struct LmOutcome {
  Vec6 params = Vec6::Zero();
  double loss = 0.0;
  int iters = 0;
  FitStatus status = FitStatus::MaxIterations;
  std::vector<double> trace;
  int reparameterizations = 0;
};

LmOutcome run_lm(const LmProblem& problem, const Vec6& init, const FitConfig& cfg) {
  LmOutcome out;
  out.params = init;
  Residuals r;
  Jacobian J;
  problem.evaluate(out.params, r, J);
  out.loss = r.squaredNorm();
  out.trace.push_back(out.loss);
  if (!std::isfinite(out.loss) || !out.params.allFinite()) {
    out.status = FitStatus::NonFinite;
    return out;
  }
  if (out.loss < cfg.loss_floor) {
    out.status = FitStatus::Converged;
    return out;
  }

  double lambda = cfg.initial_lambda;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    out.iters = iter;
    const Mat66 H = J.transpose() * J;
    const Vec6 g = J.transpose() * r;
    const double diag_floor = 1e-12 * std::max(H.diagonal().maxCoeff(), 1e-300);

    bool stop = false;
    while (true) {
      Mat66 A = H;
      for (int k = 0; k < 6; ++k) A(k, k) += lambda * std::max(H(k, k), diag_floor);
      const Vec6 delta = A.ldlt().solve(-g);
      const Vec6 candidate = out.params + delta;
      if (!candidate.allFinite()) {
        out.status = FitStatus::NonFinite;
        stop = true;
        break;
      }

      Residuals rc;
      Jacobian Jc;
      double candidate_loss = std::numeric_limits<double>::infinity();
      try {
        problem.evaluate(candidate, rc, Jc);
        candidate_loss = rc.squaredNorm();
      } catch (const DegenerateDepthError&) {
        // step crossed the camera plane; treat like an uphill step
      }

      if (candidate_loss < out.loss) {
        const double change = out.loss - candidate_loss;
        out.params = candidate;
        r = std::move(rc);
        J = std::move(Jc);
        out.loss = candidate_loss;
        out.trace.push_back(out.loss);
        lambda = std::max(lambda * cfg.lambda_down, kMinLambda);
        if (problem.reparameterize && problem.reparameterize(out.params)) {
          ++out.reparameterizations;
          problem.evaluate(out.params, r, J);
        }
        if (out.loss < cfg.loss_floor || change < cfg.convergence_tol) {
          out.status = FitStatus::Converged;
          stop = true;
        }
        break;
      }
      // No step, however damped, lowers the loss by more than the tolerance:
      // the current parameters are stationary to working precision.
      if ((std::isfinite(candidate_loss) &&
           candidate_loss - out.loss < cfg.convergence_tol) ||
          lambda > kMaxLambda) {
        out.status = FitStatus::Converged;
        stop = true;
        break;
      }
      lambda *= cfg.lambda_up;
    }
    if (stop) break;
  }
  return out;
}

void check_fit_inputs(const CameraIntrinsics& K, std::span<const Vec3> corners,
                      std::span<const Vec2> target, const FitConfig& cfg) {
  cfg.validate();
  if (!K.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid intrinsics");
  if (corners.size() < 3) {
    throw Error(ErrorCode::InvalidArgument, "pose fitting needs at least 3 corners");
  }
  if (corners.size() != target.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "corners and target differ in length: " +
                    std::to_string(corners.size()) + " vs " +
                    std::to_string(target.size()));
  }
}

// Object-frame bookkeeping shared by both parameter spaces: the optimizer sees
// rotation R' and corners Q * X, and the physical rotation is R' * Q.
struct FrameState {
  Mat3 frame = Mat3::Identity();
  ModelCorners corners;

  FrameState(std::span<const Vec3> model, const Mat3& q) : frame(q) {
    corners.reserve(model.size());
    for (const auto& x : model) corners.push_back(frame * x);
  }

  // Turns the object frame by 90 degrees about the axis that brings the
  // local abc back closest to the origin.
  bool maybe_reparameterize(Eigen::Ref<Vec3> abc, double threshold,
                            std::span<const Vec3> model) {
    if (!(abc.norm() > threshold)) return false;
    const RotationMatrix R = abc_to_rotation(AbcRotation::from_vec(abc));
    double best_norm = std::numeric_limits<double>::infinity();
    Mat3 best_turn = Mat3::Identity();
    Vec3 best_abc = abc;
    for (int axis = 0; axis < 3; ++axis) {
      for (double sign : {1.0, -1.0}) {
        const Mat3 turn =
            axis_angle_rotation(Vec3::Unit(axis), sign * std::numbers::pi / 2.0);
        try {
          const Vec3 local = rotation_to_abc(R * turn.transpose()).vec();
          if (local.norm() < best_norm) {
            best_norm = local.norm();
            best_turn = turn;
            best_abc = local;
          }
        } catch (const Error&) {
        }
      }
    }
    if (!std::isfinite(best_norm)) return false;
    frame = best_turn * frame;
    for (std::size_t i = 0; i < model.size(); ++i) corners[i] = frame * model[i];
    abc = best_abc;
    return true;
  }

  AbcRotation physical_rotation(const Vec3& local_abc) const {
    if (frame.isIdentity(0.0)) return AbcRotation::from_vec(local_abc);
    return rotation_to_abc(abc_to_rotation(AbcRotation::from_vec(local_abc)) * frame);
  }
};

void fill_residuals(std::span<const Vec2> pred, std::span<const Vec2> target,
                    Residuals& r) {
  r.resize(2 * static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.segment<2>(2 * i) = pred[i] - target[i];
  }
}

void fill_jacobian(const ProjectionJacobian& per_corner, Jacobian& J) {
  J.resize(2 * static_cast<Eigen::Index>(per_corner.size()), 6);
  for (std::size_t i = 0; i < per_corner.size(); ++i) {
    J.block<2, 6>(2 * i, 0) = per_corner[i];
  }
}

FitReport fit_direct_in_frame(const CameraIntrinsics& K,
                              std::span<const Vec3> corners,
                              std::span<const Vec2> target, const Vec3& local_abc,
                              const Vec3& translation, const Mat3& frame,
                              const FitConfig& cfg) {
  FrameState state(corners, frame);
  LmProblem problem;
  problem.evaluate = [&](const Vec6& p, Residuals& r, Jacobian& J) {
    const Pose pose{AbcRotation::from_vec(p.head<3>()), p.tail<3>()};
    fill_residuals(project(K, pose, state.corners), target, r);
    fill_jacobian(projection_jacobian(K, pose, state.corners), J);
  };
  problem.reparameterize = [&](Vec6& p) {
    return state.maybe_reparameterize(p.head<3>(), cfg.reparam_threshold, corners);
  };

  Vec6 init;
  init << local_abc, translation;
  const LmOutcome out = run_lm(problem, init, cfg);

  FitReport report;
  report.final_pose = {state.physical_rotation(out.params.head<3>()),
                       out.params.tail<3>()};
  report.final_loss = out.loss;
  report.iters = out.iters;
  report.status = out.status;
  report.converged = out.status == FitStatus::Converged;
  report.loss_trace = out.trace;
  report.reparameterizations = out.reparameterizations;
  return report;
}

}  // namespace

void FitConfig::validate() const {
  if (max_iters < 0 || !(initial_lambda > 0.0) || !(lambda_up > 1.0) ||
      !(lambda_down > 0.0 && lambda_down < 1.0) || !(convergence_tol > 0.0) ||
      !(loss_floor >= 0.0) || !(reparam_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid fit configuration");
  }
}

std::string_view to_string(FitStatus status) noexcept {
  switch (status) {
    case FitStatus::Converged: return "converged";
    case FitStatus::MaxIterations: return "max_iterations";
    case FitStatus::NonFinite: return "non_finite";
  }
  return "unknown";
}

FitReport fit_pose(const CameraIntrinsics& K, std::span<const Vec3> corners,
                   std::span<const Vec2> target, const Pose& init,
                   const FitConfig& cfg) {
  check_fit_inputs(K, corners, target, cfg);
  if (!init.rotation.is_finite() || !init.translation.allFinite()) {
    throw Error(ErrorCode::NonFinite, "initial pose is not finite");
  }
  return fit_direct_in_frame(K, corners, target, init.rotation.vec(),
                             init.translation, Mat3::Identity(), cfg);
}

ProjectionJacobian region_channel_jacobian(const GridDecodeConfig& grid,
                                           const CameraIntrinsics& K,
                                           const RegionCellOutput& cell,
                                           std::span<const Vec3> corners) {
  const Pose pose = decode_pose(grid, K, cell);
  const ProjectionJacobian Jp = projection_jacobian(K, pose, corners);
  const Mat3 Jt = translation_channel_jacobian(grid, K, cell);
  ProjectionJacobian J;
  J.reserve(Jp.size());
  for (const auto& Ji : Jp) {
    Mat26 out;
    out.leftCols<3>() = Ji.rightCols<3>() * Jt;
    out.rightCols<3>() = Ji.leftCols<3>();
    J.push_back(out);
  }
  return J;
}

RegionFitReport fit_region_channels(const GridDecodeConfig& grid,
                                    const CameraIntrinsics& K,
                                    std::span<const Vec3> corners,
                                    std::span<const Vec2> target,
                                    const RegionCellOutput& init_channels,
                                    const FitConfig& cfg) {
  check_fit_inputs(K, corners, target, cfg);
  grid.validate();
  FrameState state(corners, Mat3::Identity());
  RegionCellOutput cell = init_channels;

  auto with_params = [&cell](const Vec6& p) {
    RegionCellOutput c = cell;
    c.tu = p(0);
    c.tv = p(1);
    c.tw = p(2);
    c.abc = AbcRotation::from_vec(p.tail<3>());
    return c;
  };

  LmProblem problem;
  problem.evaluate = [&](const Vec6& p, Residuals& r, Jacobian& J) {
    const RegionCellOutput c = with_params(p);
    fill_residuals(project(K, decode_pose(grid, K, c), state.corners), target, r);
    fill_jacobian(region_channel_jacobian(grid, K, c, state.corners), J);
  };
  problem.reparameterize = [&](Vec6& p) {
    return state.maybe_reparameterize(p.tail<3>(), cfg.reparam_threshold, corners);
  };

  Vec6 init;
  init << cell.tu, cell.tv, cell.tw, cell.abc.vec();
  if (!init.allFinite()) throw Error(ErrorCode::NonFinite, "initial channels are not finite");
  const LmOutcome out = run_lm(problem, init, cfg);

  RegionFitReport result;
  result.channels = with_params(out.params);
  result.channels.abc = state.physical_rotation(out.params.tail<3>());
  FitReport& report = result.report;
  report.final_pose = decode_pose(grid, K, result.channels);
  report.final_loss = out.loss;
  report.iters = out.iters;
  report.status = out.status;
  report.converged = out.status == FitStatus::Converged;
  report.loss_trace = out.trace;
  report.reparameterizations = out.reparameterizations;
  return result;
}

Pose cold_start_pose(const CameraIntrinsics& K, std::span<const Vec3> corners,
                     std::span<const Vec2> target) {
  if (corners.empty() || corners.size() != target.size()) {
    throw Error(ErrorCode::LengthMismatch, "corners and target must be non-empty and paired");
  }
  Vec3 model_center = Vec3::Zero();
  for (const auto& x : corners) model_center += x;
  model_center /= static_cast<double>(corners.size());
  Vec2 pixel_center = Vec2::Zero();
  for (const auto& p : target) pixel_center += p;
  pixel_center /= static_cast<double>(target.size());

  double model_spread = 0.0, pixel_spread = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    model_spread += (corners[i] - model_center).squaredNorm();
    pixel_spread += (target[i] - pixel_center).squaredNorm();
  }
  model_spread = std::sqrt(model_spread / corners.size());
  pixel_spread = std::sqrt(pixel_spread / corners.size());
  const double focal = 0.5 * (K.fx + K.fy);
  double depth = pixel_spread > 0.0 ? focal * model_spread / pixel_spread : 1.0;
  // Keep every corner in front of the camera whatever the seed rotation.
  double radius = 0.0;
  for (const auto& x : corners) radius = std::max(radius, x.norm());
  depth = std::max(depth, 2.0 * radius + kDepthEpsilon);

  const Vec2 ray = K.normalize(pixel_center);
  return {AbcRotation{}, Vec3(depth * ray.x(), depth * ray.y(), depth)};
}

FitReport fit_pose_cold(const CameraIntrinsics& K, std::span<const Vec3> corners,
                        std::span<const Vec2> target, const FitConfig& cfg) {
  check_fit_inputs(K, corners, target, cfg);
  const Pose start = cold_start_pose(K, corners, target);
  FitReport best;
  bool have_best = false;
  for (const RotationMatrix& seed : cube_rotations()) {
    FitReport report = fit_direct_in_frame(K, corners, target, Vec3::Zero(),
                                           start.translation, seed, cfg);
    if (!have_best || (report.status != FitStatus::NonFinite &&
                       (best.status == FitStatus::NonFinite ||
                        report.final_loss < best.final_loss))) {
      best = std::move(report);
      have_best = true;
    }
    if (best.converged && best.final_loss < cfg.loss_floor) break;
  }
  return best;
}

std::vector<double> gradient_descent_step(std::span<const double> params,
                                          std::span<const double> grad,
                                          double step) {
  if (params.size() != grad.size()) {
    throw Error(ErrorCode::LengthMismatch, "params and gradient differ in length");
  }
  std::vector<double> out(params.begin(), params.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= step * grad[i];
  return out;
}

Vec6 gradient_descent_step(const Vec6& params, const Vec6& grad, double step) {
  return params - step * grad;
}

}  // namespace direct6d

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "direct6d/projection.hpp"
#include "direct6d/region_codec.hpp"

namespace direct6d {

enum class ParamSpace { DirectPose, RegionChannels };

struct FitConfig {
  int max_iters = 200;
  double initial_lambda = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  // Absolute loss change (pixels^2) below which the fit stops.
  double convergence_tol = 1e-12;
  // Loss (pixels^2) treated as an exact fit. Low enough that noiseless fits
  // end with sub-micropixel corners instead of stopping at 1e-5 px.
  double loss_floor = 1e-18;
  // |abc| beyond which the object frame is turned by 90 degrees.
  double reparam_threshold = 50.0;
  ParamSpace param_space = ParamSpace::DirectPose;

  void validate() const;
};

enum class FitStatus { Converged, MaxIterations, NonFinite };

std::string_view to_string(FitStatus status) noexcept;

struct FitReport {
  Pose final_pose;
  double final_loss = 0.0;
  int iters = 0;
  bool converged = false;
  FitStatus status = FitStatus::MaxIterations;
  // Loss before the first step, then one entry per accepted step.
  std::vector<double> loss_trace;
  int reparameterizations = 0;
};

struct RegionFitReport {
  FitReport report;
  RegionCellOutput channels;
};

// Levenberg-Marquardt on (a, b, c, tx, ty, tz). Throws DegenerateDepthError
// when `init` puts a corner behind the camera, LengthMismatch and
// InvalidArgument on bad inputs. Non-finite parameters are reported through
// FitStatus::NonFinite.
FitReport fit_pose(const CameraIntrinsics& K, std::span<const Vec3> corners,
                   std::span<const Vec2> target, const Pose& init,
                   const FitConfig& cfg = {});

// Same problem over the raw region channels (tu, tv, tw, a, b, c) of a fixed
// cell, so the step goes through the sigmoid, the exponential depth, the abc
// rotation and the projection.
RegionFitReport fit_region_channels(const GridDecodeConfig& grid,
                                    const CameraIntrinsics& K,
                                    std::span<const Vec3> corners,
                                    std::span<const Vec2> target,
                                    const RegionCellOutput& init_channels,
                                    const FitConfig& cfg = {});

// Per corner d(u, v) / d(tu, tv, tw, a, b, c) of decode_pose followed by project.
ProjectionJacobian region_channel_jacobian(const GridDecodeConfig& grid,
                                           const CameraIntrinsics& K,
                                           const RegionCellOutput& cell,
                                           std::span<const Vec3> corners);

// Identity rotation, translation along the ray through the target centroid
// at the depth where model spread matches the observed pixel spread.
Pose cold_start_pose(const CameraIntrinsics& K, std::span<const Vec3> corners,
                     std::span<const Vec2> target);

// Fits from the cold-start translation with each of the 24 cube-symmetry
// rotations as seed; returns the lowest-loss result (earliest seed on ties).
FitReport fit_pose_cold(const CameraIntrinsics& K, std::span<const Vec3> corners,
                        std::span<const Vec2> target, const FitConfig& cfg = {});

// params - step * grad. Throws LengthMismatch.
std::vector<double> gradient_descent_step(std::span<const double> params,
                                          std::span<const double> grad,
                                          double step);
Vec6 gradient_descent_step(const Vec6& params, const Vec6& grad, double step);

}  // namespace direct6d

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "direct6d/error.hpp"
#include "direct6d/pose_optimizer.hpp"
#include "direct6d/region_codec.hpp"
#include "support/oracles.hpp"

using namespace direct6d;
using direct6d::testing::Sampler;

namespace {

struct Scene {
  CameraIntrinsics K;
  Pose truth;
  ModelCorners corners;
  ProjectedPoints target;
};

Scene make_scene(Sampler& s, double max_deg = 175.0) {
  Scene sc;
  sc.K = s.intrinsics();
  sc.truth = s.pose(max_deg);
  sc.corners = box_corners(s.dims());
  sc.target = project(sc.K, sc.truth, sc.corners);
  return sc;
}

// Largest corner distance, in pixels, between the fitted pose seen through
// the pinhole oracle and the target.
double max_reprojection(const Scene& sc, const Pose& pose) {
  const Mat3 R = testing::quaternion_rotation(pose.rotation.a, pose.rotation.b, pose.rotation.c);
  double worst = 0.0;
  for (std::size_t i = 0; i < sc.corners.size(); ++i) {
    worst = std::max(worst, (testing::pinhole(sc.K, R, pose.translation, sc.corners[i]) -
                             sc.target[i]).norm());
  }
  return worst;
}

double rotation_error(const Pose& a, const Pose& b) {
  return rotation_angle_between(a.rotation_matrix(), b.rotation_matrix());
}

bool non_increasing(const std::vector<double>& trace) {
  return std::adjacent_find(trace.begin(), trace.end(),
                            [](double x, double y) { return y > x; }) == trace.end();
}

}  // namespace

TEST_CASE("FitConfig defaults and validation") {
  const FitConfig cfg;
  CHECK(cfg.max_iters == 200);
  CHECK(cfg.initial_lambda == 1e-3);
  CHECK(cfg.lambda_up == 10.0);
  CHECK(cfg.lambda_down == 0.1);
  CHECK(cfg.convergence_tol == 1e-12);
  CHECK(cfg.param_space == ParamSpace::DirectPose);
  cfg.validate();
  FitConfig bad = cfg;
  bad.lambda_up = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.convergence_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("fit_pose input errors") {
  Sampler s(41);
  const Scene sc = make_scene(s);
  const ProjectedPoints short_target(sc.target.begin(), sc.target.begin() + 5);
  try {
    fit_pose(sc.K, sc.corners, short_target, sc.truth);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
  const ModelCorners two(sc.corners.begin(), sc.corners.begin() + 2);
  const ProjectedPoints two_px(sc.target.begin(), sc.target.begin() + 2);
  CHECK_THROWS_AS(fit_pose(sc.K, two, two_px, sc.truth), Error);

  Pose behind = sc.truth;
  behind.translation.z() = -1.0;
  CHECK_THROWS_AS(fit_pose(sc.K, sc.corners, sc.target, behind), DegenerateDepthError);

  Pose nan_pose = sc.truth;
  nan_pose.rotation.a = std::nan("");
  try {
    fit_pose(sc.K, sc.corners, sc.target, nan_pose);
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("fit_pose from the ground truth stops at iteration 0") {
  Sampler s(42);
  for (int i = 0; i < 50; ++i) {
    const Scene sc = make_scene(s);
    const FitReport r = fit_pose(sc.K, sc.corners, sc.target, sc.truth);
    CHECK(r.converged);
    CHECK(r.iters == 0);
    CHECK(r.final_loss < 1e-10);
    CHECK(r.loss_trace.size() == 1);
  }
}

TEST_CASE("fit_pose recovers a 5 degree / 5 cm perturbation") {
  Sampler s(43);
  for (int i = 0; i < 200; ++i) {
    const Scene sc = make_scene(s);
    const Pose init = testing::perturb(s, sc.truth, 5.0, 5.0);
    const FitReport r = fit_pose(sc.K, sc.corners, sc.target, init);
    REQUIRE(r.converged);
    CHECK(r.iters <= 100);
    CHECK(max_reprojection(sc, r.final_pose) < 1e-6);
    CHECK(rotation_error(r.final_pose, sc.truth) < 1e-4);
    CHECK(non_increasing(r.loss_trace));
    CHECK(r.loss_trace.front() > r.loss_trace.back());
  }
}

TEST_CASE("noiseless targets are reached from 10 degree / 10 cm perturbations") {
  Sampler s(44);
  int reached = 0;
  const int trials = 300;
  for (int i = 0; i < trials; ++i) {
    const Scene sc = make_scene(s);
    const Pose init = testing::perturb(s, sc.truth, s.uniform(0.0, 10.0), s.uniform(0.0, 10.0));
    const FitReport r = fit_pose(sc.K, sc.corners, sc.target, init);
    CHECK(non_increasing(r.loss_trace));
    if (r.final_loss < 1e-10 && r.iters <= 200) ++reached;
  }
  CHECK(reached >= 0.95 * trials);
}

TEST_CASE("fit_pose handles rotations near the Gibbs singularity") {
  Sampler s(45);
  int turned = 0;
  for (int i = 0; i < 50; ++i) {
    Scene sc;
    sc.K = s.intrinsics();
    // 178-179.5 degrees: |abc| between 115 and 460.
    const Vec3 axis = s.unit_vector();
    const double deg = s.uniform(178.0, 179.5);
    sc.truth = {AbcRotation::from_vec(axis * std::tan(0.5 * deg * std::numbers::pi / 180.0)),
                Vec3(0.0, 0.0, 1.0)};
    sc.corners = box_corners(s.dims());
    sc.target = project(sc.K, sc.truth, sc.corners);
    const Pose init = testing::perturb(s, sc.truth, 3.0, 2.0);
    const FitReport r = fit_pose(sc.K, sc.corners, sc.target, init);
    CHECK(r.converged);
    CHECK(max_reprojection(sc, r.final_pose) < 1e-6);
    CHECK(rotation_error(r.final_pose, sc.truth) < 1e-4);
    turned += r.reparameterizations > 0;
  }
  CHECK(turned > 0);
}

TEST_CASE("rotation estimate is unchanged by a matched focal and pixel rescale") {
  Sampler s(46);
  for (int i = 0; i < 50; ++i) {
    const Scene sc = make_scene(s);
    const Pose init = testing::perturb(s, sc.truth, 4.0, 3.0);
    // Perturb the target so the optimum is not trivially the truth.
    ProjectedPoints noisy = sc.target;
    for (auto& p : noisy) p += Vec2(s.gauss(), s.gauss());

    const double k = s.uniform(0.5, 2.0);
    CameraIntrinsics K2 = sc.K;
    K2.fx *= k;
    K2.fy *= k;
    ProjectedPoints scaled = noisy;
    const Vec2 c(sc.K.cx, sc.K.cy);
    for (auto& p : scaled) p = c + k * (p - c);

    const FitReport a = fit_pose(sc.K, sc.corners, noisy, init);
    const FitReport b = fit_pose(K2, sc.corners, scaled, init);
    CHECK(rotation_error(a.final_pose, b.final_pose) < 1e-6);
    CHECK((a.final_pose.translation - b.final_pose.translation).norm() < 1e-8);
  }
}

TEST_CASE("gradient_descent_step") {
  const std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> zero(3, 0.0);
  CHECK(gradient_descent_step(p, zero, 0.7) == p);

  const std::vector<double> one{1.0}, two{2.0};
  CHECK(gradient_descent_step(one, two, 0.25) == std::vector<double>{0.5});

  CHECK_THROWS_AS(gradient_descent_step(p, one, 0.1), Error);

  Vec6 v = Vec6::Constant(1.0);
  CHECK(gradient_descent_step(v, Vec6::Zero(), 3.0) == v);
}

TEST_CASE("region_channel_jacobian matches central differences of the composed chain") {
  Sampler s(47);
  const GridDecodeConfig g;
  for (int trial = 0; trial < 200; ++trial) {
    const CameraIntrinsics K{s.uniform(400, 800), s.uniform(400, 800), s.uniform(180, 236),
                             s.uniform(180, 236)};
    const ModelCorners corners = box_corners(s.dims());
    RegionCellOutput cell;
    cell.cell_col = static_cast<int>(s.uniform(2, 10));
    cell.cell_row = static_cast<int>(s.uniform(2, 10));
    cell.tu = s.uniform(-3, 3);
    cell.tv = s.uniform(-3, 3);
    cell.tw = s.uniform(-0.3, 0.3);
    cell.abc = s.abc(3.0);
    cell.class_scores = {0.0};

    const ProjectionJacobian J = region_channel_jacobian(g, K, cell, corners);
    Eigen::VectorXd x(6);
    x << cell.tu, cell.tv, cell.tw, cell.abc.vec();
    const auto chain = [&](const Eigen::VectorXd& p) {
      return testing::region_chain_pixels(g, K, cell.cell_col, cell.cell_row, corners, p);
    };
    const Eigen::MatrixXd fd = testing::central_difference(chain, x);
    for (std::size_t i = 0; i < corners.size(); ++i) {
      for (int r = 0; r < 2; ++r) {
        for (int k = 0; k < 6; ++k) {
          REQUIRE(testing::relative_error(J[i](r, k), fd(2 * i + r, k), 1.0) < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("fit_region_channels at the encoded truth converges immediately") {
  Sampler s(48);
  const GridDecodeConfig g;
  const CameraIntrinsics K{520, 520, 208, 208};
  for (int i = 0; i < 50; ++i) {
    const Pose truth{s.abc_with_angle(170.0),
                     Vec3(s.uniform(-0.1, 0.1), s.uniform(-0.1, 0.1), s.uniform(0.6, 1.2))};
    const ModelCorners corners = box_corners(s.dims());
    const ProjectedPoints target = project(K, truth, corners);
    const RegionCellOutput cell = encode_pose(g, K, truth);
    const RegionFitReport r = fit_region_channels(g, K, corners, target, cell);
    CHECK(r.report.converged);
    CHECK(r.report.iters == 0);
    CHECK(r.report.final_loss < 1e-10);
  }
}

TEST_CASE("fit_region_channels agrees with fit_pose") {
  Sampler s(49);
  const GridDecodeConfig g;
  const CameraIntrinsics K{520, 520, 208, 208};
  int compared = 0;
  for (int i = 0; i < 100; ++i) {
    const Pose truth{s.abc_with_angle(170.0),
                     Vec3(s.uniform(-0.1, 0.1), s.uniform(-0.1, 0.1), s.uniform(0.6, 1.2))};
    const ModelCorners corners = box_corners(s.dims());
    const ProjectedPoints target = project(K, truth, corners);
    const Pose init = testing::perturb(s, truth, 5.0, 3.0);

    // Keep the owning cell of the truth and start from perturbed channels.
    RegionCellOutput cell = encode_pose(g, K, truth);
    const TranslationCode code = encode_translation(g, K, init.translation);
    cell.tu = std::clamp(cell.tu + s.uniform(-0.5, 0.5), -6.0, 6.0);
    cell.tv = std::clamp(cell.tv + s.uniform(-0.5, 0.5), -6.0, 6.0);
    cell.tw = code.tw;
    cell.abc = init.rotation;

    const RegionFitReport region = fit_region_channels(g, K, corners, target, cell);
    const FitReport direct = fit_pose(K, corners, target, init);
    if (!(region.report.converged && direct.converged)) continue;
    ++compared;
    CHECK(non_increasing(region.report.loss_trace));
    const ProjectedPoints a = project(K, region.report.final_pose, corners);
    const ProjectedPoints b = project(K, direct.final_pose, corners);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, (a[k] - b[k]).norm());
    CHECK(worst < 1e-6);
    CHECK(region.channels.cell_col == cell.cell_col);
  }
  CHECK(compared >= 95);
}

TEST_CASE("cold start recovers noiseless poses at any rotation") {
  Sampler s(50);
  int reached = 0;
  const int trials = 40;
  for (int i = 0; i < trials; ++i) {
    const Scene sc = make_scene(s);
    const FitReport r = fit_pose_cold(sc.K, sc.corners, sc.target);
    if (r.final_loss < 1e-10 && rotation_error(r.final_pose, sc.truth) < 1e-4) ++reached;
  }
  CHECK(reached == trials);
}

TEST_CASE("cold_start_pose aims along the ray through the target centroid") {
  const CameraIntrinsics K{600, 600, 320, 240};
  const ModelCorners corners = box_corners({0.2, 0.2, 0.2});
  const Pose truth{{}, Vec3(0.1, -0.05, 1.0)};
  const ProjectedPoints target = project(K, truth, corners);
  const Pose start = cold_start_pose(K, corners, target);
  CHECK(start.rotation == AbcRotation{});
  const Vec2 ray = K.normalize(Vec2(K.cx + K.fx * start.translation.x() / start.translation.z(),
                                    K.cy + K.fy * start.translation.y() / start.translation.z()));
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : target) centroid += p / 8.0;
  CHECK((ray - K.normalize(centroid)).norm() < 1e-12);
  CHECK(start.translation.z() == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("fits are independent across threads") {
  Sampler s(51);
  std::vector<Scene> scenes;
  std::vector<Pose> inits;
  for (int i = 0; i < 8; ++i) {
    scenes.push_back(make_scene(s));
    inits.push_back(testing::perturb(s, scenes.back().truth, 5.0, 5.0));
  }
  std::vector<FitReport> serial;
  for (int i = 0; i < 8; ++i) serial.push_back(fit_pose(scenes[i].K, scenes[i].corners, scenes[i].target, inits[i]));
  std::vector<FitReport> parallel(8);
  std::vector<std::thread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&, i] {
      parallel[i] = fit_pose(scenes[i].K, scenes[i].corners, scenes[i].target, inits[i]);
    });
  }
  for (auto& t : workers) t.join();
  for (int i = 0; i < 8; ++i) {
    CHECK(parallel[i].final_pose.rotation == serial[i].final_pose.rotation);
    CHECK(parallel[i].final_pose.translation == serial[i].final_pose.translation);
    CHECK(parallel[i].iters == serial[i].iters);
  }
}

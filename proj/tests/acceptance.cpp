// Acceptance run: one PASS/FAIL line per criterion with its tolerance and
// time budget. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "direct6d/annotation.hpp"
#include "direct6d/app/commands.hpp"
#include "direct6d/app/service.hpp"
#include "direct6d/error.hpp"
#include "direct6d/evalkit.hpp"
#include "direct6d/json_io.hpp"
#include "direct6d/pose_optimizer.hpp"
#include "support/oracles.hpp"

// After Eigen: the resolver headers pulled in here define a `res` macro.
#include <httplib.h>

using namespace direct6d;
using direct6d::testing::Sampler;
using json_io::Json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;  // 0: no time budget
  std::function<Outcome()> run;
};

std::string fmt(const char* pattern, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, pattern, args...);
  return buffer;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

template <typename F>
bool throws_code(F&& f, ErrorCode expected) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == expected;
  }
  return false;
}

Outcome rotation_round_trip() {
  Sampler s(1001);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Mat3 R = s.rotation(175.0);
    const Mat3 back = abc_to_rotation(rotation_to_abc(R));
    worst = std::max(worst, (back - R).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-9, fmt("10000 rotations <= 175 deg, max |R - R'| = %.2e (tol 1e-9)", worst)};
}

Outcome orthogonality() {
  Sampler s(1002);
  double worst_orth = 0.0, worst_det = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Mat3 R = abc_to_rotation(s.abc(100.0));
    worst_orth = std::max(worst_orth, (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff());
    worst_det = std::max(worst_det, std::abs(R.determinant() - 1.0));
  }
  return {worst_orth < 1e-12 && worst_det < 1e-12,
          fmt("10000 abc with |abc| <= 100, max |R^T R - I| = %.2e, max |det - 1| = %.2e "
              "(tol 1e-12)",
              worst_orth, worst_det)};
}

Outcome gradient_audit() {
  Sampler s(1003);
  double rot = 0.0, proj = 0.0, chain = 0.0, grad = 0.0;
  const GridDecodeConfig g;
  for (int trial = 0; trial < 1000; ++trial) {
    const AbcRotation r = s.abc(10.0);
    const RotationJacobian JR = rotation_jacobian(r);
    const Eigen::MatrixXd fdR = testing::central_difference(
        [](const Eigen::VectorXd& p) {
          const Mat3 R = testing::quaternion_rotation(p(0), p(1), p(2));
          return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(R.data(), 9));
        },
        r.vec());
    for (int k = 0; k < 3; ++k) {
      for (int e = 0; e < 9; ++e) {
        rot = std::max(rot, testing::relative_error(JR[k].data()[e], fdR(e, k), 1e-3));
      }
    }

    const CameraIntrinsics K = s.intrinsics();
    const Pose pose = s.pose();
    const ModelCorners corners = box_corners(s.dims());
    const auto pixels = [&](const Eigen::VectorXd& p) {
      const Mat3 R = testing::quaternion_rotation(p(0), p(1), p(2));
      Eigen::VectorXd out(2 * corners.size());
      for (std::size_t i = 0; i < corners.size(); ++i) {
        out.segment<2>(2 * i) = testing::pinhole(K, R, p.tail<3>(), corners[i]);
      }
      return out;
    };
    Eigen::VectorXd p(6);
    p << pose.rotation.vec(), pose.translation;
    const ProjectionJacobian JP = projection_jacobian(K, pose, corners);
    const Eigen::MatrixXd fdP = testing::central_difference(pixels, p);
    for (std::size_t i = 0; i < corners.size(); ++i) {
      for (int row = 0; row < 2; ++row) {
        for (int k = 0; k < 6; ++k) {
          proj = std::max(proj, testing::relative_error(JP[i](row, k), fdP(2 * i + row, k), 1.0));
        }
      }
    }

    const ProjectedPoints target = project(K, testing::perturb(s, pose, 5.0, 5.0), corners);
    const Vec6 G = loss_gradient(K, pose, corners, target);
    const Eigen::VectorXd target_stack = testing::stack(target);
    const Eigen::MatrixXd fdG = testing::central_difference(
        [&](const Eigen::VectorXd& q) {
          return Eigen::VectorXd::Constant(1, (pixels(q) - target_stack).squaredNorm());
        },
        p);
    for (int k = 0; k < 6; ++k) grad = std::max(grad, testing::relative_error(G(k), fdG(0, k), 1.0));

    const CameraIntrinsics Kg{s.uniform(400, 800), s.uniform(400, 800), s.uniform(180, 236),
                              s.uniform(180, 236)};
    RegionCellOutput cell;
    cell.cell_col = static_cast<int>(s.uniform(2, 10));
    cell.cell_row = static_cast<int>(s.uniform(2, 10));
    cell.tu = s.uniform(-3, 3);
    cell.tv = s.uniform(-3, 3);
    cell.tw = s.uniform(-0.3, 0.3);
    cell.abc = s.abc(3.0);
    cell.class_scores = {0.0};
    const ProjectionJacobian JC = region_channel_jacobian(g, Kg, cell, corners);
    Eigen::VectorXd x(6);
    x << cell.tu, cell.tv, cell.tw, cell.abc.vec();
    const Eigen::MatrixXd fdC = testing::central_difference(
        [&](const Eigen::VectorXd& q) {
          return testing::region_chain_pixels(g, Kg, cell.cell_col, cell.cell_row, corners, q);
        },
        x);
    for (std::size_t i = 0; i < corners.size(); ++i) {
      for (int row = 0; row < 2; ++row) {
        for (int k = 0; k < 6; ++k) {
          chain = std::max(chain, testing::relative_error(JC[i](row, k), fdC(2 * i + row, k), 1.0));
        }
      }
    }
  }
  const double worst = std::max({rot, proj, chain, grad});
  return {worst < 1e-5,
          fmt("1000 configs, max relative error: rotation %.1e, projection %.1e, region chain "
              "%.1e, loss gradient %.1e (tol 1e-5)",
              rot, proj, chain, grad)};
}

Outcome pnp_free_recovery() {
  Sampler s(1004);
  const SceneRanges ranges;
  int good = 0, max_iters = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SyntheticScene sc = generate_scene(5000 + seed, ranges);
    const Pose init = testing::perturb(s, sc.true_pose, s.uniform(0, 10), s.uniform(0, 10));
    const FitReport fit = fit_pose(sc.K, sc.corners, sc.pts, init);
    const Mat3 R = testing::quaternion_rotation(fit.final_pose.rotation.a,
                                                fit.final_pose.rotation.b,
                                                fit.final_pose.rotation.c);
    double reproj = 0.0;
    for (std::size_t i = 0; i < sc.corners.size(); ++i) {
      reproj = std::max(reproj, (testing::pinhole(sc.K, R, fit.final_pose.translation,
                                                  sc.corners[i]) -
                                 sc.pts[i])
                                    .norm());
    }
    const double rot_err = rotation_angle_between(R, sc.true_pose.rotation_matrix());
    max_iters = std::max(max_iters, fit.iters);
    if (reproj < 1e-6 && rot_err < 1e-4 && fit.iters <= 200) ++good;
  }
  return {good >= 950,
          fmt("%d/1000 noiseless scenes from <= 10 deg / 10 cm reach reprojection < 1e-6 px "
              "and rotation < 1e-4 deg within 200 iterations (need >= 950; max iters %d)",
              good, max_iters)};
}

// First-order prediction of the fit error from the same noise draw: the
// Gauss-Newton step (J^T J)^-1 J^T n with J from central differences of the
// pinhole oracle at the truth.
Pose linearized_fit(const SyntheticScene& sc) {
  const auto pixels = [&](const Eigen::VectorXd& p) {
    const Mat3 R = testing::quaternion_rotation(p(0), p(1), p(2));
    Eigen::VectorXd out(2 * sc.corners.size());
    for (std::size_t i = 0; i < sc.corners.size(); ++i) {
      out.segment<2>(2 * i) = testing::pinhole(sc.K, R, p.tail<3>(), sc.corners[i]);
    }
    return out;
  };
  Eigen::VectorXd p(6);
  p << sc.true_pose.rotation.vec(), sc.true_pose.translation;
  const Eigen::MatrixXd J = testing::central_difference(pixels, p);
  const Eigen::VectorXd n = testing::stack(sc.observed) - testing::stack(sc.pts);
  const Eigen::VectorXd step = (J.transpose() * J).ldlt().solve(J.transpose() * n);
  const Eigen::VectorXd q = p + step;
  return {{q(0), q(1), q(2)}, q.tail<3>()};
}

Outcome noise_analog() {
  Sampler s(1005);
  SceneRanges ranges;
  ranges.noise_sigma = 1.0;
  std::vector<double> e_re, e_te, oracle_re, oracle_te;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const SyntheticScene sc = generate_scene(9000 + seed, ranges);
    const Pose init = testing::perturb(s, sc.true_pose, s.uniform(0, 10), s.uniform(0, 10));
    const FitReport fit = fit_pose(sc.K, sc.corners, sc.observed, init);
    const PoseErrorReport r = evaluate(sc.K, fit.final_pose, sc.true_pose, sc.corners);
    e_re.push_back(r.e_re_deg);
    e_te.push_back(r.e_te_cm);
    const Pose lin = linearized_fit(sc);
    const Mat3 R = testing::quaternion_rotation(lin.rotation.a, lin.rotation.b, lin.rotation.c);
    oracle_re.push_back(rotation_angle_between(R, sc.true_pose.rotation_matrix()));
    oracle_te.push_back((lin.translation - sc.true_pose.translation).norm() * 100.0);
  }
  const double re = median(e_re), te = median(e_te);
  const double ore = median(oracle_re), ote = median(oracle_te);
  // Re-baselined bound: the measured medians must sit within 15% of the
  // first-order Monte-Carlo prediction, as well as under the fixed bounds.
  const bool within_bounds = re <= 2.5 && te <= 1.9;
  const bool within_oracle = re <= 1.15 * ore && te <= 1.15 * ote;
  return {within_bounds && within_oracle,
          fmt("500 trials at sigma 1 px: median e_RE %.3f deg (<= 2.5), median e_TE %.3f cm "
              "(<= 1.9); first-order oracle medians %.3f deg / %.3f cm (measured within 15%%)",
              re, te, ore, ote)};
}

Outcome annotation_round_trip() {
  Sampler s(1006);
  const CameraIntrinsics K = kLineModIntrinsics;
  constexpr double kArrow = 0.05;
  int rot_ok = 0, trans_ok = 0, lines_only_ok = 0;
  for (int i = 0; i < 500; ++i) {
    const Pose truth = s.pose(170.0);
    const BoxDims dims = s.dims();
    const AbcRotation init = rotation_to_abc(
        axis_angle_rotation(s.unit_vector(), deg2rad(s.uniform(0, 30))) * truth.rotation_matrix());
    const AxisAnnotation ann = testing::synthetic_axes(K, truth, kArrow);
    const RotationSolveResult r = solve_rotation_from_axes(K, ann, init);
    const Mat3 R = abc_to_rotation(r.rotation);
    if (rotation_angle_between(R, truth.rotation_matrix()) < 0.1) ++rot_ok;

    const TangentAssignment tang = box_tangency_from_pose(K, truth, dims);
    const BoxEdges box{tang.tangency.rows[0].edge_coord, tang.tangency.rows[1].edge_coord,
                       tang.tangency.rows[2].edge_coord, tang.tangency.rows[3].edge_coord};
    const TangentAssignment t =
        assign_tangent_corners(K, R, dims, box, translation_from_box(K, dims, box));
    if ((t.translation - truth.translation).norm() < 1e-6 * truth.translation.norm()) ++trans_ok;

    const RotationSolveResult bare = solve_rotation_from_axes(K, testing::synthetic_axes(K, truth), init);
    if (rotation_angle_between(abc_to_rotation(bare.rotation), truth.rotation_matrix()) < 0.1) {
      ++lines_only_ok;
    }
  }

  const Pose any{{0.1, 0.2, 0.3}, Vec3(0.05, -0.02, 1.0)};
  AxisAnnotation coincident = testing::synthetic_axes(K, any, kArrow);
  coincident.axes[2].line = coincident.axes[0].line;
  AxisAnnotation skewed = testing::synthetic_axes(K, any, kArrow);
  skewed.axes[1].dir = Vec3(1, 1, 0).normalized();
  BoxTangency flat;
  const BoxSide sides[4] = {BoxSide::Left, BoxSide::Right, BoxSide::Top, BoxSide::Bottom};
  for (int i = 0; i < 4; ++i) flat.rows[i] = {sides[i], 300.0, Vec3(0.1 * i, 0.0, 0.0)};
  const bool errors =
      throws_code([&] { solve_rotation_from_axes(K, coincident, {}); },
                  ErrorCode::DegenerateAnnotation) &&
      throws_code([&] { solve_rotation_from_axes(K, skewed, {}); },
                  ErrorCode::InvalidArgument) &&
      throws_code([&] { solve_translation_linear(K, Mat3::Identity(), flat); },
                  ErrorCode::RankDeficient);

  return {rot_ok == 500 && trans_ok == 500 && errors,
          fmt("500 annotations with arrow tips from <= 30 deg: R within 0.1 deg %d/500, t within "
              "1e-6 relative %d/500, degenerate cases %s; lines without tips: %d/500",
              rot_ok, trans_ok, errors ? "raise" : "DO NOT raise", lines_only_ok)};
}

Outcome region_codec() {
  Sampler s(1007);
  const GridDecodeConfig g;
  const CameraIntrinsics K{500, 500, 208, 208};
  double worst = 0.0;
  bool rotation_exact = true;
  for (int i = 0; i < 1000; ++i) {
    const Pose pose{s.abc_with_angle(170.0),
                    Vec3(s.uniform(-0.1, 0.1), s.uniform(-0.1, 0.1), s.uniform(0.6, 1.2))};
    const Pose back = decode_pose(g, K, encode_pose(g, K, pose, i % g.num_anchors));
    worst = std::max(worst, (back.translation - pose.translation).cwiseAbs().maxCoeff());
    rotation_exact = rotation_exact && back.rotation == pose.rotation;
  }

  int invariant = 0;
  const std::vector<std::function<double(double)>> transforms{
      [](double c) { return 1.0 / (1.0 + std::exp(-c)); },
      [](double c) { return 3.0 * c + 7.0; },
      [](double c) { return std::exp(c); },
      [](double c) { return c * c * c; },
      [](double c) { return std::atan(c); },
  };
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RegionCellOutput> grid(40);
    for (auto& c : grid) c.conf = s.uniform(-3, 3);
    const RegionCellOutput* best = &select_best_cell(grid);
    bool same = true;
    for (const auto& f : transforms) {
      std::vector<RegionCellOutput> mapped = grid;
      for (auto& c : mapped) c.conf = f(c.conf);
      same = same && (&select_best_cell(mapped) - mapped.data()) == (best - grid.data());
    }
    invariant += same ? 1 : 0;
  }
  return {worst < 1e-9 && rotation_exact && invariant == 200,
          fmt("1000 poses, max translation error %.2e m (tol 1e-9), rotation channels %s; "
              "argmax unchanged under 5 monotone transforms in %d/200 grids",
              worst, rotation_exact ? "exact" : "NOT exact", invariant)};
}

Outcome ground_truth_io() {
  Sampler s(1008);
  const fs::path dir = fs::temp_directory_path() / "direct6d_acceptance_gt";
  fs::create_directories(dir);
  int exact = 0;
  for (int i = 0; i < 1000; ++i) {
    const Mat3 R = s.rotation(175.0);
    const Vec3 t(s.uniform(-30, 30), s.uniform(-30, 30), s.uniform(60, 120));
    write_ground_truth(dir / "p.rot", dir / "p.tra", R, t);
    const GroundTruthPoseFile gt = load_ground_truth(dir / "p.rot", dir / "p.tra");
    if (gt.raw_rotation == R && gt.raw_translation == t) ++exact;
  }
  fs::remove_all(dir);

  const std::string tra = "0 0 100";
  bool located = false;
  try {
    parse_ground_truth("3 3\n1 0 0\n0 1 0\n0 0\n", tra);
  } catch (const ParseError& e) {
    located = e.line() == 4 && e.column() == 3;
  }
  const bool corrupt =
      located &&
      throws_code([&] { parse_ground_truth("1 0 0 0 1 0 0 0 x", tra); }, ErrorCode::ParseError) &&
      throws_code([&] { parse_ground_truth("1 0 0 0 1 0 0 0 1", "1 2"); }, ErrorCode::ParseError) &&
      throws_code([&] { parse_ground_truth("1.1 0 0 0 1 0 0 0 1", tra); },
                  ErrorCode::NonOrthonormal) &&
      throws_code([&] { parse_ground_truth("-1 0 0 0 1 0 0 0 1", tra); },
                  ErrorCode::NonOrthonormal);
  return {exact == 1000 && corrupt,
          fmt("%d/1000 written files load back bit-exact; corrupt files %s", exact,
              corrupt ? "raise ParseError (with line/column) and NonOrthonormal"
                      : "DO NOT raise the expected errors")};
}

Outcome performance() {
  const app::BenchReport r = app::run_bench(300, 77);
  const double decode_budget_us = 50.0, fit_budget_ms = 50.0;
  const bool decode_hard = r.decode_project_median_us < 10.0 * decode_budget_us;
  const bool fit_hard = r.fit_median_ms < 10.0 * fit_budget_ms;
  std::string flags;
  if (r.decode_project_median_us >= decode_budget_us) flags += " [flag: decode over budget]";
  if (r.fit_median_ms >= fit_budget_ms) flags += " [flag: fit over budget]";
  return {decode_hard && fit_hard,
          fmt("median decode_pose+project(8) %.3f us (budget 50 us), median noiseless fit "
              "%.3f ms (budget 50 ms); fails only beyond 10x%s",
              r.decode_project_median_us, r.fit_median_ms, flags.c_str())};
}

std::string run_process(const std::string& command, int& rc) {
  std::string out;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) {
    rc = -1;
    return out;
  }
  char buffer[4096];
  std::size_t n;
  while ((n = fread(buffer, 1, sizeof buffer, pipe)) > 0) out.append(buffer, n);
  rc = pclose(pipe);
  rc = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return out;
}

Outcome delegation(const std::string& cli_path) {
  const fs::path dir = fs::temp_directory_path() / "direct6d_acceptance_delegation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const app::ServiceConfig cfg;
  app::Server server(cfg);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);

  int checks = 0, equal = 0;
  auto expect = [&](bool same) {
    ++checks;
    equal += same ? 1 : 0;
  };
  auto service = [&](const std::string& path, const Json& body) {
    const app::HttpResponse in_process = app::handle_request(cfg, "POST", path, body.dump());
    const auto over_http = client.Post(path, body.dump(), "application/json");
    expect(over_http && over_http->body == in_process.body);
    return Json::parse(in_process.body).at("result");
  };
  auto cli = [&](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int rc = app::run_cli(args, out, err);
    return rc == 0 ? json_io::parse(out.str()) : Json();
  };

  Sampler s(1009);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticScene sc = generate_scene(seed, SceneRanges{});
    const fs::path scene_path = dir / ("scene" + std::to_string(seed) + ".json");
    std::ofstream(scene_path) << json_io::dump(json_io::encode(sc));
    const Json cold = json_io::encode(fit_pose_cold(sc.K, sc.corners, sc.observed));
    expect(cli({"fit", "--scene", scene_path.string()}) == cold);

    const Pose init = testing::perturb(s, sc.true_pose, 8.0, 8.0);
    const Json body = {{"K", json_io::encode(sc.K)},
                       {"corners", json_io::encode_points(std::span<const Vec3>(sc.corners))},
                       {"target", json_io::encode_points(std::span<const Vec2>(sc.observed))},
                       {"init", json_io::encode(init)}};
    expect(service("/fit", body) == json_io::encode(fit_pose(sc.K, sc.corners, sc.observed, init)));
    expect(service("/project", {{"K", json_io::encode(sc.K)},
                                {"pose", json_io::encode(sc.true_pose)},
                                {"dims", json_io::encode(sc.dims)}}) ==
           Json{{"points", json_io::encode_points(project(sc.K, sc.true_pose, sc.corners))}});

    const AxisAnnotation ann = testing::synthetic_axes(sc.K, sc.true_pose, 0.05);
    const RotationSolveResult rot = solve_rotation_from_axes(sc.K, ann, {});
    expect(service("/solve/rotation", {{"K", json_io::encode(sc.K)},
                                       {"axes", json_io::encode(ann)}}) == json_io::encode(rot));
    const TangentAssignment tang = box_tangency_from_pose(sc.K, sc.true_pose, sc.dims);
    const BoxEdges box{tang.tangency.rows[0].edge_coord, tang.tangency.rows[1].edge_coord,
                       tang.tangency.rows[2].edge_coord, tang.tangency.rows[3].edge_coord};
    const RotationMatrix R = abc_to_rotation(rot.rotation);
    const TangentAssignment t = assign_tangent_corners(sc.K, R, sc.dims, box,
                                                       translation_from_box(sc.K, sc.dims, box));
    expect(service("/solve/translation", {{"K", json_io::encode(sc.K)},
                                          {"rotation", json_io::encode_rotation_matrix(R)},
                                          {"dims", json_io::encode(sc.dims)},
                                          {"box", json_io::encode(box)}}) == json_io::encode(t));

    const fs::path ann_path = dir / ("ann" + std::to_string(seed) + ".json");
    std::ofstream(ann_path) << Json{{"K", json_io::encode(sc.K)},
                                    {"axes", json_io::encode(ann)},
                                    {"dims", json_io::encode(sc.dims)},
                                    {"box", json_io::encode(box)}}
                                   .dump();
    const Json solved = cli({"solve-annotation", "--input", ann_path.string()});
    expect(!solved.is_null() && solved.at("rotation") == json_io::encode(rot) &&
           solved.at("translation") == json_io::encode(t));

    if (seed == 0) {
      int rc = 0;
      const std::string out = run_process("'" + cli_path + "' fit --scene '" +
                                              scene_path.string() + "' 2>/dev/null",
                                          rc);
      expect(rc == 0 && json_io::parse(out) == cold);
    }
  }

  const fs::path gt = dir / "gt";
  std::ostringstream gen_out, gen_err, eval_out, eval_err;
  app::run_cli({"gen", "--seed", "3", "--count", "4", "--out", gt.string()}, gen_out, gen_err);
  const int eval_rc = app::run_cli({"eval", "--pred", gt.string(), "--gt", gt.string()},
                                   eval_out, eval_err);
  std::vector<std::pair<std::string, PoseErrorReport>> labelled;
  for (int i = 0; i < 4; ++i) {
    const SyntheticScene sc = generate_scene(3 + i, SceneRanges{});
    const GroundTruthPoseFile file =
        load_ground_truth(gt / ("synthetic_00000" + std::to_string(i) + ".rot"),
                          gt / ("synthetic_00000" + std::to_string(i) + ".tra"));
    const Pose pose{rotation_to_abc(file.rotation), file.translation};
    labelled.emplace_back(sc.object, evaluate(sc.K, pose, pose, sc.corners));
  }
  expect(eval_rc == 0 && eval_out.str() == accuracy_csv(summarize_by_object(labelled)));

  server.stop();
  fs::remove_all(dir);
  return {equal == checks,
          fmt("%d/%d fixture outputs equal the direct library result (CLI in-process and as a "
              "process, service in-process and over localhost HTTP)",
              equal, checks)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli_path = argc > 1 ? argv[1] : "direct6d";
  const std::vector<Criterion> criteria{
      {"rotation round trip", 1.0, rotation_round_trip},
      {"orthogonality of the abc rotation", 1.0, orthogonality},
      {"gradient audit", 5.0, gradient_audit},
      {"PnP-free recovery", 30.0, pnp_free_recovery},
      {"noise analog", 60.0, noise_analog},
      {"annotation round trip", 30.0, annotation_round_trip},
      {"region codec", 1.0, region_codec},
      {"ground-truth IO", 0.0, ground_truth_io},
      {"performance budget", 0.0, performance},
      {"delegation equality", 0.0, [&] { return delegation(cli_path); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s == 0.0 || elapsed < c.budget_s;
    const bool pass = outcome.pass && in_time;
    failures += pass ? 0 : 1;
    std::string timing = fmt("%.2f s", elapsed);
    if (c.budget_s > 0.0) timing += fmt(" of %.0f s", c.budget_s);
    if (!in_time) timing += ", OVER TIME BUDGET";
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.name << ": " << outcome.detail << " ["
              << timing << "]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

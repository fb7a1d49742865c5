#include "direct6d/app/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "direct6d/app/service.hpp"
#include "direct6d/error.hpp"
#include "direct6d/evalkit.hpp"
#include "direct6d/json_io.hpp"
#include "direct6d/pose_optimizer.hpp"

namespace direct6d::app {

namespace {

namespace fs = std::filesystem;
using json_io::Json;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

// Writes to `path`, or to `out` when the path is empty.
void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty()) {
    out << text;
  } else {
    write_text(path, text);
  }
}

// Runs one service route in-process so the CLI and the service share a
// single dispatch path. Returns the result, or throws the reported error.
struct RouteFailure {
  int status;
  Json error;
};

Json call(const ServiceConfig& cfg, std::string_view path, const Json& body) {
  const HttpResponse res = handle_request(cfg, "POST", path, body.dump());
  Json parsed = Json::parse(res.body);
  if (res.status != 200) throw RouteFailure{res.status, parsed.at("error")};
  return parsed.at("result");
}

int exit_for(const RouteFailure& f) {
  return f.status == 422 ? kExitNoConvergence : kExitInput;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

std::set<std::string> stems_in(const fs::path& dir) {
  std::set<std::string> stems;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".rot") {
      stems.insert(entry.path().stem().string());
    }
  }
  return stems;
}

struct FitArgs {
  std::string scene;
  std::string input;
  std::string init;
  std::string space = "direct";
  std::string grid_config;
  std::string pred_dir;
  std::string output;
  int max_iters = 0;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  ServiceConfig cfg;
  if (!a.grid_config.empty()) cfg.grid = load_grid_config(a.grid_config);
  Json body;
  std::string stem = "pose";
  if (!a.input.empty()) {
    body = json_io::parse(read_text(a.input));
    if (!body.is_object()) throw Error(ErrorCode::SchemaViolation, "fit input must be an object");
    stem = fs::path(a.input).stem().string();
  } else {
    const SyntheticScene scene = json_io::decode_scene(json_io::parse(read_text(a.scene)));
    body = {{"K", json_io::encode(scene.K)},
            {"corners", json_io::encode_points(std::span<const Vec3>(scene.corners))},
            {"target", json_io::encode_points(std::span<const Vec2>(scene.observed))}};
    if (scene.grid && a.grid_config.empty()) cfg.grid = *scene.grid;
    stem = fs::path(a.scene).stem().string();
  }
  if (!a.init.empty()) body["init"] = json_io::parse(read_text(a.init));
  if (a.space != "direct" || !body.contains("param_space")) body["param_space"] = a.space;
  if (a.max_iters > 0) {
    if (!body.contains("config")) body["config"] = Json::object();
    body["config"]["max_iters"] = a.max_iters;
  }

  const Json report = call(cfg, "/fit", body);
  emit(out, a.output, json_io::dump(report) + "\n");
  if (!a.pred_dir.empty()) {
    fs::create_directories(a.pred_dir);
    const Pose pose = json_io::decode_pose(report.at("final_pose"));
    write_ground_truth(fs::path(a.pred_dir) / (stem + ".rot"),
                       fs::path(a.pred_dir) / (stem + ".tra"), pose.rotation_matrix(),
                       pose.translation * 100.0);
  }
  return report.at("converged").get<bool>() ? kExitOk : kExitNoConvergence;
}

struct GenArgs {
  std::uint64_t seed = 0;
  int count = 1;
  std::string out_dir;
  std::string grid_config;
  SceneRanges ranges;
};

int cmd_gen(GenArgs a, std::ostream& out) {
  if (a.count < 0) throw Error(ErrorCode::InvalidArgument, "count must be >= 0");
  if (!a.grid_config.empty()) {
    a.ranges.grid = load_grid_config(a.grid_config);
    a.ranges.image_width = a.ranges.grid->image_width;
    a.ranges.image_height = a.ranges.grid->image_height;
  }
  a.ranges.validate();
  fs::create_directories(a.out_dir);
  for (int i = 0; i < a.count; ++i) {
    const SyntheticScene scene = generate_scene(a.seed + static_cast<std::uint64_t>(i), a.ranges);
    char stem[64];
    std::snprintf(stem, sizeof stem, "%06d", i);
    const fs::path base = fs::path(a.out_dir) / (a.ranges.object + "_" + stem);
    write_text(base.string() + ".json", json_io::dump(json_io::encode(scene)) + "\n");
    write_ground_truth(base.string() + ".rot", base.string() + ".tra",
                       scene.true_pose.rotation_matrix(), scene.true_pose.translation * 100.0);
  }
  out << "wrote " << a.count << " scenes to " << a.out_dir << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::string csv;
  std::string summary;
  std::vector<double> dims;
  std::vector<double> intrinsics;
  double threshold = kPixelThreshold;
  double unit = 0.01;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const std::set<std::string> pred = stems_in(a.pred_dir);
  const std::set<std::string> gt = stems_in(a.gt_dir);
  std::vector<std::string> unmatched;
  for (const auto& s : pred) {
    if (!gt.count(s)) unmatched.push_back(s + " (prediction only)");
  }
  for (const auto& s : gt) {
    if (!pred.count(s)) unmatched.push_back(s + " (ground truth only)");
  }
  if (pred.empty() && gt.empty()) {
    err << "no .rot files in either directory\n";
    return kExitUnmatched;
  }
  if (!unmatched.empty()) {
    for (const auto& s : unmatched) err << "unmatched: " << s << "\n";
    return kExitUnmatched;
  }

  CameraIntrinsics default_K = kLineModIntrinsics;
  if (!a.intrinsics.empty()) {
    default_K = {a.intrinsics[0], a.intrinsics[1], a.intrinsics[2], a.intrinsics[3]};
  }
  std::vector<std::pair<std::string, PoseErrorReport>> labelled;
  for (const auto& stem : gt) {
    const fs::path g = fs::path(a.gt_dir) / stem, p = fs::path(a.pred_dir) / stem;
    const GroundTruthPoseFile truth =
        load_ground_truth(g.string() + ".rot", g.string() + ".tra", a.unit);
    const GroundTruthPoseFile guess =
        load_ground_truth(p.string() + ".rot", p.string() + ".tra", a.unit);

    CameraIntrinsics K = default_K;
    ModelCorners corners;
    std::string object = stem.substr(0, stem.rfind('_'));
    const fs::path scene_path = g.string() + ".json";
    if (fs::exists(scene_path)) {
      const SyntheticScene scene = json_io::decode_scene(json_io::parse(read_text(scene_path)));
      K = scene.K;
      corners = scene.corners;
      object = scene.object;
    } else if (!a.dims.empty()) {
      corners = box_corners({a.dims[0], a.dims[1], a.dims[2]});
    } else {
      throw Error(ErrorCode::IoError, "no " + scene_path.string() + " and no --dims");
    }
    const Pose truth_pose{rotation_to_abc(truth.rotation), truth.translation};
    const Pose guess_pose{rotation_to_abc(guess.rotation), guess.translation};
    labelled.emplace_back(object, evaluate(K, guess_pose, truth_pose, corners, a.threshold));
  }

  const std::vector<AccuracyRow> rows = summarize_by_object(labelled);
  emit(out, a.csv, accuracy_csv(rows));
  if (!a.summary.empty()) {
    Json table = Json::array();
    for (const auto& row : rows) {
      table.push_back({{"object", row.object},
                       {"count", row.count},
                       {"avg_pixel_error", row.mean_pixel_error},
                       {"acc_5px", row.accuracy_5px},
                       {"e_TE_cm", row.e_te_cm},
                       {"e_RE_deg", row.e_re_deg}});
    }
    write_text(a.summary, json_io::dump({{"threshold_px", a.threshold}, {"rows", table}}) + "\n");
  }
  return kExitOk;
}

struct AnnotationArgs {
  std::string input;
  std::string output;
};

int cmd_solve_annotation(const AnnotationArgs& a, std::ostream& out) {
  const ServiceConfig cfg;
  const Json body = json_io::parse(read_text(a.input));
  if (!body.is_object()) throw Error(ErrorCode::SchemaViolation, "input must be an object");
  Json rot_req = {{"K", body.value("K", Json())}, {"axes", body.value("axes", Json())}};
  if (body.contains("init")) rot_req["init"] = body.at("init");
  const Json rotation = call(cfg, "/solve/rotation", rot_req);

  Json tra_req = {{"K", body.value("K", Json())},
                  {"rotation", rotation.at("R")},
                  {"dims", body.value("dims", Json())},
                  {"box", body.value("box", Json())}};
  if (body.contains("t_init")) tra_req["t_init"] = body.at("t_init");
  const Json translation = call(cfg, "/solve/translation", tra_req);

  const Json result = {{"rotation", rotation},
                       {"translation", translation},
                       {"pose",
                        {{"rotation", rotation.at("rotation")},
                         {"translation", translation.at("translation")}}}};
  emit(out, a.output, json_io::dump(result) + "\n");
  return kExitOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string grid_config;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  ServiceConfig cfg;
  if (!a.grid_config.empty()) cfg.grid = load_grid_config(a.grid_config);
  const int port = a.port > 0 ? a.port : default_port();
  Server server(cfg);
  out << "listening on " << a.host << ":" << port << std::endl;
  return server.listen(a.host, port) ? kExitOk : kExitInput;
}

int dispatch(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const RouteFailure& f) {
    err << f.error.dump() << "\n";
    return exit_for(f);
  } catch (const Error& e) {
    err << to_string(e.code()) << ": " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::SchemaViolation:
      case ErrorCode::ParseError:
      case ErrorCode::IoError:
      case ErrorCode::InvalidArgument:
      case ErrorCode::LengthMismatch:
      case ErrorCode::NonOrthonormal:
        return kExitInput;
      default:
        return kExitNoConvergence;
    }
  } catch (const fs::filesystem_error& e) {
    err << "IoError: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace

BenchReport run_bench(int trials, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  trials = std::max(trials, 1);
  SceneRanges ranges;
  ranges.grid = GridDecodeConfig{};
  ranges.image_width = ranges.grid->image_width;
  ranges.image_height = ranges.grid->image_height;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto unit_vector = [&] {
    Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    while (v.norm() < 1e-9) v = Vec3(gauss(rng), gauss(rng), gauss(rng));
    return Vec3(v.normalized());
  };

  constexpr int kReps = 16;
  std::vector<double> decode_us, fit_ms;
  int converged = 0;
  double sink = 0.0;
  for (int i = 0; i < trials; ++i) {
    const SyntheticScene scene = generate_scene(seed + static_cast<std::uint64_t>(i), ranges);
    const auto t0 = Clock::now();
    for (int r = 0; r < kReps; ++r) {
      const Pose pose = decode_pose(*scene.grid, scene.K, *scene.cell);
      sink += project(scene.K, pose, scene.corners)[0].x();
    }
    const auto t1 = Clock::now();
    decode_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count() / kReps);

    const Mat3 R = axis_angle_rotation(unit_vector(), 10.0 * std::numbers::pi / 180.0) *
                   scene.true_pose.rotation_matrix();
    const Pose init{rotation_to_abc(R), scene.true_pose.translation + 0.1 * unit_vector()};
    const auto t2 = Clock::now();
    const FitReport fit = fit_pose(scene.K, scene.corners, scene.pts, init);
    const auto t3 = Clock::now();
    fit_ms.push_back(std::chrono::duration<double, std::milli>(t3 - t2).count());
    converged += fit.converged ? 1 : 0;
  }
  if (sink == 42.0) decode_us.push_back(0.0);  // keeps the timed loop observable
  return {trials, median(decode_us), median(fit_ms),
          static_cast<double>(converged) / static_cast<double>(trials)};
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"direct6d: direct 6D pose fitting, annotation solving and evaluation"};
  app.name("direct6d");
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a pose to observed corner projections");
  auto* fit_scene = fit->add_option("--scene", fit_args.scene, "Scene JSON written by gen");
  auto* fit_input = fit->add_option("--input", fit_args.input, "Request JSON as for POST /fit");
  fit_scene->excludes(fit_input);
  fit->add_option("--init", fit_args.init, "Initial pose JSON (cold start when absent)");
  fit->add_option("--space", fit_args.space, "Parameter space")
      ->check(CLI::IsMember({"direct", "region"}));
  fit->add_option("--grid-config", fit_args.grid_config, "GridDecodeConfig JSON");
  fit->add_option("--max-iters", fit_args.max_iters, "Iteration budget")
      ->check(CLI::PositiveNumber);
  fit->add_option("--pred-dir", fit_args.pred_dir, "Also write <stem>.rot/.tra here (cm)");
  fit->add_option("-o,--output", fit_args.output, "Report path (stdout when absent)");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "Generate synthetic scenes and ground truth");
  gen->add_option("--seed", gen_args.seed, "First scene seed");
  gen->add_option("--count", gen_args.count, "Number of scenes");
  gen->add_option("--out", gen_args.out_dir, "Output directory")->required();
  gen->add_option("--noise", gen_args.ranges.noise_sigma, "Corner noise sigma (px)");
  gen->add_option("--object", gen_args.ranges.object, "Object name used in file stems");
  gen->add_option("--depth-min", gen_args.ranges.depth_min, "Meters");
  gen->add_option("--depth-max", gen_args.ranges.depth_max, "Meters");
  gen->add_option("--extent-min", gen_args.ranges.extent_min, "Box side, meters");
  gen->add_option("--extent-max", gen_args.ranges.extent_max, "Box side, meters");
  gen->add_option("--max-angle", gen_args.ranges.max_angle_deg, "Degrees, at most 175");
  gen->add_option("--grid-config", gen_args.grid_config, "Encode cells on this grid");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score predicted poses against ground truth");
  eval->add_option("--pred", eval_args.pred_dir, "Directory of predicted .rot/.tra")->required();
  eval->add_option("--gt", eval_args.gt_dir, "Directory of ground-truth .rot/.tra")->required();
  eval->add_option("--csv", eval_args.csv, "CSV path (stdout when absent)");
  eval->add_option("--json", eval_args.summary, "Summary JSON path");
  eval->add_option("--dims", eval_args.dims, "Box length width height when no scene JSON")
      ->expected(3);
  eval->add_option("--intrinsics", eval_args.intrinsics, "fx fy cx cy when no scene JSON")
      ->expected(4);
  eval->add_option("--threshold", eval_args.threshold, "Pixel threshold");
  eval->add_option("--unit", eval_args.unit, "Meters per translation file unit");

  AnnotationArgs ann_args;
  auto* ann = app.add_subcommand("solve-annotation", "Pose from drawn axes and a 2D box");
  ann->add_option("--input", ann_args.input, "Annotation JSON")->required();
  ann->add_option("-o,--output", ann_args.output, "Result path (stdout when absent)");

  int bench_trials = 100;
  auto* bench = app.add_subcommand("bench", "Median timings of decode+project and a full fit");
  bench->add_option("--trials", bench_trials, "Number of trials")->check(CLI::PositiveNumber);

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", serve_args.host, "Bind address");
  serve->add_option("--port", serve_args.port, "Port (DIRECT6D_PORT or 8080 when absent)");
  serve->add_option("--grid-config", serve_args.grid_config, "GridDecodeConfig defaults");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (*fit && fit_args.scene.empty() && fit_args.input.empty()) {
      throw CLI::RequiredError("--scene or --input");
    }
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitInput;
  }

  if (*fit) return dispatch([&] { return cmd_fit(fit_args, out); }, err);
  if (*gen) return dispatch([&] { return cmd_gen(gen_args, out); }, err);
  if (*eval) return dispatch([&] { return cmd_eval(eval_args, out, err); }, err);
  if (*ann) return dispatch([&] { return cmd_solve_annotation(ann_args, out); }, err);
  if (*bench) {
    const BenchReport r = run_bench(bench_trials);
    out << json_io::dump({{"trials", r.trials},
                          {"decode_project_median_us", r.decode_project_median_us},
                          {"fit_median_ms", r.fit_median_ms},
                          {"fit_converged_fraction", r.fit_converged_fraction}})
        << "\n";
    return kExitOk;
  }
  return dispatch([&] { return cmd_serve(serve_args, out); }, err);
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace direct6d::app

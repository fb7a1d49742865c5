#include "direct6d/json_io.hpp"

#include <cmath>
#include <string>

#include "direct6d/error.hpp"

namespace direct6d::json_io {

namespace {

[[noreturn]] void schema(const std::string& message) {
  throw Error(ErrorCode::SchemaViolation, message);
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) schema(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) schema(std::string("missing field '") + key + "'");
  return *it;
}

double as_number(const Json& j, const std::string& what) {
  if (!j.is_number()) schema("field '" + what + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema("field '" + what + "' must be finite");
  return v;
}

int as_int(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) schema("field '" + what + "' must be an integer");
  return j.get<int>();
}

const Json& array_of(const Json& j, std::size_t n, const std::string& what) {
  if (!j.is_array() || (n != 0 && j.size() != n)) {
    schema("field '" + what + "' must be an array" +
           (n ? " of " + std::to_string(n) + " values" : std::string()));
  }
  return j;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string_view side_name(BoxSide side) {
  switch (side) {
    case BoxSide::Left: return "L";
    case BoxSide::Right: return "R";
    case BoxSide::Top: return "T";
    case BoxSide::Bottom: return "B";
  }
  return "?";
}

}  // namespace

Json encode(const AbcRotation& r) { return {{"a", r.a}, {"b", r.b}, {"c", r.c}}; }

Json encode_rotation_matrix(const RotationMatrix& R) {
  Json out = Json::array();
  for (double v : to_row_major(R)) out.push_back(v);
  return out;
}

Json encode(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}};
}

Json encode(const Pose& pose) {
  return {{"rotation", encode(pose.rotation)}, {"translation", encode(pose.translation)}};
}

Json encode(const Vec2& p) { return Json::array({p.x(), p.y()}); }
Json encode(const Vec3& p) { return Json::array({p.x(), p.y(), p.z()}); }

Json encode_points(std::span<const Vec2> pts) {
  Json out = Json::array();
  for (const auto& p : pts) out.push_back(encode(p));
  return out;
}

Json encode_points(std::span<const Vec3> pts) {
  Json out = Json::array();
  for (const auto& p : pts) out.push_back(encode(p));
  return out;
}

Json encode(const BoxDims& dims) {
  return {{"length", dims.length}, {"width", dims.width}, {"height", dims.height}};
}

Json encode(const GridDecodeConfig& cfg) {
  return {{"image_width", cfg.image_width},   {"image_height", cfg.image_height},
          {"grid_cols", cfg.grid_cols},       {"grid_rows", cfg.grid_rows},
          {"sigmoid_span", cfg.sigmoid_span}, {"depth_base", cfg.depth_base},
          {"num_anchors", cfg.num_anchors},   {"num_classes", cfg.num_classes}};
}

Json encode(const RegionCellOutput& cell) {
  return {{"cell_col", cell.cell_col},
          {"cell_row", cell.cell_row},
          {"anchor", cell.anchor},
          {"box2d", cell.box2d},
          {"tu", cell.tu},
          {"tv", cell.tv},
          {"tw", cell.tw},
          {"abc", encode(cell.abc)},
          {"conf", cell.conf},
          {"class_scores", cell.class_scores}};
}

Json encode(const FitConfig& cfg) {
  return {{"max_iters", cfg.max_iters},
          {"initial_lambda", cfg.initial_lambda},
          {"lambda_up", cfg.lambda_up},
          {"lambda_down", cfg.lambda_down},
          {"convergence_tol", cfg.convergence_tol},
          {"loss_floor", cfg.loss_floor},
          {"param_space", cfg.param_space == ParamSpace::DirectPose ? "direct_pose"
                                                                    : "region_channels"}};
}

Json encode(const FitReport& report) {
  Json trace = Json::array();
  for (double v : report.loss_trace) trace.push_back(number_or_null(v));
  return {{"final_pose", encode(report.final_pose)},
          {"final_loss", number_or_null(report.final_loss)},
          {"iters", report.iters},
          {"converged", report.converged},
          {"status", std::string(to_string(report.status))},
          {"loss_trace", trace},
          {"reparameterizations", report.reparameterizations}};
}

Json encode(const RegionFitReport& report) {
  Json out = encode(report.report);
  out["channels"] = encode(report.channels);
  return out;
}

Json encode(const PoseErrorReport& r) {
  return {{"mean_pixel_error", r.mean_pixel_error},
          {"max_pixel_error", r.max_pixel_error},
          {"e_TE_cm", r.e_te_cm},
          {"e_RE_deg", r.e_re_deg},
          {"within_5px", r.within_5px}};
}

Json encode(const SyntheticScene& s) {
  Json out = {{"seed", s.seed},
              {"object", s.object},
              {"K", encode(s.K)},
              {"image_width", s.image_width},
              {"image_height", s.image_height},
              {"true_pose", encode(s.true_pose)},
              {"dims", encode(s.dims)},
              {"corners", encode_points(std::span<const Vec3>(s.corners))},
              {"pts", encode_points(std::span<const Vec2>(s.pts))},
              {"noise_sigma", s.noise_sigma},
              {"observed", encode_points(std::span<const Vec2>(s.observed))}};
  if (s.grid) out["grid"] = encode(*s.grid);
  if (s.cell) out["cell"] = encode(*s.cell);
  return out;
}

Json encode(const ImageLine& line) {
  return {{"la", line.la}, {"lb", line.lb}, {"lc", line.lc}};
}

Json encode(const AxisAnnotation& ann) {
  Json out = Json::array();
  for (const auto& axis : ann.axes) {
    Json entry{{"dir", encode(axis.dir)}, {"line", encode(axis.line)}};
    if (axis.tip) entry["tip"] = encode(*axis.tip);
    out.push_back(std::move(entry));
  }
  return out;
}

Json encode(const BoxEdges& box) {
  return {{"l", box.left}, {"r", box.right}, {"t", box.top}, {"b", box.bottom}};
}

Json encode(const BoxTangency& tangency) {
  Json out = Json::array();
  for (const auto& row : tangency.rows) {
    out.push_back({{"side", std::string(side_name(row.side))},
                   {"edge_coord", row.edge_coord},
                   {"model_point", encode(row.model_point)}});
  }
  return out;
}

Json encode(const RotationSolveResult& result) {
  return {{"rotation", encode(result.rotation)},
          {"R", encode_rotation_matrix(abc_to_rotation(result.rotation))},
          {"residual", result.residual},
          {"converged", result.converged},
          {"iterations", result.iterations},
          {"starts", result.starts}};
}

Json encode(const TangentAssignment& a) {
  return {{"translation", encode(a.translation)},
          {"corner_index", a.corner_index},
          {"tangency", encode(a.tangency)},
          {"iterations", a.iterations},
          {"fixed_point", a.fixed_point}};
}

double number(const Json& j, const char* key) { return as_number(field(j, key), key); }

double number_or(const Json& j, const char* key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_number(j.at(key), key);
}

AbcRotation decode_abc(const Json& j) {
  return {number(j, "a"), number(j, "b"), number(j, "c")};
}

RotationMatrix decode_rotation_matrix(const Json& j) {
  array_of(j, 9, "R");
  std::array<double, 9> v{};
  for (std::size_t i = 0; i < 9; ++i) v[i] = as_number(j[i], "R");
  return from_row_major(v);
}

RotationMatrix decode_any_rotation(const Json& j) {
  if (j.is_array()) return decode_rotation_matrix(j);
  return abc_to_rotation(decode_abc(j));
}

CameraIntrinsics decode_intrinsics(const Json& j) {
  CameraIntrinsics K{number(j, "fx"), number(j, "fy"), number(j, "cx"), number(j, "cy")};
  if (!K.is_valid()) schema("intrinsics need fx > 0 and fy > 0");
  return K;
}

Pose decode_pose(const Json& j) {
  const Json& rot = field(j, "rotation");
  Pose pose;
  pose.rotation = rot.is_array() ? rotation_to_abc(decode_rotation_matrix(rot))
                                 : decode_abc(rot);
  pose.translation = decode_vec3(field(j, "translation"));
  return pose;
}

Vec2 decode_vec2(const Json& j) {
  array_of(j, 2, "point");
  return {as_number(j[0], "point"), as_number(j[1], "point")};
}

Vec3 decode_vec3(const Json& j) {
  array_of(j, 3, "vector");
  return {as_number(j[0], "vector"), as_number(j[1], "vector"), as_number(j[2], "vector")};
}

ProjectedPoints decode_points2(const Json& j) {
  array_of(j, 0, "points");
  ProjectedPoints out;
  for (const auto& p : j) out.push_back(decode_vec2(p));
  return out;
}

ModelCorners decode_points3(const Json& j) {
  array_of(j, 0, "corners");
  ModelCorners out;
  for (const auto& p : j) out.push_back(decode_vec3(p));
  return out;
}

BoxDims decode_dims(const Json& j) {
  BoxDims dims{number(j, "length"), number(j, "width"), number(j, "height")};
  if (!(dims.length > 0.0 && dims.width > 0.0 && dims.height > 0.0)) {
    schema("dims must be positive");
  }
  return dims;
}

GridDecodeConfig decode_grid_config(const Json& j, const GridDecodeConfig& defaults) {
  if (!j.is_object()) schema("grid config must be an object");
  GridDecodeConfig cfg = defaults;
  auto read_int = [&](const char* key, int& dst) {
    if (j.contains(key)) dst = as_int(j.at(key), key);
  };
  read_int("image_width", cfg.image_width);
  read_int("image_height", cfg.image_height);
  read_int("grid_cols", cfg.grid_cols);
  read_int("grid_rows", cfg.grid_rows);
  read_int("num_anchors", cfg.num_anchors);
  read_int("num_classes", cfg.num_classes);
  cfg.sigmoid_span = number_or(j, "sigmoid_span", cfg.sigmoid_span);
  cfg.depth_base = number_or(j, "depth_base", cfg.depth_base);
  try {
    cfg.validate();
  } catch (const Error& e) {
    schema(e.what());
  }
  return cfg;
}

RegionCellOutput decode_cell(const Json& j) {
  RegionCellOutput cell;
  cell.cell_col = as_int(field(j, "cell_col"), "cell_col");
  cell.cell_row = as_int(field(j, "cell_row"), "cell_row");
  cell.anchor = j.contains("anchor") ? as_int(j.at("anchor"), "anchor") : 0;
  if (j.contains("box2d")) {
    array_of(j.at("box2d"), 4, "box2d");
    for (std::size_t k = 0; k < 4; ++k) cell.box2d[k] = as_number(j.at("box2d")[k], "box2d");
  }
  cell.tu = number(j, "tu");
  cell.tv = number(j, "tv");
  cell.tw = number(j, "tw");
  cell.abc = decode_abc(field(j, "abc"));
  cell.conf = number_or(j, "conf", 0.0);
  if (j.contains("class_scores")) {
    array_of(j.at("class_scores"), 0, "class_scores");
    for (const auto& v : j.at("class_scores")) {
      cell.class_scores.push_back(as_number(v, "class_scores"));
    }
  }
  return cell;
}

FitConfig decode_fit_config(const Json& j, const FitConfig& defaults) {
  if (!j.is_object()) schema("fit config must be an object");
  FitConfig cfg = defaults;
  if (j.contains("max_iters")) cfg.max_iters = as_int(j.at("max_iters"), "max_iters");
  cfg.initial_lambda = number_or(j, "initial_lambda", cfg.initial_lambda);
  cfg.lambda_up = number_or(j, "lambda_up", cfg.lambda_up);
  cfg.lambda_down = number_or(j, "lambda_down", cfg.lambda_down);
  cfg.convergence_tol = number_or(j, "convergence_tol", cfg.convergence_tol);
  cfg.loss_floor = number_or(j, "loss_floor", cfg.loss_floor);
  if (j.contains("param_space")) {
    const Json& ps = j.at("param_space");
    if (ps == "direct_pose") {
      cfg.param_space = ParamSpace::DirectPose;
    } else if (ps == "region_channels") {
      cfg.param_space = ParamSpace::RegionChannels;
    } else {
      schema("param_space must be 'direct_pose' or 'region_channels'");
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    schema(e.what());
  }
  return cfg;
}

ImageLine decode_line(const Json& j) {
  const double a = number(j, "la"), b = number(j, "lb"), c = number(j, "lc");
  if (std::abs(a * a + b * b - 1.0) > 1e-9) schema("line must satisfy la^2 + lb^2 = 1");
  return {a, b, c};
}

AxisAnnotation decode_axes(const Json& j) {
  array_of(j, 3, "axes");
  AxisAnnotation ann;
  for (std::size_t i = 0; i < 3; ++i) {
    ann.axes[i].dir = decode_vec3(field(j[i], "dir"));
    ann.axes[i].line = decode_line(field(j[i], "line"));
    if (j[i].contains("tip")) ann.axes[i].tip = decode_vec2(j[i]["tip"]);
  }
  return ann;
}

BoxEdges decode_box(const Json& j) {
  BoxEdges box{number(j, "l"), number(j, "r"), number(j, "t"), number(j, "b")};
  if (!(box.left <= box.right && box.top <= box.bottom)) {
    schema("box needs l <= r and t <= b");
  }
  return box;
}

SyntheticScene decode_scene(const Json& j) {
  SyntheticScene s;
  const Json& seed = field(j, "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) schema("seed must be an integer");
  s.seed = seed.get<std::uint64_t>();
  s.object = j.value("object", std::string("synthetic"));
  s.K = decode_intrinsics(field(j, "K"));
  s.image_width = as_int(field(j, "image_width"), "image_width");
  s.image_height = as_int(field(j, "image_height"), "image_height");
  s.true_pose = decode_pose(field(j, "true_pose"));
  s.dims = decode_dims(field(j, "dims"));
  s.corners = decode_points3(field(j, "corners"));
  s.pts = decode_points2(field(j, "pts"));
  s.noise_sigma = number(j, "noise_sigma");
  s.observed = decode_points2(field(j, "observed"));
  if (j.contains("grid")) s.grid = decode_grid_config(j.at("grid"));
  if (j.contains("cell")) s.cell = decode_cell(j.at("cell"));
  return s;
}

ModelCorners decode_corners_or_dims(const Json& body) {
  if (body.is_object() && body.contains("corners")) {
    return decode_points3(body.at("corners"));
  }
  return box_corners(decode_dims(field(body, "dims")));
}

Json parse(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    schema(std::string("malformed JSON: ") + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2); }

}  // namespace direct6d::json_io

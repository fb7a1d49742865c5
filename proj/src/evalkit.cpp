#include "direct6d/evalkit.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "direct6d/error.hpp"

namespace direct6d {

namespace {

struct Token {
  std::string_view text;
  std::size_t line;
  std::size_t column;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t line = 1, column = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char ch = text[i];
    if (ch == '\n') {
      ++line;
      column = 1;
      ++i;
    } else if (ch == ' ' || ch == '\t' || ch == '\r') {
      ++column;
      ++i;
    } else {
      const std::size_t start = i, start_col = column;
      while (i < text.size() && text[i] != ' ' && text[i] != '\t' &&
             text[i] != '\r' && text[i] != '\n') {
        ++i;
        ++column;
      }
      tokens.push_back({text.substr(start, i - start), line, start_col});
    }
  }
  return tokens;
}

double parse_real(const Token& token) {
  double value = 0.0;
  const char* first = token.text.data();
  const char* last = first + token.text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw ParseError("not a finite real: '" + std::string(token.text) + "'",
                     token.line, token.column);
  }
  return value;
}

bool is_integer(const Token& token) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(
      token.text.data(), token.text.data() + token.text.size(), value);
  return ec == std::errc{} && ptr == token.text.data() + token.text.size();
}

// Reads exactly `expected` values, skipping a leading two-integer header
// when present on the first line.
std::vector<double> parse_values(std::string_view text, std::size_t expected,
                                 std::string_view what) {
  const std::vector<Token> tokens = tokenize(text);
  std::size_t first = 0;
  if (tokens.size() >= 2 && tokens[0].line == tokens[1].line &&
      is_integer(tokens[0]) && is_integer(tokens[1]) &&
      (tokens.size() < 3 || tokens[2].line != tokens[0].line)) {
    first = 2;
  }
  const std::size_t count = tokens.size() - first;
  if (count != expected) {
    const Token at = count > expected ? tokens[first + expected]
                     : tokens.empty() ? Token{{}, 1, 1}
                                      : tokens.back();
    throw ParseError(std::string(what) + " file has " + std::to_string(count) +
                         " values, expected " + std::to_string(expected),
                     at.line, at.column);
  }
  std::vector<double> values;
  values.reserve(expected);
  for (std::size_t i = first; i < tokens.size(); ++i) {
    values.push_back(parse_real(tokens[i]));
  }
  return values;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

}  // namespace

PoseErrorReport evaluate(const CameraIntrinsics& K, const Pose& pred,
                         const Pose& gt, std::span<const Vec3> corners,
                         double threshold_px) {
  if (corners.empty()) throw Error(ErrorCode::InvalidArgument, "no corners to evaluate");
  const ProjectedPoints a = project(K, pred, corners);
  const ProjectedPoints b = project(K, gt, corners);
  PoseErrorReport report;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]).norm();
    report.mean_pixel_error += d;
    report.max_pixel_error = std::max(report.max_pixel_error, d);
  }
  report.mean_pixel_error /= static_cast<double>(a.size());
  report.e_te_cm = (pred.translation - gt.translation).norm() * 100.0;
  report.e_re_deg =
      rotation_angle_between(pred.rotation_matrix(), gt.rotation_matrix());
  report.within_5px = report.mean_pixel_error < threshold_px;
  return report;
}

double accuracy_over_set(std::span<const PoseErrorReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptySet, "no reports to score");
  std::size_t hits = 0;
  for (const auto& r : reports) hits += r.within_5px ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(reports.size());
}

void SceneRanges::validate() const {
  const bool ok = K.is_valid() && image_width > 0 && image_height > 0 &&
                  depth_min > 0.0 && depth_max >= depth_min &&
                  max_angle_deg >= 0.0 && max_angle_deg < 175.0 + 1e-12 &&
                  extent_min > 0.0 && extent_max >= extent_min &&
                  image_margin >= 0.0 && image_margin < 0.5 && noise_sigma >= 0.0 &&
                  extent_max * std::sqrt(3.0) < depth_min;
  if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid scene ranges");
  if (grid) {
    grid->validate();
    if (grid->image_width != image_width || grid->image_height != image_height) {
      throw Error(ErrorCode::InvalidArgument, "grid image size differs from scene image size");
    }
  }
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneRanges& ranges) {
  ranges.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SyntheticScene scene;
  scene.seed = seed;
  scene.object = ranges.object;
  scene.K = ranges.K;
  scene.image_width = ranges.image_width;
  scene.image_height = ranges.image_height;
  scene.noise_sigma = ranges.noise_sigma;
  scene.grid = ranges.grid;

  Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
  while (axis.norm() < 1e-9) axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
  axis.normalize();
  const double angle = uniform(0.0, ranges.max_angle_deg) * std::numbers::pi / 180.0;
  scene.true_pose.rotation = AbcRotation::from_vec(axis * std::tan(0.5 * angle));

  const double depth = uniform(ranges.depth_min, ranges.depth_max);
  const double m = ranges.image_margin;
  const Vec2 origin_px(uniform(m, 1.0 - m) * ranges.image_width,
                       uniform(m, 1.0 - m) * ranges.image_height);
  const Vec2 ray = ranges.K.normalize(origin_px);
  scene.true_pose.translation = Vec3(depth * ray.x(), depth * ray.y(), depth);

  scene.dims = {uniform(ranges.extent_min, ranges.extent_max),
                uniform(ranges.extent_min, ranges.extent_max),
                uniform(ranges.extent_min, ranges.extent_max)};
  scene.corners = box_corners(scene.dims);
  scene.pts = project(scene.K, scene.true_pose, scene.corners);
  scene.observed = scene.pts;
  if (ranges.noise_sigma > 0.0) {
    for (auto& p : scene.observed) {
      p += ranges.noise_sigma * Vec2(gauss(rng), gauss(rng));
    }
  }
  if (ranges.grid) scene.cell = encode_pose(*ranges.grid, scene.K, scene.true_pose);
  return scene;
}

std::string audit_scene(const SyntheticScene& scene) {
  if (!scene.K.is_valid()) return "invalid intrinsics";
  if (!scene.true_pose.rotation.is_finite()) return "non-finite rotation";
  if (scene.corners.size() != scene.pts.size() ||
      scene.pts.size() != scene.observed.size()) {
    return "corner / point counts differ";
  }
  ProjectedPoints expected;
  try {
    expected = project(scene.K, scene.true_pose, scene.corners);
  } catch (const Error& e) {
    return e.what();
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] != scene.pts[i]) return "pts do not reproduce the projection";
  }
  if (scene.noise_sigma == 0.0 && scene.observed != scene.pts) {
    return "noiseless scene has perturbed observations";
  }
  if (scene.cell) {
    if (!scene.grid) return "encoded cell without grid config";
    const Pose decoded = decode_pose(*scene.grid, scene.K, *scene.cell);
    if ((decoded.translation - scene.true_pose.translation).cwiseAbs().maxCoeff() > 1e-9) {
      return "encoded cell does not decode to the true pose";
    }
  }
  return {};
}

GroundTruthPoseFile parse_ground_truth(std::string_view rot_text,
                                       std::string_view tra_text,
                                       double unit_to_meters) {
  const std::vector<double> r = parse_values(rot_text, 9, "rotation");
  const std::vector<double> t = parse_values(tra_text, 3, "translation");
  GroundTruthPoseFile out;
  out.unit_to_meters = unit_to_meters;
  out.raw_rotation = from_row_major({r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]});
  out.raw_translation = Vec3(t[0], t[1], t[2]);
  const double drift =
      (out.raw_rotation.transpose() * out.raw_rotation - Mat3::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (drift > 1e-2 || out.raw_rotation.determinant() <= 0.0) {
    throw Error(ErrorCode::NonOrthonormal,
                "rotation file is not a rotation (|R^T R - I| = " +
                    std::to_string(drift) + ")");
  }
  out.rotation = nearest_rotation(out.raw_rotation);
  out.translation = out.raw_translation * unit_to_meters;
  return out;
}

GroundTruthPoseFile load_ground_truth(const std::filesystem::path& rot_path,
                                      const std::filesystem::path& tra_path,
                                      double unit_to_meters) {
  return parse_ground_truth(read_file(rot_path), read_file(tra_path), unit_to_meters);
}

std::string format_rotation_file(const RotationMatrix& R) {
  std::string out = "3 3\n";
  for (int row = 0; row < 3; ++row) {
    out += format_real(R(row, 0)) + " " + format_real(R(row, 1)) + " " +
           format_real(R(row, 2)) + "\n";
  }
  return out;
}

std::string format_translation_file(const Vec3& t) {
  return "3 1\n" + format_real(t.x()) + "\n" + format_real(t.y()) + "\n" +
         format_real(t.z()) + "\n";
}

void write_ground_truth(const std::filesystem::path& rot_path,
                        const std::filesystem::path& tra_path,
                        const RotationMatrix& R, const Vec3& translation_file_units) {
  write_file(rot_path, format_rotation_file(R));
  write_file(tra_path, format_translation_file(translation_file_units));
}

std::vector<AccuracyRow> summarize_by_object(
    std::span<const std::pair<std::string, PoseErrorReport>> labelled) {
  if (labelled.empty()) throw Error(ErrorCode::EmptySet, "no reports to summarize");
  std::map<std::string, std::vector<PoseErrorReport>> groups;
  for (const auto& [name, report] : labelled) groups[name].push_back(report);

  std::vector<AccuracyRow> rows;
  AccuracyRow average{"average", 0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& [name, reports] : groups) {
    AccuracyRow row{name, reports.size(), 0.0, 0.0, 0.0, 0.0};
    for (const auto& r : reports) {
      row.mean_pixel_error += r.mean_pixel_error;
      row.e_te_cm += r.e_te_cm;
      row.e_re_deg += r.e_re_deg;
    }
    const double n = static_cast<double>(reports.size());
    row.mean_pixel_error /= n;
    row.e_te_cm /= n;
    row.e_re_deg /= n;
    row.accuracy_5px = accuracy_over_set(reports);
    average.count += row.count;
    average.mean_pixel_error += row.mean_pixel_error;
    average.accuracy_5px += row.accuracy_5px;
    average.e_te_cm += row.e_te_cm;
    average.e_re_deg += row.e_re_deg;
    rows.push_back(row);
  }
  const double k = static_cast<double>(rows.size());
  average.mean_pixel_error /= k;
  average.accuracy_5px /= k;
  average.e_te_cm /= k;
  average.e_re_deg /= k;
  rows.push_back(average);
  return rows;
}

std::string accuracy_csv(std::span<const AccuracyRow> rows) {
  std::string out = "object,count,avg_pixel_error,acc_5px,e_TE_cm,e_RE_deg\n";
  for (const auto& row : rows) {
    out += row.object + "," + std::to_string(row.count) + "," +
           format_real(row.mean_pixel_error) + "," + format_real(row.accuracy_5px) +
           "," + format_real(row.e_te_cm) + "," + format_real(row.e_re_deg) + "\n";
  }
  return out;
}

}  // namespace direct6d

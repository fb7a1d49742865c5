#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "direct6d/projection.hpp"
#include "direct6d/region_codec.hpp"

namespace direct6d {

struct PoseErrorReport {
  double mean_pixel_error = 0.0;  // pixels, mean over corners
  double max_pixel_error = 0.0;   // pixels, worst corner
  double e_te_cm = 0.0;
  double e_re_deg = 0.0;
  bool within_5px = false;  // mean_pixel_error < threshold
};

inline constexpr double kPixelThreshold = 5.0;

PoseErrorReport evaluate(const CameraIntrinsics& K, const Pose& pred,
                         const Pose& gt, std::span<const Vec3> corners,
                         double threshold_px = kPixelThreshold);

// Fraction of reports with within_5px set. Throws EmptySet.
double accuracy_over_set(std::span<const PoseErrorReport> reports);

// LineMod Kinect intrinsics at 640x480.
inline constexpr CameraIntrinsics kLineModIntrinsics{572.4114, 573.57043, 325.2611,
                                                      242.04899};

struct SceneRanges {
  CameraIntrinsics K = kLineModIntrinsics;
  int image_width = 640;
  int image_height = 480;
  double depth_min = 0.6;
  double depth_max = 1.2;
  double max_angle_deg = 175.0;
  double extent_min = 0.1;  // per box side, meters
  double extent_max = 0.3;
  // The object origin projects inside the image shrunk by this fraction per side.
  double image_margin = 0.15;
  double noise_sigma = 0.0;  // pixels
  std::optional<GridDecodeConfig> grid;
  std::string object = "synthetic";

  void validate() const;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  std::string object;
  CameraIntrinsics K;
  int image_width = 0;
  int image_height = 0;
  Pose true_pose;
  BoxDims dims;
  ModelCorners corners;
  ProjectedPoints pts;       // exact projections
  double noise_sigma = 0.0;
  ProjectedPoints observed;  // pts plus noise (== pts when sigma is 0)
  std::optional<GridDecodeConfig> grid;
  std::optional<RegionCellOutput> cell;  // true pose encoded on `grid`
};

// Deterministic per (seed, ranges).
SyntheticScene generate_scene(std::uint64_t seed, const SceneRanges& ranges);

// Empty when the scene satisfies its invariants, else a description.
std::string audit_scene(const SyntheticScene& scene);

struct GroundTruthPoseFile {
  RotationMatrix rotation;      // nearest rotation to raw_rotation
  Vec3 translation;             // meters
  RotationMatrix raw_rotation;  // as stored
  Vec3 raw_translation;         // as stored, file units
  double unit_to_meters = 0.01;
};

// LineMod rot/tra text: optional "rows cols" header, then 9 (rot) or 3 (tra)
// whitespace separated reals. Throws ParseError with line/column, and
// NonOrthonormal when |R^T R - I|_inf > 1e-2.
GroundTruthPoseFile parse_ground_truth(std::string_view rot_text,
                                       std::string_view tra_text,
                                       double unit_to_meters = 0.01);
GroundTruthPoseFile load_ground_truth(const std::filesystem::path& rot_path,
                                      const std::filesystem::path& tra_path,
                                      double unit_to_meters = 0.01);

std::string format_rotation_file(const RotationMatrix& R);
std::string format_translation_file(const Vec3& translation_file_units);
void write_ground_truth(const std::filesystem::path& rot_path,
                        const std::filesystem::path& tra_path,
                        const RotationMatrix& R, const Vec3& translation_file_units);

// One row per object plus a trailing "average" row (mean of the object rows).
struct AccuracyRow {
  std::string object;
  std::size_t count = 0;
  double mean_pixel_error = 0.0;
  double accuracy_5px = 0.0;
  double e_te_cm = 0.0;
  double e_re_deg = 0.0;
};

std::vector<AccuracyRow> summarize_by_object(
    std::span<const std::pair<std::string, PoseErrorReport>> labelled);
std::string accuracy_csv(std::span<const AccuracyRow> rows);

}  // namespace direct6d

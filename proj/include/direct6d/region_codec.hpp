#pragma once

#include <array>
#include <span>
#include <vector>

#include "direct6d/projection.hpp"

namespace direct6d {

struct GridDecodeConfig {
  int image_width = 416;
  int image_height = 416;
  int grid_cols = 13;
  int grid_rows = 13;
  double sigmoid_span = 4.0;
  // Metric scale of exp(tw); the depth decoded from tw = 0.
  double depth_base = 1.0;
  int num_anchors = 5;
  int num_classes = 1;

  // Throws InvalidArgument on a violated invariant.
  void validate() const;
  // 4 box + 3 rotation + 3 translation + 1 confidence + classes.
  int channels_per_anchor() const { return 11 + num_classes; }
};

struct RegionCellOutput {
  int cell_col = 0;
  int cell_row = 0;
  int anchor = 0;
  std::array<double, 4> box2d{};  // raw x, y, w, h
  double tu = 0.0;
  double tv = 0.0;
  double tw = 0.0;
  AbcRotation abc;
  double conf = 0.0;
  std::vector<double> class_scores;
};

struct TranslationCode {
  int cell_col = 0;
  int cell_row = 0;
  double tu = 0.0;
  double tv = 0.0;
  double tw = 0.0;
};

// Decoded 2D box in pixels (center, size); display only.
struct Box2d {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;
};

double sigmoid(double x);
double logit(double p);

Vec3 decode_translation(const GridDecodeConfig& cfg, const CameraIntrinsics& K,
                        const RegionCellOutput& cell);

// d t / d (tu, tv, tw) for a fixed cell; columns are the three channels.
Mat3 translation_channel_jacobian(const GridDecodeConfig& cfg,
                                  const CameraIntrinsics& K,
                                  const RegionCellOutput& cell);

// Inverse of decode_translation. Picks the cell whose offset lands closest to
// the middle of the sigmoid range. Throws OutOfFrustum / UnencodableOffset.
TranslationCode encode_translation(const GridDecodeConfig& cfg,
                                   const CameraIntrinsics& K, const Vec3& t);

Pose decode_pose(const GridDecodeConfig& cfg, const CameraIntrinsics& K,
                 const RegionCellOutput& cell);

// Builds a cell whose pose channels decode to `pose`; other channels zero.
RegionCellOutput encode_pose(const GridDecodeConfig& cfg,
                             const CameraIntrinsics& K, const Pose& pose,
                             int anchor = 0);

Box2d decode_box2d(const GridDecodeConfig& cfg, const RegionCellOutput& cell);

// Highest confidence wins; ties go to the smallest (row, col, anchor).
// Throws EmptyGrid.
const RegionCellOutput& select_best_cell(std::span<const RegionCellOutput> grid);

// Flat tensor layout: channel-major (C, rows, cols) with
//   channel = anchor * channels_per_anchor + k,
//   k: 0-3 box2d, 4-6 abc, 7-9 tu tv tw, 10 conf, 11.. class scores.
// Cells come back ordered by (row, col, anchor). Throws GridSizeMismatch.
std::vector<RegionCellOutput> parse_grid(const GridDecodeConfig& cfg,
                                         std::span<const double> flat);
std::vector<double> flatten_grid(const GridDecodeConfig& cfg,
                                 std::span<const RegionCellOutput> cells);

}  // namespace direct6d

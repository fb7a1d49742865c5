#include "direct6d/region_codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "direct6d/error.hpp"

namespace direct6d {

namespace {

void check_cell(const GridDecodeConfig& cfg, const RegionCellOutput& cell) {
  if (cell.cell_col < 0 || cell.cell_col >= cfg.grid_cols || cell.cell_row < 0 ||
      cell.cell_row >= cfg.grid_rows || cell.anchor < 0 ||
      cell.anchor >= cfg.num_anchors) {
    throw Error(ErrorCode::InvalidArgument,
                "cell index (" + std::to_string(cell.cell_row) + ", " +
                    std::to_string(cell.cell_col) + ", " +
                    std::to_string(cell.anchor) + ") outside the grid");
  }
}

// Picks the integer cell in [0, n) whose offset fraction is closest to 0.5,
// among those with the fraction strictly inside (0, 1).
bool pick_cell(double grid_coord, int n, double span, int& cell, double& frac) {
  bool found = false;
  double best = std::numeric_limits<double>::infinity();
  // fraction in (0, 1)  <=>  c in (grid_coord - 0.5 - span, grid_coord - 0.5)
  const int lo = std::max(0, static_cast<int>(std::floor(grid_coord - 0.5 - span)));
  const int hi = std::min(n - 1, static_cast<int>(std::ceil(grid_coord - 0.5)));
  for (int c = lo; c <= hi; ++c) {
    const double f = (grid_coord - c - 0.5) / span;
    if (!(f > 0.0 && f < 1.0)) continue;
    const double score = std::abs(f - 0.5);
    if (score < best) {
      best = score;
      cell = c;
      frac = f;
      found = true;
    }
  }
  return found;
}

}  // namespace

void GridDecodeConfig::validate() const {
  if (image_width < 1 || image_height < 1 || grid_cols < 1 || grid_rows < 1 ||
      num_anchors < 1 || num_classes < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "grid config sizes and counts must be >= 1");
  }
  if (!(sigmoid_span > 0.0) || !(depth_base > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "sigmoid_span and depth_base must be positive");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

Vec3 decode_translation(const GridDecodeConfig& cfg, const CameraIntrinsics& K,
                        const RegionCellOutput& cell) {
  check_cell(cfg, cell);
  const double du = cfg.sigmoid_span * sigmoid(cell.tu);
  const double dv = cfg.sigmoid_span * sigmoid(cell.tv);
  const double z = cfg.depth_base * std::exp(cell.tw);
  const double u = cfg.image_width * (cell.cell_col + 0.5 + du) / cfg.grid_cols;
  const double v = cfg.image_height * (cell.cell_row + 0.5 + dv) / cfg.grid_rows;
  return {z * (u - K.cx) / K.fx, z * (v - K.cy) / K.fy, z};
}

Mat3 translation_channel_jacobian(const GridDecodeConfig& cfg,
                                  const CameraIntrinsics& K,
                                  const RegionCellOutput& cell) {
  const Vec3 t = decode_translation(cfg, K, cell);
  const double z = t.z();
  const double su = sigmoid(cell.tu);
  const double sv = sigmoid(cell.tv);
  Mat3 J = Mat3::Zero();
  J(0, 0) = z * cfg.image_width * cfg.sigmoid_span * su * (1.0 - su) /
            (cfg.grid_cols * K.fx);
  J(1, 1) = z * cfg.image_height * cfg.sigmoid_span * sv * (1.0 - sv) /
            (cfg.grid_rows * K.fy);
  J.col(2) = t;  // z = depth_base * exp(tw) scales t as a whole
  return J;
}

TranslationCode encode_translation(const GridDecodeConfig& cfg,
                                   const CameraIntrinsics& K, const Vec3& t) {
  if (!(t.z() > 0.0) || !t.allFinite()) {
    throw Error(ErrorCode::OutOfFrustum, "translation is not in front of the camera");
  }
  const double u = K.cx + K.fx * t.x() / t.z();
  const double v = K.cy + K.fy * t.y() / t.z();
  if (!(u >= 0.0 && u < cfg.image_width && v >= 0.0 && v < cfg.image_height)) {
    throw Error(ErrorCode::OutOfFrustum,
                "object origin projects outside the image at (" +
                    std::to_string(u) + ", " + std::to_string(v) + ")");
  }
  TranslationCode code;
  double fu = 0.0, fv = 0.0;
  const double gu = u * cfg.grid_cols / cfg.image_width;
  const double gv = v * cfg.grid_rows / cfg.image_height;
  if (!pick_cell(gu, cfg.grid_cols, cfg.sigmoid_span, code.cell_col, fu) ||
      !pick_cell(gv, cfg.grid_rows, cfg.sigmoid_span, code.cell_row, fv)) {
    throw Error(ErrorCode::UnencodableOffset,
                "no cell places the origin inside the sigmoid offset range");
  }
  code.tu = logit(fu);
  code.tv = logit(fv);
  code.tw = std::log(t.z() / cfg.depth_base);
  return code;
}

Pose decode_pose(const GridDecodeConfig& cfg, const CameraIntrinsics& K,
                 const RegionCellOutput& cell) {
  return {cell.abc, decode_translation(cfg, K, cell)};
}

RegionCellOutput encode_pose(const GridDecodeConfig& cfg,
                             const CameraIntrinsics& K, const Pose& pose,
                             int anchor) {
  const TranslationCode code = encode_translation(cfg, K, pose.translation);
  RegionCellOutput cell;
  cell.cell_col = code.cell_col;
  cell.cell_row = code.cell_row;
  cell.anchor = anchor;
  cell.tu = code.tu;
  cell.tv = code.tv;
  cell.tw = code.tw;
  cell.abc = pose.rotation;
  cell.class_scores.assign(cfg.num_classes, 0.0);
  check_cell(cfg, cell);
  return cell;
}

Box2d decode_box2d(const GridDecodeConfig& cfg, const RegionCellOutput& cell) {
  const double cw = static_cast<double>(cfg.image_width) / cfg.grid_cols;
  const double ch = static_cast<double>(cfg.image_height) / cfg.grid_rows;
  return {(cell.cell_col + sigmoid(cell.box2d[0])) * cw,
          (cell.cell_row + sigmoid(cell.box2d[1])) * ch,
          std::exp(cell.box2d[2]) * cw, std::exp(cell.box2d[3]) * ch};
}

const RegionCellOutput& select_best_cell(std::span<const RegionCellOutput> grid) {
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "grid has no cells");
  // sigmoid is strictly increasing, so comparing raw confidences picks the
  // same cell without saturating at large logits.
  const RegionCellOutput* best = &grid.front();
  auto key = [](const RegionCellOutput& c) {
    return std::make_tuple(c.cell_row, c.cell_col, c.anchor);
  };
  for (const auto& cell : grid.subspan(1)) {
    if (cell.conf > best->conf ||
        (cell.conf == best->conf && key(cell) < key(*best))) {
      best = &cell;
    }
  }
  return *best;
}

std::vector<RegionCellOutput> parse_grid(const GridDecodeConfig& cfg,
                                         std::span<const double> flat) {
  cfg.validate();
  const std::size_t per_anchor = cfg.channels_per_anchor();
  const std::size_t plane = static_cast<std::size_t>(cfg.grid_rows) * cfg.grid_cols;
  const std::size_t expected = per_anchor * cfg.num_anchors * plane;
  if (flat.size() != expected) {
    throw Error(ErrorCode::GridSizeMismatch,
                "grid tensor has " + std::to_string(flat.size()) +
                    " values, expected " + std::to_string(expected));
  }
  std::vector<RegionCellOutput> cells;
  cells.reserve(plane * cfg.num_anchors);
  for (int row = 0; row < cfg.grid_rows; ++row) {
    for (int col = 0; col < cfg.grid_cols; ++col) {
      for (int anchor = 0; anchor < cfg.num_anchors; ++anchor) {
        auto at = [&](std::size_t k) {
          const std::size_t channel = anchor * per_anchor + k;
          return flat[(channel * cfg.grid_rows + row) * cfg.grid_cols + col];
        };
        RegionCellOutput cell;
        cell.cell_col = col;
        cell.cell_row = row;
        cell.anchor = anchor;
        for (std::size_t k = 0; k < 4; ++k) cell.box2d[k] = at(k);
        cell.abc = {at(4), at(5), at(6)};
        cell.tu = at(7);
        cell.tv = at(8);
        cell.tw = at(9);
        cell.conf = at(10);
        cell.class_scores.resize(cfg.num_classes);
        for (int k = 0; k < cfg.num_classes; ++k) cell.class_scores[k] = at(11 + k);
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::vector<double> flatten_grid(const GridDecodeConfig& cfg,
                                 std::span<const RegionCellOutput> cells) {
  cfg.validate();
  const std::size_t per_anchor = cfg.channels_per_anchor();
  std::vector<double> flat(per_anchor * cfg.num_anchors * cfg.grid_rows *
                           cfg.grid_cols, 0.0);
  for (const auto& cell : cells) {
    check_cell(cfg, cell);
    if (cell.class_scores.size() > static_cast<std::size_t>(cfg.num_classes)) {
      throw Error(ErrorCode::GridSizeMismatch, "too many class scores in cell");
    }
    auto at = [&](std::size_t k) -> double& {
      const std::size_t channel = cell.anchor * per_anchor + k;
      return flat[(channel * cfg.grid_rows + cell.cell_row) * cfg.grid_cols +
                  cell.cell_col];
    };
    for (std::size_t k = 0; k < 4; ++k) at(k) = cell.box2d[k];
    at(4) = cell.abc.a;
    at(5) = cell.abc.b;
    at(6) = cell.abc.c;
    at(7) = cell.tu;
    at(8) = cell.tv;
    at(9) = cell.tw;
    at(10) = cell.conf;
    for (std::size_t k = 0; k < cell.class_scores.size(); ++k) {
      at(11 + k) = cell.class_scores[k];
    }
  }
  return flat;
}

}  // namespace direct6d

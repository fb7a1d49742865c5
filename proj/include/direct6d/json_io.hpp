#pragma once

// JSON encodings shared by the CLI, the HTTP service and the file formats.
// Decoders throw Error(SchemaViolation) naming the offending field.

#include <json.hpp>

#include "direct6d/annotation.hpp"
#include "direct6d/evalkit.hpp"
#include "direct6d/pose_optimizer.hpp"
#include "direct6d/region_codec.hpp"

namespace direct6d::json_io {

using Json = nlohmann::json;

Json encode(const AbcRotation& r);
Json encode_rotation_matrix(const RotationMatrix& R);  // row-major, 9 values
Json encode(const CameraIntrinsics& K);
Json encode(const Pose& pose);  // {"rotation":{a,b,c},"translation":[x,y,z]}
Json encode(const Vec2& p);
Json encode(const Vec3& p);
Json encode_points(std::span<const Vec2> pts);
Json encode_points(std::span<const Vec3> pts);
Json encode(const BoxDims& dims);
Json encode(const GridDecodeConfig& cfg);
Json encode(const RegionCellOutput& cell);
Json encode(const FitConfig& cfg);
Json encode(const FitReport& report);
Json encode(const RegionFitReport& report);
Json encode(const PoseErrorReport& report);
Json encode(const SyntheticScene& scene);
Json encode(const ImageLine& line);
Json encode(const AxisAnnotation& ann);
Json encode(const BoxEdges& box);
Json encode(const BoxTangency& tangency);
Json encode(const RotationSolveResult& result);
Json encode(const TangentAssignment& assignment);

double number(const Json& j, const char* key);
double number_or(const Json& j, const char* key, double fallback);

AbcRotation decode_abc(const Json& j);
RotationMatrix decode_rotation_matrix(const Json& j);
// Accepts {a,b,c} or a 9-element row-major array.
RotationMatrix decode_any_rotation(const Json& j);
CameraIntrinsics decode_intrinsics(const Json& j);
Pose decode_pose(const Json& j);
Vec2 decode_vec2(const Json& j);
Vec3 decode_vec3(const Json& j);
ProjectedPoints decode_points2(const Json& j);
ModelCorners decode_points3(const Json& j);
BoxDims decode_dims(const Json& j);
// Fields absent from `j` keep the values from `defaults`.
GridDecodeConfig decode_grid_config(const Json& j, const GridDecodeConfig& defaults = {});
RegionCellOutput decode_cell(const Json& j);
FitConfig decode_fit_config(const Json& j, const FitConfig& defaults = {});
ImageLine decode_line(const Json& j);
AxisAnnotation decode_axes(const Json& j);
BoxEdges decode_box(const Json& j);
SyntheticScene decode_scene(const Json& j);

// {"corners":[...]} or {"dims":{...}} (8 box corners).
ModelCorners decode_corners_or_dims(const Json& body);

Json parse(std::string_view text);  // SchemaViolation on malformed JSON
std::string dump(const Json& j);

}  // namespace direct6d::json_io

#include "direct6d/app/service.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "direct6d/annotation.hpp"
#include "direct6d/error.hpp"
#include "direct6d/json_io.hpp"
#include "direct6d/pose_optimizer.hpp"

namespace direct6d::app {

namespace {

using json_io::Json;

Json ok(Json result) { return {{"ok", true}, {"result", std::move(result)}}; }

Json failure(std::string_view code, std::string_view message) {
  return {{"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

HttpResponse respond(int status, const Json& body) { return {status, body.dump()}; }

// Malformed or inconsistent input is the caller's fault; everything else the
// library raises is a solver outcome.
int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaViolation:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::LengthMismatch:
      return 400;
    default:
      return 422;
  }
}

const Json& require(const Json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) {
    throw Error(ErrorCode::SchemaViolation, std::string("missing field '") + key + "'");
  }
  return body.at(key);
}

Json handle_project(const Json& body) {
  const CameraIntrinsics K = json_io::decode_intrinsics(require(body, "K"));
  const Pose pose = json_io::decode_pose(require(body, "pose"));
  const ModelCorners corners = json_io::decode_corners_or_dims(body);
  Json result = {{"points", json_io::encode_points(project(K, pose, corners))}};
  if (body.contains("axis_length")) {
    const double length = json_io::number(body, "axis_length");
    const ModelCorners ends{Vec3::Zero(), length * Vec3::UnitX(), length * Vec3::UnitY(),
                            length * Vec3::UnitZ()};
    result["axes"] = json_io::encode_points(project(K, pose, ends));
  }
  return result;
}

Json handle_solve_rotation(const Json& body) {
  const CameraIntrinsics K = json_io::decode_intrinsics(require(body, "K"));
  const AxisAnnotation ann = json_io::decode_axes(require(body, "axes"));
  AbcRotation init;
  if (body.contains("init")) {
    init = rotation_to_abc(json_io::decode_any_rotation(body.at("init")));
  }
  return json_io::encode(solve_rotation_from_axes(K, ann, init));
}

Json handle_solve_translation(const Json& body) {
  const CameraIntrinsics K = json_io::decode_intrinsics(require(body, "K"));
  const RotationMatrix R = json_io::decode_any_rotation(require(body, "rotation"));
  const BoxDims dims = json_io::decode_dims(require(body, "dims"));
  const BoxEdges box = json_io::decode_box(require(body, "box"));
  const Vec3 t_init = body.contains("t_init") ? json_io::decode_vec3(body.at("t_init"))
                                              : translation_from_box(K, dims, box);
  int max_iters = 50;
  if (body.contains("max_iters")) {
    const Json& m = body.at("max_iters");
    if (!m.is_number_integer() || m.get<int>() < 1) {
      throw Error(ErrorCode::SchemaViolation, "field 'max_iters' must be a positive integer");
    }
    max_iters = m.get<int>();
  }
  return json_io::encode(assign_tangent_corners(K, R, dims, box, t_init, max_iters));
}

Json handle_fit(const ServiceConfig& cfg, const Json& body) {
  const CameraIntrinsics K = json_io::decode_intrinsics(require(body, "K"));
  const ModelCorners corners = json_io::decode_corners_or_dims(body);
  const ProjectedPoints target = json_io::decode_points2(require(body, "target"));
  const FitConfig fit_cfg =
      body.contains("config") ? json_io::decode_fit_config(body.at("config")) : FitConfig{};
  fit_cfg.validate();
  const std::string space = body.value("param_space", std::string("direct"));
  if (space == "direct") {
    if (!body.contains("init")) return json_io::encode(fit_pose_cold(K, corners, target, fit_cfg));
    return json_io::encode(
        fit_pose(K, corners, target, json_io::decode_pose(body.at("init")), fit_cfg));
  }
  if (space != "region") {
    throw Error(ErrorCode::SchemaViolation, "param_space must be 'direct' or 'region'");
  }
  const GridDecodeConfig grid =
      body.contains("grid") ? json_io::decode_grid_config(body.at("grid"), cfg.grid) : cfg.grid;
  grid.validate();
  RegionCellOutput cell;
  if (body.contains("cell")) {
    cell = json_io::decode_cell(body.at("cell"));
  } else {
    const Pose init = body.contains("init") ? json_io::decode_pose(body.at("init"))
                                            : cold_start_pose(K, corners, target);
    cell = encode_pose(grid, K, init);
  }
  return json_io::encode(fit_region_channels(grid, K, corners, target, cell, fit_cfg));
}

}  // namespace

HttpResponse handle_request(const ServiceConfig& cfg, std::string_view method,
                            std::string_view path, std::string_view body) {
  const bool is_get = method == "GET";
  const bool is_post = method == "POST";
  const bool known = path == "/health" || path == "/project" || path == "/solve/rotation" ||
                     path == "/solve/translation" || path == "/fit";
  if (!known) return respond(404, failure("NotFound", "no endpoint " + std::string(path)));
  if ((path == "/health" && !is_get) || (path != "/health" && !is_post)) {
    return respond(405, failure("MethodNotAllowed",
                                std::string(method) + " not allowed on " + std::string(path)));
  }
  if (body.size() > cfg.max_request_bytes) {
    return respond(413, failure("PayloadTooLarge", "request body exceeds " +
                                                       std::to_string(cfg.max_request_bytes) +
                                                       " bytes"));
  }
  try {
    if (path == "/health") return respond(200, ok({{"status", "ok"}}));
    const Json request = json_io::parse(body);
    if (!request.is_object()) {
      throw Error(ErrorCode::SchemaViolation, "request body must be a JSON object");
    }
    if (path == "/project") return respond(200, ok(handle_project(request)));
    if (path == "/solve/rotation") return respond(200, ok(handle_solve_rotation(request)));
    if (path == "/solve/translation") return respond(200, ok(handle_solve_translation(request)));
    return respond(200, ok(handle_fit(cfg, request)));
  } catch (const Error& e) {
    return respond(status_for(e.code()), failure(to_string(e.code()), e.what()));
  } catch (const Json::exception& e) {
    return respond(400, failure(to_string(ErrorCode::SchemaViolation), e.what()));
  } catch (const std::exception& e) {
    return respond(500, failure("Internal", e.what()));
  }
}

int default_port() {
  const char* env = std::getenv("DIRECT6D_PORT");
  if (env == nullptr) return kDefaultPort;
  char* end = nullptr;
  const long port = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || port < 1 || port > 65535) return kDefaultPort;
  return static_cast<int>(port);
}

GridDecodeConfig load_grid_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  GridDecodeConfig cfg = json_io::decode_grid_config(json_io::parse(text.str()));
  cfg.validate();
  return cfg;
}

Server::Server(ServiceConfig cfg)
    : cfg_(std::move(cfg)), server_(std::make_unique<httplib::Server>()) {
  // Bodies a little over the cap are read and refused with a JSON 413;
  // httplib drops anything far beyond it without reading.
  server_->set_payload_max_length(4 * cfg_.max_request_bytes);
  const auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse out = handle_request(cfg_, req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  server_->Get(".*", route);
  server_->Post(".*", route);
  server_->Put(".*", route);
  server_->Patch(".*", route);
  server_->Delete(".*", route);
  // Requests refused before routing (oversized bodies) still get a JSON body.
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const std::string code = res.status == 413 ? "PayloadTooLarge" : "HttpError";
    res.set_content(failure(code, httplib::status_message(res.status)).dump(),
                    "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });
}

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port) {
  if (port == 0) {
    port = server_->bind_to_any_port(host);
    if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

bool Server::listen(const std::string& host, int port) { return server_->listen(host, port); }

void Server::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace direct6d::app

#pragma once

// Stateless HTTP+JSON front end. Every response body is
// {"ok":true,"result":...} or {"ok":false,"error":{"code","message"}}.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "direct6d/region_codec.hpp"

namespace httplib {
class Server;
}

namespace direct6d::app {

inline constexpr int kDefaultPort = 8080;
inline constexpr std::size_t kMaxRequestBytes = 1 << 20;

struct ServiceConfig {
  GridDecodeConfig grid;  // defaults for region-space fits
  std::size_t max_request_bytes = kMaxRequestBytes;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

// Routes one request without any network involvement. 400 for schema
// violations, 422 for solver errors, 404 / 405 / 413 for routing and size.
HttpResponse handle_request(const ServiceConfig& cfg, std::string_view method,
                            std::string_view path, std::string_view body);

// DIRECT6D_PORT when set to a valid port, else kDefaultPort.
int default_port();

// Loads GridDecodeConfig defaults from a JSON file; absent fields keep
// their built-in values.
GridDecodeConfig load_grid_config(const std::string& path);

// httplib server running handle_request on a background thread.
class Server {
 public:
  explicit Server(ServiceConfig cfg);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds (port 0 picks a free port) and starts serving. Returns the port.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  bool listen(const std::string& host, int port);
  void stop();

 private:
  ServiceConfig cfg_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace direct6d::app

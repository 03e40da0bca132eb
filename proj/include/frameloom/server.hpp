#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "frameloom/project.hpp"

namespace httplib {
class Server;
}

namespace frameloom {

struct Session {
  std::string coder_id;
  std::string token;
  std::string issued_at;
};

// HTTP API over one project. Every number and list it serves comes from
// the annotation/evaluation modules run on a fresh store snapshot.
//
//   GET  /api/codebook
//   GET  /api/units?coder=&code=
//   GET  /frames/{video}/{idx}.png
//   GET  /api/annotations?unit=&code=&rater=
//   POST /api/annotations        {unit, code, coder, value, overwrite?}
//   GET  /api/disagreements?a=&b=&all=
//   POST /api/reconciliations    {unit, code, value}
//   GET  /api/report
//   GET  /api/llm/{unit}/{code}?model=
//
// /api routes need "Authorization: Bearer <coder token>". Errors are
// problem-details bodies.
class Server {
 public:
  explicit Server(Project& project);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds host:port (port 0 picks a free port) and serves on a background
  // thread. Throws BindError.
  void start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void routes();

  Project& project_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace frameloom

#pragma once

#include <memory>
#include <optional>
#include <string>

#include "lapis/session.hpp"

namespace httplib {
class Server;
}

namespace lapis {

struct HttpApiOptions {
  // When set, every route except /health requires "Authorization: Bearer <token>".
  std::optional<std::string> api_token;
};

// Routes:
//   GET  /health
//   GET  /sessions                      POST /sessions {title}
//   GET  /sessions/{id}                 POST /sessions/{id}/context {delta}
//   POST /sessions/{id}/steps/{sid}/hypotheses {hypothesis, strategy?}
//   POST /sessions/{id}/close
//   GET  /paragraphs/{id}
// Errors: {"error": {"code", "message"}}.
std::unique_ptr<httplib::Server> make_http_server(SessionService& service,
                                                  HttpApiOptions options = {});

int http_status_for(ErrorCode code);

}  // namespace lapis

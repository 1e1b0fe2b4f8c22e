#include "lapis/http_api.hpp"

#include "httplib.h"
#include "lapis/error.hpp"

namespace lapis {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input:
    case ErrorCode::parse_error: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict:
    case ErrorCode::state: return 409;
    case ErrorCode::transport: return 502;
    case ErrorCode::storage: return 500;
  }
  return 500;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
  send_json(res, status, {{"error", {{"code", code}, {"message", msg}}}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw InvalidInput("request body must be a JSON object");
    return j;
  } catch (const json::parse_error&) {
    throw InvalidInput("request body is not valid JSON");
  }
}

std::string require_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) throw InvalidInput(std::string("field '") + key + "' is required");
  return it->get<std::string>();
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(SessionService& service, HttpApiOptions options) {
  auto server = std::make_unique<httplib::Server>();
  auto token = options.api_token;

  server->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                               {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                               {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});

  server->set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    if (req.method == "OPTIONS") {
      res.status = 204;
      return httplib::Server::HandlerResponse::Handled;
    }
    if (!token || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") != "Bearer " + *token) {
      send_error(res, 401, "unauthorized", "missing or invalid API token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server->set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                   std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, http_status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });

  server->Get("/health", [&service](const httplib::Request&, httplib::Response& res) {
    json body = {{"status", "ok"}};
    if (const auto* r = service.retriever()) {
      body["index_size"] = r->index().size();
      body["provider_id"] = r->index().provider_id();
    }
    send_json(res, 200, body);
  });

  server->Get("/sessions", [&service](const httplib::Request&, httplib::Response& res) {
    json arr = json::array();
    for (const auto& s : service.list())
      arr.push_back({{"session_id", s.session_id},
                     {"title", s.title},
                     {"created_at", s.created_at},
                     {"status", to_string(s.status)},
                     {"step_count", s.steps.size()}});
    send_json(res, 200, arr);
  });

  server->Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    send_json(res, 201, to_json(service.create_session(body.value("title", ""))));
  });

  server->Get(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(service.get(req.matches[1])));
  });

  server->Post(R"(/sessions/([^/]+)/context)",
               [&service](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 send_json(res, 201, to_json(service.add_context(req.matches[1], require_string(body, "delta"))));
               });

  server->Post(R"(/sessions/([^/]+)/steps/([^/]+)/hypotheses)",
               [&service](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 std::optional<PromptStrategy> strategy;
                 if (body.contains("strategy") && !body["strategy"].is_null())
                   strategy = parse_strategy(body["strategy"].get<std::string>());
                 auto rec = service.submit_hypothesis(req.matches[1], req.matches[2],
                                                      require_string(body, "hypothesis"), strategy);
                 send_json(res, rec.status == RecordStatus::error ? 502 : 201, to_json(rec));
               });

  server->Post(R"(/sessions/([^/]+)/close)",
               [&service](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, to_json(service.close_session(req.matches[1])));
               });

  server->Get(R"(/paragraphs/(.+))", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto* r = service.retriever();
    if (!r) throw NotFound("no knowledgebase loaded");
    const auto* p = r->knowledgebase().find_paragraph(req.matches[1].str());
    if (!p) throw NotFound("unknown paragraph " + req.matches[1].str());
    const auto& doc = r->knowledgebase().document_of(*p);
    json body = to_json(*p);
    body["source_kind"] = to_string(doc.source_kind);
    body["ref_no"] = doc.ref_no ? json(*doc.ref_no) : json(nullptr);
    body["title"] = doc.title;
    send_json(res, 200, body);
  });

  return server;
}

}  // namespace lapis

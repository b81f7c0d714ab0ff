#pragma once

// JSON-over-HTTP front end for AnnotationStore. Requires cpp-httplib.

#include <algorithm>
#include <cstdlib>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "conex/annotation.hpp"
#include "conex/error.hpp"

namespace conex {

inline constexpr int kAnnotationSchemaVersion = 1;
inline constexpr int kDefaultAnnotationPort = 8080;
inline constexpr std::size_t kDefaultTaskBatch = 20;

/// Port from CONEX_PORT, else 8080.
inline int annotation_port_from_env() {
  const char* raw = std::getenv("CONEX_PORT");
  if (raw == nullptr || *raw == '\0') return kDefaultAnnotationPort;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v <= 0 || v > 65535) {
    throw Error(ErrorKind::kInvalidArgument, std::string("CONEX_PORT is not a valid port: '") + raw + "'");
  }
  return static_cast<int>(v);
}

namespace detail {

inline void send_json(httplib::Response& res, int status, Json body) {
  body["schema_version"] = kAnnotationSchemaVersion;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  send_json(res, status, Json{{"error", {{"kind", kind}, {"message", message}}}});
}

inline int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kSchema:
    case ErrorKind::kParse: return 400;
    default: return 500;
  }
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, http_status(e.kind()), error_kind_name(e.kind()), e.what());
  } catch (const Json::exception& e) {
    send_error(res, 400, "schema", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace detail

/// Registers the annotation routes on `server`. The store must outlive it.
inline void mount_annotation_api(httplib::Server& server, AnnotationStore& store) {
  server.Get("/api/tasks", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      std::optional<TaskStatus> status = TaskStatus::kPending;
      if (req.has_param("status")) {
        const auto s = req.get_param_value("status");
        status = s == "all" ? std::nullopt : std::optional(parse_status(s));
      }
      std::size_t limit = kDefaultTaskBatch;
      if (req.has_param("limit")) {
        const auto raw = req.get_param_value("limit");
        char* end = nullptr;
        const long v = std::strtol(raw.c_str(), &end, 10);
        if (raw.empty() || *end != '\0' || v < 0) {
          throw Error(ErrorKind::kInvalidArgument, "limit must be a non-negative integer");
        }
        limit = static_cast<std::size_t>(v);
      }
      Json tasks = Json::array();
      for (const auto& t : store.list(status, limit)) tasks.push_back(t.to_json());
      detail::send_json(res, 200, Json{{"tasks", std::move(tasks)}});
    });
  });

  server.Get(R"(/api/tasks/([^/]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { detail::send_json(res, 200, Json{{"task", store.get(req.matches[1]).to_json()}}); });
  });

  server.Post(R"(/api/tasks/([^/]+)/verdict)", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const Json body = Json::parse(req.body);
      if (!body.contains("verdict") || !body.at("verdict").is_string()) {
        throw Error(ErrorKind::kInvalidArgument, "verdict must be \"correct\" or \"incorrect\"");
      }
      std::optional<std::string> annotator;
      if (body.contains("annotator") && !body.at("annotator").is_null()) {
        annotator = body.at("annotator").get<std::string>();
      }
      const std::string id = req.matches[1];
      store.get(id);  // 404 takes precedence over a bad verdict
      const auto verdict = body.at("verdict").get<std::string>();
      if (verdict != "correct" && verdict != "incorrect") {
        throw Error(ErrorKind::kInvalidArgument, "verdict must be \"correct\" or \"incorrect\", got '" + verdict + "'");
      }
      detail::send_json(res, 200, Json{{"task", store.submit(id, verdict, annotator).to_json()}});
    });
  });

  server.Get("/api/progress", [&store](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] { detail::send_json(res, 200, Json{{"progress", store.progress().to_json()}}); });
  });

  server.Post("/api/export", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const Json body = Json::parse(req.body);
      const auto kind = body.value("kind", std::string());
      std::string csv;
      if (kind == "selector") {
        csv = store.export_selector_csv();
      } else if (kind == "judgments") {
        csv = store.export_judgments_csv();
      } else {
        throw Error(ErrorKind::kInvalidArgument, "kind must be selector or judgments");
      }
      const auto rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
      detail::send_json(res, 200, Json{{"kind", kind}, {"rows", rows}, {"csv", csv}});
    });
  });
}

}  // namespace conex

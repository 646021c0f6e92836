#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>

#include "whatif/error.hpp"
#include "whatif/json_io.hpp"
#include "whatif/service.hpp"

namespace whatif {

inline constexpr std::size_t kStreamChunk = 64 * 1024;

/// Content provider that serves a file in bounded chunks.
inline httplib::ContentProvider file_chunk_provider(const std::string& path, std::size_t chunk = kStreamChunk) {
  auto in = std::make_shared<std::ifstream>(path, std::ios::binary);
  auto buffer = std::make_shared<std::vector<char>>(chunk);
  return [in, buffer](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
    if (!*in) in->clear();
    in->seekg(static_cast<std::streamoff>(offset));
    const std::size_t want = std::min(length, buffer->size());
    in->read(buffer->data(), static_cast<std::streamsize>(want));
    const auto got = static_cast<std::size_t>(in->gcount());
    if (got == 0) return false;
    return sink.write(buffer->data(), got);
  };
}

namespace detail {

inline void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(to_json_text(body), "application/json");
}

inline std::optional<std::int64_t> int_param(const httplib::Request& req, const char* name, const char* code) {
  if (!req.has_param(name)) return std::nullopt;
  const std::string v = req.get_param_value(name);
  std::size_t used = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(code, std::string("query parameter '") + name + "' must be an integer");
  return parsed;
}

inline json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(errc::kBadRequest, std::string("request body is not valid JSON: ") + e.what());
  }
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, 200, fn(req));
    } catch (const Error& e) {
      reply(res, http_status(e.code()), error_body(e.code(), e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("internal", e.what()));
    }
  };
}

}  // namespace detail

/// Registers every API route on `server`. `service` must outlive the server.
inline void install_routes(httplib::Server& server, const Service& service) {
  using detail::guarded;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server.Get("/api/config", guarded([&](const httplib::Request&) { return service.get_config(); }));
  server.Get("/api/units", guarded([&](const httplib::Request&) { return service.get_units(); }));
  server.Get(R"(/api/units/([^/]+)/neighbors)", guarded([&](const httplib::Request& req) {
               return service.get_neighbors(req.matches[1].str(), detail::int_param(req, "n", errc::kBadN));
             }));
  server.Post("/api/intervene", guarded([&](const httplib::Request& req) {
                return service.post_intervene(detail::parse_body(req));
              }));
  server.Post("/api/explain/lime", guarded([&](const httplib::Request& req) {
                return service.post_explain_lime(detail::parse_body(req));
              }));
  server.Post("/api/explain/shap", guarded([&](const httplib::Request& req) {
                return service.post_explain_shap(detail::parse_body(req));
              }));
  server.Get("/api/explain/global", guarded([&](const httplib::Request& req) {
               return service.get_explain_global(detail::int_param(req, "n_background", errc::kBadK));
             }));
  server.Post("/api/recommend", guarded([&](const httplib::Request& req) {
                return service.post_recommend(detail::parse_body(req));
              }));

  server.Get("/api/geo", [&](const httplib::Request&, httplib::Response& res) {
    const auto& geo = service.config().geo_path;
    std::error_code ec;
    const auto size = geo ? std::filesystem::file_size(*geo, ec) : 0;
    if (!geo || ec) {
      detail::reply(res, 404, error_body(errc::kNoGeometry, "no geometry file is configured"));
      return;
    }
    res.set_content_provider(static_cast<std::size_t>(size), "application/geo+json", file_chunk_provider(*geo));
  });

  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) {
      detail::reply(res, 404, error_body(errc::kNotFound, "no route for " + req.method + " " + req.path));
    }
  });
}

}  // namespace whatif

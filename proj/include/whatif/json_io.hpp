#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace whatif {

using json = nlohmann::json;

namespace detail {

inline void write_json(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += json(it.key()).dump();
        out.push_back(':');
        write_json(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& v : j) {
        if (!first) out.push_back(',');
        first = false;
        write_json(v, out);
      }
      out.push_back(']');
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        break;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Compact JSON with every floating-point number printed to 17 significant
/// digits. This is the only serializer used for API and CLI payloads.
inline std::string to_json_text(const json& j) {
  std::string out;
  detail::write_json(j, out);
  return out;
}

inline json error_body(const std::string& code, const std::string& message) {
  return json{{"code", code}, {"message", message}};
}

}  // namespace whatif

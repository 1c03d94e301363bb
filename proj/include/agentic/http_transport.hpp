#pragma once

// Plain-HTTP transport for chat-completion endpoints.

#include <string>

#include <httplib.h>

#include "agentic/backend.hpp"
#include "agentic/errors.hpp"

namespace agentic {

/// `url` has the form http://host[:port]/path.
inline Transport make_http_transport(const std::string& url, int timeout_seconds = 600) {
  constexpr std::string_view kScheme = "http://";
  require(url.starts_with(kScheme), ErrorCode::ConfigInvalid, "endpoint must start with http://: " + url);
  const auto rest = url.substr(kScheme.size());
  const auto slash = rest.find('/');
  const auto authority = rest.substr(0, slash);
  const auto path = slash == std::string::npos ? std::string("/") : rest.substr(slash);
  require(!authority.empty(), ErrorCode::ConfigInvalid, "endpoint has no host: " + url);
  return [base = std::string(kScheme) + authority, path, timeout_seconds](const std::string& body) {
    httplib::Client client(base);
    client.set_connection_timeout(timeout_seconds);
    client.set_read_timeout(timeout_seconds);
    auto res = client.Post(path, body, "application/json");
    if (!res) fail(ErrorCode::BackendUnavailable, "request to " + base + path + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      fail(ErrorCode::BackendUnavailable, "endpoint returned HTTP " + std::to_string(res->status));
    return res->body;
  };
}

}  // namespace agentic

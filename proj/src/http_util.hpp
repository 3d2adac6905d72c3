#pragma once

// Internal helpers shared by the remote chat and embedding clients.

#include "l2r/errors.hpp"

#include <httplib.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace l2r::detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // path prefix without trailing slash
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

inline std::string require_api_key(const std::string& env_name) {
    const char* key = std::getenv(env_name.c_str());
    if (key == nullptr || *key == '\0') throw AuthError("environment variable " + env_name + " is not set");
    return key;
}

inline std::unique_ptr<httplib::Client> make_client(const std::string& origin, unsigned timeout_ms) {
    auto client = std::make_unique<httplib::Client>(origin);
    auto secs = static_cast<time_t>(timeout_ms / 1000);
    auto usecs = static_cast<time_t>((timeout_ms % 1000) * 1000);
    client->set_connection_timeout(secs, usecs);
    client->set_read_timeout(secs, usecs);
    client->set_write_timeout(secs, usecs);
    return client;
}

}  // namespace l2r::detail

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include "dytopo/error.hpp"
#include "dytopo/llm_client.hpp"

namespace dytopo::llm {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::kInvalidConfig, "base_url: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
  public:
    HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                      std::chrono::milliseconds timeout) override {
        const SplitUrl parts = split_url(url);
        httplib::Client client(parts.origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        httplib::Headers hdrs;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                hdrs.emplace(k, v);
            }
        }
        auto res = client.Post(parts.path, hdrs, body, content_type);
        if (!res) throw TransportFailure("HTTP transport error: " + httplib::to_string(res.error()));
        return HttpResponse{res->status, res->body};
    }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace dytopo::llm

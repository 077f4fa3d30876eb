#pragma once

#include <map>
#include <memory>
#include <string>

namespace wlcg {

struct HttpRequest {
    std::string method;
    std::string target; // path, plus query string if any
    std::map<std::string, std::string> headers;
    std::string body;

    std::string header(const std::string& name) const {
        auto it = headers.find(name);
        return it == headers.end() ? std::string() : it->second;
    }
};

struct HttpResponse {
    int status = 0;
    std::map<std::string, std::string> headers;
    std::string body;
};

/// Server-side request handler; both the issuer and the resource guard
/// expose one so the same application code runs over real sockets and the
/// in-process loopback transport.
class HttpHandler {
  public:
    virtual ~HttpHandler() = default;
    virtual HttpResponse handle(const HttpRequest& request) = 0;
};

/// Client-side GET used for trust-anchor resolution. Tests inject scripted
/// or counting implementations; production wires a real TLS-verifying
/// client.
class HttpFetcher {
  public:
    virtual ~HttpFetcher() = default;
    virtual HttpResponse get(const std::string& url) = 0;
};

using HttpFetcherPtr = std::shared_ptr<HttpFetcher>;

struct UrlParts {
    std::string scheme;
    std::string authority; // host[:port]
    std::string path;      // begins with "/" or empty
};

/// Minimal absolute-URL split; throws ConfigError when there is no
/// "scheme://" prefix.
UrlParts split_url(const std::string& url);

} // namespace wlcg

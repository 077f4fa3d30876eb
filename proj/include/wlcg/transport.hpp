#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "wlcg/http.hpp"

namespace wlcg {

/// In-process transport: base URLs mapped to handlers, requests delivered
/// as direct calls. Scenarios run against it without sockets; the same
/// handlers also serve over real HTTP.
class LoopbackNetwork {
  public:
    void mount(const std::string& base_url, std::shared_ptr<HttpHandler> handler);

    /// Dispatch an absolute-URL request to the mounted handler. Unknown
    /// base URLs yield a synthetic 502.
    HttpResponse call(const std::string& method, const std::string& url,
                      const std::map<std::string, std::string>& headers = {},
                      const std::string& body = "") const;

  private:
    mutable std::mutex m_;
    std::map<std::string, std::shared_ptr<HttpHandler>> mounts_;
};

/// GET-only fetcher view over the loopback network that counts every
/// fetch, per URL. Trust-cache behavior is measured through these
/// counters.
class CountingLoopbackFetcher final : public HttpFetcher {
  public:
    explicit CountingLoopbackFetcher(std::shared_ptr<const LoopbackNetwork> network)
        : network_(std::move(network)) {}

    HttpResponse get(const std::string& url) override;

    int64_t total() const;
    std::map<std::string, int64_t> by_url() const;
    void reset();

  private:
    std::shared_ptr<const LoopbackNetwork> network_;
    mutable std::mutex m_;
    std::map<std::string, int64_t> counts_;
};

/// Real HTTP(S) client GET with TLS verification on by default.
class HttplibFetcher final : public HttpFetcher {
  public:
    explicit HttplibFetcher(bool verify_tls = true) : verify_tls_(verify_tls) {}
    HttpResponse get(const std::string& url) override;

  private:
    bool verify_tls_;
};

/// Serve a handler over a real socket. listen() blocks until stop().
class HttpServer {
  public:
    explicit HttpServer(std::shared_ptr<HttpHandler> handler);
    ~HttpServer();

    bool listen(const std::string& host, int port);
    /// Bind an ephemeral port now, serve later; returns the port (-1 on
    /// failure).
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool wait_until_ready(int timeout_ms = 2000) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace wlcg

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "wlcg/transport.hpp"

#include "wlcg/errors.hpp"
#include "wlcg/trust.hpp"

namespace wlcg {

void LoopbackNetwork::mount(const std::string& base_url, std::shared_ptr<HttpHandler> handler) {
    std::lock_guard lock(m_);
    std::string key = base_url;
    while (!key.empty() && key.back() == '/')
        key.pop_back();
    mounts_[key] = std::move(handler);
}

HttpResponse LoopbackNetwork::call(const std::string& method, const std::string& url,
                                   const std::map<std::string, std::string>& headers,
                                   const std::string& body) const {
    std::shared_ptr<HttpHandler> handler;
    std::string target;
    {
        std::lock_guard lock(m_);
        for (const auto& [base, h] : mounts_) {
            if (url.rfind(base, 0) == 0 &&
                (url.size() == base.size() || url[base.size()] == '/')) {
                handler = h;
                target = url.substr(base.size());
                break;
            }
        }
    }
    if (!handler) {
        HttpResponse resp;
        resp.status = 502;
        resp.body = "{\"error\":\"no handler mounted for " + url + "\"}";
        return resp;
    }
    HttpRequest request;
    request.method = method;
    request.target = target.empty() ? "/" : target;
    request.headers = headers;
    request.body = body;
    return handler->handle(request);
}

HttpResponse CountingLoopbackFetcher::get(const std::string& url) {
    {
        std::lock_guard lock(m_);
        ++counts_[url];
    }
    return network_->call("GET", url);
}

int64_t CountingLoopbackFetcher::total() const {
    std::lock_guard lock(m_);
    int64_t sum = 0;
    for (const auto& [url, n] : counts_)
        sum += n;
    return sum;
}

std::map<std::string, int64_t> CountingLoopbackFetcher::by_url() const {
    std::lock_guard lock(m_);
    return counts_;
}

void CountingLoopbackFetcher::reset() {
    std::lock_guard lock(m_);
    counts_.clear();
}

HttpResponse HttplibFetcher::get(const std::string& url) {
    auto parts = split_url(url);
    std::string origin = parts.scheme + "://" + parts.authority;
    httplib::Client client(origin);
    client.enable_server_certificate_verification(verify_tls_ && parts.scheme == "https");
    client.set_connection_timeout(10);
    client.set_read_timeout(10);
    auto result = client.Get(parts.path.empty() ? "/" : parts.path);
    if (!result)
        throw FetchFailed("GET " + url + " failed: " + httplib::to_string(result.error()));
    HttpResponse resp;
    resp.status = result->status;
    resp.body = result->body;
    for (const auto& [k, v] : result->headers)
        resp.headers[k] = v;
    return resp;
}

struct HttpServer::Impl {
    std::shared_ptr<HttpHandler> handler;
    httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<HttpHandler> handler) : impl_(std::make_unique<Impl>()) {
    impl_->handler = std::move(handler);
    // Catch-all handlers per method so request bodies are read before
    // dispatch. Collection creates arrive as POST on the wire; the
    // loopback transport additionally passes MKCOL through verbatim.
    auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
        HttpRequest request;
        request.method = req.method;
        request.target = req.target.empty() ? req.path : req.target;
        for (const auto& [k, v] : req.headers)
            request.headers[k] = v;
        request.body = req.body;
        HttpResponse response = impl_->handler->handle(request);
        res.status = response.status;
        std::string content_type = "application/octet-stream";
        for (const auto& [k, v] : response.headers) {
            if (k == "Content-Type")
                content_type = v;
            else
                res.set_header(k, v);
        }
        res.set_content(response.body, content_type);
    };
    impl_->server.Get("(.*)", adapt);
    impl_->server.Post("(.*)", adapt);
    impl_->server.Put("(.*)", adapt);
    impl_->server.Patch("(.*)", adapt);
    impl_->server.Delete("(.*)", adapt);
    impl_->server.Options("(.*)", adapt);
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

int HttpServer::bind_any(const std::string& host) {
    return impl_->server.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running())
        impl_->server.stop();
}

bool HttpServer::wait_until_ready(int timeout_ms) const {
    const int step_ms = 10;
    for (int waited = 0; waited < timeout_ms; waited += step_ms) {
        if (impl_->server.is_running())
            return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(step_ms));
    }
    return impl_->server.is_running();
}

} // namespace wlcg

#include "wlcg/trust.hpp"

#include <algorithm>

#include "wlcg/errors.hpp"

namespace wlcg {

namespace {

std::string strip_trailing_slash(std::string url) {
    while (url.size() > 1 && url.back() == '/')
        url.pop_back();
    return url;
}

bool same_issuer(const std::string& a, const std::string& b) {
    return strip_trailing_slash(a) == strip_trailing_slash(b);
}

} // namespace

UrlParts split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("not an absolute URL: " + url);
    UrlParts parts;
    parts.scheme = url.substr(0, scheme_end);
    auto rest = url.substr(scheme_end + 3);
    auto slash = rest.find('/');
    if (slash == std::string::npos) {
        parts.authority = rest;
    } else {
        parts.authority = rest.substr(0, slash);
        parts.path = rest.substr(slash);
    }
    return parts;
}

nlohmann::json IssuerMetadata::to_json() const {
    nlohmann::json doc;
    doc["issuer"] = issuer;
    doc["jwks_uri"] = jwks_uri;
    doc["token_endpoint"] = token_endpoint;
    if (!authorization_endpoint.empty())
        doc["authorization_endpoint"] = authorization_endpoint;
    doc["grant_types_supported"] = grant_types_supported;
    return doc;
}

IssuerMetadata IssuerMetadata::from_json(const nlohmann::json& doc) {
    if (!doc.is_object())
        throw MalformedMetadata("metadata document is not a JSON object");
    IssuerMetadata md;
    try {
        md.issuer = doc.at("issuer").get<std::string>();
        md.jwks_uri = doc.at("jwks_uri").get<std::string>();
        md.token_endpoint = doc.at("token_endpoint").get<std::string>();
        md.authorization_endpoint = doc.value("authorization_endpoint", "");
        if (doc.contains("grant_types_supported"))
            md.grant_types_supported = doc["grant_types_supported"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedMetadata(std::string("bad metadata document: ") + e.what());
    }
    return md;
}

IssuerMetadata discover(const std::string& issuer_url, HttpFetcher& transport, bool allow_http) {
    auto parts = split_url(issuer_url);
    if (parts.scheme != "https" && !(allow_http && parts.scheme == "http"))
        throw FetchFailed("refusing issuer URL without https: " + issuer_url);

    // OIDC discovery location first.
    std::string oidc_path = strip_trailing_slash(issuer_url) + "/.well-known/openid-configuration";
    HttpResponse resp = transport.get(oidc_path);
    if (resp.status == 404) {
        // RFC 8414 form: well-known segment between authority and path.
        std::string issuer_path = split_url(strip_trailing_slash(issuer_url)).path;
        std::string rfc8414_path = parts.scheme + "://" + parts.authority +
                                   "/.well-known/oauth-authorization-server" + issuer_path;
        resp = transport.get(rfc8414_path);
    }
    if (resp.status != 200)
        throw FetchFailed("discovery for " + issuer_url + " failed with status " +
                          std::to_string(resp.status));

    auto doc = nlohmann::json::parse(resp.body, nullptr, false);
    if (doc.is_discarded())
        throw MalformedMetadata("discovery document is not JSON");
    IssuerMetadata md = IssuerMetadata::from_json(doc);
    if (!same_issuer(md.issuer, issuer_url))
        throw IssuerMismatch("document issuer " + md.issuer + " does not match requested " +
                             issuer_url);
    return md;
}

std::vector<VerificationKey> parse_jwks(const std::string& body) {
    auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("keys") || !doc["keys"].is_array())
        throw MalformedMetadata("JWKS document is not a {\"keys\": [...]} object");
    std::vector<VerificationKey> keys;
    for (const auto& jwk : doc["keys"]) {
        try {
            keys.push_back(VerificationKey::from_jwk(jwk));
        } catch (const UnsupportedAlgorithm&) {
            continue; // foreign key types in a shared JWKS are not an error
        }
    }
    for (size_t i = 0; i < keys.size(); ++i)
        for (size_t j = i + 1; j < keys.size(); ++j)
            if (keys[i].kid() == keys[j].kid())
                throw MalformedMetadata("JWKS contains duplicate kid " + keys[i].kid());
    return keys;
}

TrustAnchorStore::TrustAnchorStore(HttpFetcherPtr transport, ClockPtr clock)
    : TrustAnchorStore(std::move(transport), std::move(clock), Options{}) {}

TrustAnchorStore::TrustAnchorStore(HttpFetcherPtr transport, ClockPtr clock, Options options)
    : transport_(std::move(transport)), clock_(std::move(clock)), options_(options) {}

void TrustAnchorStore::add_accepted_issuer(const std::string& issuer_url) {
    auto e = entry_for(issuer_url);
    std::lock_guard lock(e->m);
    e->accepted = true;
}

std::vector<std::string> TrustAnchorStore::accepted_issuers() const {
    std::lock_guard lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [iss, e] : entries_)
        if (e->accepted)
            out.push_back(iss);
    return out;
}

void TrustAnchorStore::preload(const std::vector<IssuerTrustAnchor>& anchors) {
    // Reject duplicates within the batch and against already-preloaded
    // entries before mutating anything.
    for (size_t i = 0; i < anchors.size(); ++i)
        for (size_t j = i + 1; j < anchors.size(); ++j)
            if (same_issuer(anchors[i].metadata.issuer, anchors[j].metadata.issuer))
                throw DuplicateIssuer("duplicate anchor for issuer " + anchors[i].metadata.issuer);
    for (const auto& anchor : anchors) {
        auto e = entry_for(anchor.metadata.issuer);
        std::lock_guard lock(e->m);
        if (e->loaded)
            throw DuplicateIssuer("anchor already present for issuer " + anchor.metadata.issuer);
        for (size_t i = 0; i < anchor.keys.size(); ++i)
            for (size_t j = i + 1; j < anchor.keys.size(); ++j)
                if (anchor.keys[i].kid() == anchor.keys[j].kid())
                    throw DuplicateIssuer("anchor for " + anchor.metadata.issuer +
                                          " has duplicate kid " + anchor.keys[i].kid());
        e->loaded = true;
        e->accepted = true;
        e->metadata = anchor.metadata;
        e->keys = anchor.keys;
        // fetched_at may not lie in the future; unset means "fetched now"
        const int64_t now = clock_->now();
        e->fetched_at = anchor.fetched_at <= 0 || anchor.fetched_at > now ? now
                                                                          : anchor.fetched_at;
        e->ttl = anchor.ttl > 0 ? anchor.ttl : options_.ttl;
    }
}

std::shared_ptr<TrustAnchorStore::Entry> TrustAnchorStore::entry_for(const std::string& issuer_url) {
    std::lock_guard lock(map_mutex_);
    auto key = strip_trailing_slash(issuer_url);
    auto it = entries_.find(key);
    if (it == entries_.end())
        it = entries_.emplace(key, std::make_shared<Entry>()).first;
    return it->second;
}

void TrustAnchorStore::refresh_locked(Entry& e, const std::string& issuer_url) {
    IssuerMetadata md = discover(issuer_url, *transport_, options_.allow_http);
    HttpResponse resp = transport_->get(md.jwks_uri);
    if (resp.status != 200)
        throw FetchFailed("JWKS fetch from " + md.jwks_uri + " failed with status " +
                          std::to_string(resp.status));
    auto keys = parse_jwks(resp.body);
    // Commit only after both fetches parsed; failures leave the entry as
    // it was so the next call retries.
    e.metadata = std::move(md);
    e.keys = std::move(keys);
    e.fetched_at = clock_->now();
    e.ttl = options_.ttl;
    e.loaded = true;
}

void TrustAnchorStore::fetch_jwks_locked(Entry& e) {
    HttpResponse resp = transport_->get(e.metadata.jwks_uri);
    if (resp.status != 200)
        throw FetchFailed("JWKS fetch from " + e.metadata.jwks_uri + " failed with status " +
                          std::to_string(resp.status));
    e.keys = parse_jwks(resp.body);
    e.fetched_at = clock_->now();
}

VerificationKey TrustAnchorStore::get_key(const std::string& issuer_url, const std::string& kid) {
    auto e = entry_for(issuer_url);
    std::lock_guard lock(e->m);
    if (!e->accepted)
        throw UnknownIssuer("issuer is not in the accepted set: " + issuer_url);

    const int64_t now = clock_->now();
    bool fetched_this_call = false;
    if (!e->loaded || now >= e->fetched_at + e->ttl) {
        refresh_locked(*e, issuer_url);
        fetched_this_call = true;
    }

    auto find = [&]() -> const VerificationKey* {
        auto it = std::find_if(e->keys.begin(), e->keys.end(),
                               [&](const VerificationKey& k) { return k.kid() == kid; });
        return it == e->keys.end() ? nullptr : &*it;
    };

    if (const auto* k = find())
        return *k;
    if (!fetched_this_call) {
        // Rotation path: one forced key-set refresh, then hard failure.
        fetch_jwks_locked(*e);
        if (const auto* k = find())
            return *k;
    }
    throw UnknownKid("issuer " + issuer_url + " publishes no key with kid " + kid);
}

IssuerMetadata TrustAnchorStore::metadata(const std::string& issuer_url) {
    auto e = entry_for(issuer_url);
    std::lock_guard lock(e->m);
    if (!e->accepted)
        throw UnknownIssuer("issuer is not in the accepted set: " + issuer_url);
    const int64_t now = clock_->now();
    if (!e->loaded || now >= e->fetched_at + e->ttl)
        refresh_locked(*e, issuer_url);
    return e->metadata;
}

} // namespace wlcg

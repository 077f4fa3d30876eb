#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "wlcg/clock.hpp"
#include "wlcg/http.hpp"
#include "wlcg/keys.hpp"

namespace wlcg {

struct IssuerMetadata {
    std::string issuer;
    std::string jwks_uri;
    std::string token_endpoint;
    std::string authorization_endpoint; // optional, may be empty
    std::vector<std::string> grant_types_supported;

    nlohmann::json to_json() const;
    static IssuerMetadata from_json(const nlohmann::json& doc);
};

/// Discovered issuer metadata plus its cached verification keys.
struct IssuerTrustAnchor {
    IssuerMetadata metadata;
    std::vector<VerificationKey> keys;
    int64_t fetched_at = 0;
    int64_t ttl = 0; // seconds; 0 means the store default applies
};

/// Fetch the issuer's discovery document, trying the OIDC well-known path
/// first and the authorization-server-metadata path form on 404. Enforces
/// the issuer-match rule. Throws FetchFailed, IssuerMismatch,
/// MalformedMetadata.
IssuerMetadata discover(const std::string& issuer_url, HttpFetcher& transport,
                        bool allow_http = false);

/// Shared cache of issuer trust roots. Concurrent readers are fine;
/// refreshes for the same issuer coalesce into a single fetch. Fetch
/// failures are never cached.
class TrustAnchorStore {
  public:
    struct Options {
        int64_t ttl = 6 * 3600; // seconds
        bool allow_http = false;
    };

    TrustAnchorStore(HttpFetcherPtr transport, ClockPtr clock);
    TrustAnchorStore(HttpFetcherPtr transport, ClockPtr clock, Options options);

    /// Issuers the store will resolve at all; get_key for anyone else is
    /// UnknownIssuer.
    void add_accepted_issuer(const std::string& issuer_url);
    std::vector<std::string> accepted_issuers() const;

    /// Installs pre-fetched anchors; subsequent validations against these
    /// issuers perform no network fetches until ttl expiry. Throws
    /// DuplicateIssuer. Preloaded issuers become accepted.
    void preload(const std::vector<IssuerTrustAnchor>& anchors);

    /// Cache-first key lookup. A fresh cache that lacks the kid triggers
    /// exactly one forced key-set refresh (the rotation path) before
    /// UnknownKid. Throws UnknownIssuer, UnknownKid, FetchFailed.
    VerificationKey get_key(const std::string& issuer_url, const std::string& kid);

    /// Cached metadata, fetching when absent or stale.
    IssuerMetadata metadata(const std::string& issuer_url);

  private:
    struct Entry {
        std::mutex m;
        bool loaded = false;
        IssuerMetadata metadata;
        std::vector<VerificationKey> keys;
        int64_t fetched_at = 0;
        int64_t ttl = 0;
        bool accepted = false;
    };

    std::shared_ptr<Entry> entry_for(const std::string& issuer_url);
    void refresh_locked(Entry& e, const std::string& issuer_url);
    void fetch_jwks_locked(Entry& e);

    HttpFetcherPtr transport_;
    ClockPtr clock_;
    Options options_;
    mutable std::mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
};

/// Parse a JWKS document body into verification keys. Duplicate kid values
/// are MalformedMetadata; unsupported key types are skipped.
std::vector<VerificationKey> parse_jwks(const std::string& body);

} // namespace wlcg

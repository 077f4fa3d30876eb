#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "wlcg/claims.hpp"
#include "wlcg/clock.hpp"
#include "wlcg/http.hpp"
#include "wlcg/jwt.hpp"
#include "wlcg/keys.hpp"

namespace wlcg {

inline constexpr const char* kGrantAuthorizationCode = "authorization_code";
inline constexpr const char* kGrantClientCredentials = "client_credentials";
inline constexpr const char* kGrantRefreshToken = "refresh_token";
inline constexpr const char* kGrantTokenExchange = "token_exchange";
/// Wire identifier for the exchange grant at the token endpoint.
inline constexpr const char* kGrantTokenExchangeUrn =
    "urn:ietf:params:oauth:grant-type:token-exchange";

struct ClientRegistration {
    std::string client_id;
    std::string client_secret;
    std::set<std::string> allowed_grants; // subset of the four grant identifiers
    std::set<std::string> allowed_scopes;
    std::vector<std::string> redirect_uris;
    std::vector<std::string> default_audiences;
};

struct UserRecord {
    std::string username;
    std::string password_salt;
    std::string password_hash;
    std::string subject; // stable opaque sub value
    std::vector<std::string> groups;
    std::vector<std::string> assurance;
    std::map<std::string, nlohmann::json> oidc_claims; // name, email, ...
};

struct RefreshTokenRecord {
    std::string handle;
    std::string client_id;
    std::string subject;
    std::vector<std::string> granted_scopes;
    int64_t issued_at = 0;
    int64_t expires_at = 0;
    bool revoked = false;
};

struct TokenResponse {
    CompactToken access_token;
    std::optional<CompactToken> id_token;
    std::optional<std::string> refresh_token;
    std::string token_type = "Bearer";
    int64_t expires_in = 0;
    std::string scope; // granted scopes, space separated

    nlohmann::json to_json() const;
};

/// OAuth2-style protocol error: {error, error_description} with 400/401.
/// error_description starts with a stable marker (InvalidGrant,
/// ScopeBroadening, ...) so callers and transcripts can key on it.
struct OAuthError {
    int http_status = 400;
    std::string error;
    std::string description;

    nlohmann::json to_json() const;
};

template <typename T> using OAuthResult = std::variant<T, OAuthError>;

struct IssuerOptions {
    std::string issuer; // external base URL, e.g. "https://issuer.test"
    int64_t access_token_lifetime = 1200;
    int64_t id_token_lifetime = 600;
    int64_t refresh_token_lifetime = 12 * 3600;
    int64_t auth_code_lifetime = 60;
    std::string profile_version = kProfileVersion;
    /// Audiences the exchange grant may mint tokens for.
    std::vector<std::string> exchangeable_audiences;
    /// Single-file store for refresh records and the consumed-code set;
    /// empty keeps everything in memory.
    std::string store_path;
};

/// The token issuer: client registry, stub upstream authentication, and a
/// token endpoint covering the authorization-code, client-credentials,
/// refresh and exchange grants, plus discovery and JWKS publication.
///
/// Registration (clients, users) happens at configuration time; the
/// endpoint methods may then be called concurrently.
class IssuerService {
  public:
    IssuerService(IssuerOptions options, KeyPair signing_key, ClockPtr clock);

    void add_client(ClientRegistration client);
    void add_user(const std::string& username, const std::string& password,
                  const std::string& subject, std::vector<std::string> groups,
                  std::vector<std::string> assurance = {},
                  std::map<std::string, nlohmann::json> oidc_claims = {});

    const std::string& issuer_url() const { return options_.issuer; }
    const IssuerOptions& options() const { return options_; }

    nlohmann::json discovery_document() const;
    /// Current key plus any retired key that still covers live tokens.
    nlohmann::json jwks_document() const;

    /// New tokens are signed with `new_key`; the previous key stays in the
    /// JWKS until every token signed with it has expired.
    void rotate_signing_key(KeyPair new_key);
    std::string current_kid() const;

    struct AuthorizeRequest {
        std::string client_id;
        std::string redirect_uri;
        std::string scope;
        std::string username;
        std::string password;
    };
    struct AuthorizationCode {
        std::string code;
        std::string redirect_uri;
    };
    /// Stub login: validates the client, redirect target and credentials,
    /// then issues a single-use authorization code.
    OAuthResult<AuthorizationCode> authorize(const AuthorizeRequest& request);

    struct TokenRequest {
        std::string grant_type; // wire identifier
        std::string client_id;
        std::string client_secret;
        std::string code;
        std::string refresh_token;
        std::string scope;         // space separated, optional narrowing
        std::string subject_token; // exchange
        std::string audience;      // exchange
    };
    OAuthResult<TokenResponse> token(const TokenRequest& request);

    /// Introspection for tests and the harness: is this handle live?
    bool refresh_handle_live(const std::string& handle) const;
    size_t live_refresh_handles_for_subject(const std::string& subject) const;

  private:
    struct CodeRecord {
        std::string client_id;
        std::string subject;
        std::vector<std::string> scopes;
        int64_t auth_time = 0;
        int64_t expires_at = 0;
    };
    struct RetiredKey {
        VerificationKey key;
        int64_t max_exp_signed = 0;
    };

    const ClientRegistration* find_client(const std::string& client_id) const;
    const UserRecord* find_user(const std::string& username) const;
    const UserRecord* find_user_by_subject(const std::string& subject) const;

    OAuthResult<TokenResponse> grant_authorization_code(const ClientRegistration& client,
                                                        const TokenRequest& request);
    OAuthResult<TokenResponse> grant_client_credentials(const ClientRegistration& client,
                                                        const TokenRequest& request);
    OAuthResult<TokenResponse> grant_refresh(const ClientRegistration& client,
                                             const TokenRequest& request);
    OAuthResult<TokenResponse> grant_exchange(const ClientRegistration& client,
                                              const TokenRequest& request);

    CompactToken sign_token(ClaimSet claims, TokenKind kind);
    ClaimSet base_claims(const std::string& sub, const std::vector<std::string>& aud,
                         int64_t lifetime) const;
    std::string new_refresh_handle_locked(const std::string& client_id, const std::string& subject,
                                          std::vector<std::string> scopes, int64_t expires_at);

    /// Signature + liveness check of an exchange subject token against this
    /// issuer's own current and retired keys. Returns claims or an error.
    OAuthResult<ClaimSet> verify_own_token(const std::string& compact);

    void persist_locked();
    void load_store();

    IssuerOptions options_;
    ClockPtr clock_;

    mutable std::mutex key_mutex_;
    KeyPair signing_key_;
    std::vector<RetiredKey> retired_keys_;
    std::map<std::string, int64_t> max_exp_by_kid_;

    std::map<std::string, ClientRegistration> clients_;
    std::map<std::string, UserRecord> users_;
    std::map<std::string, std::string> username_by_subject_;

    mutable std::mutex store_mutex_;
    std::map<std::string, CodeRecord> active_codes_;
    std::set<std::string> consumed_codes_;
    std::map<std::string, RefreshTokenRecord> refresh_records_;
};

/// HTTP surface of the issuer:
///   GET  /.well-known/openid-configuration
///   GET  /jwks
///   GET  /authorize            (login form)
///   POST /authorize            (stub login -> 302 with ?code=)
///   POST /token                (form-encoded grants, Basic or body auth)
class IssuerApp final : public HttpHandler {
  public:
    explicit IssuerApp(std::shared_ptr<IssuerService> service) : service_(std::move(service)) {}

    HttpResponse handle(const HttpRequest& request) override;

    IssuerService& service() { return *service_; }

  private:
    std::shared_ptr<IssuerService> service_;
};

/// "Basic base64(id:secret)" helpers for client authentication.
std::string make_basic_auth(const std::string& user, const std::string& secret);
std::optional<std::pair<std::string, std::string>> parse_basic_auth(const std::string& header);

/// Space-separated scope string <-> list.
std::vector<std::string> split_scopes(const std::string& scope);
std::string join_scopes(const std::vector<std::string>& scopes);

} // namespace wlcg

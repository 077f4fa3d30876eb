#include "wlcg/issuer.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "wlcg/errors.hpp"
#include "wlcg/formenc.hpp"
#include "wlcg/validation.hpp"

namespace wlcg {

namespace {

constexpr const char* kStdBase64 =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string std_base64_encode(const std::string& in) {
    std::string out;
    size_t i = 0;
    while (i + 3 <= in.size()) {
        uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8) |
                     static_cast<unsigned char>(in[i + 2]);
        out.push_back(kStdBase64[(v >> 18) & 0x3f]);
        out.push_back(kStdBase64[(v >> 12) & 0x3f]);
        out.push_back(kStdBase64[(v >> 6) & 0x3f]);
        out.push_back(kStdBase64[v & 0x3f]);
        i += 3;
    }
    size_t rem = in.size() - i;
    if (rem == 1) {
        uint32_t v = static_cast<unsigned char>(in[i]) << 16;
        out.push_back(kStdBase64[(v >> 18) & 0x3f]);
        out.push_back(kStdBase64[(v >> 12) & 0x3f]);
        out += "==";
    } else if (rem == 2) {
        uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8);
        out.push_back(kStdBase64[(v >> 18) & 0x3f]);
        out.push_back(kStdBase64[(v >> 12) & 0x3f]);
        out.push_back(kStdBase64[(v >> 6) & 0x3f]);
        out.push_back('=');
    }
    return out;
}

std::optional<std::string> std_base64_decode(const std::string& in) {
    std::string out;
    uint32_t buf = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=')
            break;
        const char* p = strchr(kStdBase64, c);
        if (!p)
            return std::nullopt;
        buf = (buf << 6) | static_cast<uint32_t>(p - kStdBase64);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((buf >> bits) & 0xff));
        }
    }
    return out;
}

OAuthError oauth_error(int status, std::string code, std::string description) {
    return OAuthError{status, std::move(code), std::move(description)};
}

std::string map_grant_type(const std::string& wire) {
    if (wire == kGrantAuthorizationCode || wire == kGrantClientCredentials ||
        wire == kGrantRefreshToken)
        return wire;
    if (wire == kGrantTokenExchangeUrn)
        return kGrantTokenExchange;
    return "";
}

bool subset(const std::vector<std::string>& sub, const std::set<std::string>& super) {
    return std::all_of(sub.begin(), sub.end(),
                       [&](const std::string& s) { return super.count(s) > 0; });
}

} // namespace

std::vector<std::string> split_scopes(const std::string& scope) {
    std::vector<std::string> out;
    std::string::size_type pos = 0;
    while (pos <= scope.size()) {
        auto next = scope.find(' ', pos);
        if (next == std::string::npos)
            next = scope.size();
        if (next > pos)
            out.push_back(scope.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

std::string join_scopes(const std::vector<std::string>& scopes) {
    std::string out;
    for (const auto& s : scopes) {
        if (!out.empty())
            out.push_back(' ');
        out += s;
    }
    return out;
}

std::string make_basic_auth(const std::string& user, const std::string& secret) {
    return "Basic " + std_base64_encode(user + ":" + secret);
}

std::optional<std::pair<std::string, std::string>> parse_basic_auth(const std::string& header) {
    if (header.rfind("Basic ", 0) != 0)
        return std::nullopt;
    auto decoded = std_base64_decode(header.substr(6));
    if (!decoded)
        return std::nullopt;
    auto colon = decoded->find(':');
    if (colon == std::string::npos)
        return std::nullopt;
    return std::make_pair(decoded->substr(0, colon), decoded->substr(colon + 1));
}

nlohmann::json TokenResponse::to_json() const {
    nlohmann::json doc;
    doc["access_token"] = access_token.value;
    if (id_token)
        doc["id_token"] = id_token->value;
    if (refresh_token)
        doc["refresh_token"] = *refresh_token;
    doc["token_type"] = token_type;
    doc["expires_in"] = expires_in;
    if (!scope.empty())
        doc["scope"] = scope;
    return doc;
}

nlohmann::json OAuthError::to_json() const {
    return nlohmann::json{{"error", error}, {"error_description", description}};
}

IssuerService::IssuerService(IssuerOptions options, KeyPair signing_key, ClockPtr clock)
    : options_(std::move(options)), clock_(std::move(clock)), signing_key_(std::move(signing_key)) {
    if (options_.issuer.empty())
        throw ConfigError("issuer base URL must be configured");
    if (signing_key_.empty())
        throw ConfigError("issuer needs a signing key");
    load_store();
}

void IssuerService::add_client(ClientRegistration client) {
    static const std::set<std::string> known = {kGrantAuthorizationCode, kGrantClientCredentials,
                                                kGrantRefreshToken, kGrantTokenExchange};
    for (const auto& g : client.allowed_grants)
        if (!known.count(g))
            throw ConfigError("unknown grant in client registration: " + g);
    if (clients_.count(client.client_id))
        throw ConfigError("duplicate client_id: " + client.client_id);
    clients_.emplace(client.client_id, std::move(client));
}

void IssuerService::add_user(const std::string& username, const std::string& password,
                             const std::string& subject, std::vector<std::string> groups,
                             std::vector<std::string> assurance,
                             std::map<std::string, nlohmann::json> oidc_claims) {
    if (users_.count(username))
        throw ConfigError("duplicate username: " + username);
    UserRecord user;
    user.username = username;
    user.password_salt = password_salt();
    user.password_hash = password_hash(password, user.password_salt);
    user.subject = subject;
    user.groups = std::move(groups);
    user.assurance = std::move(assurance);
    user.oidc_claims = std::move(oidc_claims);
    username_by_subject_[subject] = username;
    users_.emplace(username, std::move(user));
}

const ClientRegistration* IssuerService::find_client(const std::string& client_id) const {
    auto it = clients_.find(client_id);
    return it == clients_.end() ? nullptr : &it->second;
}

const UserRecord* IssuerService::find_user(const std::string& username) const {
    auto it = users_.find(username);
    return it == users_.end() ? nullptr : &it->second;
}

const UserRecord* IssuerService::find_user_by_subject(const std::string& subject) const {
    auto it = username_by_subject_.find(subject);
    return it == username_by_subject_.end() ? nullptr : find_user(it->second);
}

nlohmann::json IssuerService::discovery_document() const {
    nlohmann::json doc;
    doc["issuer"] = options_.issuer;
    doc["authorization_endpoint"] = options_.issuer + "/authorize";
    doc["token_endpoint"] = options_.issuer + "/token";
    doc["jwks_uri"] = options_.issuer + "/jwks";
    doc["grant_types_supported"] = {kGrantAuthorizationCode, kGrantClientCredentials,
                                    kGrantRefreshToken, kGrantTokenExchangeUrn};
    doc["response_types_supported"] = {"code"};
    doc["token_endpoint_auth_methods_supported"] = {"client_secret_basic", "client_secret_post"};
    doc["id_token_signing_alg_values_supported"] = {"RS256", "ES256"};
    return doc;
}

nlohmann::json IssuerService::jwks_document() const {
    std::lock_guard lock(key_mutex_);
    const int64_t now = clock_->now();
    nlohmann::json keys = nlohmann::json::array();
    keys.push_back(signing_key_.public_key().to_jwk());
    for (const auto& retired : retired_keys_) {
        // A retired key stays published until every token signed with it
        // has expired.
        if (retired.max_exp_signed > now)
            keys.push_back(retired.key.to_jwk());
    }
    return nlohmann::json{{"keys", keys}};
}

void IssuerService::rotate_signing_key(KeyPair new_key) {
    if (new_key.empty())
        throw ConfigError("cannot rotate to an empty key");
    std::lock_guard lock(key_mutex_);
    RetiredKey retired;
    retired.key = signing_key_.public_key();
    auto it = max_exp_by_kid_.find(signing_key_.kid());
    retired.max_exp_signed = it == max_exp_by_kid_.end() ? 0 : it->second;
    retired_keys_.push_back(std::move(retired));
    signing_key_ = std::move(new_key);
}

std::string IssuerService::current_kid() const {
    std::lock_guard lock(key_mutex_);
    return signing_key_.kid();
}

ClaimSet IssuerService::base_claims(const std::string& sub, const std::vector<std::string>& aud,
                                    int64_t lifetime) const {
    ClaimSet claims;
    claims.sub = sub;
    claims.iss = options_.issuer;
    claims.aud = aud;
    claims.iat = clock_->now();
    claims.exp = claims.iat + lifetime;
    claims.jti = random_hex();
    claims.wlcg_ver = options_.profile_version;
    return claims;
}

CompactToken IssuerService::sign_token(ClaimSet claims, TokenKind kind) {
    auto shape = check_profile_shape(claims, kind);
    if (!shape.conformant())
        throw ShapeViolation("refusing to issue non-conformant " + to_string(kind) + " token: " +
                             shape.describe());
    std::lock_guard lock(key_mutex_);
    auto& max_exp = max_exp_by_kid_[signing_key_.kid()];
    max_exp = std::max(max_exp, claims.exp);
    return encode_and_sign(claims, kind, signing_key_);
}

OAuthResult<IssuerService::AuthorizationCode>
IssuerService::authorize(const AuthorizeRequest& request) {
    const ClientRegistration* client = find_client(request.client_id);
    if (!client)
        return oauth_error(400, "invalid_client", "UnknownClient: " + request.client_id);
    if (!client->allowed_grants.count(kGrantAuthorizationCode))
        return oauth_error(400, "unauthorized_client",
                           "client is not registered for the authorization_code grant");
    if (std::find(client->redirect_uris.begin(), client->redirect_uris.end(),
                  request.redirect_uri) == client->redirect_uris.end())
        return oauth_error(400, "invalid_request",
                           "RedirectMismatch: redirect_uri is not registered for this client");
    const UserRecord* user = find_user(request.username);
    if (!user || !secure_equal(password_hash(request.password, user->password_salt),
                               user->password_hash))
        return oauth_error(401, "access_denied", "BadCredentials: login failed");

    // Narrow the requested scopes to the client's allowlist.
    std::vector<std::string> granted;
    for (const auto& s : split_scopes(request.scope))
        if (client->allowed_scopes.count(s))
            granted.push_back(s);

    CodeRecord record;
    record.client_id = client->client_id;
    record.subject = user->subject;
    record.scopes = std::move(granted);
    record.auth_time = clock_->now();
    record.expires_at = record.auth_time + options_.auth_code_lifetime;

    std::string code = random_hex();
    {
        std::lock_guard lock(store_mutex_);
        active_codes_.emplace(code, std::move(record));
    }
    return AuthorizationCode{code, request.redirect_uri};
}

OAuthResult<TokenResponse> IssuerService::token(const TokenRequest& request) {
    const ClientRegistration* client = find_client(request.client_id);
    if (!client || !secure_equal(request.client_secret, client->client_secret))
        return oauth_error(401, "invalid_client", "client authentication failed");
    std::string grant = map_grant_type(request.grant_type);
    if (grant.empty())
        return oauth_error(400, "unsupported_grant_type",
                           "unknown grant_type: " + request.grant_type);
    if (!client->allowed_grants.count(grant))
        return oauth_error(400, "unauthorized_client",
                           "client is not registered for grant " + grant);

    if (grant == kGrantAuthorizationCode)
        return grant_authorization_code(*client, request);
    if (grant == kGrantClientCredentials)
        return grant_client_credentials(*client, request);
    if (grant == kGrantRefreshToken)
        return grant_refresh(*client, request);
    return grant_exchange(*client, request);
}

OAuthResult<TokenResponse>
IssuerService::grant_authorization_code(const ClientRegistration& client,
                                        const TokenRequest& request) {
    if (request.code.empty())
        return oauth_error(400, "invalid_request", "code is required");

    CodeRecord record;
    {
        std::lock_guard lock(store_mutex_);
        auto it = active_codes_.find(request.code);
        if (it == active_codes_.end()) {
            if (consumed_codes_.count(request.code))
                return oauth_error(400, "invalid_grant",
                                   "InvalidGrant: authorization code already used");
            return oauth_error(400, "invalid_grant", "InvalidGrant: unknown authorization code");
        }
        record = it->second;
        // Single use: the code is burned on any redemption attempt that
        // reaches it, including expired or wrong-client ones.
        active_codes_.erase(it);
        consumed_codes_.insert(request.code);
        persist_locked();
    }
    if (clock_->now() >= record.expires_at)
        return oauth_error(400, "invalid_grant", "InvalidGrant: authorization code expired");
    if (record.client_id != client.client_id)
        return oauth_error(400, "invalid_grant",
                           "InvalidGrant: code was issued to a different client");

    const UserRecord* user = find_user_by_subject(record.subject);
    if (!user)
        return oauth_error(400, "invalid_grant", "InvalidGrant: subject no longer exists");

    ClaimSet id = base_claims(user->subject, {client.client_id}, options_.id_token_lifetime);
    id.auth_time = record.auth_time;
    id.oidc_standard = user->oidc_claims;

    ClaimSet access =
        base_claims(user->subject, client.default_audiences, options_.access_token_lifetime);
    if (!record.scopes.empty())
        access.scope = join_scopes(record.scopes);
    if (!user->groups.empty())
        access.wlcg_groups = user->groups;
    if (!user->assurance.empty())
        access.eduperson_assurance = user->assurance;

    TokenResponse response;
    response.id_token = sign_token(id, TokenKind::IdToken);
    response.access_token = sign_token(access, TokenKind::AccessToken);
    response.expires_in = access.exp - access.iat;
    response.scope = join_scopes(record.scopes);
    {
        std::lock_guard lock(store_mutex_);
        response.refresh_token =
            new_refresh_handle_locked(client.client_id, user->subject, record.scopes,
                                      clock_->now() + options_.refresh_token_lifetime);
        persist_locked();
    }
    return response;
}

OAuthResult<TokenResponse>
IssuerService::grant_client_credentials(const ClientRegistration& client,
                                        const TokenRequest& request) {
    std::vector<std::string> granted = split_scopes(request.scope);
    if (granted.empty())
        granted.assign(client.allowed_scopes.begin(), client.allowed_scopes.end());
    else if (!subset(granted, client.allowed_scopes))
        return oauth_error(400, "invalid_scope",
                           "ScopeNotAllowed: requested scope outside the client allowlist");

    ClaimSet access =
        base_claims(client.client_id, client.default_audiences, options_.access_token_lifetime);
    if (!granted.empty())
        access.scope = join_scopes(granted);

    TokenResponse response;
    response.access_token = sign_token(access, TokenKind::AccessToken);
    response.expires_in = access.exp - access.iat;
    response.scope = join_scopes(granted);
    return response;
}

std::string IssuerService::new_refresh_handle_locked(const std::string& client_id,
                                                     const std::string& subject,
                                                     std::vector<std::string> scopes,
                                                     int64_t expires_at) {
    RefreshTokenRecord record;
    record.handle = random_hex(); // 128 bits
    record.client_id = client_id;
    record.subject = subject;
    record.granted_scopes = std::move(scopes);
    record.issued_at = clock_->now();
    record.expires_at = expires_at;
    std::string handle = record.handle;
    refresh_records_.emplace(handle, std::move(record));
    return handle;
}

OAuthResult<TokenResponse> IssuerService::grant_refresh(const ClientRegistration& client,
                                                        const TokenRequest& request) {
    if (request.refresh_token.empty())
        return oauth_error(400, "invalid_request", "refresh_token is required");
    std::vector<std::string> narrowed = split_scopes(request.scope);

    std::string subject;
    std::vector<std::string> granted;
    std::string new_handle;
    {
        std::lock_guard lock(store_mutex_);
        auto it = refresh_records_.find(request.refresh_token);
        if (it == refresh_records_.end())
            return oauth_error(400, "invalid_grant", "InvalidGrant: unknown refresh handle");
        RefreshTokenRecord& record = it->second;
        if (record.revoked)
            return oauth_error(400, "invalid_grant",
                               "InvalidGrant: refresh handle was rotated out or revoked");
        if (clock_->now() >= record.expires_at)
            return oauth_error(400, "invalid_grant", "InvalidGrant: refresh handle expired");
        if (record.client_id != client.client_id)
            return oauth_error(400, "invalid_grant",
                               "InvalidGrant: handle belongs to a different client");
        if (!narrowed.empty()) {
            std::set<std::string> original(record.granted_scopes.begin(),
                                           record.granted_scopes.end());
            if (!subset(narrowed, original))
                return oauth_error(400, "invalid_scope",
                                   "ScopeBroadening: requested scope exceeds the original grant");
        }
        subject = record.subject;
        granted = narrowed.empty() ? record.granted_scopes : narrowed;
        // Rotate-on-use: the old handle dies in the same critical section
        // that creates its successor. The successor keeps the original
        // grant and expiry; narrowing only shapes the access token.
        record.revoked = true;
        new_handle = new_refresh_handle_locked(client.client_id, subject, record.granted_scopes,
                                               record.expires_at);
        persist_locked();
    }

    const UserRecord* user = find_user_by_subject(subject);
    if (!user)
        return oauth_error(400, "invalid_grant", "InvalidGrant: subject no longer exists");

    ClaimSet access =
        base_claims(subject, client.default_audiences, options_.access_token_lifetime);
    if (!granted.empty())
        access.scope = join_scopes(granted);
    if (!user->groups.empty())
        access.wlcg_groups = user->groups;
    if (!user->assurance.empty())
        access.eduperson_assurance = user->assurance;

    TokenResponse response;
    response.access_token = sign_token(access, TokenKind::AccessToken);
    response.expires_in = access.exp - access.iat;
    response.scope = join_scopes(granted);
    response.refresh_token = new_handle;
    return response;
}

OAuthResult<ClaimSet> IssuerService::verify_own_token(const std::string& compact) {
    CompactToken token{compact};
    DecodedToken decoded;
    try {
        decoded = decode(token);
    } catch (const MalformedToken& e) {
        return oauth_error(400, "invalid_grant",
                           std::string("InvalidSubjectToken: malformed token: ") + e.what());
    }
    std::string kid = decoded.header.value("kid", "");
    VerificationKey key;
    {
        std::lock_guard lock(key_mutex_);
        if (signing_key_.kid() == kid) {
            key = signing_key_.public_key();
        } else {
            for (const auto& retired : retired_keys_)
                if (retired.key.kid() == kid)
                    key = retired.key;
        }
    }
    if (key.empty())
        return oauth_error(400, "invalid_grant", "InvalidSubjectToken: unknown kid " + kid);
    try {
        if (!verify_signature(token, key))
            return oauth_error(400, "invalid_grant", "InvalidSubjectToken: signature invalid");
    } catch (const Error& e) {
        return oauth_error(400, "invalid_grant",
                           std::string("InvalidSubjectToken: ") + e.what());
    }
    const ClaimSet& claims = decoded.claims;
    if (claims.iss != options_.issuer)
        return oauth_error(400, "invalid_grant",
                           "InvalidSubjectToken: token was not issued here");
    const int64_t now = clock_->now();
    if (now >= claims.exp)
        return oauth_error(400, "invalid_grant", "InvalidSubjectToken: token expired");
    if (claims.nbf && now < *claims.nbf)
        return oauth_error(400, "invalid_grant", "InvalidSubjectToken: token not yet valid");
    return claims;
}

OAuthResult<TokenResponse> IssuerService::grant_exchange(const ClientRegistration& client,
                                                         const TokenRequest& request) {
    if (request.subject_token.empty())
        return oauth_error(400, "invalid_request", "subject_token is required");
    if (request.audience.empty())
        return oauth_error(400, "invalid_request", "audience is required for token exchange");

    auto verified = verify_own_token(request.subject_token);
    if (std::holds_alternative<OAuthError>(verified))
        return std::get<OAuthError>(verified);
    const ClaimSet subject = std::get<ClaimSet>(verified);

    if (std::find(options_.exchangeable_audiences.begin(), options_.exchangeable_audiences.end(),
                  request.audience) == options_.exchangeable_audiences.end())
        return oauth_error(400, "invalid_target",
                           "AudienceNotPermitted: " + request.audience +
                               " is not an exchangeable audience");

    std::vector<std::string> subject_scopes = split_scopes(subject.scope.value_or(""));
    std::set<std::string> attainable;
    for (const auto& s : subject_scopes)
        if (client.allowed_scopes.count(s))
            attainable.insert(s);

    std::vector<std::string> granted = split_scopes(request.scope);
    if (granted.empty())
        granted.assign(attainable.begin(), attainable.end());
    else if (!subset(granted, attainable))
        return oauth_error(400, "invalid_scope",
                           "ScopeBroadening: requested scope exceeds the subject token grant");

    ClaimSet access = base_claims(subject.sub, {request.audience}, options_.access_token_lifetime);
    // Attenuation caps the child's lifetime at the parent's.
    access.exp = std::min(access.exp, subject.exp);
    if (!granted.empty())
        access.scope = join_scopes(granted);
    if (subject.wlcg_groups)
        access.wlcg_groups = subject.wlcg_groups;
    if (subject.eduperson_assurance)
        access.eduperson_assurance = subject.eduperson_assurance;
    if (subject.acr)
        access.acr = subject.acr;

    TokenResponse response;
    response.access_token = sign_token(access, TokenKind::AccessToken);
    response.expires_in = access.exp - access.iat;
    response.scope = join_scopes(granted);
    return response;
}

bool IssuerService::refresh_handle_live(const std::string& handle) const {
    std::lock_guard lock(store_mutex_);
    auto it = refresh_records_.find(handle);
    return it != refresh_records_.end() && !it->second.revoked &&
           clock_->now() < it->second.expires_at;
}

size_t IssuerService::live_refresh_handles_for_subject(const std::string& subject) const {
    std::lock_guard lock(store_mutex_);
    size_t n = 0;
    for (const auto& [handle, record] : refresh_records_)
        if (record.subject == subject && !record.revoked && clock_->now() < record.expires_at)
            ++n;
    return n;
}

void IssuerService::persist_locked() {
    if (options_.store_path.empty())
        return;
    nlohmann::json doc;
    doc["refresh_tokens"] = nlohmann::json::array();
    for (const auto& [handle, r] : refresh_records_) {
        doc["refresh_tokens"].push_back({{"handle", r.handle},
                                         {"client_id", r.client_id},
                                         {"subject", r.subject},
                                         {"scopes", r.granted_scopes},
                                         {"issued_at", r.issued_at},
                                         {"expires_at", r.expires_at},
                                         {"revoked", r.revoked}});
    }
    doc["consumed_codes"] = consumed_codes_;
    std::string tmp = options_.store_path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw IoError("cannot write grant store: " + tmp);
        out << doc.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, options_.store_path);
}

void IssuerService::load_store() {
    if (options_.store_path.empty() || !std::filesystem::exists(options_.store_path))
        return;
    std::ifstream in(options_.store_path);
    if (!in)
        throw IoError("cannot read grant store: " + options_.store_path);
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw IoError("grant store is not valid JSON: " + options_.store_path);
    for (const auto& r : doc.value("refresh_tokens", nlohmann::json::array())) {
        RefreshTokenRecord record;
        record.handle = r.at("handle").get<std::string>();
        record.client_id = r.at("client_id").get<std::string>();
        record.subject = r.at("subject").get<std::string>();
        record.granted_scopes = r.at("scopes").get<std::vector<std::string>>();
        record.issued_at = r.at("issued_at").get<int64_t>();
        record.expires_at = r.at("expires_at").get<int64_t>();
        record.revoked = r.at("revoked").get<bool>();
        refresh_records_.emplace(record.handle, record);
    }
    for (const auto& c : doc.value("consumed_codes", nlohmann::json::array()))
        consumed_codes_.insert(c.get<std::string>());
}

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) {
    HttpResponse resp;
    resp.status = status;
    resp.headers["Content-Type"] = "application/json";
    resp.body = body.dump();
    return resp;
}

HttpResponse error_response(const OAuthError& err) {
    HttpResponse resp = json_response(err.http_status, err.to_json());
    if (err.http_status == 401)
        resp.headers["WWW-Authenticate"] = "Basic realm=\"token\"";
    return resp;
}

} // namespace

HttpResponse IssuerApp::handle(const HttpRequest& request) {
    const std::string path = target_path(request.target);

    if (request.method == "GET" && path == "/.well-known/openid-configuration")
        return json_response(200, service_->discovery_document());
    if (request.method == "GET" && path == "/jwks")
        return json_response(200, service_->jwks_document());

    if (path == "/authorize") {
        if (request.method == "GET") {
            HttpResponse resp;
            resp.status = 200;
            resp.headers["Content-Type"] = "text/html";
            resp.body = "<html><body><form method=\"POST\" action=\"/authorize\">"
                        "<input name=\"client_id\"/><input name=\"redirect_uri\"/>"
                        "<input name=\"scope\"/><input name=\"username\"/>"
                        "<input name=\"password\" type=\"password\"/>"
                        "<button type=\"submit\">Sign in</button></form></body></html>";
            return resp;
        }
        if (request.method == "POST") {
            auto form = form_decode(request.body);
            IssuerService::AuthorizeRequest areq;
            areq.client_id = form["client_id"];
            areq.redirect_uri = form["redirect_uri"];
            areq.scope = form["scope"];
            areq.username = form["username"];
            areq.password = form["password"];
            auto result = service_->authorize(areq);
            if (std::holds_alternative<OAuthError>(result))
                return error_response(std::get<OAuthError>(result));
            const auto& code = std::get<IssuerService::AuthorizationCode>(result);
            HttpResponse resp;
            resp.status = 302;
            resp.headers["Location"] =
                code.redirect_uri + (code.redirect_uri.find('?') == std::string::npos ? "?" : "&") +
                "code=" + url_encode_component(code.code);
            return resp;
        }
    }

    if (request.method == "POST" && path == "/token") {
        auto form = form_decode(request.body);
        IssuerService::TokenRequest treq;
        treq.grant_type = form["grant_type"];
        treq.code = form["code"];
        treq.refresh_token = form["refresh_token"];
        treq.scope = form["scope"];
        treq.subject_token = form["subject_token"];
        treq.audience = form["audience"];

        auto basic = parse_basic_auth(request.header("Authorization"));
        if (basic) {
            if (!form["client_id"].empty() && form["client_id"] != basic->first)
                return error_response(OAuthError{
                    400, "invalid_request", "client_id differs between header and body"});
            treq.client_id = basic->first;
            treq.client_secret = basic->second;
        } else {
            treq.client_id = form["client_id"];
            treq.client_secret = form["client_secret"];
        }

        auto result = service_->token(treq);
        if (std::holds_alternative<OAuthError>(result))
            return error_response(std::get<OAuthError>(result));
        return json_response(200, std::get<TokenResponse>(result).to_json());
    }

    return json_response(404, nlohmann::json{{"error", "not_found"},
                                             {"error_description", "no such endpoint: " + path}});
}

} // namespace wlcg

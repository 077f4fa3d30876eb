#include <doctest.h>

#include <filesystem>
#include <random>
#include <thread>

#include "wlcg/errors.hpp"
#include "wlcg/issuer.hpp"
#include "wlcg/validation.hpp"

using namespace wlcg;

namespace {

constexpr const char* kIssuerUrl = "https://issuer.test";
constexpr const char* kRedirect = "https://webclient.test/cb";

struct Fixture {
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(1700000000);
    KeyPair key = KeyPair::generate(JwsAlgorithm::RS256);
    std::shared_ptr<IssuerService> issuer;

    explicit Fixture(const std::string& store_path = "") {
        IssuerOptions options;
        options.issuer = kIssuerUrl;
        options.exchangeable_audiences = {"https://transfer.test", "https://source.test"};
        options.store_path = store_path;
        issuer = std::make_shared<IssuerService>(options, key, clock);

        ClientRegistration web;
        web.client_id = "webclient";
        web.client_secret = "web-secret";
        web.allowed_grants = {kGrantAuthorizationCode, kGrantRefreshToken};
        web.allowed_scopes = {"storage.read:/data", "storage.write:/data",
                              "storage.create:/data"};
        web.redirect_uris = {kRedirect};
        web.default_audiences = {"https://storage.test"};
        issuer->add_client(web);

        ClientRegistration svc;
        svc.client_id = "svc";
        svc.client_secret = "svc-secret";
        svc.allowed_grants = {kGrantClientCredentials};
        svc.allowed_scopes = {"storage.read:/tape", "storage.write:/tape"};
        svc.default_audiences = {"https://storage.test"};
        issuer->add_client(svc);

        ClientRegistration orchestrator;
        orchestrator.client_id = "orchestrator";
        orchestrator.client_secret = "orch-secret";
        orchestrator.allowed_grants = {kGrantTokenExchange, kGrantClientCredentials};
        orchestrator.allowed_scopes = {"storage.read:/data", "storage.write:/data"};
        orchestrator.default_audiences = {"https://orchestrator.test"};
        issuer->add_client(orchestrator);

        issuer->add_user("alice", "correct-horse", "alice-sub-1", {"/wlcg", "/wlcg/ops"},
                         {"https://refeds.org/assurance/IAP/medium"},
                         {{"name", "Alice Doe"}, {"email", "alice@example.org"}});
    }

    std::string login(const std::string& scope = "storage.read:/data storage.write:/data") {
        IssuerService::AuthorizeRequest req;
        req.client_id = "webclient";
        req.redirect_uri = kRedirect;
        req.scope = scope;
        req.username = "alice";
        req.password = "correct-horse";
        auto result = issuer->authorize(req);
        REQUIRE(std::holds_alternative<IssuerService::AuthorizationCode>(result));
        return std::get<IssuerService::AuthorizationCode>(result).code;
    }

    TokenResponse redeem(const std::string& code) {
        IssuerService::TokenRequest req;
        req.grant_type = kGrantAuthorizationCode;
        req.client_id = "webclient";
        req.client_secret = "web-secret";
        req.code = code;
        auto result = issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(result));
        return std::get<TokenResponse>(result);
    }

    OAuthError expect_error(const IssuerService::TokenRequest& req) {
        auto result = issuer->token(req);
        REQUIRE(std::holds_alternative<OAuthError>(result));
        return std::get<OAuthError>(result);
    }
};

ClaimSet claims_of(const CompactToken& token) { return decode(token).claims; }

} // namespace

TEST_CASE("authorize issues a code and narrows scopes to the allowlist") {
    Fixture f;
    auto code = f.login("storage.read:/data storage.write:/secret compute.run");
    auto tokens = f.redeem(code);
    auto access = claims_of(tokens.access_token);
    REQUIRE(access.scope.has_value());
    CHECK(*access.scope == "storage.read:/data"); // the other two were outside the allowlist
}

TEST_CASE("authorize rejections") {
    Fixture f;
    IssuerService::AuthorizeRequest req;
    req.client_id = "webclient";
    req.redirect_uri = kRedirect;
    req.username = "alice";
    req.password = "correct-horse";

    SUBCASE("unknown client") {
        req.client_id = "nobody";
        auto result = f.issuer->authorize(req);
        REQUIRE(std::holds_alternative<OAuthError>(result));
        CHECK(std::get<OAuthError>(result).description.find("UnknownClient") !=
              std::string::npos);
    }
    SUBCASE("unregistered redirect") {
        req.redirect_uri = "https://evil.test/cb";
        auto result = f.issuer->authorize(req);
        REQUIRE(std::holds_alternative<OAuthError>(result));
        CHECK(std::get<OAuthError>(result).description.find("RedirectMismatch") !=
              std::string::npos);
    }
    SUBCASE("bad credentials") {
        req.password = "wrong";
        auto result = f.issuer->authorize(req);
        REQUIRE(std::holds_alternative<OAuthError>(result));
        const auto& err = std::get<OAuthError>(result);
        CHECK(err.http_status == 401);
        CHECK(err.description.find("BadCredentials") != std::string::npos);
    }
    SUBCASE("client without the grant") {
        req.client_id = "svc";
        auto result = f.issuer->authorize(req);
        REQUIRE(std::holds_alternative<OAuthError>(result));
        CHECK(std::get<OAuthError>(result).error == "unauthorized_client");
    }
}

TEST_CASE("code redemption returns the three tokens with conformant shapes") {
    Fixture f;
    auto tokens = f.redeem(f.login());

    REQUIRE(tokens.id_token.has_value());
    REQUIRE(tokens.refresh_token.has_value());
    CHECK(tokens.token_type == "Bearer");

    auto id = claims_of(*tokens.id_token);
    auto access = claims_of(tokens.access_token);

    // ID token: auth_time + user OIDC claims, audience is the client
    CHECK(id.auth_time.has_value());
    CHECK(id.aud == std::vector<std::string>{"webclient"});
    CHECK(id.oidc_standard.at("email") == "alice@example.org");
    CHECK_FALSE(id.scope.has_value());
    CHECK(check_profile_shape(id, TokenKind::IdToken).conformant());

    // access token: scope + groups + assurance, audience from the client registration
    CHECK(access.aud == std::vector<std::string>{"https://storage.test"});
    CHECK(access.scope == "storage.read:/data storage.write:/data");
    REQUIRE(access.wlcg_groups.has_value());
    CHECK(*access.wlcg_groups == std::vector<std::string>{"/wlcg", "/wlcg/ops"});
    REQUIRE(access.eduperson_assurance.has_value());
    CHECK_FALSE(access.auth_time.has_value());
    CHECK(check_profile_shape(access, TokenKind::AccessToken).conformant());

    CHECK(access.sub == "alice-sub-1");
    CHECK(id.sub == access.sub);
    CHECK(tokens.expires_in == access.exp - access.iat);
    CHECK(access.jti != id.jti);
}

TEST_CASE("authorization codes are single-use") {
    Fixture f;
    auto code = f.login();
    f.redeem(code);
    IssuerService::TokenRequest req;
    req.grant_type = kGrantAuthorizationCode;
    req.client_id = "webclient";
    req.client_secret = "web-secret";
    req.code = code;
    auto err = f.expect_error(req);
    CHECK(err.error == "invalid_grant");
    CHECK(err.description.find("already used") != std::string::npos);
}

TEST_CASE("authorization codes expire after their 60 s lifetime") {
    Fixture f;
    auto code = f.login();
    f.clock->advance(61);
    IssuerService::TokenRequest req;
    req.grant_type = kGrantAuthorizationCode;
    req.client_id = "webclient";
    req.client_secret = "web-secret";
    req.code = code;
    CHECK(f.expect_error(req).error == "invalid_grant");
}

TEST_CASE("codes are bound to the redeeming client") {
    Fixture f;
    auto code = f.login();
    IssuerService::TokenRequest req;
    req.grant_type = kGrantAuthorizationCode;
    req.client_id = "orchestrator"; // other registered client, not the code's
    req.client_secret = "orch-secret";
    req.code = code;
    f.issuer->add_client([] {
        ClientRegistration c;
        c.client_id = "thief";
        c.client_secret = "s";
        c.allowed_grants = {kGrantAuthorizationCode};
        return c;
    }());
    req.client_id = "thief";
    req.client_secret = "s";
    CHECK(f.expect_error(req).error == "invalid_grant");
}

TEST_CASE("client credentials grant") {
    Fixture f;
    IssuerService::TokenRequest req;
    req.grant_type = kGrantClientCredentials;
    req.client_id = "svc";
    req.client_secret = "svc-secret";

    SUBCASE("defaults to the full allowlist, no id or refresh token") {
        auto result = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(result));
        const auto& tokens = std::get<TokenResponse>(result);
        CHECK_FALSE(tokens.id_token.has_value());
        CHECK_FALSE(tokens.refresh_token.has_value());
        auto access = claims_of(tokens.access_token);
        CHECK(access.sub == "svc");
        CHECK(*access.scope == "storage.read:/tape storage.write:/tape");
        CHECK(check_profile_shape(access, TokenKind::AccessToken).conformant());
    }
    SUBCASE("requested subset is honored") {
        req.scope = "storage.read:/tape";
        auto result = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(result));
        CHECK(*claims_of(std::get<TokenResponse>(result).access_token).scope ==
              "storage.read:/tape");
    }
    SUBCASE("scope outside the allowlist") {
        req.scope = "storage.read:/tape storage.read:/secret";
        auto err = f.expect_error(req);
        CHECK(err.error == "invalid_scope");
        CHECK(err.description.find("ScopeNotAllowed") != std::string::npos);
    }
    SUBCASE("wrong secret is invalid_client with 401") {
        req.client_secret = "nope";
        auto err = f.expect_error(req);
        CHECK(err.http_status == 401);
        CHECK(err.error == "invalid_client");
    }
    SUBCASE("grant not allowed for the client") {
        req.client_id = "webclient";
        req.client_secret = "web-secret";
        CHECK(f.expect_error(req).error == "unauthorized_client");
    }
}

TEST_CASE("refresh grant rotates the handle and keeps sub and scopes") {
    Fixture f;
    auto tokens = f.redeem(f.login());
    auto original_access = claims_of(tokens.access_token);
    f.clock->advance(1500); // past access expiry

    IssuerService::TokenRequest req;
    req.grant_type = kGrantRefreshToken;
    req.client_id = "webclient";
    req.client_secret = "web-secret";
    req.refresh_token = *tokens.refresh_token;
    auto result = f.issuer->token(req);
    REQUIRE(std::holds_alternative<TokenResponse>(result));
    const auto& renewed = std::get<TokenResponse>(result);

    auto access = claims_of(renewed.access_token);
    CHECK(access.exp > f.clock->now());
    CHECK(access.sub == original_access.sub);
    CHECK(access.scope == original_access.scope);
    REQUIRE(renewed.refresh_token.has_value());
    CHECK(*renewed.refresh_token != *tokens.refresh_token);

    SUBCASE("the rotated-out handle is dead") {
        auto err = f.expect_error(req);
        CHECK(err.error == "invalid_grant");
        CHECK_FALSE(f.issuer->refresh_handle_live(*tokens.refresh_token));
        CHECK(f.issuer->refresh_handle_live(*renewed.refresh_token));
    }
    SUBCASE("narrowing on refresh shapes the access token") {
        req.refresh_token = *renewed.refresh_token;
        req.scope = "storage.read:/data";
        auto narrowed = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(narrowed));
        CHECK(*claims_of(std::get<TokenResponse>(narrowed).access_token).scope ==
              "storage.read:/data");
    }
    SUBCASE("broadening on refresh is refused and does not rotate") {
        req.refresh_token = *renewed.refresh_token;
        req.scope = "storage.read:/data storage.write:/secret";
        auto err = f.expect_error(req);
        CHECK(err.error == "invalid_scope");
        CHECK(err.description.find("ScopeBroadening") != std::string::npos);
        CHECK(f.issuer->refresh_handle_live(*renewed.refresh_token));
    }
}

TEST_CASE("refresh handle expiry") {
    Fixture f;
    auto tokens = f.redeem(f.login());
    f.clock->advance(12 * 3600 + 1);
    IssuerService::TokenRequest req;
    req.grant_type = kGrantRefreshToken;
    req.client_id = "webclient";
    req.client_secret = "web-secret";
    req.refresh_token = *tokens.refresh_token;
    CHECK(f.expect_error(req).error == "invalid_grant");
}

TEST_CASE("concurrent reuse of one refresh handle yields exactly one success") {
    Fixture f;
    auto tokens = f.redeem(f.login());
    const int kThreads = 16;
    std::atomic<int> successes{0};
    std::vector<std::thread> threads;
    threads.reserve(kThreads);
    for (int i = 0; i < kThreads; ++i)
        threads.emplace_back([&] {
            IssuerService::TokenRequest req;
            req.grant_type = kGrantRefreshToken;
            req.client_id = "webclient";
            req.client_secret = "web-secret";
            req.refresh_token = *tokens.refresh_token;
            auto result = f.issuer->token(req);
            if (std::holds_alternative<TokenResponse>(result))
                ++successes;
        });
    for (auto& t : threads)
        t.join();
    CHECK(successes.load() == 1);
}

TEST_CASE("token exchange attenuates scope, audience and lifetime") {
    Fixture f;
    auto tokens = f.redeem(f.login());
    IssuerService::TokenRequest req;
    req.grant_type = kGrantTokenExchangeUrn;
    req.client_id = "orchestrator";
    req.client_secret = "orch-secret";
    req.subject_token = tokens.access_token.value;
    req.audience = "https://transfer.test";

    SUBCASE("defaults to the attainable intersection, preserves sub and groups") {
        auto result = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(result));
        auto child = claims_of(std::get<TokenResponse>(result).access_token);
        auto parent = claims_of(tokens.access_token);
        CHECK(child.sub == parent.sub);
        CHECK(child.aud == std::vector<std::string>{"https://transfer.test"});
        CHECK(child.exp <= parent.exp);
        CHECK(child.wlcg_groups == parent.wlcg_groups);
        // granted = subject scopes ∩ client allowlist (all of them here)
        CHECK(*child.scope == "storage.read:/data storage.write:/data");
        CHECK(check_profile_shape(child, TokenKind::AccessToken).conformant());
    }
    SUBCASE("requested subset is honored") {
        req.scope = "storage.write:/data";
        auto result = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(result));
        CHECK(*claims_of(std::get<TokenResponse>(result).access_token).scope ==
              "storage.write:/data");
    }
    SUBCASE("scope broadening is refused") {
        req.scope = "storage.write:/data storage.write:/secret";
        auto err = f.expect_error(req);
        CHECK(err.error == "invalid_scope");
        CHECK(err.description.find("ScopeBroadening") != std::string::npos);
    }
    SUBCASE("audience must be exchangeable") {
        req.audience = "https://anywhere.test";
        auto err = f.expect_error(req);
        CHECK(err.error == "invalid_target");
        CHECK(err.description.find("AudienceNotPermitted") != std::string::npos);
    }
    SUBCASE("lifetime cap: child expiry never exceeds the subject's") {
        f.clock->advance(1100); // subject has 100 s left
        auto result = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(result));
        auto child = claims_of(std::get<TokenResponse>(result).access_token);
        CHECK(child.exp == claims_of(tokens.access_token).exp);
        CHECK(std::get<TokenResponse>(result).expires_in == 100);
    }
    SUBCASE("expired subject token") {
        f.clock->advance(1201);
        auto err = f.expect_error(req);
        CHECK(err.description.find("InvalidSubjectToken") != std::string::npos);
    }
    SUBCASE("garbage subject token") {
        req.subject_token = "not.a.token";
        CHECK(f.expect_error(req).description.find("InvalidSubjectToken") != std::string::npos);
    }
    SUBCASE("foreign-signed subject token") {
        KeyPair foreign = KeyPair::generate(JwsAlgorithm::RS256, f.key.kid());
        auto claims = claims_of(tokens.access_token);
        req.subject_token = encode_and_sign(claims, TokenKind::AccessToken, foreign).value;
        CHECK(f.expect_error(req).description.find("InvalidSubjectToken") != std::string::npos);
    }
    SUBCASE("second-hop exchange keeps attenuating") {
        auto first = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(first));
        IssuerService::TokenRequest hop2 = req;
        hop2.subject_token = std::get<TokenResponse>(first).access_token.value;
        hop2.audience = "https://source.test";
        hop2.scope = "storage.read:/data";
        auto second = f.issuer->token(hop2);
        REQUIRE(std::holds_alternative<TokenResponse>(second));
        auto child = claims_of(std::get<TokenResponse>(second).access_token);
        CHECK(child.sub == "alice-sub-1");
        CHECK(*child.scope == "storage.read:/data");
    }
}

TEST_CASE("attenuation property over random scope sets") {
    std::mt19937_64 rng(0xa77e);
    const std::vector<std::string> pool = {"storage.read:/data", "storage.write:/data",
                                           "storage.create:/data"};
    for (int iter = 0; iter < 40; ++iter) {
        Fixture f;
        // random login scope
        std::vector<std::string> requested;
        for (const auto& s : pool)
            if (rng() % 2)
                requested.push_back(s);
        auto tokens = f.redeem(f.login(join_scopes(requested)));
        auto parent_scopes = split_scopes(claims_of(tokens.access_token).scope.value_or(""));
        std::set<std::string> parent_set(parent_scopes.begin(), parent_scopes.end());

        // refresh with a random narrowing picked from the parent set
        std::vector<std::string> narrowed;
        for (const auto& s : parent_scopes)
            if (rng() % 2)
                narrowed.push_back(s);
        IssuerService::TokenRequest req;
        req.grant_type = kGrantRefreshToken;
        req.client_id = "webclient";
        req.client_secret = "web-secret";
        req.refresh_token = *tokens.refresh_token;
        req.scope = join_scopes(narrowed);
        auto refreshed = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(refreshed));
        for (const auto& s :
             split_scopes(claims_of(std::get<TokenResponse>(refreshed).access_token)
                              .scope.value_or("")))
            CHECK(parent_set.count(s) == 1);

        // exchange with empty request: granted must be inside the parent set
        IssuerService::TokenRequest ex;
        ex.grant_type = kGrantTokenExchangeUrn;
        ex.client_id = "orchestrator";
        ex.client_secret = "orch-secret";
        ex.subject_token = tokens.access_token.value;
        ex.audience = "https://transfer.test";
        auto exchanged = f.issuer->token(ex);
        REQUIRE(std::holds_alternative<TokenResponse>(exchanged));
        for (const auto& s :
             split_scopes(claims_of(std::get<TokenResponse>(exchanged).access_token)
                              .scope.value_or("")))
            CHECK(parent_set.count(s) == 1);
    }
}

TEST_CASE("discovery document is consistent with the issuer") {
    Fixture f;
    auto doc = f.issuer->discovery_document();
    CHECK(doc["issuer"] == kIssuerUrl);
    CHECK(doc["token_endpoint"] == std::string(kIssuerUrl) + "/token");
    CHECK(doc["jwks_uri"] == std::string(kIssuerUrl) + "/jwks");
    std::vector<std::string> grants = doc["grant_types_supported"];
    CHECK(grants == std::vector<std::string>{
                        "authorization_code", "client_credentials", "refresh_token",
                        "urn:ietf:params:oauth:grant-type:token-exchange"});
}

TEST_CASE("jwks retains a rotated-out key until its tokens expire") {
    Fixture f;
    auto tokens = f.redeem(f.login());
    std::string old_kid = f.key.kid();

    KeyPair next = KeyPair::generate(JwsAlgorithm::RS256);
    f.issuer->rotate_signing_key(next);
    CHECK(f.issuer->current_kid() == next.kid());

    auto kids = [&] {
        std::vector<std::string> out;
        auto doc = f.issuer->jwks_document();
        for (const auto& k : doc["keys"])
            out.push_back(k["kid"].get<std::string>());
        return out;
    };
    auto has = [&](const std::string& kid) {
        auto v = kids();
        return std::find(v.begin(), v.end(), kid) != v.end();
    };

    // both kids published while the old token lives
    CHECK(has(old_kid));
    CHECK(has(next.kid()));

    // the pre-rotation token still verifies against the published JWKS
    auto jwks = f.issuer->jwks_document();
    bool verified = false;
    for (const auto& jwk : jwks["keys"])
        if (jwk["kid"] == old_kid)
            verified = verify_signature(tokens.access_token, VerificationKey::from_jwk(jwk));
    CHECK(verified);

    // once every token signed with the old key has expired, it drops out
    f.clock->advance(1201);
    CHECK_FALSE(has(old_kid));
    CHECK(has(next.kid()));
}

TEST_CASE("grant store persists refresh rotation and consumed codes") {
    auto dir = std::filesystem::temp_directory_path() / "wlcg-issuer-test";
    std::filesystem::create_directories(dir);
    auto store_path = (dir / "grants.json").string();
    std::filesystem::remove(store_path);

    std::string code;
    std::string handle;
    {
        Fixture f(store_path);
        code = f.login();
        auto tokens = f.redeem(code);
        handle = *tokens.refresh_token;
    }
    {
        // same store, fresh process-equivalent
        Fixture f(store_path);
        IssuerService::TokenRequest req;
        req.grant_type = kGrantAuthorizationCode;
        req.client_id = "webclient";
        req.client_secret = "web-secret";
        req.code = code;
        CHECK(f.expect_error(req).description.find("already used") != std::string::npos);

        req = {};
        req.grant_type = kGrantRefreshToken;
        req.client_id = "webclient";
        req.client_secret = "web-secret";
        req.refresh_token = handle;
        auto result = f.issuer->token(req);
        REQUIRE(std::holds_alternative<TokenResponse>(result));

        // rotation persisted: reuse after reload fails
        Fixture g(store_path);
        CHECK(g.expect_error(req).error == "invalid_grant");
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("issuer app serves the oauth surface over http") {
    Fixture f;
    IssuerApp app(f.issuer);

    HttpRequest form{"GET", "/authorize", {}, ""};
    auto form_resp = app.handle(form);
    CHECK(form_resp.status == 200);
    CHECK(form_resp.body.find("<form") != std::string::npos);

    HttpRequest disco{"GET", "/.well-known/openid-configuration", {}, ""};
    auto resp = app.handle(disco);
    CHECK(resp.status == 200);
    CHECK(nlohmann::json::parse(resp.body)["issuer"] == kIssuerUrl);

    HttpRequest jwks{"GET", "/jwks", {}, ""};
    CHECK(app.handle(jwks).status == 200);

    HttpRequest login{"POST", "/authorize", {},
                      "client_id=webclient&redirect_uri=" 
                      "https%3A%2F%2Fwebclient.test%2Fcb&scope=storage.read%3A%2Fdata"
                      "&username=alice&password=correct-horse"};
    auto code_resp = app.handle(login);
    REQUIRE(code_resp.status == 302);
    auto location = code_resp.headers.at("Location");
    auto marker = location.find("code=");
    REQUIRE(marker != std::string::npos);
    std::string code = location.substr(marker + 5);

    HttpRequest token{"POST", "/token",
                      {{"Authorization", make_basic_auth("webclient", "web-secret")}},
                      "grant_type=authorization_code&code=" + code};
    auto token_resp = app.handle(token);
    REQUIRE(token_resp.status == 200);
    auto body = nlohmann::json::parse(token_resp.body);
    CHECK(body.contains("access_token"));
    CHECK(body.contains("id_token"));
    CHECK(body.contains("refresh_token"));
    CHECK(body["token_type"] == "Bearer");
    CHECK(body["expires_in"] == 1200);

    HttpRequest bad_secret{"POST", "/token",
                           {{"Authorization", make_basic_auth("webclient", "nope")}},
                           "grant_type=authorization_code&code=whatever"};
    auto denied = app.handle(bad_secret);
    CHECK(denied.status == 401);
    CHECK(denied.headers.count("WWW-Authenticate") == 1);
    CHECK(nlohmann::json::parse(denied.body)["error"] == "invalid_client");

    HttpRequest unknown{"GET", "/nowhere", {}, ""};
    CHECK(app.handle(unknown).status == 404);
}

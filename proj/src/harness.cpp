#include "wlcg/harness.hpp"

#include <algorithm>
#include <set>

#include "wlcg/config.hpp"
#include "wlcg/errors.hpp"
#include "wlcg/formenc.hpp"
#include "wlcg/guard.hpp"
#include "wlcg/issuer.hpp"
#include "wlcg/transport.hpp"
#include "wlcg/validation.hpp"

namespace wlcg::harness {

nlohmann::json StepRecord::to_json() const {
    nlohmann::json doc;
    doc["step"] = step;
    doc["actor"] = actor;
    doc["action"] = action;
    doc["request"] = request;
    doc["response"] = response;
    doc["tokens"] = tokens;
    doc["assertions"] = nlohmann::json::array();
    for (const auto& a : assertions)
        doc["assertions"].push_back(
            {{"check", a.check}, {"passed", a.passed}, {"detail", a.detail}});
    doc["fetches"] = fetches;
    return doc;
}

std::string Transcript::to_json_lines() const {
    std::string out;
    out += nlohmann::json{{"scenario", scenario}, {"steps", steps.size()}}.dump() + "\n";
    for (const auto& s : steps)
        out += s.to_json().dump() + "\n";
    out += nlohmann::json{{"result", passed ? "passed" : "failed"},
                          {"first_failure", first_failure}}
               .dump() +
           "\n";
    return out;
}

nlohmann::json scrub_volatile(nlohmann::json doc) {
    if (doc.is_object()) {
        for (auto& [key, value] : doc.items()) {
            if (key == "jti")
                value = "<jti>";
            else
                value = scrub_volatile(value);
        }
    } else if (doc.is_array()) {
        for (auto& value : doc)
            value = scrub_volatile(value);
    }
    return doc;
}

namespace {

constexpr const char* kIssuerUrl = "https://issuer.test";
constexpr const char* kStorageUrl = "https://storage.test";
constexpr const char* kSourceUrl = "https://source.test";
constexpr const char* kDestUrl = "https://dest.test";
constexpr const char* kTransferAudience = "https://transfer.test";
constexpr const char* kOrchestratorAudience = "https://orchestrator.test";
constexpr const char* kRedirect = "https://webclient.test/cb";
constexpr int64_t kEpoch = 1700000000;

/// Fixed key material so repeated scenario runs differ only in signatures
/// and jti values.
const KeyPair& scenario_key() {
    static KeyPair key = KeyPair::generate(JwsAlgorithm::RS256, "scenario-key-1");
    return key;
}

struct Resource {
    std::string base_url;
    std::shared_ptr<CountingLoopbackFetcher> fetcher;
    std::shared_ptr<ResourceApp> app;
};

struct Env {
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(kEpoch);
    std::shared_ptr<LoopbackNetwork> network = std::make_shared<LoopbackNetwork>();
    std::shared_ptr<IssuerService> issuer;
    std::map<std::string, Resource> resources;

    void add_resource(const std::string& name, const std::string& base_url) {
        Resource r;
        r.base_url = base_url;
        r.fetcher = std::make_shared<CountingLoopbackFetcher>(network);
        auto anchors = std::make_shared<TrustAnchorStore>(r.fetcher, clock);
        anchors->add_accepted_issuer(kIssuerUrl);
        GuardConfig config;
        config.accepted_issuers = {kIssuerUrl};
        config.expected_audiences = {base_url};
        config.policy.mode = PolicyMode::Either;
        config.policy.group_rules.push_back(
            {"storage.read", AbsolutePath::parse("/"), GroupName::parse("/wlcg")});
        r.app = std::make_shared<ResourceApp>(config, anchors, clock);
        network->mount(base_url, r.app);
        resources.emplace(name, std::move(r));
    }

    nlohmann::json fetch_counters() const {
        nlohmann::json doc = nlohmann::json::object();
        for (const auto& [name, r] : resources)
            doc[r.base_url] = r.fetcher->by_url();
        return doc;
    }

    int64_t total_fetches() const {
        int64_t sum = 0;
        for (const auto& [name, r] : resources)
            sum += r.fetcher->total();
        return sum;
    }
};

Env make_env() {
    Env env;
    IssuerOptions options;
    options.issuer = kIssuerUrl;
    options.exchangeable_audiences = {kTransferAudience, kSourceUrl, kDestUrl};
    env.issuer = std::make_shared<IssuerService>(options, scenario_key(), env.clock);

    ClientRegistration web;
    web.client_id = "webclient";
    web.client_secret = "web-secret";
    web.allowed_grants = {kGrantAuthorizationCode, kGrantRefreshToken};
    web.allowed_scopes = {"storage.read:/data", "storage.write:/data", "storage.create:/data"};
    web.redirect_uris = {kRedirect};
    web.default_audiences = {kStorageUrl};
    env.issuer->add_client(web);

    ClientRegistration delegating_web = web;
    delegating_web.client_id = "webclient-delegating";
    delegating_web.client_secret = "webd-secret";
    delegating_web.default_audiences = {kOrchestratorAudience};
    env.issuer->add_client(delegating_web);

    ClientRegistration orchestrator;
    orchestrator.client_id = "orchestrator";
    orchestrator.client_secret = "orch-secret";
    orchestrator.allowed_grants = {kGrantTokenExchange, kGrantClientCredentials};
    orchestrator.allowed_scopes = {"storage.read:/data", "storage.write:/data"};
    orchestrator.default_audiences = {kOrchestratorAudience};
    env.issuer->add_client(orchestrator);

    ClientRegistration transfer;
    transfer.client_id = "transfer";
    transfer.client_secret = "transfer-secret";
    transfer.allowed_grants = {kGrantTokenExchange};
    transfer.allowed_scopes = {"storage.read:/data", "storage.write:/data"};
    transfer.default_audiences = {kTransferAudience};
    env.issuer->add_client(transfer);

    env.issuer->add_user("alice", "correct-horse", "alice-sub-1", {"/wlcg", "/wlcg/ops"},
                         {"https://refeds.org/assurance/IAP/medium"},
                         {{"name", "Alice Doe"}, {"email", "alice@example.org"}});

    env.network->mount(kIssuerUrl, std::make_shared<IssuerApp>(env.issuer));
    return env;
}

/// Transcript builder; failed checks mark the scenario failed and stop the
/// script after the current step.
class Recorder {
  public:
    explicit Recorder(std::string scenario) { transcript_.scenario = std::move(scenario); }

    void begin(const std::string& actor, const std::string& action) {
        StepRecord record;
        record.step = static_cast<int>(transcript_.steps.size()) + 1;
        record.actor = actor;
        record.action = action;
        transcript_.steps.push_back(std::move(record));
    }

    StepRecord& step() { return transcript_.steps.back(); }

    bool check(const std::string& name, bool passed, const std::string& detail = "") {
        step().assertions.push_back({name, passed, detail});
        if (!passed && transcript_.passed) {
            transcript_.passed = false;
            transcript_.first_failure = "step " + std::to_string(step().step) + ": " + name +
                                        (detail.empty() ? "" : " (" + detail + ")");
        }
        return passed;
    }

    void record_token(const std::string& kind, const std::string& compact) {
        try {
            auto decoded = decode(CompactToken{compact});
            TokenKind k = kind == "id" ? TokenKind::IdToken : TokenKind::AccessToken;
            auto shape = check_profile_shape(decoded.claims, k);
            step().tokens.push_back({{"kind", kind},
                                     {"header", decoded.header},
                                     {"claims", decoded.claims.to_json()},
                                     {"shape_conformant", shape.conformant()}});
            check(kind + " token shape conformant", shape.conformant(), shape.describe());
        } catch (const Error& e) {
            check(kind + " token decodes", false, e.what());
        }
    }

    void end(const Env& env) { step().fetches = env.fetch_counters(); }

    bool ok() const { return transcript_.passed; }
    Transcript take() { return std::move(transcript_); }

  private:
    Transcript transcript_;
};

struct ParsedTokens {
    nlohmann::json body;
    ClaimSet access;
    bool valid = false;
};

ParsedTokens parse_token_response(const HttpResponse& resp) {
    ParsedTokens out;
    out.body = nlohmann::json::parse(resp.body, nullptr, false);
    if (resp.status != 200 || out.body.is_discarded() || !out.body.contains("access_token"))
        return out;
    out.access = decode(CompactToken{out.body["access_token"].get<std::string>()}).claims;
    out.valid = true;
    return out;
}

std::string extract_code(const HttpResponse& resp) {
    auto it = resp.headers.find("Location");
    if (resp.status != 302 || it == resp.headers.end())
        return "";
    auto marker = it->second.find("code=");
    return marker == std::string::npos ? "" : it->second.substr(marker + 5);
}

HttpResponse post_form(const Env& env, const std::string& url,
                       const std::map<std::string, std::string>& fields,
                       const std::string& basic_user = "", const std::string& basic_secret = "") {
    std::map<std::string, std::string> headers = {
        {"Content-Type", "application/x-www-form-urlencoded"}};
    if (!basic_user.empty())
        headers["Authorization"] = make_basic_auth(basic_user, basic_secret);
    return env.network->call("POST", url, headers, form_encode(fields));
}

HttpResponse storage_call(const Env& env, const std::string& base, const std::string& method,
                          const std::string& path, const std::string& token,
                          const std::string& body = "") {
    std::map<std::string, std::string> headers;
    if (!token.empty())
        headers["Authorization"] = "Bearer " + token;
    return env.network->call(method, base + "/storage" + path, headers, body);
}

HttpResponse login_and_redeem(const Env& env, Recorder& rec, const std::string& client_id,
                              const std::string& secret, const std::string& scope) {
    auto code_resp = post_form(env, std::string(kIssuerUrl) + "/authorize",
                               {{"client_id", client_id},
                                {"redirect_uri", kRedirect},
                                {"scope", scope},
                                {"username", "alice"},
                                {"password", "correct-horse"}});
    std::string code = extract_code(code_resp);
    rec.check("authorization code issued", !code.empty(),
              "status " + std::to_string(code_resp.status));
    if (code.empty())
        return HttpResponse{};
    return post_form(env, std::string(kIssuerUrl) + "/token",
                     {{"grant_type", "authorization_code"}, {"code", code}}, client_id, secret);
}

/// Shared attenuation bookkeeping for delegation hops.
struct HopCheck {
    std::string sub;
    std::set<std::string> scopes;
    int64_t exp = 0;
};

HopCheck hop_of(const ClaimSet& claims) {
    auto scopes = split_scopes(claims.scope.value_or(""));
    return {claims.sub, {scopes.begin(), scopes.end()}, claims.exp};
}

void check_attenuation(Recorder& rec, const HopCheck& parent, const ClaimSet& child_claims,
                       const std::string& expected_audience) {
    HopCheck child = hop_of(child_claims);
    rec.check("sub preserved across the hop", child.sub == parent.sub,
              child.sub + " vs " + parent.sub);
    bool subset = std::all_of(child.scopes.begin(), child.scopes.end(),
                              [&](const std::string& s) { return parent.scopes.count(s) > 0; });
    rec.check("scope attenuated (child subset of parent)", subset,
              join_scopes({child.scopes.begin(), child.scopes.end()}));
    rec.check("audience narrowed to the requested service",
              child_claims.aud == std::vector<std::string>{expected_audience},
              expected_audience);
    rec.check("lifetime capped by the parent", child.exp <= parent.exp,
              std::to_string(child.exp) + " <= " + std::to_string(parent.exp));
}

} // namespace

Transcript run_token_flow() {
    Env env = make_env();
    env.add_resource("storage", kStorageUrl);
    Recorder rec("token-flow");
    const std::string token_url = std::string(kIssuerUrl) + "/token";

    // 1: upstream authentication, simulated by the stub credential store
    rec.begin("alice @ webclient", "authenticate to the issuer (stub identity provider)");
    auto code_resp = post_form(env, std::string(kIssuerUrl) + "/authorize",
                               {{"client_id", "webclient"},
                                {"redirect_uri", kRedirect},
                                {"scope", "storage.read:/data storage.write:/data"},
                                {"username", "alice"},
                                {"password", "correct-horse"}});
    rec.step().request = "POST /authorize (client_id=webclient)";
    rec.step().response = "status " + std::to_string(code_resp.status);
    std::string code = extract_code(code_resp);
    rec.check("login succeeds with an authorization code", !code.empty());
    rec.end(env);
    if (!rec.ok())
        return rec.take();

    // 2: the issuer returns the three tokens
    rec.begin("issuer", "redeem the code for ID, access and refresh tokens");
    auto token_resp = post_form(env, token_url,
                                {{"grant_type", "authorization_code"}, {"code", code}},
                                "webclient", "web-secret");
    rec.step().request = "POST /token grant_type=authorization_code";
    rec.step().response = "status " + std::to_string(token_resp.status);
    auto tokens = parse_token_response(token_resp);
    rec.check("token endpoint returns 200", tokens.valid);
    if (!tokens.valid) {
        rec.end(env);
        return rec.take();
    }
    rec.check("ID token present", tokens.body.contains("id_token"));
    rec.check("refresh token present", tokens.body.contains("refresh_token"));
    rec.record_token("id", tokens.body["id_token"]);
    rec.record_token("access", tokens.body["access_token"]);
    rec.check("expires_in equals exp - iat",
              tokens.body["expires_in"].get<int64_t>() == tokens.access.exp - tokens.access.iat);
    rec.end(env);
    std::string access = tokens.body["access_token"];
    std::string refresh = tokens.body["refresh_token"];

    // 3: the access token authorizes access at the storage resource
    rec.begin("webclient", "use the access token at the storage resource");
    auto put = storage_call(env, kStorageUrl, "PUT", "/data/hello.txt", access, "hello token");
    rec.step().request = "PUT /storage/data/hello.txt";
    rec.step().response = "status " + std::to_string(put.status);
    rec.check("write allowed", put.status == 201, std::to_string(put.status));
    rec.end(env);

    // 4: the resource validates against cached trust roots
    rec.begin("storage resource", "validate follow-up requests from the trust-root cache");
    auto get = storage_call(env, kStorageUrl, "GET", "/data/hello.txt", access);
    rec.step().request = "GET /storage/data/hello.txt";
    rec.step().response = "status " + std::to_string(get.status);
    rec.check("read allowed and bytes round-trip", get.status == 200 && get.body == "hello token");
    rec.check("trust roots fetched at most twice (metadata + key set)",
              env.total_fetches() <= 2, std::to_string(env.total_fetches()));
    rec.end(env);

    // 5: access token expires; the client refreshes
    rec.begin("webclient", "after expiry, exchange the refresh token for a new access token");
    env.clock->advance(1301); // past the 1200 s access lifetime plus skew
    auto expired = storage_call(env, kStorageUrl, "GET", "/data/hello.txt", access);
    rec.check("expired access token is rejected with 401", expired.status == 401,
              std::to_string(expired.status));
    auto refreshed_resp = post_form(env, token_url,
                                    {{"grant_type", "refresh_token"}, {"refresh_token", refresh}},
                                    "webclient", "web-secret");
    rec.step().request = "GET (expired) then POST /token grant_type=refresh_token";
    rec.step().response = "status " + std::to_string(refreshed_resp.status);
    auto renewed = parse_token_response(refreshed_resp);
    rec.check("refresh succeeds", renewed.valid);
    if (!renewed.valid) {
        rec.end(env);
        return rec.take();
    }
    rec.record_token("access", renewed.body["access_token"]);
    rec.check("new access token is freshly valid", renewed.access.exp > env.clock->now());
    rec.check("same subject after refresh", renewed.access.sub == tokens.access.sub);
    rec.check("refresh handle rotated", renewed.body["refresh_token"] != refresh);
    rec.check("rotated-out handle is dead", !env.issuer->refresh_handle_live(refresh));
    rec.end(env);

    // 6: the renewed access token is used again (steps 3-6 may repeat)
    rec.begin("webclient", "re-use the renewed access token at the resource");
    auto again = storage_call(env, kStorageUrl, "GET", "/data/hello.txt",
                              renewed.body["access_token"]);
    rec.step().request = "GET /storage/data/hello.txt";
    rec.step().response = "status " + std::to_string(again.status);
    rec.check("renewed token accepted", again.status == 200, std::to_string(again.status));
    rec.check("resource-side trust fetches stayed within the cache bound",
              env.total_fetches() <= 2, std::to_string(env.total_fetches()));
    rec.end(env);

    return rec.take();
}

Transcript run_delegation_chain(DelegationVariant variant) {
    Env env = make_env();
    env.add_resource("source", kSourceUrl);
    env.add_resource("dest", kDestUrl);
    env.resources.at("source").app->storage().put("/data/run1/f.root", "replica-bytes");

    const char* name = variant == DelegationVariant::UserToken      ? "delegation"
                       : variant == DelegationVariant::AdminToken   ? "delegation-admin"
                                                                    : "delegation-broadening";
    Recorder rec(name);
    const std::string token_url = std::string(kIssuerUrl) + "/token";

    // 1: the starting credential (user-delegated or service-account)
    std::string subject_token;
    if (variant == DelegationVariant::AdminToken) {
        rec.begin("orchestrator", "obtain a service-account token (client credentials)");
        auto resp = post_form(env, token_url, {{"grant_type", "client_credentials"}},
                              "orchestrator", "orch-secret");
        rec.step().request = "POST /token grant_type=client_credentials";
        rec.step().response = "status " + std::to_string(resp.status);
        auto tokens = parse_token_response(resp);
        rec.check("service token issued", tokens.valid);
        if (!tokens.valid) {
            rec.end(env);
            return rec.take();
        }
        rec.record_token("access", tokens.body["access_token"]);
        rec.check("service token subject is the client itself", tokens.access.sub == "orchestrator");
        subject_token = tokens.body["access_token"];
        rec.end(env);
    } else {
        rec.begin("alice @ webclient", "obtain a user token for the orchestrator");
        auto resp = login_and_redeem(env, rec, "webclient-delegating", "webd-secret",
                                     "storage.read:/data storage.write:/data");
        rec.step().request = "POST /authorize + POST /token (authorization_code)";
        rec.step().response = "status " + std::to_string(resp.status);
        auto tokens = parse_token_response(resp);
        rec.check("user token issued", tokens.valid);
        if (!tokens.valid) {
            rec.end(env);
            return rec.take();
        }
        rec.record_token("access", tokens.body["access_token"]);
        subject_token = tokens.body["access_token"];
        rec.end(env);
    }
    HopCheck parent = hop_of(decode(CompactToken{subject_token}).claims);

    // 2: orchestrator -> transfer service (first exchange)
    rec.begin("orchestrator", "exchange the token for the transfer service audience");
    std::map<std::string, std::string> exchange_fields = {
        {"grant_type", kGrantTokenExchangeUrn},
        {"subject_token", subject_token},
        {"audience", kTransferAudience}};
    if (variant == DelegationVariant::BroadenAttempt)
        exchange_fields["scope"] = "storage.write:/"; // beyond the parent grant
    auto hop1_resp = post_form(env, token_url, exchange_fields, "orchestrator", "orch-secret");
    rec.step().request = "POST /token grant_type=token-exchange audience=" +
                         std::string(kTransferAudience);
    rec.step().response = "status " + std::to_string(hop1_resp.status) +
                          (hop1_resp.status == 200 ? "" : " " + hop1_resp.body);
    auto hop1 = parse_token_response(hop1_resp);
    rec.check("exchange for the transfer audience granted", hop1.valid,
              hop1.valid ? "" : hop1_resp.body);
    if (!hop1.valid) {
        rec.end(env);
        return rec.take(); // the broadening variant stops at the rejection
    }
    rec.record_token("access", hop1.body["access_token"]);
    check_attenuation(rec, parent, hop1.access, kTransferAudience);
    rec.end(env);
    HopCheck transfer_hop = hop_of(hop1.access);
    std::string transfer_token = hop1.body["access_token"];

    // 3: transfer service -> source storage (read)
    rec.begin("transfer", "exchange for the source storage audience (read)");
    auto hop2_resp = post_form(env, token_url,
                               {{"grant_type", kGrantTokenExchangeUrn},
                                {"subject_token", transfer_token},
                                {"audience", kSourceUrl},
                                {"scope", "storage.read:/data"}},
                               "transfer", "transfer-secret");
    rec.step().request = "POST /token grant_type=token-exchange audience=" +
                         std::string(kSourceUrl);
    rec.step().response = "status " + std::to_string(hop2_resp.status);
    auto hop2 = parse_token_response(hop2_resp);
    rec.check("exchange for the source audience granted", hop2.valid);
    if (!hop2.valid) {
        rec.end(env);
        return rec.take();
    }
    rec.record_token("access", hop2.body["access_token"]);
    check_attenuation(rec, transfer_hop, hop2.access, kSourceUrl);
    rec.end(env);

    // 4: transfer service -> destination storage (write)
    rec.begin("transfer", "exchange for the destination storage audience (write)");
    auto hop3_resp = post_form(env, token_url,
                               {{"grant_type", kGrantTokenExchangeUrn},
                                {"subject_token", transfer_token},
                                {"audience", kDestUrl},
                                {"scope", "storage.write:/data"}},
                               "transfer", "transfer-secret");
    rec.step().request = "POST /token grant_type=token-exchange audience=" +
                         std::string(kDestUrl);
    rec.step().response = "status " + std::to_string(hop3_resp.status);
    auto hop3 = parse_token_response(hop3_resp);
    rec.check("exchange for the destination audience granted", hop3.valid);
    if (!hop3.valid) {
        rec.end(env);
        return rec.take();
    }
    rec.record_token("access", hop3.body["access_token"]);
    check_attenuation(rec, transfer_hop, hop3.access, kDestUrl);
    rec.end(env);

    // 5: read the replica from the source
    rec.begin("transfer", "read the replica from source storage");
    auto read = storage_call(env, kSourceUrl, "GET", "/data/run1/f.root",
                             hop2.body["access_token"]);
    rec.step().request = "GET source /storage/data/run1/f.root";
    rec.step().response = "status " + std::to_string(read.status);
    rec.check("source read allowed", read.status == 200, std::to_string(read.status));
    rec.check("replica bytes fetched", read.body == "replica-bytes");
    // the read-scoped token must not grant writes anywhere
    auto misuse = storage_call(env, kSourceUrl, "PUT", "/data/run1/f.root",
                               hop2.body["access_token"], "tamper");
    rec.check("read-scoped token cannot write", misuse.status == 403,
              std::to_string(misuse.status));
    rec.end(env);

    // 6: write the replica to the destination
    rec.begin("transfer", "write the replica to destination storage");
    auto write = storage_call(env, kDestUrl, "PUT", "/data/out/f.root",
                              hop3.body["access_token"], read.body);
    rec.step().request = "PUT dest /storage/data/out/f.root";
    rec.step().response = "status " + std::to_string(write.status);
    rec.check("destination write allowed", write.status == 201, std::to_string(write.status));
    auto stored = env.resources.at("dest").app->storage().get("/data/out/f.root");
    rec.check("replica bytes arrived intact", stored.has_value() && *stored == "replica-bytes");
    rec.check("subject identical at every hop",
              parent.sub == transfer_hop.sub && parent.sub == hop2.access.sub &&
                  parent.sub == hop3.access.sub);
    rec.end(env);

    return rec.take();
}

Transcript run_refresh_chain(int cycles) {
    Env env = make_env();
    env.add_resource("storage", kStorageUrl);
    Recorder rec("refresh-chain");
    const std::string token_url = std::string(kIssuerUrl) + "/token";

    rec.begin("alice @ webclient", "start a long-running job with one grant");
    auto resp = login_and_redeem(env, rec, "webclient", "web-secret",
                                 "storage.read:/data storage.write:/data");
    auto tokens = parse_token_response(resp);
    rec.check("initial tokens issued", tokens.valid);
    if (!tokens.valid) {
        rec.end(env);
        return rec.take();
    }
    rec.record_token("access", tokens.body["access_token"]);
    auto seed = storage_call(env, kStorageUrl, "PUT", "/data/job.log",
                             tokens.body["access_token"], "cycle 0");
    rec.check("job writes with the first access token", seed.status == 201);
    rec.end(env);

    std::string access = tokens.body["access_token"];
    std::string refresh = tokens.body["refresh_token"];
    const std::string subject = tokens.access.sub;

    for (int cycle = 1; cycle <= cycles; ++cycle) {
        rec.begin("webclient", "cycle " + std::to_string(cycle) +
                                   ": expiry, refresh rotation, resume");
        env.clock->advance(1301);
        auto expired = storage_call(env, kStorageUrl, "GET", "/data/job.log", access);
        rec.check("expired token rejected before refresh", expired.status == 401,
                  std::to_string(expired.status));

        auto renewed_resp = post_form(env, token_url,
                                      {{"grant_type", "refresh_token"},
                                       {"refresh_token", refresh}},
                                      "webclient", "web-secret");
        auto renewed = parse_token_response(renewed_resp);
        rec.step().request = "POST /token grant_type=refresh_token";
        rec.step().response = "status " + std::to_string(renewed_resp.status);
        rec.check("refresh succeeds", renewed.valid);
        if (!renewed.valid) {
            rec.end(env);
            return rec.take();
        }

        std::string old_refresh = refresh;
        access = renewed.body["access_token"];
        refresh = renewed.body["refresh_token"];

        auto replay = post_form(env, token_url,
                                {{"grant_type", "refresh_token"},
                                 {"refresh_token", old_refresh}},
                                "webclient", "web-secret");
        auto replay_body = nlohmann::json::parse(replay.body, nullptr, false);
        rec.check("replaying the rotated-out handle is InvalidGrant",
                  replay.status == 400 && !replay_body.is_discarded() &&
                      replay_body.value("error", "") == "invalid_grant",
                  replay.body);
        rec.check("exactly one live refresh handle for the job",
                  env.issuer->live_refresh_handles_for_subject(subject) == 1);

        auto resumed = storage_call(env, kStorageUrl, "PUT", "/data/job.log", access,
                                    "cycle " + std::to_string(cycle));
        rec.check("job resumes with the renewed token", resumed.status == 204,
                  std::to_string(resumed.status));
        rec.end(env);
        if (!rec.ok())
            return rec.take();
    }

    rec.begin("storage resource", "whole-run bookkeeping");
    rec.step().request = "(inspection)";
    rec.step().response = "fetches=" + std::to_string(env.total_fetches());
    rec.check("issuer key fetches over all cycles stay within the cache bound",
              env.total_fetches() <= 2, std::to_string(env.total_fetches()));
    auto final_read = storage_call(env, kStorageUrl, "GET", "/data/job.log", access);
    rec.check("final job state readable", final_read.status == 200 &&
                                              final_read.body == "cycle " + std::to_string(cycles));
    rec.end(env);

    return rec.take();
}

std::vector<std::string> scenario_names() {
    return {"token-flow", "figure3", "delegation", "delegation-admin", "delegation-broadening",
            "refresh-chain"};
}

Transcript run_scenario(const std::string& name) {
    if (name == "token-flow" || name == "figure3")
        return run_token_flow();
    if (name == "delegation")
        return run_delegation_chain(DelegationVariant::UserToken);
    if (name == "delegation-admin")
        return run_delegation_chain(DelegationVariant::AdminToken);
    if (name == "delegation-broadening")
        return run_delegation_chain(DelegationVariant::BroadenAttempt);
    if (name == "refresh-chain")
        return run_refresh_chain();
    std::string available;
    for (const auto& n : scenario_names())
        available += (available.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario \"" + name + "\"; available: " + available);
}

} // namespace wlcg::harness

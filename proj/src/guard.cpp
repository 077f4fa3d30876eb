#include "wlcg/guard.hpp"

#include "wlcg/errors.hpp"
#include "wlcg/formenc.hpp"
#include "wlcg/jwt.hpp"

namespace wlcg {

namespace {

std::string bearer_challenge(const std::string& error, const std::string& description) {
    std::string out = "Bearer";
    if (!error.empty()) {
        out += " error=\"" + error + "\"";
        if (!description.empty())
            out += ", error_description=\"" + description + "\"";
    }
    return out;
}

GuardOutcome unauthenticated(std::string detail, bool token_present = true) {
    GuardOutcome out;
    out.status = GuardStatus::Unauthenticated;
    out.detail = detail;
    out.challenge = token_present ? bearer_challenge("invalid_token", detail)
                                  : bearer_challenge("", "");
    return out;
}

} // namespace

std::string to_string(GuardStatus s) {
    switch (s) {
    case GuardStatus::Allowed:
        return "Allowed";
    case GuardStatus::Unauthenticated:
        return "Unauthenticated";
    case GuardStatus::Forbidden:
        return "Forbidden";
    }
    return "?";
}

ResourceGuard::ResourceGuard(GuardConfig config, std::shared_ptr<TrustAnchorStore> anchors,
                             ClockPtr clock)
    : config_(std::move(config)), anchors_(std::move(anchors)), clock_(std::move(clock)) {}

void ResourceGuard::set_stage_observer(std::function<void(GuardStage)> observer) {
    observer_ = std::move(observer);
}

bool ResourceGuard::replay_seen(const std::string& jti) {
    std::lock_guard lock(replay_mutex_);
    auto it = replay_seen_.find(jti);
    if (it != replay_seen_.end())
        return true;
    replay_order_.push_front(jti);
    replay_seen_[jti] = replay_order_.begin();
    while (replay_order_.size() > config_.jti_replay_cache) {
        replay_seen_.erase(replay_order_.back());
        replay_order_.pop_back();
    }
    return false;
}

GuardOutcome ResourceGuard::guard(const GuardRequest& request) {
    auto stage = [&](GuardStage s) {
        if (observer_)
            observer_(s);
    };

    stage(GuardStage::ExtractBearer);
    if (request.authorization.empty())
        return unauthenticated("missing Authorization header", /*token_present=*/false);
    if (request.authorization.rfind("Bearer ", 0) != 0)
        return unauthenticated("Authorization header is not a Bearer credential");
    CompactToken token{request.authorization.substr(7)};

    stage(GuardStage::Decode);
    DecodedToken decoded;
    try {
        decoded = decode(token);
    } catch (const MalformedToken& e) {
        return unauthenticated(std::string("malformed token: ") + e.what());
    }

    stage(GuardStage::ResolveKey);
    VerificationKey key;
    try {
        key = anchors_->get_key(decoded.claims.iss, decoded.header.value("kid", ""));
    } catch (const Error& e) {
        return unauthenticated(std::string("cannot resolve verification key: ") + e.what());
    }

    stage(GuardStage::VerifySignature);
    try {
        if (!verify_signature(token, key))
            return unauthenticated("signature verification failed");
    } catch (const Error& e) {
        return unauthenticated(std::string("signature verification failed: ") + e.what());
    }

    stage(GuardStage::ValidateClaims);
    ValidationContext ctx;
    ctx.expected_audiences = config_.expected_audiences;
    ctx.accepted_issuers = config_.accepted_issuers;
    ctx.clock = clock_;
    ctx.skew_tolerance = config_.skew_tolerance;
    ctx.required_kind = TokenKind::AccessToken;
    ctx.wildcard_audience = config_.honor_wildcard_audience ? config_.wildcard_audience : "";
    ValidationReport report = validate_claims(decoded.claims, ctx);
    if (!report.accepted())
        return unauthenticated("claim validation failed: " + report.describe());

    stage(GuardStage::CheckShape);
    ShapeReport shape = check_profile_shape(decoded.claims, TokenKind::AccessToken);
    if (!shape.conformant())
        return unauthenticated("token is not a conformant access token: " + shape.describe());

    if (config_.jti_replay_cache > 0 && replay_seen(decoded.claims.jti))
        return unauthenticated("token replay detected (jti already seen)");

    stage(GuardStage::Authorize);
    auto op = config_.operation_map.find(request.method);
    if (op == config_.operation_map.end()) {
        GuardOutcome out;
        out.status = GuardStatus::Forbidden;
        out.detail = "no operation mapping for method " + request.method;
        out.decision = AuthzDecision::deny(out.detail);
        out.claims = decoded.claims;
        return out;
    }
    ResourceRequest resource_request;
    resource_request.operation = op->second;
    try {
        resource_request.path = AbsolutePath::parse(request.path);
    } catch (const MalformedPath& e) {
        GuardOutcome out;
        out.status = GuardStatus::Forbidden;
        out.detail = std::string("request path rejected: ") + e.what();
        out.decision = AuthzDecision::deny(out.detail);
        out.claims = decoded.claims;
        return out;
    }

    AuthzDecision decision = authorize(decoded.claims, resource_request, config_.policy);
    GuardOutcome out;
    out.status = decision.allowed ? GuardStatus::Allowed : GuardStatus::Forbidden;
    out.decision = std::move(decision);
    out.claims = decoded.claims;
    if (out.status == GuardStatus::Forbidden)
        out.detail = "authorization denied for " + resource_request.operation + " at " +
                     resource_request.path.str();
    return out;
}

ResourceApp::ResourceApp(GuardConfig config, std::shared_ptr<TrustAnchorStore> anchors,
                         ClockPtr clock)
    : guard_(std::move(config), std::move(anchors), std::move(clock)) {}

namespace {

HttpResponse guard_failure_response(const GuardOutcome& outcome) {
    HttpResponse resp;
    nlohmann::json body;
    if (outcome.status == GuardStatus::Unauthenticated) {
        resp.status = 401;
        if (outcome.challenge)
            resp.headers["WWW-Authenticate"] = *outcome.challenge;
        body["error"] = "invalid_token";
    } else {
        resp.status = 403;
        body["error"] = "access_denied";
        if (outcome.decision)
            body["trace"] = outcome.decision->trace;
    }
    body["error_description"] = outcome.detail;
    resp.headers["Content-Type"] = "application/json";
    resp.body = body.dump();
    return resp;
}

} // namespace

HttpResponse ResourceApp::handle(const HttpRequest& request) {
    const std::string full_path = target_path(request.target);
    HttpResponse resp;
    if (full_path.rfind("/storage", 0) != 0) {
        resp.status = 404;
        resp.body = "{\"error\":\"not_found\"}";
        resp.headers["Content-Type"] = "application/json";
        return resp;
    }
    std::string path = full_path.substr(8); // strip "/storage"
    if (path.empty())
        path = "/";

    GuardRequest greq{request.method, path, request.header("Authorization")};
    GuardOutcome outcome = guard_.guard(greq);
    if (outcome.status != GuardStatus::Allowed)
        return guard_failure_response(outcome);

    if (request.method == "GET") {
        if (storage_.is_collection(path)) {
            nlohmann::json listing = storage_.list(path);
            resp.status = 200;
            resp.headers["Content-Type"] = "application/json";
            resp.body = nlohmann::json{{"collection", path}, {"entries", listing}}.dump();
            return resp;
        }
        auto bytes = storage_.get(path);
        if (!bytes) {
            resp.status = 404;
            resp.headers["Content-Type"] = "application/json";
            resp.body = "{\"error\":\"not_found\"}";
            return resp;
        }
        resp.status = 200;
        resp.headers["Content-Type"] = "application/octet-stream";
        resp.body = *bytes;
        return resp;
    }
    if (request.method == "PUT") {
        bool existed = storage_.exists(path);
        storage_.put(path, request.body);
        resp.status = existed ? 204 : 201;
        return resp;
    }
    if (request.method == "MKCOL" || request.method == "POST") {
        bool created = storage_.make_collection(path);
        resp.status = created ? 201 : 409;
        return resp;
    }
    resp.status = 405;
    resp.headers["Content-Type"] = "application/json";
    resp.body = "{\"error\":\"method_not_allowed\"}";
    return resp;
}

} // namespace wlcg

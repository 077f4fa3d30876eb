#pragma once

#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "wlcg/authz.hpp"
#include "wlcg/clock.hpp"
#include "wlcg/http.hpp"
#include "wlcg/storage.hpp"
#include "wlcg/trust.hpp"
#include "wlcg/validation.hpp"

namespace wlcg {

struct GuardConfig {
    std::vector<std::string> accepted_issuers;
    std::vector<std::string> expected_audiences;
    AuthzPolicy policy;
    int64_t skew_tolerance = 60;
    /// Honor the any-audience convention; deployment choice, on by default.
    bool honor_wildcard_audience = true;
    std::string wildcard_audience = kAnyAudience;
    /// HTTP method -> operation identifier; must cover every method the
    /// resource serves.
    std::map<std::string, std::string> operation_map = {
        {"GET", "storage.read"},
        {"PUT", "storage.write"},
        {"MKCOL", "storage.create"},
        {"POST", "storage.create"},
    };
    /// Optional bounded jti replay cache; 0 disables it.
    size_t jti_replay_cache = 0;
};

enum class GuardStatus { Allowed, Unauthenticated, Forbidden };

std::string to_string(GuardStatus s);

struct GuardOutcome {
    GuardStatus status = GuardStatus::Unauthenticated;
    std::optional<AuthzDecision> decision;
    std::optional<std::string> challenge; // WWW-Authenticate value on 401
    std::string detail;                   // human-readable failure summary
    std::optional<ClaimSet> claims;       // populated once decoded
};

struct GuardRequest {
    std::string method;
    std::string path; // resource-relative, absolute form
    std::string authorization;
};

/// The validation pipeline stages, in execution order.
enum class GuardStage {
    ExtractBearer,
    Decode,
    ResolveKey,
    VerifySignature,
    ValidateClaims,
    CheckShape,
    Authorize,
};

/// OAuth2-protected-resource gate. Runs the fixed pipeline
/// extract -> decode -> resolve key -> verify -> validate claims ->
/// shape check -> authorize; the first failure short-circuits. Token
/// problems map to Unauthenticated (401 + challenge), authorization
/// denials to Forbidden (403).
class ResourceGuard {
  public:
    ResourceGuard(GuardConfig config, std::shared_ptr<TrustAnchorStore> anchors, ClockPtr clock);

    GuardOutcome guard(const GuardRequest& request);

    /// Test instrumentation: invoked on entry to every pipeline stage.
    void set_stage_observer(std::function<void(GuardStage)> observer);

    const GuardConfig& config() const { return config_; }

  private:
    bool replay_seen(const std::string& jti);

    GuardConfig config_;
    std::shared_ptr<TrustAnchorStore> anchors_;
    ClockPtr clock_;
    std::function<void(GuardStage)> observer_;

    std::mutex replay_mutex_;
    std::list<std::string> replay_order_;
    std::unordered_map<std::string, std::list<std::string>::iterator> replay_seen_;
};

/// HTTP surface of the protected resource: GET/PUT (and MKCOL-style
/// create) under /storage/<path>.
class ResourceApp final : public HttpHandler {
  public:
    ResourceApp(GuardConfig config, std::shared_ptr<TrustAnchorStore> anchors, ClockPtr clock);

    HttpResponse handle(const HttpRequest& request) override;

    ResourceGuard& guard() { return guard_; }
    StorageTree& storage() { return storage_; }

  private:
    ResourceGuard guard_;
    StorageTree storage_;
};

} // namespace wlcg

#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wlcg::harness {

struct StepAssertion {
    std::string check;
    bool passed = false;
    std::string detail;
};

struct StepRecord {
    int step = 0;
    std::string actor;
    std::string action;
    std::string request;  // summary, no secrets
    std::string response; // summary
    /// Tokens observed in this step, decoded, signatures dropped:
    /// [{"kind","header","claims"}].
    std::vector<nlohmann::json> tokens;
    std::vector<StepAssertion> assertions;
    /// Per-URL network-fetch counters of the resource under test at the
    /// end of the step.
    nlohmann::json fetches;

    nlohmann::json to_json() const;
};

struct Transcript {
    std::string scenario;
    std::vector<StepRecord> steps;
    bool passed = true;
    std::string first_failure;

    /// Line-oriented JSON: header line, one line per step, result line.
    std::string to_json_lines() const;
};

/// Replace volatile values (jti) so two runs of one scenario compare equal.
nlohmann::json scrub_volatile(nlohmann::json doc);

/// The six-step issuance flow: stub login, code redemption into the three
/// tokens, bearer use at the resource, trust-root caching, expiry, refresh
/// and re-use.
Transcript run_token_flow();

enum class DelegationVariant {
    UserToken,     // chain starts from the user's own token
    AdminToken,    // chain starts from the orchestrator service account
    BroadenAttempt // hop 2 requests more scope than the parent grants
};

/// Orchestrator -> transfer -> storage delegation chain over token
/// exchange, asserting attenuation, subject stability, audience narrowing
/// and lifetime caps at every hop.
Transcript run_delegation_chain(DelegationVariant variant = DelegationVariant::UserToken);

/// Long-running-job simulation: `cycles` access-token expirations bridged
/// by refresh rotation.
Transcript run_refresh_chain(int cycles = 5);

std::vector<std::string> scenario_names();

/// Run a scenario by CLI name. Throws ConfigError for unknown names,
/// listing the available ones.
Transcript run_scenario(const std::string& name);

} // namespace wlcg::harness

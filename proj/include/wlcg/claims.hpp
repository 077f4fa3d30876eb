#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wlcg {

enum class TokenKind {
    IdToken,
    AccessToken,
    RefreshToken, // opaque handle, never carries the claim matrix
};

std::string to_string(TokenKind kind);

/// Default profile version emitted by issuers (configurable per issuer).
inline constexpr const char* kProfileVersion = "1.0";

/// A token whose aud contains this value passes audience checks everywhere
/// the deployment honors it.
inline constexpr const char* kAnyAudience = "https://wlcg.cern.ch/jwt/v1/any";

/// Typed view of the profile claim set. Wire names differ from field names
/// for the dotted claims: wlcg_ver <-> "wlcg.ver", wlcg_groups <->
/// "wlcg.groups". Unrecognized claims survive round trips through `extra`;
/// standard OIDC identity claims (name, email, ...) are kept apart in
/// `oidc_standard` because the profile admits them only in ID tokens.
struct ClaimSet {
    std::string sub;
    std::string iss;
    std::vector<std::string> aud;
    int64_t exp = 0;
    int64_t iat = 0;
    std::optional<int64_t> nbf;
    std::string jti;
    std::optional<std::string> acr;
    std::optional<std::vector<std::string>> eduperson_assurance;
    std::string wlcg_ver = kProfileVersion;
    std::optional<std::vector<std::string>> wlcg_groups;
    std::optional<std::string> scope;
    std::optional<int64_t> auth_time;
    std::map<std::string, nlohmann::json> oidc_standard;
    std::map<std::string, nlohmann::json> extra;

    bool operator==(const ClaimSet&) const = default;

    /// Empty when all structural invariants hold; otherwise one message
    /// per violated invariant.
    std::vector<std::string> invariant_violations() const;

    nlohmann::json to_json() const;
    static ClaimSet from_json(const nlohmann::json& payload);
};

/// Claim names defined by OIDC core §5.1 (the profile's "standard OIDC
/// claims" row). Anything else lands in ClaimSet::extra.
bool is_standard_oidc_claim(const std::string& name);

/// True when every group entry starts with "/" and has no empty segment.
bool valid_group_name(const std::string& group);

} // namespace wlcg

#include "wlcg/validation.hpp"

#include <functional>

#include "wlcg/errors.hpp"

namespace wlcg {

namespace {

struct ClaimRow {
    const char* name;
    bool in_id;
    bool in_access;
    bool required; // when marked for the kind
    std::function<bool(const ClaimSet&)> present;
};

// The profile's claim presence matrix, one row per claim. Required rows
// follow the minimal interoperable core; the rest are optional where marked.
const std::vector<ClaimRow>& claim_matrix() {
    static const std::vector<ClaimRow> rows = {
        {"sub", true, true, true, [](const ClaimSet& c) { return !c.sub.empty(); }},
        {"exp", true, true, true, [](const ClaimSet& c) { return c.exp != 0; }},
        {"iss", true, true, true, [](const ClaimSet& c) { return !c.iss.empty(); }},
        {"acr", true, true, false, [](const ClaimSet& c) { return c.acr.has_value(); }},
        {"aud", true, true, true, [](const ClaimSet& c) { return !c.aud.empty(); }},
        {"iat", true, true, true, [](const ClaimSet& c) { return c.iat != 0; }},
        {"nbf", true, true, false, [](const ClaimSet& c) { return c.nbf.has_value(); }},
        {"jti", true, true, true, [](const ClaimSet& c) { return !c.jti.empty(); }},
        {"eduperson_assurance", true, true, false,
         [](const ClaimSet& c) { return c.eduperson_assurance.has_value(); }},
        {"wlcg.ver", true, true, true, [](const ClaimSet& c) { return !c.wlcg_ver.empty(); }},
        {"wlcg.groups", true, true, false,
         [](const ClaimSet& c) { return c.wlcg_groups.has_value(); }},
        {"auth_time", true, false, false,
         [](const ClaimSet& c) { return c.auth_time.has_value(); }},
        {"standard OIDC claims", true, false, false,
         [](const ClaimSet& c) { return !c.oidc_standard.empty(); }},
        {"scope", false, true, false, [](const ClaimSet& c) { return c.scope.has_value(); }},
    };
    return rows;
}

} // namespace

std::string ShapeReport::describe() const {
    if (conformant() && warnings.empty())
        return "conformant";
    std::string out = conformant() ? "conformant" : "violations:";
    for (const auto& v : violations)
        out += " [" + v + "]";
    if (!warnings.empty()) {
        out += " warnings:";
        for (const auto& w : warnings)
            out += " [" + w + "]";
    }
    return out;
}

ShapeReport check_profile_shape(const ClaimSet& claims, TokenKind kind) {
    if (kind == TokenKind::RefreshToken)
        throw InvalidClaims("refresh tokens are opaque and have no claim matrix");

    const bool id = kind == TokenKind::IdToken;
    ShapeReport report;
    for (const auto& row : claim_matrix()) {
        const bool marked = id ? row.in_id : row.in_access;
        const bool present = row.present(claims);
        if (marked && row.required && !present)
            report.violations.push_back(std::string("missing required claim ") + row.name);
        if (!marked && present)
            report.violations.push_back(std::string(row.name) + " not in " + to_string(kind) +
                                        "-token column");
    }
    for (const auto& [name, value] : claims.extra)
        report.warnings.push_back("unrecognized claim " + name);
    return report;
}

} // namespace wlcg

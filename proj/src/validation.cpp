#include "wlcg/validation.hpp"

#include <algorithm>

namespace wlcg {

std::string to_string(ValidationFailure f) {
    switch (f) {
    case ValidationFailure::IssuerNotAccepted:
        return "IssuerNotAccepted";
    case ValidationFailure::AudienceMismatch:
        return "AudienceMismatch";
    case ValidationFailure::Expired:
        return "Expired";
    case ValidationFailure::NotYetValid:
        return "NotYetValid";
    case ValidationFailure::IssuedInFuture:
        return "IssuedInFuture";
    case ValidationFailure::MissingJti:
        return "MissingJti";
    case ValidationFailure::MissingProfileVersion:
        return "MissingProfileVersion";
    }
    return "?";
}

bool ValidationReport::has(ValidationFailure f) const {
    return std::any_of(failures.begin(), failures.end(),
                       [f](const Entry& e) { return e.failure == f; });
}

std::string ValidationReport::describe() const {
    if (accepted())
        return "accepted";
    std::string out;
    for (const auto& e : failures) {
        if (!out.empty())
            out += "; ";
        out += to_string(e.failure) + ": " + e.detail;
    }
    return out;
}

ValidationReport validate_claims(const ClaimSet& claims, const ValidationContext& ctx) {
    ValidationReport report;
    auto fail = [&](ValidationFailure f, std::string detail) {
        report.failures.push_back({f, std::move(detail)});
    };

    if (std::find(ctx.accepted_issuers.begin(), ctx.accepted_issuers.end(), claims.iss) ==
        ctx.accepted_issuers.end())
        fail(ValidationFailure::IssuerNotAccepted, "issuer " + claims.iss + " is not accepted");

    bool aud_ok = false;
    for (const auto& a : claims.aud) {
        if (!ctx.wildcard_audience.empty() && a == ctx.wildcard_audience) {
            aud_ok = true;
            break;
        }
        if (std::find(ctx.expected_audiences.begin(), ctx.expected_audiences.end(), a) !=
            ctx.expected_audiences.end()) {
            aud_ok = true;
            break;
        }
    }
    if (!aud_ok)
        fail(ValidationFailure::AudienceMismatch, "no audience entry addresses this validator");

    const int64_t now = ctx.clock->now();
    const int64_t skew = ctx.skew_tolerance;
    if (!(now < claims.exp + skew))
        fail(ValidationFailure::Expired,
             "exp " + std::to_string(claims.exp) + " with skew " + std::to_string(skew));
    if (claims.nbf && !(now >= *claims.nbf - skew))
        fail(ValidationFailure::NotYetValid, "nbf " + std::to_string(*claims.nbf));
    if (!(now >= claims.iat - skew))
        fail(ValidationFailure::IssuedInFuture, "iat " + std::to_string(claims.iat));

    if (claims.jti.empty())
        fail(ValidationFailure::MissingJti, "jti is empty");
    if (claims.wlcg_ver.empty())
        fail(ValidationFailure::MissingProfileVersion, "wlcg.ver is absent");

    return report;
}

} // namespace wlcg

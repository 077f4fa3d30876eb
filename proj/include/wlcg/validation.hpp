#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wlcg/claims.hpp"
#include "wlcg/clock.hpp"

namespace wlcg {

enum class ValidationFailure {
    IssuerNotAccepted,
    AudienceMismatch,
    Expired,
    NotYetValid,
    IssuedInFuture,
    MissingJti,
    MissingProfileVersion,
};

std::string to_string(ValidationFailure f);

struct ValidationContext {
    std::vector<std::string> expected_audiences;
    std::vector<std::string> accepted_issuers;
    ClockPtr clock;
    int64_t skew_tolerance = 60; // seconds, >= 0
    TokenKind required_kind = TokenKind::AccessToken;
    /// Tokens carrying this audience pass the audience rule everywhere.
    /// Empty string disables the wildcard.
    std::string wildcard_audience = kAnyAudience;
};

/// Every failed rule, not just the first. Accepted iff empty.
struct ValidationReport {
    struct Entry {
        ValidationFailure failure;
        std::string detail;
    };
    std::vector<Entry> failures;

    bool accepted() const { return failures.empty(); }
    bool has(ValidationFailure f) const;
    std::string describe() const;
};

/// Rule evaluation only; signature checking and profile shape are separate
/// stages. Failures are report entries, never exceptions.
ValidationReport validate_claims(const ClaimSet& claims, const ValidationContext& ctx);

/// Conformance report against the profile's claim presence matrix.
struct ShapeReport {
    std::vector<std::string> violations; // missing required / present-but-not-for-kind
    std::vector<std::string> warnings;   // unrecognized extension claims

    bool conformant() const { return violations.empty(); }
    std::string describe() const;
};

/// Checks claim presence against the ID/access column for `kind`. Refuses
/// TokenKind::RefreshToken (opaque, no claim matrix).
ShapeReport check_profile_shape(const ClaimSet& claims, TokenKind kind);

} // namespace wlcg

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "wlcg/claims.hpp"
#include "wlcg/keys.hpp"

namespace wlcg {

/// A serialized JWS compact token: header "." payload "." signature,
/// each segment unpadded base64url.
struct CompactToken {
    std::string value;
    bool operator==(const CompactToken&) const = default;
};

struct DecodedToken {
    nlohmann::json header;
    ClaimSet claims;
};

/// Serialize and sign. Refuses claim sets that violate the structural
/// invariants and refuses the refresh kind (refresh tokens are opaque
/// handles, not claim-bearing JWTs).
CompactToken encode_and_sign(const ClaimSet& claims, TokenKind kind, const KeyPair& key);

/// Lossless extraction of header and claims. No validation of any kind is
/// performed; unknown claims land in ClaimSet::extra. Throws MalformedToken
/// on bad segment count, base64 or JSON.
DecodedToken decode(const CompactToken& token);

/// Cryptographic signature check. Throws UnsupportedAlgorithm when the
/// header algorithm is outside the allowlist (including "none") and
/// KidMismatch when the header kid is not the key's. Returns false when the
/// header algorithm differs from the key's declared algorithm, guarding
/// against algorithm confusion.
bool verify_signature(const CompactToken& token, const VerificationKey& key);

} // namespace wlcg

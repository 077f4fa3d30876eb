#include "wlcg/jwt.hpp"

#include <array>

#include "wlcg/base64url.hpp"
#include "wlcg/errors.hpp"

namespace wlcg {

namespace {

std::array<std::string, 3> split_segments(const std::string& value) {
    auto first = value.find('.');
    auto second = first == std::string::npos ? std::string::npos : value.find('.', first + 1);
    if (first == std::string::npos || second == std::string::npos ||
        value.find('.', second + 1) != std::string::npos)
        throw MalformedToken("compact token must have exactly three segments");
    return {value.substr(0, first), value.substr(first + 1, second - first - 1),
            value.substr(second + 1)};
}

nlohmann::json parse_segment_json(const std::string& segment, const char* what) {
    auto bytes = base64url_decode(segment);
    if (!bytes)
        throw MalformedToken(std::string(what) + " segment is not base64url");
    auto doc = nlohmann::json::parse(*bytes, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw MalformedToken(std::string(what) + " segment is not a JSON object");
    return doc;
}

} // namespace

CompactToken encode_and_sign(const ClaimSet& claims, TokenKind kind, const KeyPair& key) {
    if (kind == TokenKind::RefreshToken)
        throw InvalidClaims("refresh tokens are opaque handles and are never signed claim sets");
    if (key.empty())
        throw InvalidClaims("cannot sign without key material");
    auto problems = claims.invariant_violations();
    if (!problems.empty()) {
        std::string msg = "claim set violates invariants:";
        for (const auto& p : problems)
            msg += " " + p + ";";
        throw InvalidClaims(msg);
    }

    nlohmann::json header;
    header["alg"] = to_string(key.algorithm());
    header["kid"] = key.kid();
    header["typ"] = "JWT";

    std::string signing_input =
        base64url_encode(header.dump()) + "." + base64url_encode(claims.to_json().dump());
    auto signature = key.sign(signing_input);
    return CompactToken{signing_input + "." + base64url_encode(signature)};
}

DecodedToken decode(const CompactToken& token) {
    auto segments = split_segments(token.value);
    DecodedToken out;
    out.header = parse_segment_json(segments[0], "header");
    out.claims = ClaimSet::from_json(parse_segment_json(segments[1], "payload"));
    return out;
}

bool verify_signature(const CompactToken& token, const VerificationKey& key) {
    auto segments = split_segments(token.value);
    auto header = parse_segment_json(segments[0], "header");
    std::string alg = header.value("alg", "");
    if (!algorithm_allowed(alg))
        throw UnsupportedAlgorithm("token algorithm not in allowlist: " + alg);
    std::string kid = header.value("kid", "");
    if (kid != key.kid())
        throw KidMismatch("token kid " + kid + " does not match key kid " + key.kid());
    if (alg != to_string(key.algorithm()))
        return false; // header claims a different scheme than the key: refuse
    auto signature = base64url_decode(segments[2]);
    if (!signature)
        return false;
    std::string signing_input = segments[0] + "." + segments[1];
    return key.verify(signing_input, *signature);
}

} // namespace wlcg

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

typedef struct evp_pkey_st EVP_PKEY;

namespace wlcg {

/// Accepted JWS signature algorithms. "none" and anything else is refused
/// at every signing and verification entry point.
enum class JwsAlgorithm {
    RS256, // RSASSA-PKCS1-v1_5 with SHA-256 (mandatory)
    ES256, // ECDSA P-256 with SHA-256 (optional)
};

std::string to_string(JwsAlgorithm alg);

/// Throws UnsupportedAlgorithm for anything outside the allowlist,
/// including "none".
JwsAlgorithm parse_algorithm(std::string_view name);

bool algorithm_allowed(std::string_view name);

/// 2n-character lowercase hex from n random bytes. Used for kid and jti
/// generation (16 bytes = 128 bits).
std::string random_hex(size_t n_bytes = 16);

using PkeyPtr = std::shared_ptr<EVP_PKEY>;

/// Public-half key used for signature verification. Value-semantic; the
/// underlying key material is immutable once constructed.
class VerificationKey {
  public:
    VerificationKey() = default;
    VerificationKey(std::string kid, JwsAlgorithm alg, PkeyPtr pkey);

    /// Parse one JWK object ({"kty":"RSA","n":...,"e":...} or
    /// {"kty":"EC","crv":"P-256","x":...,"y":...}).
    static VerificationKey from_jwk(const nlohmann::json& jwk);

    const std::string& kid() const { return kid_; }
    JwsAlgorithm algorithm() const { return alg_; }
    EVP_PKEY* pkey() const { return pkey_.get(); }
    bool empty() const { return pkey_ == nullptr; }

    /// Public JWK form, suitable for a JWKS "keys" entry.
    nlohmann::json to_jwk() const;

    bool verify(std::string_view message, std::string_view jws_signature) const;

  private:
    std::string kid_;
    JwsAlgorithm alg_ = JwsAlgorithm::RS256;
    PkeyPtr pkey_;
};

/// Signing key pair. Generation is explicit; keys never pick their own
/// algorithm at sign time.
class KeyPair {
  public:
    KeyPair() = default;

    static KeyPair generate(JwsAlgorithm alg, std::string kid = "");

    /// Key-file round trip: {"kid","alg","private_pem"}.
    static KeyPair from_key_file(const nlohmann::json& doc);
    nlohmann::json to_key_file() const;

    const std::string& kid() const { return kid_; }
    JwsAlgorithm algorithm() const { return alg_; }
    bool empty() const { return pkey_ == nullptr; }

    VerificationKey public_key() const;

    /// JWS signature bytes: PKCS#1 for RS256, raw r||s (64 bytes) for ES256.
    std::vector<uint8_t> sign(std::string_view message) const;

  private:
    std::string kid_;
    JwsAlgorithm alg_ = JwsAlgorithm::RS256;
    PkeyPtr pkey_;
};

/// Constant-time string equality for secrets.
bool secure_equal(std::string_view a, std::string_view b);

/// Salted PBKDF2-HMAC-SHA256 password hashing for the stub credential store.
std::string password_salt();
std::string password_hash(std::string_view password, std::string_view salt_hex);

} // namespace wlcg

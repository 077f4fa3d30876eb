#include "wlcg/keys.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/ecdsa.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>
#include <openssl/pem.h>
#include <openssl/rand.h>

#include "wlcg/base64url.hpp"
#include "wlcg/errors.hpp"

namespace wlcg {

namespace {

constexpr size_t kEcFieldBytes = 32; // P-256 coordinate / scalar size

struct BioDeleter {
    void operator()(BIO* b) const { BIO_free(b); }
};
struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* c) const { EVP_PKEY_CTX_free(c); }
};
struct BnDeleter {
    void operator()(BIGNUM* b) const { BN_free(b); }
};
struct EcdsaSigDeleter {
    void operator()(ECDSA_SIG* s) const { ECDSA_SIG_free(s); }
};
struct ParamBldDeleter {
    void operator()(OSSL_PARAM_BLD* b) const { OSSL_PARAM_BLD_free(b); }
};
struct ParamDeleter {
    void operator()(OSSL_PARAM* p) const { OSSL_PARAM_free(p); }
};

PkeyPtr wrap(EVP_PKEY* raw) {
    if (!raw)
        throw Error("OpenSSL key operation failed");
    return PkeyPtr(raw, [](EVP_PKEY* p) { EVP_PKEY_free(p); });
}

std::vector<uint8_t> bn_to_bytes(const BIGNUM* bn, int padded = 0) {
    int len = padded > 0 ? padded : BN_num_bytes(bn);
    std::vector<uint8_t> out(static_cast<size_t>(len));
    if (BN_bn2binpad(bn, out.data(), len) < 0)
        throw Error("BN_bn2binpad failed");
    return out;
}

std::string b64u_bn(const BIGNUM* bn, int padded = 0) {
    return base64url_encode(bn_to_bytes(bn, padded));
}

std::vector<uint8_t> decode_b64u_field(const nlohmann::json& jwk, const char* field) {
    if (!jwk.contains(field) || !jwk[field].is_string())
        throw MalformedMetadata(std::string("JWK missing field ") + field);
    auto decoded = base64url_decode(jwk[field].get<std::string>());
    if (!decoded)
        throw MalformedMetadata(std::string("JWK field is not base64url: ") + field);
    return std::vector<uint8_t>(decoded->begin(), decoded->end());
}

PkeyPtr rsa_public_from_parts(const std::vector<uint8_t>& n, const std::vector<uint8_t>& e) {
    std::unique_ptr<BIGNUM, BnDeleter> bn_n(BN_bin2bn(n.data(), static_cast<int>(n.size()), nullptr));
    std::unique_ptr<BIGNUM, BnDeleter> bn_e(BN_bin2bn(e.data(), static_cast<int>(e.size()), nullptr));
    std::unique_ptr<OSSL_PARAM_BLD, ParamBldDeleter> bld(OSSL_PARAM_BLD_new());
    if (!bn_n || !bn_e || !bld)
        throw Error("RSA key import allocation failed");
    OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_N, bn_n.get());
    OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_E, bn_e.get());
    std::unique_ptr<OSSL_PARAM, ParamDeleter> params(OSSL_PARAM_BLD_to_param(bld.get()));
    std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter> ctx(EVP_PKEY_CTX_new_from_name(nullptr, "RSA", nullptr));
    EVP_PKEY* out = nullptr;
    if (!params || !ctx || EVP_PKEY_fromdata_init(ctx.get()) <= 0 ||
        EVP_PKEY_fromdata(ctx.get(), &out, EVP_PKEY_PUBLIC_KEY, params.get()) <= 0)
        throw MalformedMetadata("could not import RSA JWK");
    return wrap(out);
}

PkeyPtr ec_public_from_parts(const std::vector<uint8_t>& x, const std::vector<uint8_t>& y) {
    if (x.size() != kEcFieldBytes || y.size() != kEcFieldBytes)
        throw MalformedMetadata("EC JWK coordinates must be 32 bytes");
    std::vector<uint8_t> point;
    point.reserve(1 + 2 * kEcFieldBytes);
    point.push_back(0x04); // uncompressed
    point.insert(point.end(), x.begin(), x.end());
    point.insert(point.end(), y.begin(), y.end());

    std::unique_ptr<OSSL_PARAM_BLD, ParamBldDeleter> bld(OSSL_PARAM_BLD_new());
    if (!bld)
        throw Error("EC key import allocation failed");
    OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0);
    OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY, point.data(), point.size());
    std::unique_ptr<OSSL_PARAM, ParamDeleter> params(OSSL_PARAM_BLD_to_param(bld.get()));
    std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter> ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
    EVP_PKEY* out = nullptr;
    if (!params || !ctx || EVP_PKEY_fromdata_init(ctx.get()) <= 0 ||
        EVP_PKEY_fromdata(ctx.get(), &out, EVP_PKEY_PUBLIC_KEY, params.get()) <= 0)
        throw MalformedMetadata("could not import EC JWK");
    return wrap(out);
}

std::unique_ptr<BIGNUM, BnDeleter> get_bn_param(EVP_PKEY* pkey, const char* name) {
    BIGNUM* bn = nullptr;
    if (EVP_PKEY_get_bn_param(pkey, name, &bn) <= 0 || !bn)
        throw Error(std::string("missing key parameter ") + name);
    return std::unique_ptr<BIGNUM, BnDeleter>(bn);
}

// DER ECDSA-Sig-Value -> raw r||s as JWS requires.
std::vector<uint8_t> ecdsa_der_to_raw(const std::vector<uint8_t>& der) {
    const unsigned char* p = der.data();
    std::unique_ptr<ECDSA_SIG, EcdsaSigDeleter> sig(d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(der.size())));
    if (!sig)
        throw Error("could not parse ECDSA signature");
    const BIGNUM* r = nullptr;
    const BIGNUM* s = nullptr;
    ECDSA_SIG_get0(sig.get(), &r, &s);
    std::vector<uint8_t> out(2 * kEcFieldBytes);
    if (BN_bn2binpad(r, out.data(), kEcFieldBytes) < 0 ||
        BN_bn2binpad(s, out.data() + kEcFieldBytes, kEcFieldBytes) < 0)
        throw Error("ECDSA component conversion failed");
    return out;
}

// raw r||s -> DER for OpenSSL verification. Returns empty on bad input.
std::vector<uint8_t> ecdsa_raw_to_der(std::string_view raw) {
    if (raw.size() != 2 * kEcFieldBytes)
        return {};
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
    std::unique_ptr<ECDSA_SIG, EcdsaSigDeleter> sig(ECDSA_SIG_new());
    BIGNUM* r = BN_bin2bn(bytes, kEcFieldBytes, nullptr);
    BIGNUM* s = BN_bin2bn(bytes + kEcFieldBytes, kEcFieldBytes, nullptr);
    if (!sig || !r || !s || ECDSA_SIG_set0(sig.get(), r, s) != 1) {
        BN_free(r);
        BN_free(s);
        return {};
    }
    int len = i2d_ECDSA_SIG(sig.get(), nullptr);
    if (len <= 0)
        return {};
    std::vector<uint8_t> der(static_cast<size_t>(len));
    unsigned char* out = der.data();
    i2d_ECDSA_SIG(sig.get(), &out);
    return der;
}

} // namespace

std::string to_string(JwsAlgorithm alg) {
    switch (alg) {
    case JwsAlgorithm::RS256:
        return "RS256";
    case JwsAlgorithm::ES256:
        return "ES256";
    }
    return "RS256";
}

JwsAlgorithm parse_algorithm(std::string_view name) {
    if (name == "RS256")
        return JwsAlgorithm::RS256;
    if (name == "ES256")
        return JwsAlgorithm::ES256;
    throw UnsupportedAlgorithm("algorithm not in allowlist: " + std::string(name));
}

bool algorithm_allowed(std::string_view name) {
    return name == "RS256" || name == "ES256";
}

std::string random_hex(size_t n_bytes) {
    std::vector<uint8_t> buf(n_bytes);
    if (RAND_bytes(buf.data(), static_cast<int>(buf.size())) != 1)
        throw Error("RAND_bytes failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * n_bytes);
    for (uint8_t b : buf) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

VerificationKey::VerificationKey(std::string kid, JwsAlgorithm alg, PkeyPtr pkey)
    : kid_(std::move(kid)), alg_(alg), pkey_(std::move(pkey)) {}

VerificationKey VerificationKey::from_jwk(const nlohmann::json& jwk) {
    if (!jwk.is_object() || !jwk.contains("kty"))
        throw MalformedMetadata("JWK entry is not an object with kty");
    std::string kty = jwk["kty"].get<std::string>();
    std::string kid = jwk.value("kid", "");
    if (kid.empty())
        throw MalformedMetadata("JWK entry has no kid");
    if (kty == "RSA") {
        auto n = decode_b64u_field(jwk, "n");
        auto e = decode_b64u_field(jwk, "e");
        return VerificationKey(kid, JwsAlgorithm::RS256, rsa_public_from_parts(n, e));
    }
    if (kty == "EC") {
        if (jwk.value("crv", "") != "P-256")
            throw UnsupportedAlgorithm("unsupported EC curve: " + jwk.value("crv", ""));
        auto x = decode_b64u_field(jwk, "x");
        auto y = decode_b64u_field(jwk, "y");
        return VerificationKey(kid, JwsAlgorithm::ES256, ec_public_from_parts(x, y));
    }
    throw UnsupportedAlgorithm("unsupported JWK kty: " + kty);
}

nlohmann::json VerificationKey::to_jwk() const {
    nlohmann::json jwk;
    jwk["kid"] = kid_;
    jwk["use"] = "sig";
    jwk["alg"] = to_string(alg_);
    if (alg_ == JwsAlgorithm::RS256) {
        jwk["kty"] = "RSA";
        jwk["n"] = b64u_bn(get_bn_param(pkey_.get(), OSSL_PKEY_PARAM_RSA_N).get());
        jwk["e"] = b64u_bn(get_bn_param(pkey_.get(), OSSL_PKEY_PARAM_RSA_E).get());
    } else {
        jwk["kty"] = "EC";
        jwk["crv"] = "P-256";
        jwk["x"] = b64u_bn(get_bn_param(pkey_.get(), OSSL_PKEY_PARAM_EC_PUB_X).get(), kEcFieldBytes);
        jwk["y"] = b64u_bn(get_bn_param(pkey_.get(), OSSL_PKEY_PARAM_EC_PUB_Y).get(), kEcFieldBytes);
    }
    return jwk;
}

bool VerificationKey::verify(std::string_view message, std::string_view jws_signature) const {
    if (!pkey_)
        return false;
    const unsigned char* sig_bytes = reinterpret_cast<const unsigned char*>(jws_signature.data());
    size_t sig_len = jws_signature.size();
    std::vector<uint8_t> der;
    if (alg_ == JwsAlgorithm::ES256) {
        der = ecdsa_raw_to_der(jws_signature);
        if (der.empty())
            return false;
        sig_bytes = der.data();
        sig_len = der.size();
    }
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, pkey_.get()) != 1)
        return false;
    return EVP_DigestVerify(ctx.get(), sig_bytes, sig_len,
                            reinterpret_cast<const unsigned char*>(message.data()), message.size()) == 1;
}

KeyPair KeyPair::generate(JwsAlgorithm alg, std::string kid) {
    KeyPair kp;
    kp.alg_ = alg;
    kp.kid_ = kid.empty() ? random_hex() : std::move(kid);
    if (alg == JwsAlgorithm::RS256)
        kp.pkey_ = wrap(EVP_PKEY_Q_keygen(nullptr, nullptr, "RSA", static_cast<size_t>(2048)));
    else
        kp.pkey_ = wrap(EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256"));
    return kp;
}

KeyPair KeyPair::from_key_file(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("kid") || !doc.contains("alg") || !doc.contains("private_pem"))
        throw ConfigError("key file must contain kid, alg and private_pem");
    KeyPair kp;
    kp.kid_ = doc["kid"].get<std::string>();
    kp.alg_ = parse_algorithm(doc["alg"].get<std::string>());
    std::string pem = doc["private_pem"].get<std::string>();
    std::unique_ptr<BIO, BioDeleter> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    if (!bio)
        throw Error("BIO allocation failed");
    EVP_PKEY* raw = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
    if (!raw)
        throw ConfigError("could not parse private_pem");
    kp.pkey_ = wrap(raw);
    return kp;
}

nlohmann::json KeyPair::to_key_file() const {
    std::unique_ptr<BIO, BioDeleter> bio(BIO_new(BIO_s_mem()));
    if (!bio || PEM_write_bio_PrivateKey(bio.get(), pkey_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1)
        throw Error("could not serialize private key");
    char* data = nullptr;
    long len = BIO_get_mem_data(bio.get(), &data);
    nlohmann::json doc;
    doc["kid"] = kid_;
    doc["alg"] = to_string(alg_);
    doc["private_pem"] = std::string(data, static_cast<size_t>(len));
    return doc;
}

VerificationKey KeyPair::public_key() const {
    // EVP_PKEY is reference counted; the verification side only ever uses
    // public operations on it.
    EVP_PKEY_up_ref(pkey_.get());
    return VerificationKey(kid_, alg_, wrap(pkey_.get()));
}

std::vector<uint8_t> KeyPair::sign(std::string_view message) const {
    if (!pkey_)
        throw Error("signing with an empty key pair");
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, pkey_.get()) != 1)
        throw Error("EVP_DigestSignInit failed");
    size_t len = 0;
    const auto* msg = reinterpret_cast<const unsigned char*>(message.data());
    if (EVP_DigestSign(ctx.get(), nullptr, &len, msg, message.size()) != 1)
        throw Error("EVP_DigestSign sizing failed");
    std::vector<uint8_t> sig(len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &len, msg, message.size()) != 1)
        throw Error("EVP_DigestSign failed");
    sig.resize(len);
    if (alg_ == JwsAlgorithm::ES256)
        return ecdsa_der_to_raw(sig);
    return sig;
}

bool secure_equal(std::string_view a, std::string_view b) {
    if (a.size() != b.size())
        return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string password_salt() { return random_hex(16); }

std::string password_hash(std::string_view password, std::string_view salt_hex) {
    std::vector<uint8_t> out(32);
    if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()),
                          reinterpret_cast<const unsigned char*>(salt_hex.data()),
                          static_cast<int>(salt_hex.size()), 10000, EVP_sha256(),
                          static_cast<int>(out.size()), out.data()) != 1)
        throw Error("PBKDF2 failed");
    static const char* hex = "0123456789abcdef";
    std::string res;
    res.reserve(64);
    for (uint8_t b : out) {
        res.push_back(hex[b >> 4]);
        res.push_back(hex[b & 0xf]);
    }
    return res;
}

} // namespace wlcg

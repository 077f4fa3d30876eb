#include "wlcg/claims.hpp"

#include <array>
#include <algorithm>

namespace wlcg {

namespace {

// OIDC core §5.1 standard claims.
constexpr std::array kOidcStandardClaims = {
    "name",          "given_name",   "family_name",          "middle_name", "nickname",
    "preferred_username", "profile", "picture",              "website",     "email",
    "email_verified", "gender",      "birthdate",            "zoneinfo",    "locale",
    "phone_number",  "phone_number_verified", "address",     "updated_at",
};

std::vector<std::string> string_list(const nlohmann::json& v, const char* claim) {
    std::vector<std::string> out;
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
        return out;
    }
    if (!v.is_array())
        throw nlohmann::json::type_error::create(302, std::string(claim) + " must be a string or array", &v);
    for (const auto& item : v)
        out.push_back(item.get<std::string>());
    return out;
}

} // namespace

std::string to_string(TokenKind kind) {
    switch (kind) {
    case TokenKind::IdToken:
        return "id";
    case TokenKind::AccessToken:
        return "access";
    case TokenKind::RefreshToken:
        return "refresh";
    }
    return "access";
}

bool is_standard_oidc_claim(const std::string& name) {
    return std::find(kOidcStandardClaims.begin(), kOidcStandardClaims.end(), name) !=
           kOidcStandardClaims.end();
}

bool valid_group_name(const std::string& group) {
    if (group.empty() || group.front() != '/')
        return false;
    if (group.size() == 1)
        return false; // "/" alone names no group
    std::string::size_type pos = 1;
    while (pos <= group.size()) {
        auto next = group.find('/', pos);
        if (next == std::string::npos)
            next = group.size();
        if (next == pos)
            return false; // empty segment ("//" or trailing "/")
        pos = next + 1;
    }
    return true;
}

std::vector<std::string> ClaimSet::invariant_violations() const {
    std::vector<std::string> out;
    if (exp != 0 && iat != 0 && exp <= iat)
        out.push_back("exp must be greater than iat");
    if (nbf && *nbf > exp)
        out.push_back("nbf must not exceed exp");
    if (aud.empty())
        out.push_back("aud must be non-empty");
    if (wlcg_ver.empty())
        out.push_back("wlcg.ver must be a non-empty string");
    if (wlcg_groups) {
        for (const auto& g : *wlcg_groups)
            if (!valid_group_name(g))
                out.push_back("wlcg.groups entry is not a valid group name: " + g);
    }
    return out;
}

nlohmann::json ClaimSet::to_json() const {
    nlohmann::json p;
    p["sub"] = sub;
    p["iss"] = iss;
    p["aud"] = aud; // always a list on emit
    p["exp"] = exp;
    p["iat"] = iat;
    if (nbf)
        p["nbf"] = *nbf;
    p["jti"] = jti;
    if (acr)
        p["acr"] = *acr;
    if (eduperson_assurance)
        p["eduperson_assurance"] = *eduperson_assurance;
    p["wlcg.ver"] = wlcg_ver;
    if (wlcg_groups)
        p["wlcg.groups"] = *wlcg_groups;
    if (scope)
        p["scope"] = *scope;
    if (auth_time)
        p["auth_time"] = *auth_time;
    for (const auto& [k, v] : oidc_standard)
        p[k] = v;
    for (const auto& [k, v] : extra)
        p[k] = v;
    return p;
}

ClaimSet ClaimSet::from_json(const nlohmann::json& payload) {
    ClaimSet c;
    c.wlcg_ver.clear();
    for (const auto& [key, value] : payload.items()) {
        if (key == "sub")
            c.sub = value.get<std::string>();
        else if (key == "iss")
            c.iss = value.get<std::string>();
        else if (key == "aud")
            c.aud = string_list(value, "aud");
        else if (key == "exp")
            c.exp = value.get<int64_t>();
        else if (key == "iat")
            c.iat = value.get<int64_t>();
        else if (key == "nbf")
            c.nbf = value.get<int64_t>();
        else if (key == "jti")
            c.jti = value.get<std::string>();
        else if (key == "acr")
            c.acr = value.get<std::string>();
        else if (key == "eduperson_assurance")
            c.eduperson_assurance = string_list(value, "eduperson_assurance");
        else if (key == "wlcg.ver")
            c.wlcg_ver = value.get<std::string>();
        else if (key == "wlcg.groups")
            c.wlcg_groups = string_list(value, "wlcg.groups");
        else if (key == "scope")
            c.scope = value.get<std::string>();
        else if (key == "auth_time")
            c.auth_time = value.get<int64_t>();
        else if (is_standard_oidc_claim(key))
            c.oidc_standard[key] = value;
        else
            c.extra[key] = value;
    }
    return c;
}

} // namespace wlcg

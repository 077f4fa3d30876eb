#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wlcg/guard.hpp"
#include "wlcg/issuer.hpp"

namespace wlcg {

/// Whole-file IO with IoError on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

nlohmann::json parse_json_file(const std::string& path);

/// Issuer configuration file:
/// {
///   "issuer": "https://issuer.test",
///   "signing_key": {"file": "key.json"} | {"kid","alg","private_pem"},
///   "lifetimes": {"access":1200,"id":600,"refresh":43200,"code":60},
///   "profile_version": "1.0",
///   "exchangeable_audiences": [...],
///   "store_path": "grants.json",
///   "listen": {"host":"127.0.0.1","port":8080},
///   "clients": [{"client_id","client_secret","allowed_grants":[...],
///                "allowed_scopes":[...],"redirect_uris":[...],
///                "default_audiences":[...]}],
///   "users": [{"username","password","subject","groups":[...],
///              "assurance":[...],"claims":{"name":...,"email":...}}]
/// }
struct IssuerFileConfig {
    IssuerOptions options;
    KeyPair signing_key;
    std::vector<ClientRegistration> clients;
    struct UserEntry {
        std::string username;
        std::string password;
        std::string subject;
        std::vector<std::string> groups;
        std::vector<std::string> assurance;
        std::map<std::string, nlohmann::json> oidc_claims;
    };
    std::vector<UserEntry> users;
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
};

IssuerFileConfig load_issuer_config(const std::string& path);
IssuerFileConfig parse_issuer_config(const nlohmann::json& doc, const std::string& base_dir);
std::shared_ptr<IssuerService> build_issuer(const IssuerFileConfig& config, ClockPtr clock);

/// Resource configuration file:
/// {
///   "accepted_issuers": [...],
///   "expected_audiences": [...],
///   "skew_seconds": 60,
///   "honor_wildcard_audience": true,
///   "allow_http_issuers": false,
///   "anchor_ttl_seconds": 21600,
///   "jti_replay_cache": 0,
///   "policy": {"mode":"either","group_matching":"hierarchical",
///              "group_rules":[{"operation","path","group"}]},
///   "listen": {"host":"127.0.0.1","port":8081}
/// }
struct GuardFileConfig {
    GuardConfig guard;
    int64_t anchor_ttl = 6 * 3600;
    bool allow_http = false;
    std::string listen_host = "127.0.0.1";
    int listen_port = 8081;
};

GuardFileConfig load_guard_config(const std::string& path);
GuardFileConfig parse_guard_config(const nlohmann::json& doc);

AuthzPolicy parse_policy(const nlohmann::json& doc);

} // namespace wlcg

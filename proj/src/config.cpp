#include "wlcg/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wlcg/errors.hpp"

namespace wlcg {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path);
    out << content;
    if (!out)
        throw IoError("write failed for " + path);
}

nlohmann::json parse_json_file(const std::string& path) {
    auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded())
        throw ConfigError(path + " is not valid JSON");
    return doc;
}

namespace {

std::vector<std::string> string_vec(const nlohmann::json& doc, const char* field) {
    if (!doc.contains(field))
        return {};
    return doc[field].get<std::vector<std::string>>();
}

KeyPair load_signing_key(const nlohmann::json& doc, const std::string& base_dir) {
    if (!doc.contains("signing_key"))
        throw ConfigError("issuer config needs a signing_key");
    const auto& key = doc["signing_key"];
    if (key.contains("file")) {
        std::filesystem::path p = key["file"].get<std::string>();
        if (p.is_relative() && !base_dir.empty())
            p = std::filesystem::path(base_dir) / p;
        return KeyPair::from_key_file(parse_json_file(p.string()));
    }
    return KeyPair::from_key_file(key);
}

} // namespace

IssuerFileConfig parse_issuer_config(const nlohmann::json& doc, const std::string& base_dir) {
    if (!doc.is_object())
        throw ConfigError("issuer config must be a JSON object");
    IssuerFileConfig config;
    try {
        config.options.issuer = doc.at("issuer").get<std::string>();
        if (doc.contains("lifetimes")) {
            const auto& lt = doc["lifetimes"];
            config.options.access_token_lifetime =
                lt.value("access", config.options.access_token_lifetime);
            config.options.id_token_lifetime = lt.value("id", config.options.id_token_lifetime);
            config.options.refresh_token_lifetime =
                lt.value("refresh", config.options.refresh_token_lifetime);
            config.options.auth_code_lifetime =
                lt.value("code", config.options.auth_code_lifetime);
        }
        config.options.profile_version =
            doc.value("profile_version", config.options.profile_version);
        config.options.exchangeable_audiences = string_vec(doc, "exchangeable_audiences");
        config.options.store_path = doc.value("store_path", "");
        config.signing_key = load_signing_key(doc, base_dir);
        if (doc.contains("listen")) {
            config.listen_host = doc["listen"].value("host", config.listen_host);
            config.listen_port = doc["listen"].value("port", config.listen_port);
        }
        for (const auto& c : doc.value("clients", nlohmann::json::array())) {
            ClientRegistration client;
            client.client_id = c.at("client_id").get<std::string>();
            client.client_secret = c.at("client_secret").get<std::string>();
            for (const auto& g : c.value("allowed_grants", nlohmann::json::array()))
                client.allowed_grants.insert(g.get<std::string>());
            for (const auto& s : c.value("allowed_scopes", nlohmann::json::array()))
                client.allowed_scopes.insert(s.get<std::string>());
            client.redirect_uris = string_vec(c, "redirect_uris");
            client.default_audiences = string_vec(c, "default_audiences");
            config.clients.push_back(std::move(client));
        }
        for (const auto& u : doc.value("users", nlohmann::json::array())) {
            IssuerFileConfig::UserEntry user;
            user.username = u.at("username").get<std::string>();
            user.password = u.at("password").get<std::string>();
            user.subject = u.at("subject").get<std::string>();
            user.groups = string_vec(u, "groups");
            user.assurance = string_vec(u, "assurance");
            const nlohmann::json oidc = u.value("claims", nlohmann::json::object());
            for (const auto& [k, v] : oidc.items())
                user.oidc_claims[k] = v;
            config.users.push_back(std::move(user));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad issuer config: ") + e.what());
    }
    return config;
}

IssuerFileConfig load_issuer_config(const std::string& path) {
    return parse_issuer_config(parse_json_file(path),
                               std::filesystem::path(path).parent_path().string());
}

std::shared_ptr<IssuerService> build_issuer(const IssuerFileConfig& config, ClockPtr clock) {
    auto service =
        std::make_shared<IssuerService>(config.options, config.signing_key, std::move(clock));
    for (const auto& client : config.clients)
        service->add_client(client);
    for (const auto& user : config.users)
        service->add_user(user.username, user.password, user.subject, user.groups, user.assurance,
                          user.oidc_claims);
    return service;
}

AuthzPolicy parse_policy(const nlohmann::json& doc) {
    AuthzPolicy policy;
    if (doc.is_null())
        return policy;
    try {
        policy.mode = parse_policy_mode(doc.value("mode", "either"));
        policy.group_matching = parse_group_matching(doc.value("group_matching", "hierarchical"));
        for (const auto& r : doc.value("group_rules", nlohmann::json::array())) {
            GroupRule rule;
            rule.operation = r.at("operation").get<std::string>();
            rule.path_prefix = AbsolutePath::parse(r.at("path").get<std::string>());
            rule.required_group = GroupName::parse(r.at("group").get<std::string>());
            policy.group_rules.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad policy: ") + e.what());
    } catch (const MalformedPath& e) {
        throw ConfigError(std::string("bad policy path: ") + e.what());
    }
    return policy;
}

GuardFileConfig parse_guard_config(const nlohmann::json& doc) {
    if (!doc.is_object())
        throw ConfigError("guard config must be a JSON object");
    GuardFileConfig config;
    try {
        config.guard.accepted_issuers = string_vec(doc, "accepted_issuers");
        config.guard.expected_audiences = string_vec(doc, "expected_audiences");
        config.guard.skew_tolerance = doc.value("skew_seconds", config.guard.skew_tolerance);
        config.guard.honor_wildcard_audience =
            doc.value("honor_wildcard_audience", config.guard.honor_wildcard_audience);
        config.guard.wildcard_audience =
            doc.value("wildcard_audience", config.guard.wildcard_audience);
        config.guard.jti_replay_cache =
            doc.value("jti_replay_cache", config.guard.jti_replay_cache);
        if (doc.contains("policy"))
            config.guard.policy = parse_policy(doc["policy"]);
        config.anchor_ttl = doc.value("anchor_ttl_seconds", config.anchor_ttl);
        config.allow_http = doc.value("allow_http_issuers", config.allow_http);
        if (doc.contains("listen")) {
            config.listen_host = doc["listen"].value("host", config.listen_host);
            config.listen_port = doc["listen"].value("port", config.listen_port);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad guard config: ") + e.what());
    }
    if (config.guard.accepted_issuers.empty())
        throw ConfigError("guard config needs at least one accepted issuer");
    return config;
}

GuardFileConfig load_guard_config(const std::string& path) {
    return parse_guard_config(parse_json_file(path));
}

} // namespace wlcg

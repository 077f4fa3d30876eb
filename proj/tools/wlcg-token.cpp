#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "wlcg/config.hpp"
#include "wlcg/errors.hpp"
#include "wlcg/harness.hpp"
#include "wlcg/jwt.hpp"
#include "wlcg/transport.hpp"
#include "wlcg/trust.hpp"
#include "wlcg/validation.hpp"

namespace {

using namespace wlcg;

std::string env_or(const char* name, const std::string& fallback) {
    const char* value = std::getenv(name);
    return value ? value : fallback;
}

std::string format_epoch(int64_t t) {
    std::time_t tt = static_cast<std::time_t>(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Token input precedence: positional arg, --file, WLCG_TOKEN, stdin.
std::string read_token_input(const std::string& positional, const std::string& file) {
    std::string raw;
    if (!positional.empty()) {
        raw = positional;
    } else if (!file.empty()) {
        raw = read_file(file);
    } else if (const char* env = std::getenv("WLCG_TOKEN"); env && *env) {
        raw = env;
    } else {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        raw = buf.str();
    }
    // trim surrounding whitespace/newlines
    auto begin = raw.find_first_not_of(" \t\r\n");
    auto end = raw.find_last_not_of(" \t\r\n");
    return begin == std::string::npos ? std::string() : raw.substr(begin, end - begin + 1);
}

int cmd_keygen(const std::string& out, const std::string& alg_name, std::string kid) {
    KeyPair key = KeyPair::generate(parse_algorithm(alg_name), std::move(kid));
    write_file(out, key.to_key_file().dump(2) + "\n");
    std::filesystem::permissions(out, std::filesystem::perms::owner_read |
                                          std::filesystem::perms::owner_write);
    nlohmann::json jwks{{"keys", {key.public_key().to_jwk()}}};
    write_file(out + ".pub.json", jwks.dump(2) + "\n");
    std::cout << key.kid() << "\n";
    std::cerr << "wrote " << out << " (private) and " << out << ".pub.json (public JWKS)\n";
    return 0;
}

struct MintArgs {
    std::string key_file;
    std::string kind = "access";
    std::string sub = "local-user";
    std::string iss;
    std::vector<std::string> aud;
    std::string scope;
    std::vector<std::string> groups;
    std::vector<std::string> assurance;
    int64_t lifetime = 1200;
    int64_t auth_time = 0;
};

int cmd_mint(const MintArgs& args) {
    KeyPair key = KeyPair::from_key_file(parse_json_file(args.key_file));
    TokenKind kind = args.kind == "id" ? TokenKind::IdToken : TokenKind::AccessToken;

    ClaimSet claims;
    claims.sub = args.sub;
    claims.iss = args.iss;
    claims.aud = args.aud.empty() ? std::vector<std::string>{kAnyAudience} : args.aud;
    claims.iat = SystemClock().now();
    claims.exp = claims.iat + args.lifetime;
    claims.jti = random_hex();
    if (!args.scope.empty())
        claims.scope = args.scope;
    if (!args.groups.empty())
        claims.wlcg_groups = args.groups;
    if (!args.assurance.empty())
        claims.eduperson_assurance = args.assurance;
    if (args.auth_time > 0)
        claims.auth_time = args.auth_time;
    else if (kind == TokenKind::IdToken)
        claims.auth_time = claims.iat;

    auto shape = check_profile_shape(claims, kind);
    if (!shape.conformant())
        throw ShapeViolation("refusing to mint a non-conformant " + to_string(kind) +
                             " token: " + shape.describe());
    auto token = encode_and_sign(claims, kind, key);
    // stdout carries exactly the compact token plus one newline
    std::cout << token.value << "\n";
    return 0;
}

void print_claim_line(std::ostream& out, const std::string& name, const nlohmann::json& value) {
    out << "  " << name;
    for (size_t i = name.size(); i < 22; ++i)
        out << ' ';
    out << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
}

int cmd_inspect(const std::string& token_arg, const std::string& file, bool verify,
                const std::string& issuer, bool as_json, bool allow_http) {
    CompactToken token{read_token_input(token_arg, file)};
    DecodedToken decoded = decode(token); // throws MalformedToken for garbage

    std::string signature_status = "UNVERIFIED (signature not checked)";
    bool signature_valid = true;
    if (verify) {
        if (issuer.empty())
            throw ConfigError("--verify needs --issuer or WLCG_ISSUER");
        auto fetcher = std::make_shared<HttplibFetcher>();
        TrustAnchorStore::Options options;
        options.allow_http = allow_http;
        TrustAnchorStore anchors(fetcher, system_clock(), options);
        anchors.add_accepted_issuer(issuer);
        auto key = anchors.get_key(issuer, decoded.header.value("kid", ""));
        signature_valid = verify_signature(token, key);
        signature_status = signature_valid ? "signature VALID (issuer " + issuer + ")"
                                           : "signature INVALID (issuer " + issuer + ")";
    }

    auto as_access = check_profile_shape(decoded.claims, TokenKind::AccessToken);
    auto as_id = check_profile_shape(decoded.claims, TokenKind::IdToken);

    if (as_json) {
        nlohmann::json doc;
        doc["header"] = decoded.header;
        doc["claims"] = decoded.claims.to_json();
        doc["signature"] = signature_status;
        doc["shape"] = {{"access", as_access.describe()}, {"id", as_id.describe()}};
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << signature_status << "\n";
        std::cout << "header:\n";
        for (const auto& [k, v] : decoded.header.items())
            print_claim_line(std::cout, k, v);
        std::cout << "claims:\n";
        auto payload = decoded.claims.to_json();
        for (const auto& [k, v] : payload.items()) {
            print_claim_line(std::cout, k, v);
            if (k == "exp" || k == "iat" || k == "nbf" || k == "auth_time")
                std::cout << "                          (" << format_epoch(v.get<int64_t>())
                          << ")\n";
        }
        std::cout << "shape as access token:  " << as_access.describe() << "\n";
        std::cout << "shape as ID token:      " << as_id.describe() << "\n";
    }
    return signature_valid ? 0 : 1;
}

int cmd_validate(const std::string& token_arg, const std::string& file, const std::string& issuer,
                 const std::vector<std::string>& audiences, const std::string& kind_name,
                 int64_t skew, bool allow_http) {
    if (issuer.empty())
        throw ConfigError("validate needs --issuer or WLCG_ISSUER");
    CompactToken token{read_token_input(token_arg, file)};
    DecodedToken decoded = decode(token);
    TokenKind kind = kind_name == "id" ? TokenKind::IdToken : TokenKind::AccessToken;

    auto fetcher = std::make_shared<HttplibFetcher>();
    TrustAnchorStore::Options options;
    options.allow_http = allow_http;
    TrustAnchorStore anchors(fetcher, system_clock(), options);
    anchors.add_accepted_issuer(issuer);

    bool ok = true;
    auto report_line = [&](const std::string& what, bool passed, const std::string& detail) {
        std::cout << (passed ? "PASS" : "FAIL") << "  " << what
                  << (detail.empty() ? "" : ": " + detail) << "\n";
        ok = ok && passed;
    };

    try {
        auto key = anchors.get_key(issuer, decoded.header.value("kid", ""));
        report_line("signature", verify_signature(token, key), "");
    } catch (const Error& e) {
        report_line("signature", false, e.what());
    }

    ValidationContext ctx;
    ctx.expected_audiences = audiences;
    ctx.accepted_issuers = {issuer};
    ctx.clock = system_clock();
    ctx.skew_tolerance = skew;
    ctx.required_kind = kind;
    auto claims_report = validate_claims(decoded.claims, ctx);
    report_line("claims", claims_report.accepted(), claims_report.describe());

    auto shape = check_profile_shape(decoded.claims, kind);
    report_line("shape (" + to_string(kind) + ")", shape.conformant(), shape.describe());

    return ok ? 0 : 1;
}

int cmd_serve_issuer(const std::string& config_path) {
    auto config = load_issuer_config(config_path);
    auto issuer = build_issuer(config, system_clock());
    auto app = std::make_shared<IssuerApp>(issuer);
    HttpServer server(app);
    std::cerr << "issuer " << config.options.issuer << " listening on " << config.listen_host
              << ":" << config.listen_port << "\n";
    if (!server.listen(config.listen_host, config.listen_port))
        throw ConfigError("could not bind " + config.listen_host + ":" +
                          std::to_string(config.listen_port));
    return 0;
}

int cmd_serve_resource(const std::string& config_path) {
    auto config = load_guard_config(config_path);
    auto fetcher = std::make_shared<HttplibFetcher>();
    TrustAnchorStore::Options options;
    options.ttl = config.anchor_ttl;
    options.allow_http = config.allow_http;
    auto anchors = std::make_shared<TrustAnchorStore>(fetcher, system_clock(), options);
    for (const auto& issuer : config.guard.accepted_issuers)
        anchors->add_accepted_issuer(issuer);
    auto app = std::make_shared<ResourceApp>(config.guard, anchors, system_clock());
    HttpServer server(app);
    std::cerr << "resource listening on " << config.listen_host << ":" << config.listen_port
              << "\n";
    if (!server.listen(config.listen_host, config.listen_port))
        throw ConfigError("could not bind " + config.listen_host + ":" +
                          std::to_string(config.listen_port));
    return 0;
}

int cmd_run_scenario(const std::string& name, const std::string& out_path) {
    auto transcript = harness::run_scenario(name);
    std::string lines = transcript.to_json_lines();
    if (out_path.empty())
        std::cout << lines;
    else
        write_file(out_path, lines);
    std::cerr << "scenario " << transcript.scenario << ": "
              << (transcript.passed ? "passed" : "FAILED") << " (" << transcript.steps.size()
              << " steps)\n";
    if (!transcript.passed)
        std::cerr << "first failure: " << transcript.first_failure << "\n";
    return transcript.passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"WLCG profile token toolkit: keys, tokens, issuer, resource, scenarios"};
    app.require_subcommand(1);

    // keygen
    auto* keygen = app.add_subcommand("keygen", "generate a signing key pair");
    std::string keygen_out = "wlcg-signing-key.json";
    std::string keygen_alg = "RS256";
    std::string keygen_kid;
    keygen->add_option("--out", keygen_out, "output key file path");
    keygen->add_option("--alg", keygen_alg, "signature algorithm (RS256 or ES256)");
    keygen->add_option("--kid", keygen_kid, "key id (random when omitted)");

    // mint
    auto* mint = app.add_subcommand("mint", "mint a signed profile token");
    MintArgs mint_args;
    mint_args.iss = env_or("WLCG_ISSUER", "https://issuer.test");
    mint->add_option("--key", mint_args.key_file, "key file from keygen")->required();
    mint->add_option("--kind", mint_args.kind, "token kind: access or id")
        ->check(CLI::IsMember({"access", "id"}));
    mint->add_option("--sub", mint_args.sub, "subject");
    mint->add_option("--iss", mint_args.iss, "issuer URL (default WLCG_ISSUER)");
    mint->add_option("--aud", mint_args.aud, "audience, repeatable (default the any-audience)");
    mint->add_option("--scope", mint_args.scope, "space-separated capabilities (access only)");
    mint->add_option("--group", mint_args.groups, "wlcg.groups entry, repeatable");
    mint->add_option("--assurance", mint_args.assurance, "eduperson_assurance entry, repeatable");
    mint->add_option("--lifetime", mint_args.lifetime, "seconds until expiry");
    mint->add_option("--auth-time", mint_args.auth_time, "auth_time claim (id tokens)");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "decode a token and report its shape");
    std::string inspect_token, inspect_file;
    bool inspect_verify = false, inspect_json = false, inspect_allow_http = false;
    std::string inspect_issuer = env_or("WLCG_ISSUER", "");
    inspect->add_option("token", inspect_token, "compact token (defaults to WLCG_TOKEN or stdin)");
    inspect->add_option("--file", inspect_file, "read the token from a file");
    inspect->add_flag("--verify", inspect_verify, "verify the signature against a live issuer");
    inspect->add_option("--issuer", inspect_issuer, "issuer URL for --verify");
    inspect->add_flag("--json", inspect_json, "machine-readable output");
    inspect->add_flag("--allow-http", inspect_allow_http, "permit plain-http issuers (test mode)");

    // validate
    auto* validate = app.add_subcommand("validate", "full validation against a live issuer");
    std::string validate_token, validate_file, validate_kind = "access";
    std::string validate_issuer = env_or("WLCG_ISSUER", "");
    std::vector<std::string> validate_aud;
    int64_t validate_skew = 60;
    bool validate_allow_http = false;
    validate->add_option("token", validate_token, "compact token (defaults to WLCG_TOKEN or stdin)");
    validate->add_option("--file", validate_file, "read the token from a file");
    validate->add_option("--issuer", validate_issuer, "issuer URL (default WLCG_ISSUER)");
    validate->add_option("--aud", validate_aud, "expected audience, repeatable");
    validate->add_option("--kind", validate_kind, "token kind: access or id")
        ->check(CLI::IsMember({"access", "id"}));
    validate->add_option("--skew", validate_skew, "clock skew tolerance in seconds");
    validate->add_flag("--allow-http", validate_allow_http, "permit plain-http issuers");

    // serve-issuer / serve-resource
    auto* serve_issuer = app.add_subcommand("serve-issuer", "run the token issuer");
    std::string issuer_config;
    serve_issuer->add_option("--config", issuer_config, "issuer configuration file")->required();
    auto* serve_resource = app.add_subcommand("serve-resource", "run a protected storage resource");
    std::string resource_config;
    serve_resource->add_option("--config", resource_config, "resource configuration file")
        ->required();

    // run-scenario
    auto* run = app.add_subcommand("run-scenario", "run an end-to-end scenario");
    std::string scenario_name, scenario_out;
    run->add_option("--name", scenario_name, "scenario name")->required();
    run->add_option("--out", scenario_out, "transcript output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*keygen)
            return cmd_keygen(keygen_out, keygen_alg, keygen_kid);
        if (*mint)
            return cmd_mint(mint_args);
        if (*inspect)
            return cmd_inspect(inspect_token, inspect_file, inspect_verify, inspect_issuer,
                               inspect_json, inspect_allow_http);
        if (*validate)
            return cmd_validate(validate_token, validate_file, validate_issuer, validate_aud,
                                validate_kind, validate_skew, validate_allow_http);
        if (*serve_issuer)
            return cmd_serve_issuer(issuer_config);
        if (*serve_resource)
            return cmd_serve_resource(resource_config);
        if (*run)
            return cmd_run_scenario(scenario_name, scenario_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

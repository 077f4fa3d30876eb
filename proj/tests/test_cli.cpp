#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "wlcg/config.hpp"
#include "wlcg/issuer.hpp"
#include "wlcg/jwt.hpp"
#include "wlcg/transport.hpp"
#include "wlcg/trust.hpp"
#include "wlcg/validation.hpp"

using namespace wlcg;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::string& stdin_data = "") {
    namespace fs = std::filesystem;
    static int counter = 0;
    auto dir = fs::temp_directory_path() / "wlcg-cli-test";
    fs::create_directories(dir);
    auto err_path = (dir / ("stderr." + std::to_string(counter++))).string();

    std::string command = std::string(WLCG_CLI_PATH) + " " + args + " 2>" + err_path;
    if (!stdin_data.empty()) {
        auto in_path = err_path + ".in";
        std::ofstream(in_path) << stdin_data;
        command += " <" + in_path;
    } else {
        command += " </dev/null";
    }

    CliResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
        result.out.append(buf.data(), n);
    int status = pclose(pipe);
    result.exit_code = WEXITSTATUS(status);
    std::ifstream err(err_path);
    result.err.assign(std::istreambuf_iterator<char>(err), std::istreambuf_iterator<char>());
    return result;
}

std::filesystem::path work_dir() {
    auto dir = std::filesystem::temp_directory_path() / "wlcg-cli-work";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("keygen writes a key pair and prints the kid") {
    auto key_path = (work_dir() / "k1.json").string();
    auto r = run_cli("keygen --out " + key_path);
    REQUIRE(r.exit_code == 0);
    std::string kid = r.out.substr(0, r.out.find('\n'));
    CHECK_FALSE(kid.empty());

    auto key = KeyPair::from_key_file(parse_json_file(key_path));
    CHECK(key.kid() == kid);
    auto jwks = parse_json_file(key_path + ".pub.json");
    CHECK(jwks["keys"][0]["kid"] == kid);

    auto r2 = run_cli("keygen --out " + (work_dir() / "k2.json").string());
    REQUIRE(r2.exit_code == 0);
    CHECK(r2.out != r.out); // fresh kid every time
}

TEST_CASE("keygen refuses alg none") {
    auto r = run_cli("keygen --alg none --out " + (work_dir() / "none.json").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("allowlist") != std::string::npos);
}

TEST_CASE("mint emits exactly the compact token plus one newline") {
    auto key_path = (work_dir() / "mint-key.json").string();
    REQUIRE(run_cli("keygen --out " + key_path).exit_code == 0);

    auto r = run_cli("mint --key " + key_path +
                     " --kind access --sub alice --scope \"storage.write:/data\"");
    REQUIRE(r.exit_code == 0);
    REQUIRE(!r.out.empty());
    CHECK(r.out.back() == '\n');
    std::string compact = r.out.substr(0, r.out.size() - 1);
    CHECK(compact.find('\n') == std::string::npos);

    auto decoded = decode(CompactToken{compact});
    CHECK(decoded.claims.sub == "alice");
    CHECK(*decoded.claims.scope == "storage.write:/data");
    CHECK(decoded.claims.exp - decoded.claims.iat == 1200); // default lifetime
    CHECK(check_profile_shape(decoded.claims, TokenKind::AccessToken).conformant());

    // verify with the key file's public part
    auto key = KeyPair::from_key_file(parse_json_file(key_path));
    CHECK(verify_signature(CompactToken{compact}, key.public_key()));
}

TEST_CASE("mint refuses scope on an id token") {
    auto key_path = (work_dir() / "mint-id-key.json").string();
    REQUIRE(run_cli("keygen --out " + key_path).exit_code == 0);
    auto r = run_cli("mint --key " + key_path + " --kind id --scope \"storage.read:/data\"");
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("scope") != std::string::npos);
}

TEST_CASE("mint | inspect pipeline") {
    auto key_path = (work_dir() / "pipe-key.json").string();
    REQUIRE(run_cli("keygen --out " + key_path).exit_code == 0);
    auto minted = run_cli("mint --key " + key_path + " --group /wlcg --group /wlcg/ops");
    REQUIRE(minted.exit_code == 0);

    auto inspected = run_cli("inspect", minted.out);
    REQUIRE(inspected.exit_code == 0);
    CHECK(inspected.out.find("UNVERIFIED") != std::string::npos);
    CHECK(inspected.out.find("wlcg.groups") != std::string::npos);
    CHECK(inspected.out.find("/wlcg/ops") != std::string::npos);

    auto as_json = run_cli("inspect --json", minted.out);
    REQUIRE(as_json.exit_code == 0);
    auto doc = nlohmann::json::parse(as_json.out);
    CHECK(doc["claims"]["wlcg.ver"] == "1.0");
}

TEST_CASE("inspect rejects garbage with a nonzero exit") {
    auto r = run_cli("inspect", "this is not a token");
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("segments") != std::string::npos);
}

TEST_CASE("run-scenario figure3 exits 0 with a six-step transcript") {
    auto out_path = (work_dir() / "figure3.jsonl").string();
    auto r = run_cli("run-scenario --name figure3 --out " + out_path);
    REQUIRE(r.exit_code == 0);
    CHECK(r.err.find("passed") != std::string::npos);

    std::ifstream in(out_path);
    std::string line;
    int lines = 0, steps = 0;
    while (std::getline(in, line)) {
        ++lines;
        auto doc = nlohmann::json::parse(line);
        if (doc.contains("step"))
            ++steps;
    }
    CHECK(steps == 6);
    CHECK(lines == 8); // header + 6 steps + result
}

TEST_CASE("run-scenario delegation-broadening fails with ScopeBroadening") {
    auto r = run_cli("run-scenario --name delegation-broadening --out /dev/null");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("ScopeBroadening") != std::string::npos);
}

TEST_CASE("run-scenario with an unknown name lists the available scenarios") {
    auto r = run_cli("run-scenario --name nope");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("available:") != std::string::npos);
    CHECK(r.err.find("figure3") != std::string::npos);
}

TEST_CASE("cli behaviors are reproducible with library calls alone") {
    // mint == ClaimSet + encode_and_sign over the same key file
    auto key_path = (work_dir() / "replica-key.json").string();
    REQUIRE(run_cli("keygen --out " + key_path).exit_code == 0);
    auto minted = run_cli("mint --key " + key_path + " --sub alice --aud https://storage.test"
                          " --scope \"storage.read:/data\"");
    REQUIRE(minted.exit_code == 0);
    auto cli_claims = decode(CompactToken{minted.out.substr(0, minted.out.size() - 1)}).claims;

    KeyPair key = KeyPair::from_key_file(parse_json_file(key_path));
    ClaimSet replica;
    replica.sub = "alice";
    replica.iss = cli_claims.iss;
    replica.aud = {"https://storage.test"};
    replica.iat = cli_claims.iat;
    replica.exp = cli_claims.iat + 1200;
    replica.jti = cli_claims.jti;
    replica.scope = "storage.read:/data";
    auto replica_claims = decode(encode_and_sign(replica, TokenKind::AccessToken, key)).claims;
    CHECK(replica_claims == cli_claims);
}

TEST_CASE("issuer and resource serve over real sockets") {
    // Swappable handler lets us learn the port before building the issuer.
    struct Proxy : HttpHandler {
        std::shared_ptr<HttpHandler> inner;
        HttpResponse handle(const HttpRequest& request) override {
            return inner->handle(request);
        }
    };
    auto proxy = std::make_shared<Proxy>();
    HttpServer server(proxy);
    int port = server.bind_any("127.0.0.1");
    REQUIRE(port > 0);
    std::string issuer_url = "http://127.0.0.1:" + std::to_string(port);

    auto clock = system_clock();
    IssuerOptions options;
    options.issuer = issuer_url;
    auto issuer = std::make_shared<IssuerService>(options, KeyPair::generate(JwsAlgorithm::RS256),
                                                  clock);
    ClientRegistration svc;
    svc.client_id = "svc";
    svc.client_secret = "s3cret";
    svc.allowed_grants = {kGrantClientCredentials};
    svc.allowed_scopes = {"storage.read:/data"};
    svc.default_audiences = {"https://storage.test"};
    issuer->add_client(svc);
    proxy->inner = std::make_shared<IssuerApp>(issuer);

    std::thread serving([&] { server.listen_after_bind(); });
    REQUIRE(server.wait_until_ready());

    // discovery + key fetch over the wire
    auto fetcher = std::make_shared<HttplibFetcher>();
    TrustAnchorStore::Options topt;
    topt.allow_http = true;
    TrustAnchorStore anchors(fetcher, clock, topt);
    anchors.add_accepted_issuer(issuer_url);
    auto md = anchors.metadata(issuer_url);
    CHECK(md.issuer == issuer_url);
    CHECK(md.token_endpoint == issuer_url + "/token");

    // token endpoint over the wire
    httplib::Client client(issuer_url);
    httplib::Headers headers = {{"Authorization", make_basic_auth("svc", "s3cret")}};
    auto resp = client.Post("/token", headers, "grant_type=client_credentials",
                            "application/x-www-form-urlencoded");
    REQUIRE(resp);
    REQUIRE(resp->status == 200);
    auto body = nlohmann::json::parse(resp->body);
    CompactToken token{body["access_token"].get<std::string>()};
    auto kid = decode(token).header["kid"].get<std::string>();
    CHECK(verify_signature(token, anchors.get_key(issuer_url, kid)));

    // the CLI can verify the same token against the live issuer
    auto verified = run_cli("inspect --verify --allow-http --issuer " + issuer_url, token.value);
    CHECK(verified.exit_code == 0);
    CHECK(verified.out.find("signature VALID") != std::string::npos);

    auto validated = run_cli("validate --allow-http --issuer " + issuer_url +
                                 " --aud https://storage.test",
                             token.value);
    CHECK(validated.exit_code == 0);
    CHECK(validated.out.find("FAIL") == std::string::npos);

    server.stop();
    serving.join();
}

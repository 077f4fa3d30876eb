#include <doctest.h>

#include <random>

#include "wlcg/authz.hpp"
#include "wlcg/errors.hpp"

using namespace wlcg;

namespace {

// ---- enumerated universe -------------------------------------------------
// Paths of depth <= 3 over a two-letter segment alphabet, plus the root.

std::vector<std::string> path_universe() {
    std::vector<std::string> out = {"/"};
    const std::vector<std::string> alphabet = {"a", "b"};
    std::vector<std::string> frontier = {""};
    for (int depth = 0; depth < 3; ++depth) {
        std::vector<std::string> next;
        for (const auto& base : frontier)
            for (const auto& seg : alphabet) {
                next.push_back(base + "/" + seg);
                out.push_back(next.back());
            }
        frontier = std::move(next);
    }
    return out;
}

std::vector<std::string> group_universe() {
    auto paths = path_universe();
    paths.erase(paths.begin()); // "/" is not a group name
    return paths;
}

const std::vector<std::string> kOperations = {"storage.read", "storage.write", "storage.create"};

// ---- independent string-level oracles ------------------------------------
// Deliberately built on raw strings, not on AbsolutePath/GroupName.

std::vector<std::string> ancestors_of(const std::string& path) {
    std::vector<std::string> out = {"/"};
    std::string prefix;
    size_t pos = 1;
    while (pos <= path.size() && path != "/") {
        auto next = path.find('/', pos);
        if (next == std::string::npos)
            next = path.size();
        prefix += "/" + path.substr(pos, next - pos);
        out.push_back(prefix);
        pos = next + 1;
    }
    return out;
}

bool oracle_capability_allows(const std::string& cap_op, const std::string& cap_path,
                              const std::string& req_op, const std::string& req_path) {
    if (cap_op != req_op)
        return false;
    if (cap_path.empty())
        return true;
    auto ancestors = ancestors_of(req_path);
    return std::find(ancestors.begin(), ancestors.end(), cap_path) != ancestors.end();
}

bool oracle_group_allows(const std::string& member, const std::string& required,
                         GroupMatching matching) {
    if (matching == GroupMatching::Exact)
        return member == required;
    auto ancestors = ancestors_of(member);
    return std::find(ancestors.begin(), ancestors.end(), required) != ancestors.end();
}

Capability make_cap(const std::string& op, const std::string& path) {
    Capability c;
    c.operation = op;
    if (!path.empty())
        c.path = AbsolutePath::parse(path);
    return c;
}

ResourceRequest make_req(const std::string& op, const std::string& path) {
    return ResourceRequest{op, AbsolutePath::parse(path)};
}

ClaimSet authz_claims() {
    ClaimSet c;
    c.sub = "u1";
    c.iss = "https://issuer.test";
    c.aud = {"https://storage.test"};
    c.iat = 1;
    c.exp = 2;
    c.jti = "j";
    return c;
}

} // namespace

// ---- parsing ---------------------------------------------------------------

TEST_CASE("parse_scope accepts the profile grammar") {
    auto caps = parse_scope("storage.write:/data");
    REQUIRE(caps.size() == 1);
    CHECK(caps[0].operation == "storage.write");
    REQUIRE(caps[0].path.has_value());
    CHECK(caps[0].path->str() == "/data");

    caps = parse_scope("storage.read");
    REQUIRE(caps.size() == 1);
    CHECK_FALSE(caps[0].path.has_value());

    caps = parse_scope("openid offline_access storage.read:/a storage.read:/a");
    REQUIRE(caps.size() == 4);
    CHECK(caps[2] == caps[3]); // duplicates and order preserved
    CHECK(caps[0].operation == "openid");
}

TEST_CASE("parse_scope rejects bad grammar") {
    CHECK_THROWS_AS(parse_scope("storage.read:data"), MalformedScopeEntry);   // relative
    CHECK_THROWS_AS(parse_scope("storage.read:/data/"), MalformedScopeEntry); // trailing slash
    CHECK_THROWS_AS(parse_scope("storage.read:/data//x"), MalformedScopeEntry);
    CHECK_THROWS_AS(parse_scope("storage.read:/data/./x"), MalformedScopeEntry);
    CHECK_THROWS_AS(parse_scope("storage.read:/data/../x"), MalformedScopeEntry);
    CHECK_THROWS_AS(parse_scope("Storage.Read:/data"), MalformedScopeEntry); // uppercase
    CHECK_THROWS_AS(parse_scope("storage..read"), MalformedScopeEntry);
    CHECK_THROWS_AS(parse_scope(".read"), MalformedScopeEntry);
    CHECK_THROWS_AS(parse_scope("read."), MalformedScopeEntry);
    CHECK_THROWS_AS(parse_scope("a  b"), MalformedScopeEntry); // doubled space
    CHECK_THROWS_AS(parse_scope(" a"), MalformedScopeEntry);
}

TEST_CASE("path parsing is strict") {
    CHECK(AbsolutePath::parse("/").segments().empty());
    CHECK(AbsolutePath::parse("/a/b").str() == "/a/b");
    CHECK_THROWS_AS(AbsolutePath::parse(""), MalformedPath);
    CHECK_THROWS_AS(AbsolutePath::parse("a/b"), MalformedPath);
    CHECK_THROWS_AS(AbsolutePath::parse("/a//b"), MalformedPath);
    CHECK_THROWS_AS(AbsolutePath::parse("/a/"), MalformedPath);
    CHECK_THROWS_AS(AbsolutePath::parse("/a/.."), MalformedPath);
}

TEST_CASE("group names round-trip through parse") {
    for (const auto& g : group_universe())
        CHECK(GroupName::parse(g).str() == g);
    CHECK_THROWS_AS(GroupName::parse("/"), MalformedPath);
    CHECK_THROWS_AS(GroupName::parse("wlcg"), MalformedPath);
}

// ---- spec'd examples -------------------------------------------------------

TEST_CASE("capability matching examples") {
    auto caps = parse_scope("storage.write:/data");
    CHECK(authorize_capability(caps, make_req("storage.write", "/data/2024/f.root")).allowed);
    CHECK_FALSE(authorize_capability(caps, make_req("storage.write", "/database/f")).allowed);
    CHECK_FALSE(
        authorize_capability(parse_scope("storage.read:/data"), make_req("storage.write", "/data"))
            .allowed);
}

TEST_CASE("group matching examples") {
    auto member = GroupName::parse("/wlcg/ops");
    auto parent = GroupName::parse("/wlcg");
    CHECK(authorize_groups({member}, parent, GroupMatching::Hierarchical).allowed);
    CHECK_FALSE(authorize_groups({parent}, member, GroupMatching::Hierarchical).allowed);
    CHECK(authorize_groups({parent}, parent, GroupMatching::Exact).allowed);
    CHECK_FALSE(authorize_groups({member}, parent, GroupMatching::Exact).allowed);
}

// ---- oracle equivalence (exhaustive) ---------------------------------------

TEST_CASE("capability decisions agree with the brute-force oracle everywhere") {
    auto paths = path_universe();
    REQUIRE(paths.size() == 15); // root + 2 + 4 + 8
    long checked = 0;
    for (const auto& cap_op : kOperations)
        for (const auto& req_op : kOperations)
            for (const auto& req_path : paths) {
                auto req = make_req(req_op, req_path);
                // capability without a path restriction
                {
                    auto got = authorize_capability({make_cap(cap_op, "")}, req).allowed;
                    CHECK(got == oracle_capability_allows(cap_op, "", req_op, req_path));
                    ++checked;
                }
                for (const auto& cap_path : paths) {
                    auto got =
                        authorize_capability({make_cap(cap_op, cap_path)}, req).allowed;
                    auto expected = oracle_capability_allows(cap_op, cap_path, req_op, req_path);
                    CAPTURE(cap_op);
                    CAPTURE(cap_path);
                    CAPTURE(req_op);
                    CAPTURE(req_path);
                    CHECK(got == expected);
                    ++checked;
                }
            }
    CHECK(checked == 2160); // 3*3*15 * (15+1)
}

TEST_CASE("multi-capability sets behave as any-of (oracle comparison)") {
    std::mt19937_64 rng(0xcab5);
    auto paths = path_universe();
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<Capability> caps;
        std::vector<std::pair<std::string, std::string>> raw;
        int n = 1 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            const auto& op = kOperations[rng() % kOperations.size()];
            const auto& path = rng() % 3 == 0 ? std::string() : paths[rng() % paths.size()];
            caps.push_back(make_cap(op, path));
            raw.emplace_back(op, path);
        }
        const auto& req_op = kOperations[rng() % kOperations.size()];
        const auto& req_path = paths[rng() % paths.size()];
        bool expected = false;
        for (const auto& [op, path] : raw)
            expected = expected || oracle_capability_allows(op, path, req_op, req_path);
        auto got = authorize_capability(caps, make_req(req_op, req_path));
        CHECK(got.allowed == expected);
        CHECK(got.trace.size() >= caps.size()); // every capability examined
    }
}

TEST_CASE("group decisions agree with the brute-force oracle everywhere") {
    auto groups = group_universe();
    REQUIRE(groups.size() == 14);
    for (GroupMatching matching : {GroupMatching::Exact, GroupMatching::Hierarchical})
        for (const auto& member : groups)
            for (const auto& required : groups) {
                auto got = authorize_groups({GroupName::parse(member)},
                                            GroupName::parse(required), matching)
                               .allowed;
                CAPTURE(member);
                CAPTURE(required);
                CAPTURE(to_string(matching));
                CHECK(got == oracle_group_allows(member, required, matching));
            }
}

// ---- properties ------------------------------------------------------------

TEST_CASE("adding a capability never flips allow to deny") {
    std::mt19937_64 rng(0xadd1);
    auto paths = path_universe();
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<Capability> caps;
        int n = static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i)
            caps.push_back(make_cap(kOperations[rng() % 3],
                                    rng() % 3 == 0 ? "" : paths[rng() % paths.size()]));
        auto req = make_req(kOperations[rng() % 3], paths[rng() % paths.size()]);
        bool before = authorize_capability(caps, req).allowed;
        caps.push_back(make_cap(kOperations[rng() % 3],
                                rng() % 3 == 0 ? "" : paths[rng() % paths.size()]));
        bool after = authorize_capability(caps, req).allowed;
        if (before)
            CHECK(after);
    }
}

TEST_CASE("prefix soundness: an allowing path capability is a segment prefix") {
    std::mt19937_64 rng(0x50113);
    auto paths = path_universe();
    for (int iter = 0; iter < 500; ++iter) {
        auto cap = make_cap(kOperations[rng() % 3], paths[rng() % paths.size()]);
        auto req = make_req(cap.operation, paths[rng() % paths.size()]);
        if (!authorize_capability({cap}, req).allowed)
            continue;
        const auto& cseg = cap.path->segments();
        const auto& rseg = req.path.segments();
        REQUIRE(cseg.size() <= rseg.size());
        CHECK(std::equal(cseg.begin(), cseg.end(), rseg.begin()));
    }
}

TEST_CASE("hierarchical implication is reflexive and transitive") {
    auto groups = group_universe();
    for (const auto& g : groups) {
        auto gn = GroupName::parse(g);
        CHECK(gn.is_ancestor_or_self_of(gn));
    }
    for (const auto& a : groups)
        for (const auto& b : groups)
            for (const auto& c : groups) {
                auto ga = GroupName::parse(a);
                auto gb = GroupName::parse(b);
                auto gc = GroupName::parse(c);
                if (ga.is_ancestor_or_self_of(gb) && gb.is_ancestor_or_self_of(gc))
                    CHECK(ga.is_ancestor_or_self_of(gc));
            }
}

TEST_CASE("exact allow implies hierarchical allow") {
    auto groups = group_universe();
    for (const auto& member : groups)
        for (const auto& required : groups) {
            auto m = GroupName::parse(member);
            auto r = GroupName::parse(required);
            if (authorize_groups({m}, r, GroupMatching::Exact).allowed)
                CHECK(authorize_groups({m}, r, GroupMatching::Hierarchical).allowed);
        }
}

TEST_CASE("decisions and traces are deterministic") {
    auto caps = parse_scope("storage.read:/a storage.write:/a/b openid");
    auto req = make_req("storage.write", "/a/b/a");
    auto d1 = authorize_capability(caps, req);
    auto d2 = authorize_capability(caps, req);
    CHECK(d1.allowed == d2.allowed);
    CHECK(d1.matched_rule == d2.matched_rule);
    CHECK(d1.trace == d2.trace);
}

TEST_CASE("allowed decisions always carry a matched rule") {
    std::mt19937_64 rng(0x111e);
    auto paths = path_universe();
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<Capability> caps;
        for (int i = 0, n = static_cast<int>(rng() % 5); i < n; ++i)
            caps.push_back(make_cap(kOperations[rng() % 3],
                                    rng() % 3 == 0 ? "" : paths[rng() % paths.size()]));
        auto d = authorize_capability(caps, make_req(kOperations[rng() % 3],
                                                     paths[rng() % paths.size()]));
        if (d.allowed)
            CHECK(d.matched_rule.has_value());
    }
}

// ---- policy composition ----------------------------------------------------

namespace {

AuthzPolicy either_policy() {
    AuthzPolicy policy;
    policy.mode = PolicyMode::Either;
    policy.group_rules.push_back(
        {"storage.read", AbsolutePath::parse("/"), GroupName::parse("/wlcg")});
    return policy;
}

} // namespace

TEST_CASE("Either: groups-only token allowed to read anywhere via rule") {
    ClaimSet c = authz_claims();
    c.wlcg_groups = {{"/wlcg"}};
    auto d = authorize(c, make_req("storage.read", "/anything/goes"), either_policy());
    CHECK(d.allowed);
    REQUIRE(d.matched_rule.has_value());
    CHECK(d.matched_rule->find("/wlcg") != std::string::npos);
}

TEST_CASE("CapabilityOnly ignores groups") {
    ClaimSet c = authz_claims();
    c.wlcg_groups = {{"/wlcg"}};
    AuthzPolicy policy = either_policy();
    policy.mode = PolicyMode::CapabilityOnly;
    auto d = authorize(c, make_req("storage.read", "/data"), policy);
    CHECK_FALSE(d.allowed);
}

TEST_CASE("GroupOnly ignores capabilities") {
    ClaimSet c = authz_claims();
    c.scope = "storage.read:/data";
    AuthzPolicy policy = either_policy();
    policy.mode = PolicyMode::GroupOnly;
    auto d = authorize(c, make_req("storage.read", "/data"), policy);
    CHECK_FALSE(d.allowed);
}

TEST_CASE("tokens with no authorization claims are denied") {
    auto d = authorize(authz_claims(), make_req("storage.read", "/data"), either_policy());
    CHECK_FALSE(d.allowed);
    REQUIRE(!d.trace.empty());
    CHECK(d.trace[0] == "no authorization claims");
}

TEST_CASE("GroupOnly with no applicable rule marks NoApplicableRule") {
    ClaimSet c = authz_claims();
    c.wlcg_groups = {{"/wlcg"}};
    AuthzPolicy policy = either_policy();
    policy.mode = PolicyMode::GroupOnly;
    auto d = authorize(c, make_req("storage.write", "/data"), policy); // rule covers read only
    CHECK_FALSE(d.allowed);
    bool marked = false;
    for (const auto& t : d.trace)
        marked = marked || t.find(kNoApplicableRule) != std::string::npos;
    CHECK(marked);
}

TEST_CASE("most specific group rule wins") {
    ClaimSet c = authz_claims();
    c.wlcg_groups = {{"/wlcg/ops"}};
    AuthzPolicy policy;
    policy.mode = PolicyMode::GroupOnly;
    policy.group_rules.push_back(
        {"storage.read", AbsolutePath::parse("/"), GroupName::parse("/wlcg")});
    policy.group_rules.push_back(
        {"storage.read", AbsolutePath::parse("/secret"), GroupName::parse("/wlcg/admins")});
    CHECK(authorize(c, make_req("storage.read", "/data/x"), policy).allowed);
    CHECK_FALSE(authorize(c, make_req("storage.read", "/secret/x"), policy).allowed);
}

TEST_CASE("Either allows when the capability branch allows") {
    ClaimSet c = authz_claims();
    c.scope = "storage.write:/data";
    auto d = authorize(c, make_req("storage.write", "/data/f"), either_policy());
    CHECK(d.allowed);
}

TEST_CASE("malformed scope claim denies rather than throws") {
    ClaimSet c = authz_claims();
    c.scope = "storage.read:relative";
    auto d = authorize(c, make_req("storage.read", "/data"), either_policy());
    CHECK_FALSE(d.allowed);
    REQUIRE(!d.trace.empty());
    CHECK(d.trace[0].find("malformed") != std::string::npos);
}

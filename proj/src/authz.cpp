#include "wlcg/authz.hpp"

#include <algorithm>

#include "wlcg/errors.hpp"

namespace wlcg {

namespace {

bool valid_segment_chars(const std::string& seg) {
    return seg != "." && seg != ".." && !seg.empty();
}

std::vector<std::string> split_absolute(const std::string& text, const char* what) {
    if (text.empty() || text.front() != '/')
        throw MalformedPath(std::string(what) + " must be absolute: " + text);
    std::vector<std::string> segments;
    if (text == "/")
        return segments;
    if (text.back() == '/')
        throw MalformedPath(std::string(what) + " has a trailing slash: " + text);
    std::string::size_type pos = 1;
    while (pos <= text.size()) {
        auto next = text.find('/', pos);
        if (next == std::string::npos)
            next = text.size();
        std::string seg = text.substr(pos, next - pos);
        if (!valid_segment_chars(seg))
            throw MalformedPath(std::string(what) + " has an invalid segment: " + text);
        segments.push_back(std::move(seg));
        pos = next + 1;
    }
    return segments;
}

bool is_prefix(const std::vector<std::string>& prefix, const std::vector<std::string>& full) {
    if (prefix.size() > full.size())
        return false;
    return std::equal(prefix.begin(), prefix.end(), full.begin());
}

} // namespace

AbsolutePath AbsolutePath::parse(const std::string& text) {
    AbsolutePath p;
    p.segments_ = split_absolute(text, "path");
    return p;
}

std::string AbsolutePath::str() const {
    if (segments_.empty())
        return "/";
    std::string out;
    for (const auto& s : segments_)
        out += "/" + s;
    return out;
}

bool AbsolutePath::covers(const AbsolutePath& other) const {
    return is_prefix(segments_, other.segments_);
}

std::string Capability::str() const {
    return path ? operation + ":" + path->str() : operation;
}

GroupName GroupName::parse(const std::string& text) {
    GroupName g;
    g.segments_ = split_absolute(text, "group name");
    if (g.segments_.empty())
        throw MalformedPath("group name must have at least one segment");
    return g;
}

std::string GroupName::str() const {
    std::string out;
    for (const auto& s : segments_)
        out += "/" + s;
    return out;
}

bool GroupName::is_ancestor_or_self_of(const GroupName& member) const {
    return is_prefix(segments_, member.segments_);
}

std::string to_string(PolicyMode m) {
    switch (m) {
    case PolicyMode::CapabilityOnly:
        return "capability";
    case PolicyMode::GroupOnly:
        return "group";
    case PolicyMode::Either:
        return "either";
    }
    return "either";
}

std::string to_string(GroupMatching m) {
    return m == GroupMatching::Exact ? "exact" : "hierarchical";
}

PolicyMode parse_policy_mode(const std::string& s) {
    if (s == "capability")
        return PolicyMode::CapabilityOnly;
    if (s == "group")
        return PolicyMode::GroupOnly;
    if (s == "either")
        return PolicyMode::Either;
    throw ConfigError("unknown policy mode: " + s);
}

GroupMatching parse_group_matching(const std::string& s) {
    if (s == "exact")
        return GroupMatching::Exact;
    if (s == "hierarchical")
        return GroupMatching::Hierarchical;
    throw ConfigError("unknown group matching: " + s);
}

AuthzDecision AuthzDecision::deny(std::string reason) {
    AuthzDecision d;
    d.allowed = false;
    d.trace.push_back(std::move(reason));
    return d;
}

bool valid_operation(const std::string& op) {
    if (op.empty())
        return false;
    bool segment_has_char = false;
    for (char c : op) {
        if (c == '.') {
            if (!segment_has_char)
                return false;
            segment_has_char = false;
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') {
            segment_has_char = true;
        } else {
            return false;
        }
    }
    return segment_has_char;
}

std::vector<Capability> parse_scope(const std::string& scope_claim) {
    std::vector<Capability> caps;
    if (scope_claim.empty())
        return caps;
    std::string::size_type pos = 0;
    while (pos <= scope_claim.size()) {
        auto next = scope_claim.find(' ', pos);
        if (next == std::string::npos)
            next = scope_claim.size();
        std::string entry = scope_claim.substr(pos, next - pos);
        pos = next + 1;
        if (entry.empty())
            throw MalformedScopeEntry("empty scope entry (doubled or stray space)");
        Capability cap;
        auto colon = entry.find(':');
        if (colon == std::string::npos) {
            cap.operation = entry;
        } else {
            cap.operation = entry.substr(0, colon);
            std::string path = entry.substr(colon + 1);
            try {
                cap.path = AbsolutePath::parse(path);
            } catch (const MalformedPath& e) {
                throw MalformedScopeEntry("bad capability path in \"" + entry + "\": " + e.what());
            }
        }
        if (!valid_operation(cap.operation))
            throw MalformedScopeEntry("bad capability operation in \"" + entry + "\"");
        caps.push_back(std::move(cap));
    }
    return caps;
}

AuthzDecision authorize_capability(const std::vector<Capability>& caps,
                                   const ResourceRequest& req) {
    AuthzDecision decision;
    for (const auto& cap : caps) {
        if (cap.operation != req.operation) {
            decision.trace.push_back(cap.str() + ": operation mismatch");
            continue;
        }
        if (cap.path && !cap.path->covers(req.path)) {
            decision.trace.push_back(cap.str() + ": path " + cap.path->str() +
                                     " is not a segment prefix of " + req.path.str());
            continue;
        }
        decision.trace.push_back(cap.str() + ": match");
        if (!decision.allowed) {
            decision.allowed = true;
            decision.matched_rule = "capability " + cap.str();
        }
    }
    if (!decision.allowed)
        decision.trace.push_back("no capability grants " + req.operation + " at " +
                                 req.path.str());
    return decision;
}

AuthzDecision authorize_groups(const std::vector<GroupName>& member_of, const GroupName& required,
                               GroupMatching matching) {
    AuthzDecision decision;
    for (const auto& g : member_of) {
        bool match = matching == GroupMatching::Exact ? g == required
                                                      : required.is_ancestor_or_self_of(g);
        decision.trace.push_back("member " + g.str() + (match ? ": satisfies " : ": does not satisfy ") +
                                 required.str() + " (" + to_string(matching) + ")");
        if (match && !decision.allowed) {
            decision.allowed = true;
            decision.matched_rule = "group " + g.str() + " satisfies " + required.str();
        }
    }
    if (!decision.allowed)
        decision.trace.push_back("no membership satisfies required group " + required.str());
    return decision;
}

namespace {

const GroupRule* most_specific_rule(const AuthzPolicy& policy, const ResourceRequest& req) {
    const GroupRule* best = nullptr;
    for (const auto& rule : policy.group_rules) {
        if (rule.operation != req.operation || !rule.path_prefix.covers(req.path))
            continue;
        if (!best || rule.path_prefix.segments().size() > best->path_prefix.segments().size())
            best = &rule;
    }
    return best;
}

AuthzDecision evaluate_groups_branch(const ClaimSet& claims, const ResourceRequest& req,
                                     const AuthzPolicy& policy) {
    if (!claims.wlcg_groups || claims.wlcg_groups->empty())
        return AuthzDecision::deny("token carries no wlcg.groups claim");
    const GroupRule* rule = most_specific_rule(policy, req);
    if (!rule) {
        AuthzDecision d = AuthzDecision::deny(kNoApplicableRule);
        d.trace.push_back("no group rule covers " + req.operation + " at " + req.path.str());
        return d;
    }
    std::vector<GroupName> member_of;
    for (const auto& g : *claims.wlcg_groups) {
        try {
            member_of.push_back(GroupName::parse(g));
        } catch (const MalformedPath&) {
            return AuthzDecision::deny("malformed wlcg.groups entry: " + g);
        }
    }
    AuthzDecision d = authorize_groups(member_of, rule->required_group, policy.group_matching);
    d.trace.insert(d.trace.begin(), "rule (" + rule->operation + ", " + rule->path_prefix.str() +
                                        ") requires " + rule->required_group.str());
    return d;
}

AuthzDecision evaluate_capability_branch(const ClaimSet& claims, const ResourceRequest& req) {
    if (!claims.scope || claims.scope->empty())
        return AuthzDecision::deny("token carries no scope claim");
    std::vector<Capability> caps;
    try {
        caps = parse_scope(*claims.scope);
    } catch (const MalformedScopeEntry& e) {
        return AuthzDecision::deny(std::string("malformed scope claim: ") + e.what());
    }
    return authorize_capability(caps, req);
}

} // namespace

AuthzDecision authorize(const ClaimSet& claims, const ResourceRequest& req,
                        const AuthzPolicy& policy) {
    const bool has_scope = claims.scope && !claims.scope->empty();
    const bool has_groups = claims.wlcg_groups && !claims.wlcg_groups->empty();
    if (!has_scope && !has_groups)
        return AuthzDecision::deny("no authorization claims");

    switch (policy.mode) {
    case PolicyMode::CapabilityOnly:
        return evaluate_capability_branch(claims, req);
    case PolicyMode::GroupOnly:
        return evaluate_groups_branch(claims, req, policy);
    case PolicyMode::Either: {
        AuthzDecision cap = evaluate_capability_branch(claims, req);
        if (cap.allowed)
            return cap;
        AuthzDecision grp = evaluate_groups_branch(claims, req, policy);
        // keep both branches visible in the trace
        grp.trace.insert(grp.trace.begin(), cap.trace.begin(), cap.trace.end());
        return grp;
    }
    }
    return AuthzDecision::deny("unreachable policy mode");
}

} // namespace wlcg

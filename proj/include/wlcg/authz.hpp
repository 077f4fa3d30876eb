#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wlcg/claims.hpp"

namespace wlcg {

/// Absolute slash-separated path with strict parsing: "." / ".." segments,
/// empty segments ("//") and trailing slashes (other than the bare root)
/// are rejected rather than normalized. Root is the empty segment list.
class AbsolutePath {
  public:
    AbsolutePath() = default;

    /// Throws MalformedPath.
    static AbsolutePath parse(const std::string& text);

    const std::vector<std::string>& segments() const { return segments_; }
    std::string str() const;

    /// Segment-boundary prefix: "/data" covers "/data" and "/data/x"
    /// but never "/database".
    bool covers(const AbsolutePath& other) const;

    bool operator==(const AbsolutePath&) const = default;

  private:
    std::vector<std::string> segments_;
};

/// One parsed scope entry: an operation identifier with an optional path
/// restriction ("storage.write:/data").
struct Capability {
    std::string operation;
    std::optional<AbsolutePath> path;

    std::string str() const;
    bool operator==(const Capability&) const = default;
};

/// Group name in canonical "/a/b" form; membership in a subgroup implies
/// membership in every ancestor under hierarchical matching.
class GroupName {
  public:
    GroupName() = default;

    /// Throws MalformedPath on anything but "/" + non-empty segments.
    static GroupName parse(const std::string& text);

    const std::vector<std::string>& segments() const { return segments_; }
    std::string str() const;

    /// True when this group's segments are a prefix of `member`'s.
    bool is_ancestor_or_self_of(const GroupName& member) const;

    bool operator==(const GroupName&) const = default;

  private:
    std::vector<std::string> segments_;
};

struct ResourceRequest {
    std::string operation;
    AbsolutePath path;
};

enum class PolicyMode { CapabilityOnly, GroupOnly, Either };
enum class GroupMatching { Exact, Hierarchical };

std::string to_string(PolicyMode m);
std::string to_string(GroupMatching m);
PolicyMode parse_policy_mode(const std::string& s);
GroupMatching parse_group_matching(const std::string& s);

struct GroupRule {
    std::string operation;
    AbsolutePath path_prefix;
    GroupName required_group;
};

struct AuthzPolicy {
    PolicyMode mode = PolicyMode::Either;
    std::vector<GroupRule> group_rules;
    GroupMatching group_matching = GroupMatching::Hierarchical;
};

/// Allow/deny plus the matched rule and the complete evaluation trace.
struct AuthzDecision {
    bool allowed = false;
    std::optional<std::string> matched_rule;
    std::vector<std::string> trace;

    static AuthzDecision deny(std::string reason);
};

/// Marker placed in the trace when GroupOnly evaluation finds no
/// applicable rule.
inline constexpr const char* kNoApplicableRule = "NoApplicableRule";

/// Splits on single spaces and parses each entry as operation[":"path].
/// Order and duplicates are preserved. Throws MalformedScopeEntry.
std::vector<Capability> parse_scope(const std::string& scope_claim);

/// Operation identifier grammar: [a-z0-9_]+(\.[a-z0-9_]+)*
bool valid_operation(const std::string& op);

AuthzDecision authorize_capability(const std::vector<Capability>& caps, const ResourceRequest& req);

AuthzDecision authorize_groups(const std::vector<GroupName>& member_of, const GroupName& required,
                               GroupMatching matching);

/// Policy-level decision over an already signature- and claim-validated
/// token. A token carrying neither scope nor wlcg.groups is always denied.
AuthzDecision authorize(const ClaimSet& claims, const ResourceRequest& req,
                        const AuthzPolicy& policy);

} // namespace wlcg

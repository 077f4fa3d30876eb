#pragma once

#include <map>
#include <string>

namespace wlcg {

/// application/x-www-form-urlencoded codec ("+" means space on decode).
std::string form_encode(const std::map<std::string, std::string>& fields);
std::map<std::string, std::string> form_decode(const std::string& body);

std::string url_encode_component(const std::string& text);

/// Query-string part of a request target; empty when there is none.
std::map<std::string, std::string> parse_query(const std::string& target);

/// Target without its query string.
std::string target_path(const std::string& target);

} // namespace wlcg

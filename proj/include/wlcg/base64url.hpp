#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wlcg {

/// Unpadded base64url per RFC 4648 §5, the JWS segment encoding.
std::string base64url_encode(std::string_view bytes);
std::string base64url_encode(const std::vector<uint8_t>& bytes);

/// Returns nullopt on any character outside the base64url alphabet,
/// on padding characters, or on an impossible length (4n+1).
std::optional<std::string> base64url_decode(std::string_view text);

} // namespace wlcg

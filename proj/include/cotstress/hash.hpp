#pragma once

#include <string>
#include <string_view>

namespace cotstress::hash {

/// Hex-encoded SHA-256 digest. Used for cache keys and scripted lookups.
std::string sha256_hex(std::string_view data);

}  // namespace cotstress::hash

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace cb {

/// SHA-256 as 64 lowercase hex characters.
std::string sha256_hex(std::span<const std::byte> data);
std::string sha256_hex(std::string_view data);

bool is_sha256_hex(std::string_view s);

}  // namespace cb

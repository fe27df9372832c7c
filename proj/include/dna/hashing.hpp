#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dna {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// First 8 bytes of the SHA-256 digest, big-endian. Used to derive seeds from text.
std::uint64_t sha256_u64(std::string_view data);

}  // namespace dna

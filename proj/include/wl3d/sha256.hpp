#pragma once

#include <cstdint>
#include <string>

namespace wl3d {

// FIPS 180-4 SHA-256 of a byte string, returned as lowercase hex. Used to
// digest canonical transcript serializations into comparable fingerprints.
std::string sha256_hex(const std::string& data);

}  // namespace wl3d

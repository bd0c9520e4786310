#pragma once

#include <cstdint>
#include <string>

#include "fedlap/spectral.hpp"

namespace fedlap {

// Binary basis container: magic "FLSB", uint32 endianness tag 0x01020304,
// uint64 n, uint64 r, then U_r row-major as 64-bit floats, then lambda_r.
// A JSON sidecar (<path>.json) carries the sha256 of the payload plus any
// provenance fields handed in by the caller.
void write_basis(const std::string& path, const SpectralBasis& basis,
                 const std::string& config_hash = "", std::uint64_t master_seed = 0);
SpectralBasis read_basis(const std::string& path, bool verify_checksum = true);

}  // namespace fedlap

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fedlap {

// Hex-encoded SHA-256 digest (OpenSSL EVP under the hood).
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(const std::vector<double>& v);
std::string sha256_file(const std::string& path);

}  // namespace fedlap

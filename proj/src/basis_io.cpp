#include "fedlap/basis_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "fedlap/errors.hpp"
#include "fedlap/sha256.hpp"

namespace fedlap {

namespace {
constexpr char kMagic[4] = {'F', 'L', 'S', 'B'};
constexpr std::uint32_t kEndianTag = 0x01020304u;
}  // namespace

void write_basis(const std::string& path, const SpectralBasis& basis,
                 const std::string& config_hash, std::uint64_t master_seed) {
  const std::uint64_t n = static_cast<std::uint64_t>(basis.u.rows());
  const std::uint64_t r = static_cast<std::uint64_t>(basis.lambda.size());
  std::string payload;
  payload.reserve(sizeof(kMagic) + 4 + 16 + (n * r + r) * 8);
  payload.append(kMagic, 4);
  payload.append(reinterpret_cast<const char*>(&kEndianTag), 4);
  payload.append(reinterpret_cast<const char*>(&n), 8);
  payload.append(reinterpret_cast<const char*>(&r), 8);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < r; ++j) {
      const double v = basis.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      payload.append(reinterpret_cast<const char*>(&v), 8);
    }
  for (std::uint64_t j = 0; j < r; ++j) {
    const double v = basis.lambda[static_cast<Eigen::Index>(j)];
    payload.append(reinterpret_cast<const char*>(&v), 8);
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifactError("cannot write " + path);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  nlohmann::json sidecar{{"n", n},
                         {"r", r},
                         {"sha256", sha256_hex(payload)},
                         {"config_hash", config_hash},
                         {"master_seed", master_seed}};
  std::ofstream side(path + ".json");
  side << sidecar.dump(2) << "\n";
}

SpectralBasis read_basis(const std::string& path, bool verify_checksum) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path);
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() < 24 || std::memcmp(payload.data(), kMagic, 4) != 0)
    throw MissingArtifactError(path + ": not a basis container");
  std::uint32_t tag;
  std::memcpy(&tag, payload.data() + 4, 4);
  if (tag != kEndianTag)
    throw MissingArtifactError(path + ": endianness tag mismatch");
  std::uint64_t n, r;
  std::memcpy(&n, payload.data() + 8, 8);
  std::memcpy(&r, payload.data() + 16, 8);
  if (payload.size() != 24 + (n * r + r) * 8)
    throw MissingArtifactError(path + ": truncated basis container");

  if (verify_checksum) {
    std::ifstream side(path + ".json");
    if (side) {
      nlohmann::json sidecar = nlohmann::json::parse(side);
      if (sidecar.value("sha256", "") != sha256_hex(payload))
        throw MissingArtifactError(path + ": checksum mismatch against sidecar");
    }
  }

  SpectralBasis basis;
  basis.u.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  basis.lambda.resize(static_cast<Eigen::Index>(r));
  const char* p = payload.data() + 24;
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < r; ++j) {
      double v;
      std::memcpy(&v, p, 8);
      p += 8;
      basis.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  for (std::uint64_t j = 0; j < r; ++j) {
    double v;
    std::memcpy(&v, p, 8);
    p += 8;
    basis.lambda[static_cast<Eigen::Index>(j)] = v;
  }
  return basis;
}

}  // namespace fedlap

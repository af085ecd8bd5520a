#pragma once

#include <cstdint>
#include <string>

namespace srmtl {

inline constexpr const char* kVersion = "0.1.0";

// Written into every output file so runs can be traced back to their
// configuration.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  int threads = 1;
};

// FNV-1a 64-bit, hex encoded. Used to fingerprint canonical config text.
std::string fnv1a_hex(const std::string& text);

std::string library_versions();  // "srmtl x.y.z, eigen a.b.c"

// '#'-prefixed comment lines; loaders in this project skip them.
std::string csv_provenance_block(const Provenance& p);

}  // namespace srmtl

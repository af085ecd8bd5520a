#include "srmtl/provenance.hpp"

#include <Eigen/Core>
#include <sstream>

namespace srmtl {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::string library_versions() {
  std::ostringstream out;
  out << "srmtl " << kVersion << ", eigen " << EIGEN_WORLD_VERSION << '.'
      << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  return out.str();
}

std::string csv_provenance_block(const Provenance& p) {
  std::ostringstream out;
  out << "# config_hash=" << p.config_hash << '\n';
  out << "# seed=" << p.seed << '\n';
  out << "# threads=" << p.threads << '\n';
  out << "# versions=" << library_versions() << '\n';
  return out.str();
}

}  // namespace srmtl

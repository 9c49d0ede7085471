#pragma once

#include <cstdint>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fourier::bench {

/// FNV-1a over the compact JSON dump; nlohmann orders object keys, so equal
/// configs hash equally regardless of how they were written.
inline std::string config_hash(const nlohmann::json& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : cfg.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// '#'-prefixed provenance lines written above every CSV table.
struct ReportHeader {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> notes;

  void write(std::ostream& os) const {
    os << "# report: " << kind << "\n# config_hash: " << config_hash << "\n# seed: " << seed << "\n";
    for (const auto& [k, v] : notes) os << "# " << k << ": " << v << "\n";
  }
};

/// Doubles print with 17 significant digits; NaN prints as "nan".
inline std::string csv_number(double v) {
  if (v != v) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace fourier::bench

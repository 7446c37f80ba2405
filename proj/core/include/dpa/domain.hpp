#pragma once

#include <cstddef>
#include <cstdint>

namespace dpa {

enum class Domain : std::uint8_t { kSource = 0, kTarget = 1 };

inline constexpr std::size_t index(Domain d) { return static_cast<std::size_t>(d); }
inline constexpr double label(Domain d) { return static_cast<double>(index(d)); }
inline constexpr const char* domain_name(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

}  // namespace dpa

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace pfair {

// 64-bit FNV-1a. Used for graph, parameter and config fingerprints; doubles
// are hashed by bit pattern so any parameter change is visible.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t size);
  Fnv1a& str(std::string_view s);
  Fnv1a& u64(std::uint64_t v);
  Fnv1a& f64(double v);
  Fnv1a& f64s(std::span<const double> values);

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace pfair

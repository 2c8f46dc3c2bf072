#pragma once

#include <cstdint>
#include <string_view>

namespace tokforge {

// splitmix64 finalizer; the mixing function behind all seed derivation.
std::uint64_t mix64(std::uint64_t z);

// FNV-1a over the label bytes, used to turn stream labels into seed material.
std::uint64_t hash_label(std::string_view label);

// Derives a child seed from (root, label, index). Identical inputs give the
// identical seed on every platform.
std::uint64_t child_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);

// Deterministic splitmix64 stream. Gaussians come from Box-Muller on the
// stream's own uniforms, so draws are platform-stable (no std:: distributions).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}
  RngStream(std::uint64_t root, std::string_view label, std::uint64_t index = 0)
      : state_(child_seed(root, label, index)) {}

  std::uint64_t next_u64();
  double uniform();            // [0, 1)
  double uniform(double lo, double hi);
  double gaussian();           // standard normal
  std::uint64_t next_below(std::uint64_t n);  // [0, n), n >= 1

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tokforge

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace arbor {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

// Seeded random stream. The engine is std::mt19937_64 (its output sequence is
// fixed by the standard); the uniform and normal transforms are written out here
// because the std distributions are not reproducible across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Standard normal conditioned on |z| <= bound (rejection).
  double truncated_normal(double bound);

  // Independent child stream; same (parent, id) always gives the same child.
  RngStream derive(std::uint64_t child_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace arbor

#pragma once

#include <cstdint>

namespace mtd {

// Deterministic random stream (xoshiro256++ core, splitmix64 seeding).
// Streams derived via substream() are statistically independent and
// reproducible across platforms; results depend only on the seed path,
// never on thread scheduling.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Derive an independent child stream. Calling with the same tag on an
  // equally-seeded parent yields the same child.
  RandomStream substream(std::uint64_t tag) const;

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // standard Gaussian (Box-Muller)
  int uniform_int(int n);                  // {0, ..., n-1}

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mtd

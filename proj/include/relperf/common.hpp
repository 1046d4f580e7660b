#pragma once
// Shared basics: failure taxonomy and a deterministic RNG.
//
// All randomized procedures in the library draw from Rng (splitmix64) so that
// identical configs + seeds give byte-identical artifacts on every run.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relperf {

// Failure taxonomy, mirrored by CLI exit codes.
struct ValidationError : std::runtime_error {        // exit 2
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {            // exit 3 (non-convergence, contraction refusal)
  using std::runtime_error::runtime_error;
};
struct UnsupportedTransform : std::runtime_error {   // exit 4
  using std::runtime_error::runtime_error;
};

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // uniform integer in [a, b] inclusive
  int uniform_int(int a, int b) {
    return a + static_cast<int>(next_u64() % static_cast<uint64_t>(b - a + 1));
  }
  // +1 or -1
  int sign() { return (next_u64() & 1ull) ? 1 : -1; }

 private:
  uint64_t state_;
};

inline bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace relperf

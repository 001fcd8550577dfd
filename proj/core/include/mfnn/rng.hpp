#pragma once

#include <cstdint>
#include <initializer_list>

namespace mfnn {

// Counter-based splitmix64 stream. All randomness in the project flows
// through this generator so that results are reproducible bit-for-bit
// regardless of how work is scheduled across threads: every logical draw
// site derives its own stream from the master seed plus integer tags.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). Modulo bias is negligible for the n used here.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  // Derives an independent sub-stream seed from a seed and a tag list.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    Rng r(seed);
    for (std::uint64_t t : tags) {
      r.state_ ^= t;
      (void)r.next_u64();
    }
    return r.state_;
  }

 private:
  std::uint64_t state_;
};

// Stream tags for the fixed draw sites.
namespace stream {
inline constexpr std::uint64_t kData = 0x64617461;      // dataset inputs
inline constexpr std::uint64_t kSgd = 0x73676420;       // SGD sample indices
inline constexpr std::uint64_t kInitC = 0x696e6343;     // finite-net C
inline constexpr std::uint64_t kInitW1 = 0x696e6331;    // finite-net W1
inline constexpr std::uint64_t kInitW2 = 0x696e6332;    // finite-net W2
inline constexpr std::uint64_t kInitW3 = 0x696e6333;    // finite-net W3
inline constexpr std::uint64_t kPoolC = 0x706f6c43;     // limit c pool
inline constexpr std::uint64_t kPoolW = 0x706f6c57;     // limit w pool
inline constexpr std::uint64_t kPoolU = 0x706f6c55;     // limit u pool
inline constexpr std::uint64_t kPoolV = 0x706f6c56;     // limit v pool
inline constexpr std::uint64_t kGrid = 0x67726964;      // test grid
}  // namespace stream

}  // namespace mfnn

#pragma once

#include <array>
#include <cstdint>

namespace ddsim {

// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

// Independent stream families derived from one experiment seed.
enum class StreamDomain : std::uint32_t {
  stray_field = 1,
  bath_state = 2,
  dipolar = 3,
  nv_couplings = 4,
  sampler_test = 5,
};

/// Counter-based generator: the output is a pure function of (seed, domain,
/// index, draw number), identical on every platform. Distinct (domain, index)
/// pairs occupy disjoint counter ranges.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, StreamDomain domain, std::uint64_t index);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal, Box-Muller.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

}  // namespace ddsim

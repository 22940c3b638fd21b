#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ddsim/linalg.hpp"

namespace ddsim {

/// Classical stray field with components uniform on [-b_c, b_c], redrawn every tau_c.
struct StrayFieldConfig {
  double b_c = 1.0;
  double tau_c = std::numeric_limits<double>::infinity();  // infinite: quasi-static
  int realizations = 20;
  std::uint64_t seed = 1;

  void validate() const;
  bool quasi_static() const { return tau_c == std::numeric_limits<double>::infinity(); }
};

struct NoiseSegment {
  double start = 0.0;
  double end = 0.0;
  Vec3 b = Vec3::Zero();
};

// A piece of a delay spent inside one noise segment.
struct NoisePiece {
  double duration = 0.0;
  Vec3 b = Vec3::Zero();
};

struct NoiseRealization {
  std::vector<NoiseSegment> segments;  // contiguous, covering [0, horizon]
  std::uint64_t seed = 0;
  std::uint64_t index = 0;

  double horizon() const { return segments.empty() ? 0.0 : segments.back().end; }
  // Splits [t0, t0 + duration] at segment boundaries.
  std::vector<NoisePiece> pieces(double t0, double duration) const;
};

// Segment n covers [n tau_c, (n+1) tau_c) clipped to T; the field of segment n is the
// n-th triple of the (seed, index) stream, so longer horizons extend shorter ones.
NoiseRealization sample_realization(const StrayFieldConfig& cfg, std::uint64_t index, double T);

// A realization with one fixed field, for oracles and static-noise experiments.
NoiseRealization static_realization(const Vec3& b, double T);

struct NoiseMoments {
  Vec3 mean = Vec3::Zero();
  Vec3 variance = Vec3::Zero();
};

NoiseMoments empirical_moments(const StrayFieldConfig& cfg, std::size_t n_samples);

}  // namespace ddsim

#include "ddsim/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ddsim/rng.hpp"

namespace ddsim {

void StrayFieldConfig::validate() const {
  if (!(b_c > 0.0) || !std::isfinite(b_c)) throw std::invalid_argument("noise: b_c must be positive and finite");
  if (!(tau_c > 0.0)) throw std::invalid_argument("noise: tau_c must be positive or inf");
  if (realizations < 1) throw std::invalid_argument("noise: need at least one realization");
}

std::vector<NoisePiece> NoiseRealization::pieces(double t0, double duration) const {
  const double t1 = t0 + duration;
  // boundary noise from repeated summation of delays
  const double slack = 1e-9 * std::max(1.0, std::abs(t1));
  if (segments.empty() || t1 > horizon() + slack)
    throw std::out_of_range("noise realization ends at t = " + std::to_string(horizon()) +
                            " before the sequence (t = " + std::to_string(t1) + ")");
  std::vector<NoisePiece> out;
  if (duration == 0.0) return out;
  // first segment whose end lies beyond t0
  std::size_t lo = 0, hi = segments.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (segments[mid].end <= t0) lo = mid + 1;
    else hi = mid;
  }
  double t = t0;
  for (std::size_t k = lo; k < segments.size() && t < t1; ++k) {
    const double stop = (k + 1 == segments.size()) ? t1 : std::min(t1, segments[k].end);
    if (stop > t) out.push_back({stop - t, segments[k].b});
    t = stop;
  }
  return out;
}

NoiseRealization sample_realization(const StrayFieldConfig& cfg, std::uint64_t index, double T) {
  cfg.validate();
  if (index >= static_cast<std::uint64_t>(cfg.realizations))
    throw std::out_of_range("sample_realization: index " + std::to_string(index) + " >= realization count");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("sample_realization: horizon must be positive");

  NoiseRealization r;
  r.seed = cfg.seed;
  r.index = index;
  CounterRng rng(cfg.seed, StreamDomain::stray_field, index);
  auto draw = [&] {
    Vec3 b;
    for (int a = 0; a < 3; ++a) b[a] = rng.uniform(-cfg.b_c, cfg.b_c);
    return b;
  };
  if (cfg.quasi_static()) {
    r.segments.push_back({0.0, T, draw()});
    return r;
  }
  const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil(T / cfg.tau_c * (1.0 - 1e-12))));
  r.segments.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double start = static_cast<double>(n) * cfg.tau_c;
    const double end = (n + 1 == count) ? T : static_cast<double>(n + 1) * cfg.tau_c;
    r.segments.push_back({start, end, draw()});
  }
  return r;
}

NoiseRealization static_realization(const Vec3& b, double T) {
  NoiseRealization r;
  r.segments.push_back({0.0, T, b});
  return r;
}

NoiseMoments empirical_moments(const StrayFieldConfig& cfg, std::size_t n_samples) {
  cfg.validate();
  if (n_samples == 0) throw std::invalid_argument("empirical_moments: need at least one sample");
  CounterRng rng(cfg.seed, StreamDomain::sampler_test, 0);
  Vec3 sum = Vec3::Zero(), sq = Vec3::Zero();
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (int a = 0; a < 3; ++a) {
      const double v = rng.uniform(-cfg.b_c, cfg.b_c);
      sum[a] += v;
      sq[a] += v * v;
    }
  }
  NoiseMoments m;
  const double n = static_cast<double>(n_samples);
  m.mean = sum / n;
  m.variance = sq / n - m.mean.cwiseProduct(m.mean);
  return m;
}

}  // namespace ddsim

#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace spatpomp {

/// What a stream is used for. Folded into the stream key so that, e.g., the
/// process noise and the resampling uniforms of the same particle never share
/// draws.
enum class Channel : std::uint64_t {
  Init = 1,
  Process = 2,
  Measure = 3,
  Resample = 4,
  Guide = 5,
  Perturb = 6,
  Noise = 7,
  Select = 8,
  Design = 9,
};

/// Coordinates of a random stream. Identical (seed, StreamId) pairs always
/// produce identical draw sequences.
struct StreamId {
  std::uint64_t replicate = 0;
  std::uint64_t particle = 0;
  std::uint64_t time = 0;
  Channel channel = Channel::Process;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// Keyed xoshiro256++ generator. The key is hashed from the seed and the
/// stream coordinates, so any (replicate, particle, time) can be regenerated
/// independently of the order in which work is scheduled.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, const StreamId& id) {
    std::uint64_t h = seed ^ 0x5851f42d4c957f2dULL;
    const std::uint64_t coords[] = {id.replicate, id.particle, id.time,
                                    static_cast<std::uint64_t>(id.channel)};
    std::uint64_t mix = detail::splitmix64(h);
    for (std::uint64_t c : coords) {
      std::uint64_t s = mix ^ (c * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
      mix = detail::splitmix64(s);
    }
    for (auto& word : state_) word = detail::splitmix64(mix);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(*this); }
  double normal(double mean, double sd) { return mean + sd * normal_(*this); }

 private:
  std::uint64_t state_[4]{};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Base key handed to every stochastic routine: a seed plus the replicate
/// index. Routines derive per-particle, per-time streams from it.
struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;

  RngStream stream(std::uint64_t particle, std::uint64_t time, Channel channel) const {
    return RngStream(seed, StreamId{replicate, particle, time, channel});
  }
  RngKey with_replicate(std::uint64_t r) const { return RngKey{seed, r}; }
  /// Independent key for a sub-task (e.g. one search iteration).
  RngKey child(std::uint64_t index) const {
    std::uint64_t h = seed ^ (index * 0x9fb21c651e98df25ULL + 0x632be59bd9b4e019ULL);
    detail::splitmix64(h);
    return RngKey{detail::splitmix64(h), replicate};
  }
};

}  // namespace spatpomp

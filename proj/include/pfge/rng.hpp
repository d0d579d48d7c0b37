#pragma once

#include <cstdint>

namespace pfge {

/// Purpose-specific generator streams. Each consumer of randomness draws from
/// its own stream so that, e.g., changing the curve-sampling code never shifts
/// the mini-batch order.
enum class RngStream : std::uint64_t {
    init = 1,
    shuffle = 2,
    curve_t = 3,
    data_train = 4,
    data_test = 5,
    pair_select = 6,
    pretrain_shuffle = 7,
    curve_shuffle = 8,
};

/// SplitMix64 (Steele, Lea & Flood 2014). Small enough to port verbatim, which
/// is the point: all derived sequences (uniforms, normals, shuffles) are
/// defined below in terms of `next_u64` only, never via <random>
/// distributions whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t state) noexcept : state_(state) {}

    /// Seeds a stream by mixing the user seed with the stream id.
    static Rng for_stream(std::uint64_t seed, RngStream stream) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via the Box-Muller transform; one draw per call,
    /// the sine branch is discarded.
    double normal() noexcept;

    /// Uniform integer in [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    std::uint64_t state_;
};

}  // namespace pfge

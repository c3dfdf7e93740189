#pragma once

#include <cstdint>
#include <random>

namespace mehler {

/// Deterministic random stream identified by (seed, stream id).
///
/// Children obtained with split() are themselves deterministic functions of
/// the parent's identity and the child index, so a parallel partition of work
/// reproduces the serial result regardless of scheduling.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

    [[nodiscard]] RandomStream split(std::uint64_t index) const;

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Unit-mean exponential, strictly positive.
    double exponential();

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mehler

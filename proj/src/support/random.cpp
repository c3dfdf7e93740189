#include "mehler/support/random.hpp"

#include <cmath>

namespace mehler {

namespace {

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

RandomStream RandomStream::split(std::uint64_t index) const {
    return RandomStream(seed_, mix(stream_ ^ mix(index + 1)));
}

double RandomStream::uniform() {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double u = 0.0;
    do {
        u = dist(engine_);
    } while (u <= 0.0);
    return u;
}

double RandomStream::normal() { return normal_(engine_); }

double RandomStream::exponential() { return -std::log(uniform()); }

}  // namespace mehler

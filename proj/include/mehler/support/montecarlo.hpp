#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mehler/support/errors.hpp"
#include "mehler/support/numeric.hpp"
#include "mehler/support/parallel.hpp"
#include "mehler/support/random.hpp"

namespace mehler {

/// Mean and standard error of draw(stream) over n draws. Draws are grouped in
/// fixed batches, each on RandomStream(seed, tag).split(batch), so the result
/// does not depend on the worker count.
template <class Draw>
Estimate monte_carlo_mean(std::size_t n, std::uint64_t seed, std::uint64_t tag, Draw&& draw,
                          std::size_t batch = 4096) {
    require(n >= 2, "Monte Carlo needs at least two samples");
    const std::size_t batches = (n + batch - 1) / batch;
    struct Moments {
        double sum = 0.0, sum_sq = 0.0;
    };
    const auto parts = parallel_map(batches, [&](std::size_t b) {
        RandomStream stream = RandomStream(seed, tag).split(b);
        Moments m;
        const std::size_t end = std::min(n, (b + 1) * batch);
        for (std::size_t i = b * batch; i < end; ++i) {
            const double v = draw(stream);
            m.sum += v;
            m.sum_sq += v * v;
        }
        return m;
    });
    std::vector<double> sums, squares;
    for (const auto& m : parts) {
        sums.push_back(m.sum);
        squares.push_back(m.sum_sq);
    }
    const double nn = static_cast<double>(n);
    const double mean = pairwise_sum(sums) / nn;
    const double var = std::max(0.0, pairwise_sum(squares) / nn - mean * mean) * nn / (nn - 1.0);
    return {mean, std::sqrt(var / nn)};
}

}  // namespace mehler

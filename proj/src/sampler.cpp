#include "tabgraph/sampler.hpp"

#include "tabgraph/errors.hpp"

#include <algorithm>

namespace tabgraph {

SampleDistribution balanced_distribution(const AdjacencyMatrix& adj) {
    const std::size_t v = adj.size();
    SampleDistribution dist{v, std::vector<double>(v * v, 0.0)};
    for (std::size_t i = 0; i < v; ++i) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < v; ++j) ones += adj(i, j) ? 1 : 0;
        const std::size_t zeros = v - ones;
        const double one_mass = zeros == 0 ? 1.0 : (ones == 0 ? 0.0 : 0.5);
        const double zero_mass = ones == 0 ? 1.0 : (zeros == 0 ? 0.0 : 0.5);
        for (std::size_t j = 0; j < v; ++j)
            dist.p[i * v + j] = adj(i, j) ? one_mass / static_cast<double>(ones)
                                          : zero_mass / static_cast<double>(zeros);
    }
    return dist;
}

SampleMatrix draw(const SampleDistribution& dist, std::size_t s, Rng& rng) {
    if (s == 0) throw ConfigError("draw: samples per vertex must be >= 1");
    const std::size_t v = dist.v;
    SampleMatrix out{v, s, std::vector<std::size_t>(v * s)};
    std::vector<double> cumulative(v);
    for (std::size_t i = 0; i < v; ++i) {
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t j = 0; j < v; ++j) {
            acc += dist(i, j);
            cumulative[j] = acc;
            if (dist(i, j) > 0.0) last_positive = j;
        }
        for (std::size_t m = 0; m < s; ++m) {
            // Scale by the row total so rounding in the running sum cannot
            // leave u beyond the last bucket.
            const double u = uniform01(rng) * acc;
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
            std::size_t j = static_cast<std::size_t>(it - cumulative.begin());
            out.indices[i * s + m] = std::min(j, last_positive);
        }
    }
    return out;
}

SampleMatrix full_pairing(std::size_t v) {
    SampleMatrix out{v, v, std::vector<std::size_t>(v * v)};
    for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = 0; j < v; ++j) out.indices[i * v + j] = j;
    return out;
}

} // namespace tabgraph

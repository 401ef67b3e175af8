#pragma once

#include "tabgraph/graph.hpp"
#include "tabgraph/rng.hpp"

#include <cstddef>
#include <vector>

namespace tabgraph {

/// v×t partner indices: row i lists the vertices paired with vertex i.
struct SampleMatrix {
    std::size_t v = 0;
    std::size_t t = 0;
    std::vector<std::size_t> indices; // row-major, v*t entries, each < v

    std::size_t operator()(std::size_t i, std::size_t m) const { return indices[i * t + m]; }

    friend bool operator==(const SampleMatrix&, const SampleMatrix&) = default;
};

/// Row-stochastic v×v matrix of pairing probabilities.
struct SampleDistribution {
    std::size_t v = 0;
    std::vector<double> p; // row-major

    double operator()(std::size_t i, std::size_t j) const { return p[i * v + j]; }
};

/// Class-balanced pairing distribution: per row, half the mass is spread
/// uniformly over adjacent vertices and half over non-adjacent ones. A row
/// with no non-adjacent vertex puts all its mass on the adjacent ones.
SampleDistribution balanced_distribution(const AdjacencyMatrix& adj);

/// `s` independent draws (with replacement) from each row of `dist`.
SampleMatrix draw(const SampleDistribution& dist, std::size_t s, Rng& rng);

/// Every vertex paired with every vertex: row i = [0, 1, ..., v-1].
SampleMatrix full_pairing(std::size_t v);

} // namespace tabgraph

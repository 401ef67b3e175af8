#include "tabgraph/errors.hpp"
#include "tabgraph/sampler.hpp"

#include "oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <numeric>

using namespace tabgraph;

namespace {

AdjacencyMatrix symmetric_with_row0(std::initializer_list<int> row0) {
    const std::size_t v = row0.size();
    auto m = AdjacencyMatrix::identity(v);
    std::size_t j = 0;
    for (int b : row0) {
        if (b) m.set_symmetric(0, j, true);
        ++j;
    }
    return m;
}

} // namespace

// Expected values evaluate P = 0.5(1-A)/rowsum(1-A) + 0.5A/rowsum(A) by hand.
TEST(BalancedDistribution, HandEvaluatedRows) {
    const auto half = balanced_distribution(symmetric_with_row0({1, 1, 0, 0}));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(half(0, j), 0.25);

    const auto lone = balanced_distribution(AdjacencyMatrix::identity(4));
    EXPECT_DOUBLE_EQ(lone(0, 0), 0.5);
    for (std::size_t j = 1; j < 4; ++j) EXPECT_DOUBLE_EQ(lone(0, j), 1.0 / 6.0);

    AdjacencyMatrix full(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) full.set(i, j, true);
    const auto fallback = balanced_distribution(full);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(fallback(2, j), 0.25);
}

TEST(BalancedDistribution, RowsAreStochastic) {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const auto v = static_cast<std::size_t>(uniform_int(rng, 1, 64));
        const auto a = testing_oracles::random_symmetric_reflexive(v, uniform01(rng), rng);
        const auto p = balanced_distribution(a);
        for (std::size_t i = 0; i < v; ++i) {
            double s = 0.0, ones = 0.0;
            for (std::size_t j = 0; j < v; ++j) {
                ASSERT_GE(p(i, j), 0.0);
                s += p(i, j);
                if (a(i, j)) ones += p(i, j);
            }
            ASSERT_NEAR(s, 1.0, 1e-9);
            bool row_has_zero = false;
            for (std::size_t j = 0; j < v; ++j) row_has_zero = row_has_zero || !a(i, j);
            ASSERT_NEAR(ones, row_has_zero ? 0.5 : 1.0, 1e-12);
        }
    }
}

TEST(Draw, DeterministicRow) {
    SampleDistribution d{3, {0, 1, 0, 0, 0, 1, 1, 0, 0}};
    Rng rng(1);
    const auto s = draw(d, 7, rng);
    ASSERT_EQ(s.t, 7U);
    for (std::size_t m = 0; m < 7; ++m) {
        EXPECT_EQ(s(0, m), 1U);
        EXPECT_EQ(s(1, m), 2U);
        EXPECT_EQ(s(2, m), 0U);
    }
}

TEST(Draw, RejectsZeroSamples) {
    SampleDistribution d{1, {1.0}};
    Rng rng(1);
    EXPECT_THROW(draw(d, 0, rng), ConfigError);
}

TEST(Draw, UniformRowFrequencies) {
    const auto p = balanced_distribution(symmetric_with_row0({1, 1, 0, 0}));
    Rng rng(123);
    const auto s = draw(p, 100000, rng);
    std::array<double, 4> freq{};
    for (std::size_t m = 0; m < s.t; ++m) freq[s(0, m)] += 1.0;
    double chi2 = 0.0;
    for (double f : freq) {
        EXPECT_NEAR(f / 100000.0, 0.25, 0.01);
        chi2 += (f - 25000.0) * (f - 25000.0) / 25000.0;
    }
    const boost::math::chi_squared dist(3);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01);
}

TEST(Draw, ClassMassOfLoneVertex) {
    const auto p = balanced_distribution(AdjacencyMatrix::identity(4));
    Rng rng(321);
    const auto s = draw(p, 100000, rng);
    double self = 0.0;
    for (std::size_t m = 0; m < s.t; ++m) self += s(0, m) == 0 ? 1.0 : 0.0;
    EXPECT_NEAR(self / 100000.0, 0.5, 0.01);
}

TEST(Draw, ReproducibleUnderSeed) {
    Rng g(5);
    const auto a = testing_oracles::random_symmetric_reflexive(20, 0.3, g);
    const auto p = balanced_distribution(a);
    Rng r1(77), r2(77), r3(78);
    EXPECT_EQ(draw(p, 10, r1), draw(p, 10, r2));
    EXPECT_NE(draw(p, 10, r1), draw(p, 10, r3));
}

TEST(FullPairing, Contract) {
    const auto s = full_pairing(3);
    EXPECT_EQ(s.v, 3U);
    EXPECT_EQ(s.t, 3U);
    EXPECT_EQ(s.indices, (std::vector<std::size_t>{0, 1, 2, 0, 1, 2, 0, 1, 2}));
    EXPECT_EQ(full_pairing(1).indices, (std::vector<std::size_t>{0}));
    EXPECT_EQ(full_pairing(5).indices.size(), 25U);
}

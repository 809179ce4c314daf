#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gamelearn/game.hpp"

using namespace gamelearn;

namespace {

GameSpec one_edge_game(double beta, std::size_t r_true = 1) {
    GameSpec g;
    g.n = 2;
    g.d = 1;
    g.r_true = r_true;
    g.neighbors = {{1}, {}};
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r_true));
    v[0] = beta;
    g.head = {{v}, {}};
    g.tails = {{Tail::zero()}, {}};
    return g;
}

}  // namespace

TEST(Game, EmptyNeighborhoodGivesZeroUtility) {
    const auto g = one_edge_game(2.0);
    const auto b = BasisSet::fourier(1);
    EXPECT_EQ(true_utility(g, b, 1, std::vector<double>{0.3, 0.7}, 4), 0.0);
}

TEST(Game, SingleCoefficientTimesBasisValue) {
    // cos(2 pi x_i) cos(2 pi x_j) at x_i = 0, x_j = 1/6 is 0.5
    const auto g = one_edge_game(2.0);
    const auto b = BasisSet::fourier(1);
    EXPECT_NEAR(true_utility(g, b, 0, std::vector<double>{0.0, 1.0 / 6.0}, 4), 1.0, 1e-14);
}

TEST(Game, TwoEdgeUtilityMatchesDoubleSum) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(3, 2, 4, 17, 0.5, Tail::zero());
    const std::vector<double> x{0.21, 0.64, 0.93};
    for (std::size_t i = 0; i < 3; ++i) {
        double want = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            if (j == i) continue;
            const auto s = g.slot_of(i, j);
            ASSERT_GE(s, 0);
            for (std::size_t k = 1; k <= 4; ++k) want += g.head[i][static_cast<std::size_t>(s)][static_cast<Eigen::Index>(k - 1)] * b.eval(k, x[i], x[j]);
        }
        EXPECT_NEAR(true_utility(g, b, i, x, 4), want, 1e-13);
    }
}

TEST(Game, TwoPlayersForcesBothEdges) {
    const auto g = generate_game(2, 1, 4, 1, 0.5, Tail::zero());
    EXPECT_EQ(g.neighbors[0], std::vector<std::size_t>{1});
    EXPECT_EQ(g.neighbors[1], std::vector<std::size_t>{0});
}

TEST(Game, GenerationIsDeterministic) {
    const auto a = generate_game(10, 2, 4, 99, 0.5, Tail::zero());
    const auto c = generate_game(10, 2, 4, 99, 0.5, Tail::zero());
    EXPECT_EQ(to_json(a), to_json(c));
    EXPECT_NE(to_json(a), to_json(generate_game(10, 2, 4, 100, 0.5, Tail::zero())));
}

TEST(Game, MinimumWeightHoldsByScan) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = generate_game(10, 2, 4, seed, 0.5, Tail::zero());
        for (const auto& per : g.head)
            for (const auto& v : per)
                for (Eigen::Index k = 0; k < v.size(); ++k) {
                    EXPECT_GE(std::abs(v[k]), 0.5);
                    EXPECT_LE(std::abs(v[k]), 1.0);
                }
    }
}

TEST(Game, SupportMatchesEdgeSetAndDegreeBound) {
    const auto g = generate_game(12, 3, 4, 5, 0.5, Tail::zero());
    g.validate();
    for (std::size_t i = 0; i < g.n; ++i) {
        EXPECT_LE(g.neighbors[i].size(), g.d);
        for (std::size_t j = 0; j < g.n; ++j) {
            if (j == i) continue;
            for (std::size_t k = 1; k <= 4; ++k) {
                if (g.has_edge(j, i))
                    EXPECT_NE(g.coefficient(i, j, k), 0.0);
                else
                    EXPECT_EQ(g.coefficient(i, j, k), 0.0);
            }
        }
    }
}

TEST(Game, InvalidArgumentsThrow) {
    EXPECT_THROW(generate_game(3, 3, 4, 0, 0.5, Tail::zero()), ArgumentError);
    EXPECT_THROW(generate_game(3, 0, 4, 0, 0.5, Tail::zero()), ArgumentError);
    EXPECT_THROW(generate_game(3, 1, 4, 0, 0.0, Tail::zero()), ArgumentError);
    EXPECT_THROW(Tail::power_law(1.0, 1.5), ArgumentError);
}

TEST(Game, PowerLawTailCoefficientsAlternate) {
    const auto t = Tail::power_law(2.0, 2.0);
    EXPECT_DOUBLE_EQ(t.coefficient(1), -2.0);
    EXPECT_DOUBLE_EQ(t.coefficient(2), 0.5);
    EXPECT_DOUBLE_EQ(t.coefficient(3), -2.0 / 9.0);
}

TEST(Game, TailSumBoundsTheSeries) {
    const auto t = Tail::power_law(1.0, 2.0);
    // sum_{k>4} 1/k^2 = pi^2/6 - (1 + 1/4 + 1/9 + 1/16)
    const double exact = std::numbers::pi * std::numbers::pi / 6.0 - (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0);
    const double bound = t.abs_sum_after(4);
    EXPECT_GE(bound, exact);
    EXPECT_LT(bound - exact, 1e-9);
}

// Pointwise differences oscillate with the alternating tail, so convergence is
// checked against the tail-mass envelope, which itself decreases strictly.
TEST(Game, TruncationConvergesUnderDecreasingEnvelope) {
    const auto b = BasisSet::fourier(1);
    const auto tail = Tail::power_law(1.0, 2.0);
    const auto g = generate_game(3, 2, 4, 8, 0.5, tail);
    const std::vector<double> x{0.17, 0.52, 0.81};
    double prev_env = INFINITY, last = INFINITY;
    for (std::size_t T = 4; T <= 1024; T *= 2) {
        const double diff = std::abs(true_utility(g, b, 0, x, 2 * T) - true_utility(g, b, 0, x, T));
        // two edges, each contributing at most its tail mass past T
        const double env = 2.0 * tail.abs_sum_after(T);
        EXPECT_LE(diff, env);
        EXPECT_LT(env, prev_env);
        prev_env = env;
        last = diff;
    }
    EXPECT_LT(last, 1e-2);
}

TEST(Game, TailBoundUsesHeadAndTail) {
    const auto g = generate_game(3, 1, 16, 2, 0.5, Tail::power_law(1.0, 3.0));
    // basis of 4: delta counts head terms 5..16 plus the tail after 16
    for (std::size_t i = 0; i < 3; ++i) {
        double head = 0.0;
        for (Eigen::Index k = 4; k < 16; ++k) head += std::abs(g.head[i][0][k]);
        EXPECT_NEAR(g.tail_bound(i, 4), head + Tail::power_law(1.0, 3.0).abs_sum_after(16), 1e-12);
    }
}

TEST(Game, JsonRoundTrip) {
    const auto g = generate_game(6, 2, 4, 42, 0.3, Tail::power_law(0.5, 2.5));
    const auto back = game_from_json(to_json(g));
    EXPECT_EQ(to_json(back), to_json(g));
    EXPECT_EQ(back.neighbors, g.neighbors);
    EXPECT_EQ(parse_tail("powerlaw:0.5:2.5"), Tail::power_law(0.5, 2.5));
    EXPECT_THROW(parse_tail("powerlaw:x"), ArgumentError);
}

TEST(Game, FlatBetaAndNorms) {
    const auto g = generate_game(4, 2, 4, 3, 0.5, Tail::zero());
    for (std::size_t i = 0; i < 4; ++i) {
        const auto beta = g.flat_beta(i, 4);
        double l1 = 0.0;
        for (std::size_t j : g.neighbors[i])
            for (std::size_t k = 1; k <= 4; ++k) {
                EXPECT_EQ(beta[static_cast<Eigen::Index>(flat_index(i, j, k, 4))], g.coefficient(i, j, k));
                l1 += std::abs(g.coefficient(i, j, k));
            }
        EXPECT_NEAR(g.l1_norm(i, 4), l1, 1e-14);
        EXPECT_EQ(g.tail_bound(i, 4), 0.0);
    }
}

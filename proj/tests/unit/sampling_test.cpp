#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "gamelearn/sampling.hpp"

using namespace gamelearn;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("gamelearn_sampling_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST(Sampling, SingleRowShape) {
    const auto x = draw_actions(3, 1, 5);
    EXPECT_EQ(x.rows(), 1);
    EXPECT_EQ(x.cols(), 3);
    for (Eigen::Index c = 0; c < 3; ++c) {
        EXPECT_GE(x(0, c), 0.0);
        EXPECT_LE(x(0, c), 1.0);
    }
}

TEST(Sampling, ActionsAreDeterministicAndUniform) {
    const auto a = draw_actions(4, 10000, 9);
    EXPECT_EQ(a, draw_actions(4, 10000, 9));
    for (Eigen::Index c = 0; c < 4; ++c) EXPECT_NEAR(a.col(c).mean(), 0.5, 0.02);
}

TEST(Sampling, NoiseFamiliesHaveZeroMeanAndBoundedVariance) {
    for (auto fam : {NoiseModel::Family::Gaussian, NoiseModel::Family::UniformBounded,
                     NoiseModel::Family::RademacherScaled}) {
        const NoiseModel nm{0.7, fam};
        Rng rng(123);
        const int M = 100000;
        double sum = 0.0, sq = 0.0;
        for (int s = 0; s < M; ++s) {
            const double v = nm.draw(rng);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / M, var = sq / M - mean * mean;
        EXPECT_NEAR(mean, 0.0, 4.0 * 0.7 / std::sqrt(M)) << family_name(fam);
        EXPECT_LE(var, 0.49 * 1.02) << family_name(fam);
    }
}

TEST(Sampling, NoiselessPayoffEqualsTrueUtility) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(5, 2, 4, 1, 0.5, Tail::power_law(0.3, 2.0));
    const auto s = build_sample_set(g, b, NoiseModel{0.0}, 50, 7, 64);
    for (std::size_t r = 0; r < s.size(); ++r)
        for (std::size_t i = 0; i < 5; ++i)
            EXPECT_EQ(s.payoffs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)), true_utility(g, b, i, s.action(r), 64));
}

TEST(Sampling, EmptyNeighborhoodIsZeroUnderNoise) {
    GameSpec g;
    g.n = 2;
    g.d = 1;
    g.r_true = 4;
    g.neighbors = {{}, {0}};
    g.head = {{}, {Eigen::VectorXd::Ones(4)}};
    g.tails = {{}, {Tail::zero()}};
    Rng rng(1);
    const std::vector<double> x{0.3, 0.4};
    EXPECT_EQ(noisy_payoff(g, BasisSet::fourier(1), NoiseModel{1.0}, 0, x, rng, 4), 0.0);
}

TEST(Sampling, OracleIsUnbiased) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(4, 2, 4, 3, 0.5, Tail::zero());
    const NoiseModel nm{0.5};
    const std::vector<double> x{0.1, 0.45, 0.7, 0.95};
    const double truth = true_utility(g, b, 2, x, 4);
    Rng rng(77);
    const int M = 10000;
    double sum = 0.0, sq = 0.0;
    for (int s = 0; s < M; ++s) {
        const double v = noisy_payoff(g, b, nm, 2, x, rng, 4);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / M, sd = std::sqrt(sq / M - mean * mean);
    EXPECT_LE(std::abs(mean - truth), 3.0 * sd / 100.0);
    EXPECT_LE(std::abs(mean - truth), 4.0 * nm.sigma * b.psi_bar() * g.l1_norm(2, 4) / 100.0);
}

TEST(Sampling, NoiseIsUncorrelatedAcrossRows) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(3, 1, 4, 4, 0.5, Tail::zero());
    const std::size_t N = 10000;
    const auto noisy = build_sample_set(g, b, NoiseModel{1.0}, N, 8);
    const auto clean = build_sample_set(g, b, NoiseModel{0.0}, N, 8);
    ASSERT_EQ(noisy.actions, clean.actions);
    const Eigen::VectorXd e = noisy.payoffs.col(0) - clean.payoffs.col(0);
    const double mean = e.mean();
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s + 1 < N; ++s) num += (e[static_cast<Eigen::Index>(s)] - mean) * (e[static_cast<Eigen::Index>(s + 1)] - mean);
    for (std::size_t s = 0; s < N; ++s) den += (e[static_cast<Eigen::Index>(s)] - mean) * (e[static_cast<Eigen::Index>(s)] - mean);
    EXPECT_LT(std::abs(num / den), 0.05);
}

TEST(Sampling, SampleSetShapeAndDeterminism) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(4, 2, 4, 3, 0.5, Tail::zero());
    const auto a = build_sample_set(g, b, NoiseModel{0.2}, 5, 11);
    EXPECT_EQ(a.payoffs.rows(), 5);
    EXPECT_EQ(a.payoffs.cols(), 4);
    const auto c = build_sample_set(g, b, NoiseModel{0.2}, 5, 11);
    EXPECT_EQ(a.actions, c.actions);
    EXPECT_EQ(a.payoffs, c.payoffs);
}

TEST(Sampling, OneEdgeColumnRecomputedIndependently) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(2, 1, 4, 6, 0.5, Tail::zero());
    const auto s = build_sample_set(g, b, NoiseModel{0.0}, 20, 2);
    for (Eigen::Index r = 0; r < 20; ++r) {
        const double xi = s.actions(r, 0), xj = s.actions(r, 1);
        double want = 0.0;
        for (std::size_t k = 1; k <= 4; ++k) want += g.coefficient(0, 1, k) * b.eval(k, xi, xj);
        EXPECT_NEAR(s.payoffs(r, 0), want, 1e-14);
    }
}

TEST(Sampling, RetainedNoiseExplainsThePayoff) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(4, 2, 4, 3, 0.5, Tail::zero());
    const auto s = build_sample_set(g, b, NoiseModel{0.3}, 30, 4, 0, true);
    ASSERT_TRUE(s.meta.retained);
    const auto clean = build_sample_set(g, b, NoiseModel{0.0}, 30, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& kept = *s.meta.retained;
        const auto beta = g.flat_beta(i, 4);
        for (Eigen::Index r = 0; r < 30; ++r) {
            double extra = 0.0;
            for (std::size_t c = 0; c < kept.coords[i].size(); ++c)
                extra += beta[static_cast<Eigen::Index>(kept.coords[i][c])] * kept.values[i](r, static_cast<Eigen::Index>(c));
            EXPECT_NEAR(s.payoffs(r, static_cast<Eigen::Index>(i)), clean.payoffs(r, static_cast<Eigen::Index>(i)) + extra, 1e-12);
        }
    }
}

TEST(Sampling, DirectoryRoundTrip) {
    const auto b = BasisSet::fourier(1);
    const auto g = generate_game(3, 1, 4, 3, 0.5, Tail::zero());
    const auto s = build_sample_set(g, b, NoiseModel{0.1, NoiseModel::Family::UniformBounded}, 12, 4, 0, true);
    const auto dir = scratch("roundtrip");
    write_sample_set(s, dir);
    const auto back = read_sample_set(dir);
    EXPECT_EQ(back.actions, s.actions);
    EXPECT_EQ(back.payoffs, s.payoffs);
    ASSERT_TRUE(back.meta.noise);
    EXPECT_EQ(*back.meta.noise, *s.meta.noise);
    ASSERT_TRUE(back.meta.retained);
    EXPECT_EQ(back.meta.retained->coords, s.meta.retained->coords);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.meta.retained->values[i], s.meta.retained->values[i]);
}

TEST(Sampling, CsvErrorsCarryLocation) {
    const auto dir = scratch("bad");
    io::write_text(dir / "actions.csv", "player_1,player_2\n0.1,0.2\n0.3,abc\n");
    io::write_text(dir / "payoffs.csv", "u_1,u_2\n1,2\n3,4\n");
    try {
        read_sample_set(dir);
        FAIL() << "expected a DataError";
    } catch (const DataError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_EQ(e.col(), 2u);
    }
    io::write_text(dir / "actions.csv", "player_1,player_2\n0.1,0.2\n0.3\n");
    try {
        read_sample_set(dir);
        FAIL() << "expected a DataError";
    } catch (const DataError& e) {
        EXPECT_EQ(e.row(), 3u);
    }
    io::write_text(dir / "actions.csv", "player_1,player_2\n0.1,\n0.3,0.4\n");
    EXPECT_THROW(read_sample_set(dir), DataError);
}

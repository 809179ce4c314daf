#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "gamelearn/ingest.hpp"

using namespace gamelearn;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("gamelearn_ingest_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(Ingest, FixtureShape) {
    const auto f = generate_fixture(47, 31, 7);
    EXPECT_EQ(f.raw_actions.rows(), 47);
    EXPECT_EQ(f.raw_actions.cols(), 31);
    EXPECT_EQ(f.payoffs.rows(), 47);
    EXPECT_EQ(f.payoffs.cols(), 31);
    EXPECT_EQ(f.truth.n, 31u);
    for (std::size_t i = 0; i < 31; ++i)
        if (i != f.hub) EXPECT_EQ(f.truth.neighbors[i], std::vector<std::size_t>{f.hub});
    EXPECT_TRUE(f.raw_actions.minCoeff() > 0.0);
}

TEST(Ingest, ConstantColumnMapsToHalf) {
    Eigen::MatrixXd raw(4, 2);
    raw << 3, 1, 3, 2, 3, 5, 3, 9;
    for (auto how : {Normalization::MinMaxToUnit, Normalization::ZScoreThenSquash}) {
        const auto x = normalize_columns(raw, how);
        for (Eigen::Index r = 0; r < 4; ++r) EXPECT_EQ(x(r, 0), 0.5);
    }
}

TEST(Ingest, MinMaxMatchesColumnScan) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 400.0);
    Eigen::MatrixXd raw(30, 5);
    for (auto& v : raw.reshaped()) v = u(rng);
    const auto x = normalize_columns(raw, Normalization::MinMaxToUnit);
    for (Eigen::Index c = 0; c < 5; ++c) {
        double lo = raw(0, c), hi = raw(0, c);
        for (Eigen::Index r = 0; r < 30; ++r) {
            lo = std::min(lo, raw(r, c));
            hi = std::max(hi, raw(r, c));
        }
        for (Eigen::Index r = 0; r < 30; ++r) EXPECT_NEAR(x(r, c), (raw(r, c) - lo) / (hi - lo), 1e-15);
        EXPECT_EQ(x.col(c).minCoeff(), 0.0);
        EXPECT_EQ(x.col(c).maxCoeff(), 1.0);
    }
    const auto z = normalize_columns(raw, Normalization::ZScoreThenSquash);
    EXPECT_GT(z.minCoeff(), 0.0);
    EXPECT_LT(z.maxCoeff(), 1.0);
    for (Eigen::Index c = 0; c < 5; ++c) {
        // logistic of a standardized column: sorted order is preserved and the mean z is 0
        for (Eigen::Index r = 1; r < 30; ++r)
            EXPECT_EQ(raw(r, c) > raw(0, c), z(r, c) > z(0, c));
    }
}

TEST(Ingest, FixtureNormalizesBackToGeneratingActions) {
    const auto f = generate_fixture(20, 5, 3);
    const auto dir = scratch("fixture");
    write_fixture(f, dir);
    const auto s = load_table(dir / "actions.csv", dir / "payoffs.csv");
    EXPECT_EQ(s.meta.normalization, "minmax");
    const auto basis = BasisSet::fourier(2);
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t i = 0; i < 5; ++i)
            EXPECT_NEAR(true_utility(f.truth, basis, i, s.action(r), 16),
                        s.payoffs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)), 1e-9);
}

TEST(Ingest, TableRoundTrip) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SampleSet s;
    s.actions.resize(12, 3);
    s.payoffs.resize(12, 3);
    for (auto& v : s.actions.reshaped()) v = u(rng);
    for (auto& v : s.payoffs.reshaped()) v = 10.0 * u(rng) - 5.0;
    s.actions(0, 0) = 0.0;
    s.actions(1, 0) = 1.0;
    const auto dir = scratch("roundtrip");
    save_table(s, dir);
    const auto back = load_table(dir / "actions.csv", dir / "payoffs.csv");
    EXPECT_LT((back.payoffs - s.payoffs).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.actions.col(0) - s.actions.col(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ingest, MismatchedTablesReportLocation) {
    const auto dir = scratch("bad");
    io::write_text(dir / "actions.csv", "a,b,c\n1,2,3\n4,5,6\n");
    io::write_text(dir / "payoffs.csv", "a,b\n1,2\n4,5\n");
    try {
        load_table(dir / "actions.csv", dir / "payoffs.csv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.row(), 1u);
        EXPECT_EQ(e.col(), 3u);
    }
    io::write_text(dir / "payoffs.csv", "a,b,c\n1,2,3\n");
    try {
        load_table(dir / "actions.csv", dir / "payoffs.csv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.row(), 3u);
    }
    io::write_text(dir / "payoffs.csv", "a,b,c\n1,2,3\n4,x,6\n");
    try {
        load_table(dir / "actions.csv", dir / "payoffs.csv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_EQ(e.col(), 2u);
    }
    EXPECT_THROW(parse_normalization("rank"), ArgumentError);
}

TEST(Ingest, InfluenceRankingExamples) {
    const auto empty = influence_ranking(assemble_graph({{}, {}, {}}));
    for (std::size_t r = 0; r < 3; ++r) {
        EXPECT_EQ(empty[r].player, r);
        EXPECT_EQ(empty[r].out_degree, 0u);
    }
    // star: player 2 influences everyone else
    const auto star = influence_ranking(assemble_graph({{2}, {2}, {}, {2}}));
    EXPECT_EQ(star[0].player, 2u);
    EXPECT_EQ(star[0].out_degree, 3u);
    const auto j = to_json(star);
    EXPECT_EQ(j[0]["player"], 3);
    EXPECT_EQ(j[0]["rank"], 1);
    EXPECT_NE(render_ranking(star).find("3"), std::string::npos);
}

TEST(Ingest, InfluenceDegreesMatchEdgeCounts) {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.3);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::vector<std::size_t>> s(9);
        std::vector<std::size_t> count(9, 0);
        std::size_t edges = 0;
        for (std::size_t i = 0; i < 9; ++i)
            for (std::size_t j = 0; j < 9; ++j)
                if (j != i && coin(rng)) {
                    s[i].push_back(j);
                    ++count[j];
                    ++edges;
                }
        const auto rank = influence_ranking(assemble_graph(s));
        std::size_t total = 0;
        for (std::size_t k = 0; k < rank.size(); ++k) {
            EXPECT_EQ(rank[k].out_degree, count[rank[k].player]);
            if (k) {
                EXPECT_GE(rank[k - 1].out_degree, rank[k].out_degree);
                if (rank[k - 1].out_degree == rank[k].out_degree) EXPECT_LT(rank[k - 1].player, rank[k].player);
            }
            total += rank[k].out_degree;
        }
        EXPECT_EQ(total, edges);
    }
}

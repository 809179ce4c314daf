#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gamelearn/basis.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/game.hpp"
#include "gamelearn/io.hpp"
#include "gamelearn/recovery.hpp"
#include "gamelearn/rng.hpp"
#include "gamelearn/sampling.hpp"

namespace gamelearn {

enum class Normalization { MinMaxToUnit, ZScoreThenSquash };

inline std::string normalization_name(Normalization n) {
    return n == Normalization::MinMaxToUnit ? "minmax" : "zscore-logistic";
}

inline Normalization parse_normalization(const std::string& s) {
    if (s == "minmax") return Normalization::MinMaxToUnit;
    if (s == "zscore-logistic" || s == "zscore") return Normalization::ZScoreThenSquash;
    throw ArgumentError("unknown normalization '" + s + "' (expected minmax or zscore-logistic)");
}

/// Maps every column into [0,1]. MinMaxToUnit sends the column min to 0 and
/// max to 1; ZScoreThenSquash standardizes and applies the logistic function.
/// Constant columns become 0.5 under both.
inline ActionMatrix normalize_columns(const Eigen::MatrixXd& raw, Normalization how) {
    ActionMatrix out(raw.rows(), raw.cols());
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        const auto col = raw.col(c);
        if (how == Normalization::MinMaxToUnit) {
            const double lo = col.minCoeff(), hi = col.maxCoeff();
            for (Eigen::Index s = 0; s < raw.rows(); ++s) out(s, c) = hi > lo ? (col[s] - lo) / (hi - lo) : 0.5;
        } else {
            const double mean = col.mean();
            const double var = (col.array() - mean).square().sum() / static_cast<double>(raw.rows());
            const double sd = std::sqrt(var);
            for (Eigen::Index s = 0; s < raw.rows(); ++s) {
                const double z = sd > 0.0 ? (col[s] - mean) / sd : 0.0;
                out(s, c) = 1.0 / (1.0 + std::exp(-z));
            }
        }
    }
    return out;
}

/// Reads a numeric CSV pair (rows are observations, columns players) into a
/// SampleSet with normalized actions and unscaled payoffs.
inline SampleSet load_table(const std::filesystem::path& actions_path, const std::filesystem::path& payoffs_path,
                            Normalization how = Normalization::MinMaxToUnit) {
    const auto a = io::read_csv(actions_path);
    const auto u = io::read_csv(payoffs_path);
    if (a.header.size() != u.header.size())
        throw DataError(payoffs_path.filename().string() + " has " + std::to_string(u.header.size())
                            + " player columns but " + actions_path.filename().string() + " has "
                            + std::to_string(a.header.size()),
                        1, std::min(a.header.size(), u.header.size()) + 1);
    if (a.rows.size() != u.rows.size())
        throw DataError(payoffs_path.filename().string() + " has " + std::to_string(u.rows.size())
                            + " data rows but " + actions_path.filename().string() + " has "
                            + std::to_string(a.rows.size()),
                        std::min(a.rows.size(), u.rows.size()) + 2);
    if (a.rows.empty()) throw DataError(actions_path.filename().string() + ": no data rows", 2);
    if (a.header.size() < 2) throw DataError("need at least two player columns", 1);
    const auto N = static_cast<Eigen::Index>(a.rows.size());
    const auto n = static_cast<Eigen::Index>(a.header.size());
    Eigen::MatrixXd raw(N, n);
    SampleSet s;
    s.payoffs.resize(N, n);
    for (Eigen::Index r = 0; r < N; ++r)
        for (Eigen::Index c = 0; c < n; ++c) {
            raw(r, c) = a.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            s.payoffs(r, c) = u.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    s.actions = normalize_columns(raw, how);
    s.meta.normalization = normalization_name(how);
    s.validate();
    return s;
}

/// Writes actions.csv and payoffs.csv in the sampling schema.
inline void save_table(const SampleSet& s, const std::filesystem::path& dir) {
    io::write_text(dir / "actions.csv", actions_csv(s.actions));
    io::write_text(dir / "payoffs.csv", payoffs_csv(s.payoffs));
}

struct InfluenceEntry {
    std::size_t player = 0;  // 0-based
    std::size_t out_degree = 0;
};

/// Players by out-degree, largest first, ties by index.
inline std::vector<InfluenceEntry> influence_ranking(const DirectedGraph& g) {
    const auto deg = g.out_degrees();
    std::vector<InfluenceEntry> out;
    for (std::size_t v = 0; v < g.n; ++v) out.push_back({v, deg[v]});
    std::stable_sort(out.begin(), out.end(),
                     [](const InfluenceEntry& a, const InfluenceEntry& b) { return a.out_degree > b.out_degree; });
    return out;
}

inline nlohmann::json to_json(const std::vector<InfluenceEntry>& ranking) {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t r = 0; r < ranking.size(); ++r)
        j.push_back({{"rank", r + 1}, {"player", ranking[r].player + 1}, {"out_degree", ranking[r].out_degree}});
    return j;
}

inline std::string render_ranking(const std::vector<InfluenceEntry>& ranking) {
    std::string out = "rank  player  out_degree\n";
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        char line[64];
        std::snprintf(line, sizeof line, "%4zu  %6zu  %10zu\n", r + 1, ranking[r].player + 1, ranking[r].out_degree);
        out += line;
    }
    return out;
}

struct Fixture {
    Eigen::MatrixXd raw_actions;  // volumes, rows x cols
    Eigen::MatrixXd payoffs;
    GameSpec truth;
    std::size_t hub = 0;
};

/// Synthetic table from a planted game: a hub player is an in-neighbor of
/// everyone else and every non-hub player has only the hub; the hub itself
/// gets one random in-neighbor. Payoffs are noiseless and use the first
/// `r_true` Fourier terms. Actions are written as positive volumes whose
/// per-column min-max normalization gives back exactly the actions the
/// payoffs were computed from.
inline Fixture generate_fixture(std::size_t rows, std::size_t cols, std::uint64_t seed, std::size_t r_true = 4,
                                double min_weight = 1.0) {
    if (rows < 2 || cols < 3) throw ArgumentError("fixture needs at least 2 rows and 3 columns");
    if (!(min_weight > 0.0)) throw ArgumentError("min_weight must be > 0");
    Rng rng(derive_seed(seed, stream::game));
    std::uniform_int_distribution<std::size_t> pick(0, cols - 1);
    std::uniform_real_distribution<double> mag(min_weight, 2.0 * min_weight);
    std::bernoulli_distribution coin(0.5);

    Fixture f;
    f.hub = pick(rng);
    const auto basis = BasisSet::fourier(2);

    GameSpec& g = f.truth;
    g.n = cols;
    g.d = 1;
    g.r_true = r_true;
    g.seed = seed;
    g.basis = to_json(basis);
    g.neighbors.assign(cols, {});
    g.head.assign(cols, {});
    g.tails.assign(cols, {});
    std::size_t hub_nb = pick(rng);
    while (hub_nb == f.hub) hub_nb = pick(rng);
    for (std::size_t i = 0; i < cols; ++i) {
        g.neighbors[i] = {i == f.hub ? hub_nb : f.hub};
        Eigen::VectorXd b(static_cast<Eigen::Index>(r_true));
        for (auto& v : b) v = (coin(rng) ? 1.0 : -1.0) * mag(rng);
        g.head[i] = {b};
        g.tails[i] = {Tail::zero()};
    }
    g.validate();

    const ActionMatrix x = normalize_columns(draw_actions(cols, rows, derive_seed(seed, stream::actions)),
                                             Normalization::MinMaxToUnit);
    f.payoffs.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t s = 0; s < rows; ++s) {
        std::span<const double> xs(x.data() + s * cols, cols);
        for (std::size_t i = 0; i < cols; ++i)
            f.payoffs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) =
                true_utility(g, basis, i, xs, std::max(basis.r(), r_true));
    }
    std::uniform_real_distribution<double> base(100.0, 1000.0), span(500.0, 5000.0);
    f.raw_actions.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t c = 0; c < cols; ++c) {
        const double lo = base(rng), width = span(rng);
        for (std::size_t s = 0; s < rows; ++s)
            f.raw_actions(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) =
                lo + x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) * width;
    }
    return f;
}

/// actions.csv, payoffs.csv and truth.json (the planted game).
inline void write_fixture(const Fixture& f, const std::filesystem::path& dir) {
    io::write_text(dir / "actions.csv", actions_csv(f.raw_actions));
    io::write_text(dir / "payoffs.csv", payoffs_csv(f.payoffs));
    io::write_json(dir / "truth.json", to_json(f.truth));
}

}  // namespace gamelearn

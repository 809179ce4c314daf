#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/basis.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/game.hpp"
#include "gamelearn/rng.hpp"
#include "gamelearn/solver.hpp"

namespace gamelearn {

/// Directed graph over 0-based players; edge j -> i means j is an in-neighbor
/// of i.
struct DirectedGraph {
    std::size_t n = 0;
    std::vector<std::vector<std::size_t>> in_neighbors;

    std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j : in_neighbors[i]) out.emplace_back(j, i);
        return out;
    }

    std::size_t edge_count() const {
        std::size_t c = 0;
        for (const auto& nb : in_neighbors) c += nb.size();
        return c;
    }

    std::vector<std::size_t> out_degrees() const {
        std::vector<std::size_t> deg(n, 0);
        for (const auto& nb : in_neighbors)
            for (std::size_t j : nb) ++deg[j];
        return deg;
    }

    bool operator==(const DirectedGraph&) const = default;
};

/// S^_i = { j : max_k |beta^_{ijk}| > tau }, ascending.
inline std::vector<std::size_t> extract_support(const Eigen::VectorXd& beta, std::size_t n, std::size_t i,
                                                std::size_t r, double tau) {
    if (!(tau >= 0.0)) throw ArgumentError("support threshold must be >= 0");
    if (static_cast<std::size_t>(beta.size()) != r * (n - 1)) throw ArgumentError("beta length is not r*(n-1)");
    std::vector<std::size_t> support;
    for (std::size_t slot = 0; slot + 1 < n; ++slot) {
        const double peak = beta.segment(static_cast<Eigen::Index>(slot * r), static_cast<Eigen::Index>(r)).cwiseAbs().maxCoeff();
        if (peak > tau) support.push_back(neighbor_of_slot(i, slot * r, r));
    }
    return support;
}

inline std::vector<std::size_t> extract_support(const SolverResult& res, std::size_t n, std::size_t i, std::size_t r,
                                                double tau) {
    return extract_support(res.beta_hat, n, i, r, tau);
}

inline DirectedGraph assemble_graph(const std::vector<std::vector<std::size_t>>& supports) {
    DirectedGraph g;
    g.n = supports.size();
    g.in_neighbors = supports;
    for (std::size_t i = 0; i < g.n; ++i) {
        auto& nb = g.in_neighbors[i];
        std::sort(nb.begin(), nb.end());
        for (std::size_t j : nb)
            if (j >= g.n || j == i) throw ArgumentError("support of player " + std::to_string(i + 1) + " is invalid");
    }
    return g;
}

struct PlayerEstimate {
    Eigen::VectorXd beta_hat;
    std::vector<std::size_t> support;
    std::vector<int> signs;  // per flat coordinate, 0 where |beta^| <= tau
    double lambda = 0.0;
    SolverResult solver;
};

struct RecoveryResult {
    DirectedGraph graph;
    std::vector<PlayerEstimate> per_player;
    double support_threshold = 0.0;
    std::size_t r = 0;
};

inline std::vector<int> support_signs(const Eigen::VectorXd& beta, double tau) {
    std::vector<int> s(static_cast<std::size_t>(beta.size()), 0);
    for (Eigen::Index k = 0; k < beta.size(); ++k)
        if (std::abs(beta[k]) > tau) s[static_cast<std::size_t>(k)] = beta[k] > 0 ? 1 : -1;
    return s;
}

/// sum over the flat index of beta_{jk} psi_k(x_i, x_j).
inline double reconstruct_payoff(const Eigen::VectorXd& beta, const BasisSet& basis, std::size_t i,
                                 std::span<const double> x) {
    const std::size_t n = x.size();
    const std::size_t r = basis.r();
    if (static_cast<std::size_t>(beta.size()) != r * (n - 1)) throw ArgumentError("beta length is not r*(n-1)");
    double u = 0.0;
    for (Eigen::Index pos = 0; pos < beta.size(); ++pos) {
        if (beta[pos] == 0.0) continue;
        const std::size_t j = neighbor_of_slot(i, static_cast<std::size_t>(pos), r);
        const std::size_t k = static_cast<std::size_t>(pos) % r + 1;
        u += beta[pos] * basis.eval(k, x[i], x[j]);
    }
    return u;
}

struct PayoffError {
    double max_abs_err = 0.0;
    double mean_abs_err = 0.0;
};

/// Test points for player i: for every j in `edges`, a grid x grid lattice on
/// (x_i, x_j) in [0,1]^2 with all other actions held at one seeded base
/// point, followed by `random_points` uniform joint actions.
inline ActionMatrix payoff_test_points(std::size_t n, std::size_t i, const std::vector<std::size_t>& edges,
                                       std::uint64_t seed, std::size_t grid = 101, std::size_t random_points = 1000) {
    if (i >= n) throw IndexError("player index out of range");
    Rng rng(derive_seed(seed, stream::test_points, i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> base(n);
    for (auto& v : base) v = unif(rng);
    const std::size_t lattice = grid >= 2 ? grid * grid : 0;
    ActionMatrix pts(static_cast<Eigen::Index>(edges.size() * lattice + random_points), static_cast<Eigen::Index>(n));
    Eigen::Index row = 0;
    for (std::size_t j : edges) {
        if (j >= n || j == i) throw ArgumentError("test-point edge is invalid");
        for (std::size_t a = 0; a < grid && lattice; ++a)
            for (std::size_t b = 0; b < grid; ++b, ++row) {
                for (std::size_t c = 0; c < n; ++c) pts(row, static_cast<Eigen::Index>(c)) = base[c];
                pts(row, static_cast<Eigen::Index>(i)) = static_cast<double>(a) / static_cast<double>(grid - 1);
                pts(row, static_cast<Eigen::Index>(j)) = static_cast<double>(b) / static_cast<double>(grid - 1);
            }
    }
    for (std::size_t s = 0; s < random_points; ++s, ++row)
        for (std::size_t c = 0; c < n; ++c) pts(row, static_cast<Eigen::Index>(c)) = unif(rng);
    return pts;
}

/// sup and mean of |u*_i - u^_i| over the test points. The true payoff is
/// truncated at tail_truncation (0 means the basis r or the game head,
/// whichever is longer).
inline PayoffError payoff_error(const GameSpec& g, const Eigen::VectorXd& beta, const BasisSet& basis, std::size_t i,
                                const ActionMatrix& points, std::size_t tail_truncation = 0) {
    if (static_cast<std::size_t>(points.cols()) != g.n) throw ArgumentError("test points have the wrong width");
    if (tail_truncation == 0) tail_truncation = std::max(basis.r(), g.r_true);
    PayoffError e;
    if (points.rows() == 0) return e;
    double sum = 0.0;
    for (Eigen::Index s = 0; s < points.rows(); ++s) {
        std::span<const double> x(points.data() + s * points.cols(), g.n);
        const double err = std::abs(true_utility(g, basis, i, x, tail_truncation) - reconstruct_payoff(beta, basis, i, x));
        e.max_abs_err = std::max(e.max_abs_err, err);
        sum += err;
    }
    e.mean_abs_err = sum / static_cast<double>(points.rows());
    return e;
}

struct StructureMetrics {
    bool exact_match = false;
    double edge_precision = 1.0;
    double edge_recall = 1.0;
    bool sign_consistency = false;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

/// Compares recovered and true edge sets. Sign consistency asks that every
/// true edge carries the true sign on every retained coefficient with
/// |beta*| >= the game's minimum weight.
inline StructureMetrics structure_metrics(const GameSpec& truth, const RecoveryResult& rec) {
    if (rec.graph.n != truth.n || rec.per_player.size() != truth.n)
        throw ArgumentError("recovered graph and true game disagree on n");
    StructureMetrics m;
    for (std::size_t i = 0; i < truth.n; ++i) {
        const auto& t = truth.neighbors[i];
        const auto& h = rec.graph.in_neighbors[i];
        std::vector<std::size_t> both;
        std::set_intersection(t.begin(), t.end(), h.begin(), h.end(), std::back_inserter(both));
        m.true_positives += both.size();
        m.false_positives += h.size() - both.size();
        m.false_negatives += t.size() - both.size();
    }
    const std::size_t rec_edges = m.true_positives + m.false_positives;
    const std::size_t true_edges = m.true_positives + m.false_negatives;
    m.edge_precision = rec_edges ? static_cast<double>(m.true_positives) / static_cast<double>(rec_edges) : 1.0;
    m.edge_recall = true_edges ? static_cast<double>(m.true_positives) / static_cast<double>(true_edges) : 1.0;
    m.exact_match = m.false_positives == 0 && m.false_negatives == 0;

    const double floor = truth.min_weight();
    const std::size_t kmax = std::min(rec.r, truth.r_true);
    m.sign_consistency = true;
    for (std::size_t i = 0; i < truth.n && m.sign_consistency; ++i) {
        const auto& est = rec.per_player[i];
        for (std::size_t j : truth.neighbors[i])
            for (std::size_t k = 1; k <= kmax; ++k) {
                const double b = truth.coefficient(i, j, k);
                if (std::abs(b) < floor) continue;
                const int want = b > 0 ? 1 : -1;
                if (est.signs.at(flat_index(i, j, k, rec.r)) != want) m.sign_consistency = false;
            }
    }
    return m;
}

/// DOT rendering with 1-based player labels.
inline std::string to_dot(const DirectedGraph& g, const std::string& name = "game") {
    std::ostringstream out;
    out << "digraph " << name << " {\n";
    for (std::size_t v = 0; v < g.n; ++v) out << "  " << v + 1 << ";\n";
    for (auto [j, i] : g.edges()) out << "  " << j + 1 << " -> " << i + 1 << ";\n";
    out << "}\n";
    return out.str();
}

inline nlohmann::json to_json(const DirectedGraph& g) {
    nlohmann::json adj = nlohmann::json::array();
    nlohmann::json edges = nlohmann::json::array();
    for (std::size_t i = 0; i < g.n; ++i) {
        std::vector<std::size_t> nb;
        for (std::size_t j : g.in_neighbors[i]) {
            nb.push_back(j + 1);
            edges.push_back({j + 1, i + 1});
        }
        adj.push_back({{"player", i + 1}, {"in_neighbors", nb}});
    }
    return {{"n", g.n}, {"adjacency", adj}, {"edges", edges}};
}

inline DirectedGraph graph_from_json(const nlohmann::json& j) {
    DirectedGraph g;
    g.n = j.at("n").get<std::size_t>();
    g.in_neighbors.assign(g.n, {});
    for (const auto& e : j.at("edges")) {
        const auto from = e.at(0).get<std::size_t>();
        const auto to = e.at(1).get<std::size_t>();
        if (from < 1 || to < 1 || from > g.n || to > g.n || from == to) throw DataError("invalid edge in graph JSON");
        g.in_neighbors[to - 1].push_back(from - 1);
    }
    for (auto& nb : g.in_neighbors) std::sort(nb.begin(), nb.end());
    return g;
}

inline nlohmann::json to_json(const StructureMetrics& m) {
    return {{"exact_match", m.exact_match},       {"edge_precision", m.edge_precision},
            {"edge_recall", m.edge_recall},       {"sign_consistency", m.sign_consistency},
            {"true_positives", m.true_positives}, {"false_positives", m.false_positives},
            {"false_negatives", m.false_negatives}};
}

}  // namespace gamelearn

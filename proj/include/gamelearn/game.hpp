#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/basis.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/rng.hpp"

namespace gamelearn {

/// Coefficients of one pairwise utility past the explicit head.
/// PowerLaw: beta_k = (-1)^k * coef / k^exponent, absolutely summable for
/// exponent >= 2.
struct Tail {
    enum class Kind { Zero, PowerLaw };

    Kind kind = Kind::Zero;
    double coef = 0.0;
    double exponent = 2.0;

    static Tail zero() { return {}; }

    static Tail power_law(double coef, double exponent) {
        if (!(exponent >= 2.0)) throw ArgumentError("power-law tail needs exponent >= 2");
        if (!std::isfinite(coef) || coef < 0.0) throw ArgumentError("power-law tail needs finite coef >= 0");
        return {Kind::PowerLaw, coef, exponent};
    }

    double coefficient(std::size_t k) const {
        if (kind == Kind::Zero) return 0.0;
        const double mag = coef / std::pow(static_cast<double>(k), exponent);
        return (k % 2 == 0) ? mag : -mag;
    }

    /// Upper bound on sum_{k > after} |beta_k|: exact partial sum over a
    /// finite window plus the integral bound for the remainder.
    double abs_sum_after(std::size_t after) const {
        if (kind == Kind::Zero || coef == 0.0) return 0.0;
        constexpr std::size_t window = 100000;
        double sum = 0.0;
        const std::size_t last = after + window;
        for (std::size_t k = last; k > after; --k) sum += std::pow(static_cast<double>(k), -exponent);
        const double rest = std::pow(static_cast<double>(last), 1.0 - exponent) / (exponent - 1.0);
        return coef * (sum + rest);
    }

    bool operator==(const Tail&) const = default;
};

/// Ground-truth game: in-neighbor sets, head coefficients beta*_{ijk} for
/// k = 1..r_true and a parametric tail past r_true. Players are 0-based here;
/// serialized forms are 1-based.
struct GameSpec {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t r_true = 0;
    double action_budget = 1.0;
    std::uint64_t seed = 0;
    /// Basis the coefficient indices refer to, as basis JSON metadata.
    nlohmann::json basis = {{"kind", "fourier"}, {"order", 1}};
    /// neighbors[i] is sorted ascending and never contains i.
    std::vector<std::vector<std::size_t>> neighbors;
    /// head[i][s] holds the r_true coefficients of edge neighbors[i][s] -> i.
    std::vector<std::vector<Eigen::VectorXd>> head;
    std::vector<std::vector<Tail>> tails;

    /// Position of j in neighbors[i], or -1.
    std::ptrdiff_t slot_of(std::size_t i, std::size_t j) const {
        const auto& nb = neighbors.at(i);
        const auto it = std::lower_bound(nb.begin(), nb.end(), j);
        if (it == nb.end() || *it != j) return -1;
        return it - nb.begin();
    }

    bool has_edge(std::size_t j, std::size_t i) const { return slot_of(i, j) >= 0; }

    /// beta*_{ijk}, k 1-based; zero for non-edges.
    double coefficient(std::size_t i, std::size_t j, std::size_t k) const {
        const auto s = slot_of(i, j);
        if (s < 0) return 0.0;
        if (k >= 1 && k <= r_true) return head[i][static_cast<std::size_t>(s)][static_cast<Eigen::Index>(k - 1)];
        return tails[i][static_cast<std::size_t>(s)].coefficient(k);
    }

    /// True coefficients of player i restricted to the first r basis indices,
    /// in the flat (j, k) layout of feature_vector.
    Eigen::VectorXd flat_beta(std::size_t i, std::size_t r) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r * (n - 1)));
        for (std::size_t j : neighbors.at(i))
            for (std::size_t k = 1; k <= r; ++k)
                out[static_cast<Eigen::Index>(flat_index(i, j, k, r))] = coefficient(i, j, k);
        return out;
    }

    /// Smallest nonzero |beta*| over all head coefficients.
    double min_weight() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& per : head)
            for (const auto& v : per)
                for (Eigen::Index k = 0; k < v.size(); ++k)
                    if (v[k] != 0.0) m = std::min(m, std::abs(v[k]));
        return m;
    }

    /// Smallest nonzero head |beta*| of player i (infinity when S_i is empty).
    double min_weight(std::size_t i) const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& v : head.at(i))
            for (Eigen::Index k = 0; k < v.size(); ++k)
                if (v[k] != 0.0) m = std::min(m, std::abs(v[k]));
        return m;
    }

    /// ||beta*_i||_1 over the first r indices.
    double l1_norm(std::size_t i, std::size_t r) const { return flat_beta(i, r).lpNorm<1>(); }

    /// delta for player i: max over edges of sum_{k > r} |beta*_{ijk}|.
    double tail_bound(std::size_t i, std::size_t r) const {
        double worst = 0.0;
        for (std::size_t s = 0; s < neighbors.at(i).size(); ++s) {
            double sum = 0.0;
            for (std::size_t k = r + 1; k <= r_true; ++k) sum += std::abs(head[i][s][static_cast<Eigen::Index>(k - 1)]);
            sum += tails[i][s].abs_sum_after(std::max(r, r_true));
            worst = std::max(worst, sum);
        }
        return worst;
    }

    std::size_t edge_count() const {
        std::size_t c = 0;
        for (const auto& nb : neighbors) c += nb.size();
        return c;
    }

    void validate() const {
        if (n < 2) throw ArgumentError("a game needs at least two players");
        if (neighbors.size() != n || head.size() != n || tails.size() != n)
            throw ArgumentError("per-player arrays do not match n");
        for (std::size_t i = 0; i < n; ++i) {
            const auto& nb = neighbors[i];
            if (nb.size() > d) throw ArgumentError("player " + std::to_string(i + 1) + " exceeds in-degree bound d");
            if (!std::is_sorted(nb.begin(), nb.end()) || std::adjacent_find(nb.begin(), nb.end()) != nb.end())
                throw ArgumentError("neighbor lists must be sorted and unique");
            if (head[i].size() != nb.size() || tails[i].size() != nb.size())
                throw ArgumentError("coefficient arrays do not match neighbor lists");
            for (std::size_t j : nb) {
                if (j >= n) throw IndexError("neighbor index out of range");
                if (j == i) throw ArgumentError("self loops are not allowed");
            }
            for (const auto& v : head[i])
                if (static_cast<std::size_t>(v.size()) != r_true) throw ArgumentError("head length differs from r_true");
        }
    }
};

/// sum_{j in S_i} sum_{k=1}^{tail_truncation} beta*_{ijk} psi_k(x_i, x_j):
/// the true payoff with the infinite expansion truncated at tail_truncation.
inline double true_utility(const GameSpec& g, const BasisSet& basis, std::size_t i, std::span<const double> x,
                           std::size_t tail_truncation) {
    if (tail_truncation < basis.r()) throw ArgumentError("tail_truncation must be >= basis r");
    if (i >= g.n || x.size() != g.n) throw IndexError("player or action size mismatch");
    double u = 0.0;
    for (std::size_t j : g.neighbors[i])
        for (std::size_t k = 1; k <= tail_truncation; ++k) {
            const double b = g.coefficient(i, j, k);
            if (b != 0.0) u += b * basis.eval_extended(k, x[i], x[j]);
        }
    return u;
}

/// Random game with exactly d in-neighbors per player and head magnitudes
/// uniform on [min_weight, 2*min_weight] with random signs.
inline GameSpec generate_game(std::size_t n, std::size_t d, std::size_t r, std::uint64_t seed, double min_weight,
                              const Tail& tail, const nlohmann::json& basis_meta = nullptr) {
    if (n < 2) throw ArgumentError("need n >= 2");
    if (d < 1 || d >= n) throw ArgumentError("need 1 <= d <= n-1");
    if (r < 1) throw ArgumentError("need r >= 1");
    if (!(min_weight > 0.0)) throw ArgumentError("need min_weight > 0");

    GameSpec g;
    g.n = n;
    g.d = d;
    g.r_true = r;
    g.seed = seed;
    g.basis = basis_meta.is_null() ? nlohmann::json{{"kind", "fourier"}, {"order", fourier_order_for(r)}} : basis_meta;
    g.neighbors.resize(n);
    g.head.resize(n);
    g.tails.resize(n);

    Rng rng(derive_seed(seed, stream::game));
    std::uniform_real_distribution<double> mag(min_weight, 2.0 * min_weight);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < n; ++i) {
        others.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(j);
        // partial Fisher-Yates: the first d entries are a uniform d-subset
        for (std::size_t s = 0; s < d; ++s) {
            std::uniform_int_distribution<std::size_t> pick(s, others.size() - 1);
            std::swap(others[s], others[pick(rng)]);
        }
        g.neighbors[i].assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(d));
        std::sort(g.neighbors[i].begin(), g.neighbors[i].end());
        for (std::size_t s = 0; s < d; ++s) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(r));
            for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = coin(rng) ? mag(rng) : -mag(rng);
            g.head[i].push_back(std::move(v));
            g.tails[i].push_back(tail);
        }
    }
    return g;
}

inline nlohmann::json to_json(const Tail& t) {
    if (t.kind == Tail::Kind::Zero) return {{"kind", "zero"}};
    return {{"kind", "power_law"}, {"coef", t.coef}, {"exponent", t.exponent}};
}

inline Tail tail_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "zero") return Tail::zero();
    if (kind == "power_law") return Tail::power_law(j.at("coef").get<double>(), j.at("exponent").get<double>());
    throw ArgumentError("unknown tail kind '" + kind + "'");
}

/// CLI spelling: "zero" or "powerlaw:COEF:EXPONENT".
inline Tail parse_tail(const std::string& text) {
    if (text == "zero") return Tail::zero();
    const std::string prefix = "powerlaw:";
    if (text.rfind(prefix, 0) == 0) {
        const auto rest = text.substr(prefix.size());
        const auto colon = rest.find(':');
        if (colon != std::string::npos) {
            try {
                return Tail::power_law(std::stod(rest.substr(0, colon)), std::stod(rest.substr(colon + 1)));
            } catch (const std::logic_error&) {
            }
        }
    }
    throw ArgumentError("tail must be 'zero' or 'powerlaw:COEF:EXPONENT', got '" + text + "'");
}

inline nlohmann::json to_json(const GameSpec& g) {
    nlohmann::json players = nlohmann::json::array();
    for (std::size_t i = 0; i < g.n; ++i) {
        nlohmann::json nb = nlohmann::json::array(), coefs = nlohmann::json::array(), tails = nlohmann::json::array();
        for (std::size_t s = 0; s < g.neighbors[i].size(); ++s) {
            nb.push_back(g.neighbors[i][s] + 1);
            coefs.push_back(std::vector<double>(g.head[i][s].data(), g.head[i][s].data() + g.head[i][s].size()));
            tails.push_back(to_json(g.tails[i][s]));
        }
        players.push_back({{"player", i + 1}, {"in_neighbors", nb}, {"coefficients", coefs}, {"tails", tails}});
    }
    return {{"n", g.n},         {"d", g.d}, {"r", g.r_true}, {"action_budget", g.action_budget},
            {"seed", g.seed},   {"basis", g.basis}, {"players", players}};
}

inline GameSpec game_from_json(const nlohmann::json& j) {
    GameSpec g;
    g.n = j.at("n").get<std::size_t>();
    g.d = j.at("d").get<std::size_t>();
    g.r_true = j.at("r").get<std::size_t>();
    g.action_budget = j.value("action_budget", 1.0);
    g.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("basis")) g.basis = j.at("basis");
    g.neighbors.assign(g.n, {});
    g.head.assign(g.n, {});
    g.tails.assign(g.n, {});
    const auto& players = j.at("players");
    if (players.size() != g.n) throw ArgumentError("game JSON lists " + std::to_string(players.size()) + " players, expected n");
    for (const auto& p : players) {
        const auto player = p.at("player").get<std::size_t>();
        if (player < 1 || player > g.n) throw IndexError("player id out of range in game JSON");
        const std::size_t i = player - 1;
        const auto nb = p.at("in_neighbors").get<std::vector<std::size_t>>();
        const auto& coefs = p.at("coefficients");
        const auto& tails = p.at("tails");
        if (coefs.size() != nb.size() || tails.size() != nb.size())
            throw ArgumentError("coefficient/tail arrays do not match in_neighbors");
        // keep neighbor order sorted while carrying coefficients along
        std::vector<std::size_t> order(nb.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nb[a] < nb[b]; });
        for (std::size_t o : order) {
            if (nb[o] < 1 || nb[o] > g.n) throw IndexError("neighbor id out of range in game JSON");
            g.neighbors[i].push_back(nb[o] - 1);
            const auto v = coefs[o].get<std::vector<double>>();
            g.head[i].push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
            g.tails[i].push_back(tail_from_json(tails[o]));
        }
    }
    g.validate();
    return g;
}

}  // namespace gamelearn

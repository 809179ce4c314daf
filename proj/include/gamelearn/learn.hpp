#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/basis.hpp"
#include "gamelearn/diagnostics.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/game.hpp"
#include "gamelearn/parallel.hpp"
#include "gamelearn/recovery.hpp"
#include "gamelearn/sampling.hpp"
#include "gamelearn/solver.hpp"

namespace gamelearn {

struct LearnOptions {
    /// A fixed lambda, or nullopt for automatic selection.
    std::optional<double> lambda;
    double threshold_multiplier = 1.1;
    double budget_C = std::numeric_limits<double>::infinity();
    double tau = -1.0;  // negative: 10 * tol
    double tol = 1e-8;
    /// Tail bound used by the automatic rule when no game is given.
    double delta = 0.0;
    /// Degree bound used by the automatic rule when no game is given (0: unknown).
    std::size_t d = 0;
    std::size_t grid_size = 20;
    double grid_ratio = 1e-3;  // smallest grid lambda / lambda_max
    std::size_t jobs = 1;

    double threshold() const { return tau >= 0.0 ? tau : 10.0 * tol; }
};

struct PathPoint {
    double lambda = 0.0;
    std::size_t df = 0;  // nonzero coefficients
    double rss = 0.0;
    double bic = 0.0;
};

struct PlayerLearn {
    std::string lambda_source;  // "fixed", "threshold" or "grid-bic"
    std::vector<PathPoint> path;
};

struct LearnOutput {
    RecoveryResult recovery;
    std::vector<PlayerLearn> players;
};

/// Geometric grid from lambda_max (all-zero solution) down to ratio * lambda_max.
inline std::vector<double> lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t count,
                                       double ratio) {
    if (count < 1) throw ArgumentError("lambda grid needs at least one point");
    const double lmax = (2.0 / static_cast<double>(X.rows())) * (X.transpose() * y).cwiseAbs().maxCoeff();
    std::vector<double> grid;
    if (!(lmax > 0.0)) return {0.0};
    for (std::size_t k = 0; k < count; ++k) {
        const double t = count == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        grid.push_back(lmax * std::pow(ratio, t));
    }
    return grid;
}

/// Solves along the grid with warm starts and keeps the BIC minimizer
/// N log(RSS/N) + log(N) df.
inline PlayerEstimate fit_on_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LearnOptions& opt,
                                  std::vector<PathPoint>& path) {
    const double N = static_cast<double>(X.rows());
    const double floor = std::numeric_limits<double>::min();
    std::optional<PlayerEstimate> best;
    double best_bic = std::numeric_limits<double>::infinity();
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(X.cols());
    for (double lambda : lambda_grid(X, y, opt.grid_size, opt.grid_ratio)) {
        SolverConfig cfg;
        cfg.lambda = lambda;
        cfg.budget_C = opt.budget_C;
        cfg.tol = opt.tol;
        auto res = solve_player(X, y, cfg, &warm);
        warm = res.beta_hat;
        PathPoint pt;
        pt.lambda = lambda;
        for (Eigen::Index k = 0; k < res.beta_hat.size(); ++k) pt.df += std::abs(res.beta_hat[k]) > opt.threshold();
        pt.rss = (y - X * res.beta_hat).squaredNorm();
        pt.bic = N * std::log(std::max(pt.rss / N, floor)) + std::log(N) * static_cast<double>(pt.df);
        path.push_back(pt);
        if (pt.bic < best_bic) {
            best_bic = pt.bic;
            PlayerEstimate e;
            e.lambda = lambda;
            e.solver = std::move(res);
            best = std::move(e);
        }
    }
    return *best;
}

/// Per-player lambda = multiplier * g. With a known game, alpha is measured on
/// the true support; otherwise alpha = 1, which makes g as large as it can be
/// for any alpha in (0, 1]. Returns nullopt if g cannot be evaluated or is 0.
inline std::optional<double> threshold_lambda(const SampleSet& s, const BasisSet& basis, const Eigen::MatrixXd& X,
                                            std::size_t i, const LearnOptions& opt, const GameSpec* game) {
    if (!s.meta.noise) return std::nullopt;
    const double sigma = s.meta.noise->sigma;
    const std::size_t n = s.players();
    const std::size_t N = s.size();
    double g = 0.0;
    if (game) {
        const double C = std::isfinite(opt.budget_C) ? opt.budget_C : game->l1_norm(i, basis.r());
        const double delta = game->tail_bound(i, basis.r());
        const auto pd = diagnose_player(*game, basis, X, i, 0.0, C, sigma, delta);
        if (!pd.alpha || game->n <= game->d) return std::nullopt;
        g = lambda_threshold(basis.psi_bar(), n, delta, N, game->d, C, *pd.alpha, sigma);
    } else {
        if (opt.d == 0 || opt.d >= n || !std::isfinite(opt.budget_C)) return std::nullopt;
        g = lambda_threshold(basis.psi_bar(), n, opt.delta, N, opt.d, opt.budget_C, 1.0, sigma);
    }
    if (!(g > 0.0)) return std::nullopt;
    return opt.threshold_multiplier * g;
}

/// Learns every player's neighborhood and assembles the directed graph.
inline LearnOutput learn_game(const SampleSet& s, const BasisSet& basis, const LearnOptions& opt,
                              const GameSpec* game = nullptr) {
    s.validate();
    const std::size_t n = s.players();
    if (game && game->n != n) throw DataError("game and samples disagree on the number of players");
    LearnOutput out;
    out.players.resize(n);
    auto& rec = out.recovery;
    rec.r = basis.r();
    rec.support_threshold = opt.threshold();
    rec.per_player.resize(n);
    parallel_for(n, opt.jobs, [&](std::size_t i) {
        const auto reg = assemble_regression(s, basis, i);
        auto& pl = out.players[i];
        std::optional<double> lambda = opt.lambda;
        pl.lambda_source = "fixed";
        if (!lambda) {
            lambda = threshold_lambda(s, basis, reg.design, i, opt, game);
            pl.lambda_source = "threshold";
        }
        PlayerEstimate est;
        if (lambda) {
            SolverConfig cfg;
            cfg.lambda = *lambda;
            cfg.budget_C = opt.budget_C;
            cfg.tol = opt.tol;
            est.solver = solve_player(reg.design, reg.target, cfg);
            est.lambda = *lambda;
        } else {
            pl.lambda_source = "grid-bic";
            est = fit_on_grid(reg.design, reg.target, opt, pl.path);
        }
        est.beta_hat = est.solver.beta_hat;
        est.support = extract_support(est.beta_hat, n, i, rec.r, opt.threshold());
        est.signs = support_signs(est.beta_hat, opt.threshold());
        rec.per_player[i] = std::move(est);
    });
    std::vector<std::vector<std::size_t>> supports;
    for (const auto& e : rec.per_player) supports.push_back(e.support);
    rec.graph = assemble_graph(supports);
    return out;
}

inline nlohmann::json to_json(const LearnOutput& lo, const BasisSet& basis, const GameSpec* truth = nullptr) {
    const auto& rec = lo.recovery;
    nlohmann::json players = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.per_player.size(); ++i) {
        const auto& e = rec.per_player[i];
        std::vector<std::size_t> support;
        for (std::size_t j : e.support) support.push_back(j + 1);
        nlohmann::json path = nlohmann::json::array();
        for (const auto& p : lo.players[i].path)
            path.push_back({{"lambda", p.lambda}, {"df", p.df}, {"rss", p.rss}, {"bic", p.bic}});
        nlohmann::json pj = {{"player", i + 1},
                             {"lambda", e.lambda},
                             {"lambda_source", lo.players[i].lambda_source},
                             {"support", support},
                             {"signs", e.signs},
                             {"solver", to_json(e.solver)}};
        if (!path.empty()) pj["path"] = path;
        players.push_back(pj);
    }
    nlohmann::json j = {{"n", rec.graph.n},
                        {"r", rec.r},
                        {"basis", to_json(basis)},
                        {"support_threshold", rec.support_threshold},
                        {"graph", to_json(rec.graph)},
                        {"players", players}};
    if (truth) {
        const auto m = structure_metrics(*truth, rec);
        j["metrics"] = to_json(m);
        j["exact_match"] = m.exact_match;
    }
    return j;
}

}  // namespace gamelearn

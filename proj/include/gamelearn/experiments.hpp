#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/basis.hpp"
#include "gamelearn/diagnostics.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/game.hpp"
#include "gamelearn/io.hpp"
#include "gamelearn/parallel.hpp"
#include "gamelearn/recovery.hpp"
#include "gamelearn/rng.hpp"
#include "gamelearn/sampling.hpp"
#include "gamelearn/solver.hpp"

namespace gamelearn {

/// How each player's lambda is chosen inside a trial.
struct LambdaRule {
    enum class Kind { Fixed, Threshold };

    Kind kind = Kind::Fixed;
    double value = 0.0;  // the lambda itself, or the multiplier on g

    static LambdaRule fixed(double lambda) { return {Kind::Fixed, lambda}; }
    static LambdaRule threshold(double multiplier) { return {Kind::Threshold, multiplier}; }

    std::string label() const {
        std::ostringstream s;
        s << (kind == Kind::Fixed ? "fixed:" : "g:") << value;
        return s.str();
    }
};

struct CellConfig {
    std::size_t n = 10;
    std::size_t d = 2;
    int order = 1;  // Fourier order of both the generating and the learning basis
    std::size_t N = 500;
    double sigma = 0.0;
    NoiseModel::Family family = NoiseModel::Family::Gaussian;
    LambdaRule lambda = LambdaRule::fixed(1e-3);
    double min_weight = 0.5;
    Tail tail = Tail::zero();
    std::size_t tail_truncation = 0;
    std::size_t trials = 50;
    std::uint64_t base_seed = 0;
    /// Budget C per player = budget_factor * ||beta*_i||_1.
    double budget_factor = 1.0;
    double tol = 1e-8;
    double tau = -1.0;  // negative: 10 * tol
    /// Compute assumption diagnostics on the true support (always on for the
    /// Threshold rule, which needs alpha).
    bool diagnostics = false;
    bool payoff_errors = false;
    std::size_t grid = 101;
    std::size_t random_points = 1000;

    std::size_t r() const { return 4 * static_cast<std::size_t>(order) * static_cast<std::size_t>(order); }
    double threshold() const { return tau >= 0.0 ? tau : 10.0 * tol; }

    void validate() const {
        if (trials < 1) throw ArgumentError("trials must be >= 1");
        if (n < 2 || d < 1 || d >= n) throw ArgumentError("need n >= 2 and 1 <= d <= n-1");
        if (order < 1) throw ArgumentError("fourier order must be >= 1");
        if (N < 1) throw ArgumentError("N must be >= 1");
        if (!(sigma >= 0.0)) throw ArgumentError("sigma must be >= 0");
        if (!(min_weight > 0.0)) throw ArgumentError("min_weight must be > 0");
        if (!(budget_factor > 0.0)) throw ArgumentError("budget_factor must be > 0");
    }
};

/// Seed of trial t. It depends on (n, d, r) but not on N, sigma or lambda, so
/// cells that differ only in those reuse the same games and action prefixes.
inline std::uint64_t trial_seed(const CellConfig& c, std::size_t trial) {
    return derive_seed(c.base_seed, stream::trial, c.n, c.d, c.r(), trial);
}

struct TrialOutcome {
    bool converged = true;
    bool exact = false;
    bool sign_consistent = false;
    double precision = 0.0;
    double recall = 0.0;
    /// max over players of ||beta^_S - beta*_S||_inf on the true support
    double est_err = 0.0;
    /// max over players of the grid/random sup payoff error (if computed)
    double payoff_err = 0.0;
    double mean_lambda = 0.0;
    /// every player has A1, A2 and lambda > g
    bool preconditions_pass = false;
    /// additionally A3 for every player
    bool diagnostics_pass = false;
    /// est_err_i <= est_err_bound_i for every player
    bool est_bound_ok = false;
    /// payoff_err_i <= payoff_eps_i for every player
    bool payoff_bound_ok = false;
    std::string error;
};

inline TrialOutcome run_trial(const CellConfig& c, std::size_t trial) {
    c.validate();
    const auto basis = BasisSet::fourier(c.order);
    const std::size_t r = basis.r();
    const std::uint64_t seed = trial_seed(c, trial);
    const auto game = generate_game(c.n, c.d, r, derive_seed(seed, 1), c.min_weight, c.tail, to_json(basis));
    const NoiseModel noise{c.sigma, c.family};
    const auto samples = build_sample_set(game, basis, noise, c.N, derive_seed(seed, 2), c.tail_truncation);
    const bool want_diag = c.diagnostics || c.lambda.kind == LambdaRule::Kind::Threshold;

    TrialOutcome out;
    RecoveryResult rec;
    rec.r = r;
    rec.support_threshold = c.threshold();
    rec.per_player.resize(c.n);
    std::vector<std::vector<std::size_t>> supports(c.n);
    bool pre = want_diag, all = want_diag, est_ok = want_diag, pay_ok = want_diag && c.payoff_errors;
    double lambda_sum = 0.0;
    try {
        for (std::size_t i = 0; i < c.n; ++i) {
            const auto reg = assemble_regression(samples, basis, i);
            const double C = c.budget_factor * game.l1_norm(i, r);
            const double delta = game.tail_bound(i, r);
            std::optional<PlayerDiagnostics> diag;
            double lambda = c.lambda.value;
            if (want_diag) {
                // the bounds are evaluated at the lambda actually used, so run twice for the g rule
                diag = diagnose_player(game, basis, reg.design, i, lambda, C, c.sigma, delta);
                if (c.lambda.kind == LambdaRule::Kind::Threshold) {
                    const double alpha = diag->alpha.value_or(1.0);
                    lambda = c.lambda.value * lambda_threshold(basis.psi_bar(), c.n, delta, c.N, c.d, C, alpha, c.sigma);
                    diag = diagnose_player(game, basis, reg.design, i, lambda, C, c.sigma, delta);
                }
            }
            lambda_sum += lambda;
            SolverConfig cfg;
            cfg.lambda = lambda;
            cfg.budget_C = C;
            cfg.tol = c.tol;
            auto& est = rec.per_player[i];
            est.solver = solve_player(reg.design, reg.target, cfg);
            est.beta_hat = est.solver.beta_hat;
            est.lambda = lambda;
            est.support = extract_support(est.beta_hat, c.n, i, r, c.threshold());
            est.signs = support_signs(est.beta_hat, c.threshold());
            supports[i] = est.support;

            const Eigen::VectorXd truth = game.flat_beta(i, r);
            double err = 0.0;
            for (std::size_t pos : support_coordinates(c.n, i, r, game.neighbors[i]))
                err = std::max(err, std::abs(est.beta_hat[static_cast<Eigen::Index>(pos)] - truth[static_cast<Eigen::Index>(pos)]));
            out.est_err = std::max(out.est_err, err);

            double perr = 0.0;
            if (c.payoff_errors) {
                std::vector<std::size_t> edges = game.neighbors[i];
                for (std::size_t j : est.support)
                    if (!game.has_edge(j, i)) edges.push_back(j);
                const auto pts = payoff_test_points(c.n, i, edges, seed, c.grid, c.random_points);
                perr = payoff_error(game, est.beta_hat, basis, i, pts, c.tail_truncation).max_abs_err;
                out.payoff_err = std::max(out.payoff_err, perr);
            }
            if (diag) {
                const bool p_ok = diag->a1 == Verdict::Pass && diag->a2 == Verdict::Pass && diag->lambda_ok == Verdict::Pass;
                pre = pre && p_ok;
                all = all && diag->all_pass();
                est_ok = est_ok && diag->est_err_bound && err <= *diag->est_err_bound;
                if (c.payoff_errors) pay_ok = pay_ok && diag->payoff_eps && perr <= *diag->payoff_eps;
            }
        }
    } catch (const ConvergenceError& e) {
        out.converged = false;
        out.error = e.what();
        return out;
    }
    rec.graph = assemble_graph(supports);
    const auto m = structure_metrics(game, rec);
    out.exact = m.exact_match;
    out.sign_consistent = m.sign_consistency;
    out.precision = m.edge_precision;
    out.recall = m.edge_recall;
    out.mean_lambda = lambda_sum / static_cast<double>(c.n);
    out.preconditions_pass = pre;
    out.diagnostics_pass = all;
    out.est_bound_ok = est_ok;
    out.payoff_bound_ok = pay_ok;
    return out;
}

struct CellResult {
    CellConfig config;
    std::size_t trials = 0;
    std::size_t failed_trials = 0;  // solver non-convergence
    double exact_recovery_rate = 0.0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_payoff_err = 0.0;
    double mean_est_err = 0.0;
    std::vector<TrialOutcome> outcomes;
};

/// Runs every trial of a cell. Non-converged trials count as failed
/// recoveries and are excluded from the error means.
inline CellResult run_cell(const CellConfig& c, std::size_t jobs = 1) {
    c.validate();
    CellResult res;
    res.config = c;
    res.trials = c.trials;
    res.outcomes.resize(c.trials);
    parallel_for(c.trials, jobs, [&](std::size_t t) { res.outcomes[t] = run_trial(c, t); });
    std::size_t ok = 0, exact = 0;
    for (const auto& o : res.outcomes) {
        if (!o.converged) {
            ++res.failed_trials;
            continue;
        }
        ++ok;
        exact += o.exact;
        res.mean_precision += o.precision;
        res.mean_recall += o.recall;
        res.mean_payoff_err += o.payoff_err;
        res.mean_est_err += o.est_err;
    }
    res.exact_recovery_rate = static_cast<double>(exact) / static_cast<double>(c.trials);
    if (ok) {
        const double k = static_cast<double>(ok);
        res.mean_precision /= k;
        res.mean_recall /= k;
        res.mean_payoff_err /= k;
        res.mean_est_err /= k;
    }
    return res;
}

struct BisectionOptions {
    double target_rate = 0.9;
    std::size_t N_start = 16;
    std::size_t N_cap = 1 << 16;
    /// stop once the bracket is within this fraction of its upper end
    double relative_width = 0.02;
    std::size_t trials = 50;
};

struct CriticalN {
    std::size_t n = 0;
    std::size_t N_star = 0;
    bool saturated = false;
    double rate = 0.0;  // recovery rate at N_star
    std::vector<std::pair<std::size_t, double>> evaluated;
};

/// Smallest N (within the bracket tolerance) whose recovery rate reaches
/// the target: doubling from N_start, then bisection.
inline CriticalN critical_sample_size(CellConfig c, const BisectionOptions& opt, std::size_t jobs = 1) {
    c.trials = opt.trials;
    CriticalN out;
    out.n = c.n;
    auto rate_at = [&](std::size_t N) {
        c.N = N;
        const double rate = run_cell(c, jobs).exact_recovery_rate;
        out.evaluated.emplace_back(N, rate);
        return rate;
    };
    std::size_t lo = 0, hi = std::max<std::size_t>(1, opt.N_start);
    double hi_rate = rate_at(hi);
    while (hi_rate < opt.target_rate) {
        lo = hi;
        if (hi >= opt.N_cap) {
            out.saturated = true;
            out.N_star = hi;
            out.rate = hi_rate;
            return out;
        }
        hi = std::min(hi * 2, opt.N_cap);
        hi_rate = rate_at(hi);
    }
    while (hi - lo > std::max<std::size_t>(1, static_cast<std::size_t>(opt.relative_width * static_cast<double>(hi)))) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const double rate = rate_at(mid);
        if (rate >= opt.target_rate) {
            hi = mid;
            hi_rate = rate;
        } else {
            lo = mid;
        }
    }
    out.N_star = hi;
    out.rate = hi_rate;
    return out;
}

struct ScalingResult {
    std::vector<CriticalN> points;
    double slope_vs_log_n = 0.0;  // least-squares slope of N* on log n
    double intercept = 0.0;
};

/// N*(n) for each n in the grid with d and everything else held fixed.
inline ScalingResult scaling_study(const CellConfig& base, const std::vector<std::size_t>& n_grid,
                                   const BisectionOptions& opt, std::size_t jobs = 1) {
    if (n_grid.size() < 3) throw ArgumentError("scaling study needs at least three values of n");
    ScalingResult res;
    for (std::size_t n : n_grid) {
        CellConfig c = base;
        c.n = n;
        res.points.push_back(critical_sample_size(c, opt, jobs));
    }
    double mx = 0.0, my = 0.0;
    for (const auto& p : res.points) {
        mx += std::log(static_cast<double>(p.n));
        my += static_cast<double>(p.N_star);
    }
    const double k = static_cast<double>(res.points.size());
    mx /= k;
    my /= k;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : res.points) {
        const double dx = std::log(static_cast<double>(p.n)) - mx;
        sxy += dx * (static_cast<double>(p.N_star) - my);
        sxx += dx * dx;
    }
    res.slope_vs_log_n = sxx > 0.0 ? sxy / sxx : 0.0;
    res.intercept = my - res.slope_vs_log_n * mx;
    return res;
}

inline std::string scaling_csv(const ScalingResult& s) {
    std::string out = "n,log_n,N_star,saturated,rate\n";
    for (const auto& p : s.points)
        out += std::to_string(p.n) + "," + io::format_double(std::log(static_cast<double>(p.n))) + ","
               + std::to_string(p.N_star) + "," + (p.saturated ? "1" : "0") + "," + io::format_double(p.rate) + "\n";
    return out;
}

inline nlohmann::json to_json(const ScalingResult& s) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points) {
        nlohmann::json ev = nlohmann::json::array();
        for (auto [N, rate] : p.evaluated) ev.push_back({{"N", N}, {"rate", rate}});
        pts.push_back({{"n", p.n}, {"N_star", p.N_star}, {"saturated", p.saturated}, {"rate", p.rate}, {"evaluated", ev}});
    }
    return {{"points", pts}, {"slope_vs_log_n", s.slope_vs_log_n}, {"intercept", s.intercept}};
}

/// Grid of cells plus an optional scaling study, read from sweep JSON:
///
///   { "n": [10], "d": [2], "r": [4], "N": [100, 500], "sigma": [0, 0.1],
///     "lambda": ["fixed:0.001", "g:1.1"], "trials": 50, "seed": 7,
///     "min_weight": 0.5, "tail": "zero", "noise": "gaussian",
///     "budget_factor": 1.0, "payoff_errors": false, "diagnostics": false,
///     "scaling": { "n": [8, 16, 32], "d": 2, "N_start": 16, "N_cap": 65536,
///                  "target": 0.9, "trials": 50 } }
struct SweepConfig {
    std::vector<std::size_t> n{10}, d{2}, r{4}, N{500};
    std::vector<double> sigma{0.0};
    std::vector<LambdaRule> lambda{LambdaRule::fixed(1e-3)};
    CellConfig defaults;
    struct Scaling {
        std::vector<std::size_t> n;
        std::size_t d = 2;
        BisectionOptions bisection;
    };
    std::optional<Scaling> scaling;

    std::vector<CellConfig> cells() const {
        if (n.empty() || d.empty() || r.empty() || N.empty() || sigma.empty() || lambda.empty())
            throw ArgumentError("sweep grids must be non-empty");
        std::vector<CellConfig> out;
        for (auto nn : n)
            for (auto dd : d)
                for (auto rr : r)
                    for (auto NN : N)
                        for (auto s : sigma)
                            for (const auto& l : lambda) {
                                CellConfig c = defaults;
                                c.n = nn;
                                c.d = dd;
                                c.order = fourier_order_for(rr);
                                c.N = NN;
                                c.sigma = s;
                                c.lambda = l;
                                c.validate();
                                out.push_back(c);
                            }
        return out;
    }
};

inline LambdaRule parse_lambda_rule(const std::string& s) {
    try {
        if (s.rfind("fixed:", 0) == 0) return LambdaRule::fixed(std::stod(s.substr(6)));
        if (s.rfind("g:", 0) == 0) return LambdaRule::threshold(std::stod(s.substr(2)));
    } catch (const std::logic_error&) {
    }
    throw ArgumentError("lambda rule must be 'fixed:VALUE' or 'g:MULTIPLIER', got '" + s + "'");
}

inline SweepConfig sweep_from_json(const nlohmann::json& j) {
    SweepConfig s;
    auto& c = s.defaults;
    if (j.contains("n")) s.n = j.at("n").get<std::vector<std::size_t>>();
    if (j.contains("d")) s.d = j.at("d").get<std::vector<std::size_t>>();
    if (j.contains("r")) s.r = j.at("r").get<std::vector<std::size_t>>();
    if (j.contains("N")) s.N = j.at("N").get<std::vector<std::size_t>>();
    if (j.contains("sigma")) s.sigma = j.at("sigma").get<std::vector<double>>();
    if (j.contains("lambda")) {
        s.lambda.clear();
        for (const auto& l : j.at("lambda")) s.lambda.push_back(parse_lambda_rule(l.get<std::string>()));
    }
    c.trials = j.value("trials", c.trials);
    c.base_seed = j.value("seed", c.base_seed);
    c.min_weight = j.value("min_weight", c.min_weight);
    if (j.contains("tail")) c.tail = parse_tail(j.at("tail").get<std::string>());
    if (j.contains("noise")) c.family = parse_family(j.at("noise").get<std::string>());
    c.tail_truncation = j.value("tail_truncation", c.tail_truncation);
    c.budget_factor = j.value("budget_factor", c.budget_factor);
    c.tol = j.value("tol", c.tol);
    c.tau = j.value("tau", c.tau);
    c.payoff_errors = j.value("payoff_errors", c.payoff_errors);
    c.diagnostics = j.value("diagnostics", c.diagnostics);
    if (j.contains("scaling")) {
        const auto& sc = j.at("scaling");
        SweepConfig::Scaling sv;
        sv.n = sc.at("n").get<std::vector<std::size_t>>();
        sv.d = sc.value("d", sv.d);
        sv.bisection.N_start = sc.value("N_start", sv.bisection.N_start);
        sv.bisection.N_cap = sc.value("N_cap", sv.bisection.N_cap);
        sv.bisection.target_rate = sc.value("target", sv.bisection.target_rate);
        sv.bisection.trials = sc.value("trials", sv.bisection.trials);
        sv.bisection.relative_width = sc.value("relative_width", sv.bisection.relative_width);
        s.scaling = sv;
    }
    return s;
}

/// Long-format rows: n,d,r,N,sigma,lambda_rule,metric,value
inline std::string cells_csv(const std::vector<CellResult>& cells) {
    std::string out = "n,d,r,N,sigma,lambda_rule,metric,value\n";
    for (const auto& cr : cells) {
        const auto& c = cr.config;
        const std::string prefix = std::to_string(c.n) + "," + std::to_string(c.d) + "," + std::to_string(c.r()) + ","
                                   + std::to_string(c.N) + "," + io::format_double(c.sigma) + "," + c.lambda.label() + ",";
        const std::pair<const char*, double> metrics[] = {
            {"exact_recovery_rate", cr.exact_recovery_rate},
            {"mean_precision", cr.mean_precision},
            {"mean_recall", cr.mean_recall},
            {"mean_payoff_err", cr.mean_payoff_err},
            {"mean_est_err", cr.mean_est_err},
            {"failed_trials", static_cast<double>(cr.failed_trials)},
            {"trials", static_cast<double>(cr.trials)},
        };
        for (const auto& [name, value] : metrics) out += prefix + name + "," + io::format_double(value) + "\n";
    }
    return out;
}

inline nlohmann::json to_json(const CellResult& cr) {
    const auto& c = cr.config;
    return {{"n", c.n},
            {"d", c.d},
            {"r", c.r()},
            {"N", c.N},
            {"sigma", c.sigma},
            {"lambda_rule", c.lambda.label()},
            {"trials", cr.trials},
            {"failed_trials", cr.failed_trials},
            {"exact_recovery_rate", cr.exact_recovery_rate},
            {"mean_precision", cr.mean_precision},
            {"mean_recall", cr.mean_recall},
            {"mean_payoff_err", cr.mean_payoff_err},
            {"mean_est_err", cr.mean_est_err}};
}

}  // namespace gamelearn

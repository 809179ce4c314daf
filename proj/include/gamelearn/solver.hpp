#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/basis.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/sampling.hpp"

namespace gamelearn {

struct SolverConfig {
    double lambda = 0.0;
    double budget_C = std::numeric_limits<double>::infinity();
    double tol = 1e-8;
    std::size_t max_iter = 100000;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be finite and >= 0");
        if (!(budget_C > 0.0)) throw ArgumentError("budget C must be > 0");
        if (!(tol > 0.0)) throw ArgumentError("tol must be > 0");
        if (max_iter < 1) throw ArgumentError("max_iter must be >= 1");
    }
};

struct SolverResult {
    Eigen::VectorXd beta_hat;
    Eigen::VectorXd z;
    double w = 0.0;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    /// The unconstrained minimizer broke ||beta||_1 <= C and the solve was
    /// redone on the budget boundary; budget_multiplier is the dual mu.
    bool budget_active = false;
    double budget_multiplier = 0.0;
};

struct Regression {
    Eigen::MatrixXd design;  // N x r(n-1)
    Eigen::VectorXd target;  // N
};

/// Design rows are clean feature vectors psi(x_s) for player i; the target is
/// the observed noisy payoff column.
inline Regression assemble_regression(const SampleSet& samples, const BasisSet& basis, std::size_t i) {
    samples.validate();
    const std::size_t n = samples.players();
    if (n < 2) throw DataError("need at least two players");
    if (i >= n) throw IndexError("player index out of range");
    const std::size_t N = samples.size();
    const std::size_t p = basis.r() * (n - 1);
    Regression reg;
    reg.design.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(p));
    reg.target = samples.payoffs.col(static_cast<Eigen::Index>(i));
    FeatureBuilder fb(basis);
    std::vector<double> row(p);
    for (std::size_t s = 0; s < N; ++s) {
        fb.write(i, samples.action(s), row);
        for (std::size_t c = 0; c < p; ++c) reg.design(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) = row[c];
    }
    return reg;
}

/// (1/N) ||y - X beta||^2 + lambda ||beta||_1
inline double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                              double lambda) {
    const double N = static_cast<double>(X.rows());
    return (y - X * beta).squaredNorm() / N + lambda * beta.lpNorm<1>();
}

/// Gradient of the smooth part: (2/N) X^T (X beta - y).
inline Eigen::VectorXd least_squares_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& beta) {
    const double N = static_cast<double>(X.rows());
    return (2.0 / N) * (X.transpose() * (X * beta - y));
}

/// max stationarity violation of the penalized problem at weight lambda
inline double stationarity_violation(const Eigen::VectorXd& grad, const Eigen::VectorXd& beta, double lambda) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double v = beta[j] != 0.0 ? std::abs(grad[j] + lambda * (beta[j] > 0 ? 1.0 : -1.0))
                                        : std::max(0.0, std::abs(grad[j]) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

namespace detail {

inline double soft_threshold(double c, double lambda) {
    if (c > lambda) return c - lambda;
    if (c < -lambda) return c + lambda;
    return 0.0;  // ties go to zero
}

struct CdState {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    Eigen::VectorXd curvature;  // (2/N) ||X_j||^2
    Eigen::VectorXd beta;
    Eigen::VectorXd residual;  // y - X beta
    double inv_n;

    CdState(const Eigen::MatrixXd& X_, const Eigen::VectorXd& y_, Eigen::VectorXd start)
        : X(X_), y(y_), beta(std::move(start)), inv_n(1.0 / static_cast<double>(X_.rows())) {
        curvature = 2.0 * inv_n * X.colwise().squaredNorm().transpose();
        residual = y - X * beta;
    }

    // Exact minimization over coordinate j; returns the curvature-weighted move.
    double update(Eigen::Index j, double lambda) {
        const double a = curvature[j];
        const double old = beta[j];
        if (a <= 0.0) {
            beta[j] = 0.0;
            return 0.0;
        }
        const double c = 2.0 * inv_n * X.col(j).dot(residual) + a * old;
        const double next = soft_threshold(c, lambda) / a;
        if (next != old) {
            residual.noalias() -= (next - old) * X.col(j);
            beta[j] = next;
        }
        return a * std::abs(next - old);
    }

    double objective(double lambda) const { return residual.squaredNorm() * inv_n + lambda * beta.lpNorm<1>(); }
};

// Cyclic coordinate descent on the penalized problem. Alternates full sweeps
// with sweeps restricted to the nonzero set; stops on the KKT residual
// recomputed from scratch. Returns sweeps used and writes the residual.
inline std::size_t coordinate_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, double tol,
                                      std::size_t max_iter, Eigen::VectorXd& beta, double& kkt) {
    CdState st(X, y, beta);
    const Eigen::Index p = X.cols();
    std::size_t sweeps = 0;
    std::vector<Eigen::Index> active;
#ifndef NDEBUG
    double last_obj = st.objective(lambda);
    auto check_monotone = [&] {
        const double obj = st.objective(lambda);
        assert(obj <= last_obj + 1e-9 * (1.0 + std::abs(last_obj)));
        last_obj = obj;
    };
#else
    auto check_monotone = [] {};
#endif
    kkt = std::numeric_limits<double>::infinity();
    while (sweeps < max_iter) {
        for (Eigen::Index j = 0; j < p; ++j) st.update(j, lambda);
        ++sweeps;
        check_monotone();

        st.residual = y - X * st.beta;  // drop accumulated rounding before certifying
        const Eigen::VectorXd grad = -2.0 * st.inv_n * (X.transpose() * st.residual);
        kkt = stationarity_violation(grad, st.beta, lambda);
        if (kkt <= tol) break;

        active.clear();
        for (Eigen::Index j = 0; j < p; ++j)
            if (st.beta[j] != 0.0) active.push_back(j);
        while (!active.empty() && sweeps < max_iter) {
            double moved = 0.0;
            for (Eigen::Index j : active) moved = std::max(moved, st.update(j, lambda));
            ++sweeps;
            check_monotone();
            if (moved <= 0.1 * tol) break;
        }
    }
    beta = st.beta;
    return sweeps;
}

/// Exact boundary solution for fixed active set and signs: solves the
/// bordered system [H s; s^T 0][b; mu] = [c - lambda s; C] and keeps it only
/// if the signs, dual feasibility and stationarity all check out.
inline bool polish_on_boundary(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, double C,
                               double tol, Eigen::VectorXd& beta, double& mu) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (beta[j] != 0.0) act.push_back(j);
    if (act.empty()) return false;
    const auto k = static_cast<Eigen::Index>(act.size());
    const double scale = 2.0 / static_cast<double>(X.rows());
    Eigen::MatrixXd XA(X.rows(), k);
    Eigen::VectorXd sgn(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        XA.col(a) = X.col(act[static_cast<std::size_t>(a)]);
        sgn[a] = beta[act[static_cast<std::size_t>(a)]] > 0 ? 1.0 : -1.0;
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k + 1, k + 1);
    M.topLeftCorner(k, k) = scale * XA.transpose() * XA;
    M.topRightCorner(k, 1) = sgn;
    M.bottomLeftCorner(1, k) = sgn.transpose();
    Eigen::VectorXd rhs(k + 1);
    rhs.head(k) = scale * XA.transpose() * y - lambda * sgn;
    rhs[k] = C;
    const Eigen::VectorXd sol = M.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite() || sol[k] < 0.0) return false;
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(beta.size());
    for (Eigen::Index a = 0; a < k; ++a) {
        if (sol[a] * sgn[a] <= 0.0) return false;
        cand[act[static_cast<std::size_t>(a)]] = sol[a];
    }
    while (cand.lpNorm<1>() > C) cand *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();  // stay feasible
    const double before = stationarity_violation(least_squares_gradient(X, y, beta), beta, lambda + mu);
    const double after = stationarity_violation(least_squares_gradient(X, y, cand), cand, lambda + sol[k]);
    if (!(after <= std::max(before, tol))) return false;
    beta = cand;
    mu = sol[k];
    return true;
}

}  // namespace detail

/// Fills z, w and objective from beta and the recomputed gradient.
inline void finish_result(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda_eff, double lambda,
                          SolverResult& res) {
    const Eigen::VectorXd grad = least_squares_gradient(X, y, res.beta_hat);
    res.z.resize(res.beta_hat.size());
    for (Eigen::Index j = 0; j < res.beta_hat.size(); ++j) {
        if (res.beta_hat[j] != 0.0)
            res.z[j] = res.beta_hat[j] > 0 ? 1.0 : -1.0;
        else
            res.z[j] = lambda_eff > 0.0 ? std::clamp(-grad[j] / lambda_eff, -1.0, 1.0) : 0.0;
    }
    res.w = res.beta_hat.lpNorm<1>();
    res.objective = lasso_objective(X, y, res.beta_hat, lambda);
    res.kkt_residual = stationarity_violation(grad, res.beta_hat, lambda_eff);
}

/// Solves min (1/N)||y - X beta||^2 + lambda ||beta||_1 s.t. ||beta||_1 <= C.
///
/// The penalized problem is solved first. If its minimizer is over budget,
/// the constraint is active and the solution is the penalized minimizer at
/// weight lambda + mu for the mu >= 0 that puts ||beta||_1 on C (the l1 norm
/// is non-increasing along the path); mu is found by bisection.
inline SolverResult solve_player(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SolverConfig& cfg,
                                 const Eigen::VectorXd* warm_start = nullptr) {
    cfg.validate();
    if (X.rows() < 1) throw ArgumentError("need at least one sample");
    if (X.rows() != y.size()) throw ArgumentError("design and target disagree on N");
    const Eigen::Index p = X.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (warm_start) {
        if (warm_start->size() != p) throw ArgumentError("warm start has wrong length");
        beta = *warm_start;
    }

    SolverResult res;
    double kkt = 0.0;
    res.iterations = detail::coordinate_descent(X, y, cfg.lambda, cfg.tol, cfg.max_iter, beta, kkt);
    if (kkt > cfg.tol) throw ConvergenceError("coordinate descent did not converge", kkt, res.iterations);
    res.beta_hat = beta;

    if (beta.lpNorm<1>() > cfg.budget_C) {
        res.budget_active = true;
        const double N = static_cast<double>(X.rows());
        double lo = 0.0;
        double hi = std::max(0.0, (2.0 / N) * (X.transpose() * y).cwiseAbs().maxCoeff() - cfg.lambda);
        Eigen::VectorXd at_hi = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd cur = beta;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            res.iterations += detail::coordinate_descent(X, y, cfg.lambda + mid, cfg.tol, cfg.max_iter, cur, kkt);
            if (kkt > cfg.tol) throw ConvergenceError("budget re-solve did not converge", kkt, res.iterations);
            const double w = cur.lpNorm<1>();
            if (w <= cfg.budget_C) {
                hi = mid;
                at_hi = cur;
                if (w >= cfg.budget_C - 0.1 * cfg.tol) break;
            } else {
                lo = mid;
            }
        }
        res.beta_hat = at_hi;
        res.budget_multiplier = hi;
        detail::polish_on_boundary(X, y, cfg.lambda, cfg.budget_C, cfg.tol, res.beta_hat, res.budget_multiplier);
    }
    finish_result(X, y, cfg.lambda + res.budget_multiplier, cfg.lambda, res);
    return res;
}

struct KktReport {
    Eigen::VectorXd gradient;   // (2/N) X^T (X beta - y)
    Eigen::VectorXd violation;  // per coordinate
    double max_violation = 0.0;
    Eigen::Index worst_coordinate = -1;
    double w = 0.0;
    double budget_slack = 0.0;  // C - w
    double multiplier = 0.0;    // mu inferred from the gradient
    bool pass = false;
};

/// Recomputes the KKT system from (X, y, beta) alone: stationarity
/// grad + (lambda + mu) z = 0 with z in the l1 subdifferential, primal
/// feasibility w <= C, and mu >= 0 only on the budget boundary. mu is
/// inferred from the nonzero coordinates, never read from the solver.
inline KktReport kkt_certificate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SolverResult& result,
                                 const SolverConfig& cfg) {
    if (X.rows() != y.size() || X.cols() != result.beta_hat.size())
        throw ArgumentError("certificate inputs disagree on shape");
    KktReport rep;
    const auto& beta = result.beta_hat;
    rep.gradient = least_squares_gradient(X, y, beta);
    rep.w = beta.lpNorm<1>();
    rep.budget_slack = cfg.budget_C - rep.w;

    if (std::isfinite(cfg.budget_C) && rep.budget_slack <= cfg.tol) {
        double sum = 0.0;
        std::size_t count = 0;
        for (Eigen::Index j = 0; j < beta.size(); ++j)
            if (beta[j] != 0.0) {
                sum += -rep.gradient[j] * (beta[j] > 0 ? 1.0 : -1.0) - cfg.lambda;
                ++count;
            }
        if (count) rep.multiplier = std::max(0.0, sum / static_cast<double>(count));
    }
    const double lam = cfg.lambda + rep.multiplier;
    rep.violation.resize(beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        rep.violation[j] = beta[j] != 0.0 ? std::abs(rep.gradient[j] + lam * (beta[j] > 0 ? 1.0 : -1.0))
                                          : std::max(0.0, std::abs(rep.gradient[j]) - lam);
        if (rep.worst_coordinate < 0 || rep.violation[j] > rep.max_violation) {
            rep.max_violation = rep.violation[j];
            rep.worst_coordinate = j;
        }
    }
    rep.pass = rep.max_violation <= cfg.tol && rep.w <= cfg.budget_C + cfg.tol;
    return rep;
}

inline nlohmann::json to_json(const SolverResult& r) {
    return {{"beta_hat", std::vector<double>(r.beta_hat.data(), r.beta_hat.data() + r.beta_hat.size())},
            {"z", std::vector<double>(r.z.data(), r.z.data() + r.z.size())},
            {"w", r.w},
            {"objective", r.objective},
            {"kkt_residual", r.kkt_residual},
            {"iterations", r.iterations},
            {"budget_active", r.budget_active},
            {"budget_multiplier", r.budget_multiplier}};
}

inline nlohmann::json to_json(const KktReport& k) {
    return {{"max_violation", k.max_violation},
            {"worst_coordinate", k.worst_coordinate},
            {"w", k.w},
            {"budget_slack", k.budget_slack},
            {"multiplier", k.multiplier},
            {"pass", k.pass}};
}

}  // namespace gamelearn

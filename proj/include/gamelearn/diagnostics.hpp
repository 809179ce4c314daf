#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/basis.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/game.hpp"
#include "gamelearn/sampling.hpp"
#include "gamelearn/solver.hpp"

namespace gamelearn {

enum class Verdict { Pass, Fail, NotApplicable };

inline std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Fail: return "FAIL";
        case Verdict::NotApplicable: return "N/A";
    }
    return "N/A";
}

inline Verdict verdict_of(bool ok) { return ok ? Verdict::Pass : Verdict::Fail; }

/// Flat feature coordinates (j, k) for j in S_i, every k in 1..r, ascending.
inline std::vector<std::size_t> support_coordinates(std::size_t n, std::size_t i, std::size_t r,
                                                    const std::vector<std::size_t>& neighbors) {
    std::vector<std::size_t> coords;
    for (std::size_t j : neighbors) {
        if (j >= n || j == i) throw IndexError("support names an invalid player");
        for (std::size_t k = 1; k <= r; ++k) coords.push_back(flat_index(i, j, k, r));
    }
    std::sort(coords.begin(), coords.end());
    return coords;
}

inline std::vector<std::size_t> complement_coordinates(std::size_t p, const std::vector<std::size_t>& support) {
    std::vector<std::size_t> out;
    std::size_t s = 0;
    for (std::size_t c = 0; c < p; ++c) {
        if (s < support.size() && support[s] == c) {
            ++s;
            continue;
        }
        out.push_back(c);
    }
    return out;
}

inline Eigen::MatrixXd restrict(const Eigen::MatrixXd& A, const std::vector<std::size_t>& rows,
                                const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b)
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                A(static_cast<Eigen::Index>(rows[a]), static_cast<Eigen::Index>(cols[b]));
    return out;
}

struct HBlocks {
    Eigen::MatrixXd H;      // (1/N) sum psi psi^T, or its noisy counterpart
    Eigen::MatrixXd H_SS;   // rows and columns in the support
    Eigen::MatrixXd H_ScS;  // rows off the support, columns in it
    std::vector<std::size_t> support;
    std::vector<std::size_t> complement;
};

inline HBlocks split_blocks(Eigen::MatrixXd H, const std::vector<std::size_t>& support_coords) {
    HBlocks b;
    const auto p = static_cast<std::size_t>(H.rows());
    for (std::size_t c : support_coords)
        if (c >= p) throw IndexError("support coordinate out of range");
    b.support = support_coords;
    std::sort(b.support.begin(), b.support.end());
    b.complement = complement_coordinates(p, b.support);
    b.H_SS = restrict(H, b.support, b.support);
    b.H_ScS = restrict(H, b.complement, b.support);
    b.H = std::move(H);
    return b;
}

/// H = (1/N) X^T X with its support blocks. An empty support gives 0x0 and
/// (p)x0 blocks; downstream checks then report NotApplicable.
inline HBlocks compute_H(const Eigen::MatrixXd& design, const std::vector<std::size_t>& support_coords) {
    if (design.rows() < 1) throw ArgumentError("need at least one sample");
    Eigen::MatrixXd H = Eigen::MatrixXd(design.transpose() * design) / static_cast<double>(design.rows());
    return split_blocks(std::move(H), support_coords);
}

/// H^ = (1/N) sum (psi psi^T + psi gamma^T). `gamma` is N x p in the design
/// layout, zero where no draw reaches the payoff.
inline HBlocks compute_H_hat(const Eigen::MatrixXd& design, const Eigen::MatrixXd& gamma,
                             const std::vector<std::size_t>& support_coords) {
    if (gamma.rows() != design.rows() || gamma.cols() != design.cols())
        throw ArgumentError("noise draws and design disagree on shape");
    const double N = static_cast<double>(design.rows());
    Eigen::MatrixXd H = (Eigen::MatrixXd(design.transpose() * design) + Eigen::MatrixXd(design.transpose() * gamma)) / N;
    return split_blocks(std::move(H), support_coords);
}

/// Expands retained oracle noise of player i into the N x p design layout.
inline Eigen::MatrixXd gamma_matrix(const SampleSet& s, std::size_t i, std::size_t p) {
    if (!s.meta.retained) throw NotApplicable("samples carry no retained noise (black-box data)");
    const auto& kept = *s.meta.retained;
    if (i >= kept.coords.size()) throw IndexError("player index out of range");
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(p));
    for (std::size_t c = 0; c < kept.coords[i].size(); ++c) {
        if (kept.coords[i][c] >= p) throw DataError("retained noise coordinate outside the design");
        G.col(static_cast<Eigen::Index>(kept.coords[i][c])) = kept.values[i].col(static_cast<Eigen::Index>(c));
    }
    return G;
}

struct A1Result {
    double C_min = 0.0;
    bool pass = false;
};

/// Minimum eigenvalue of the support block (clamped at 0).
inline A1Result check_assumption1(const Eigen::MatrixXd& H_SS) {
    if (H_SS.rows() == 0) throw NotApplicable("empty support");
    if (H_SS.rows() != H_SS.cols()) throw ArgumentError("H_SS must be square");
    if ((H_SS - H_SS.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw ArgumentError("H_SS is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H_SS, Eigen::EigenvaluesOnly);
    A1Result res;
    res.C_min = std::max(0.0, eig.eigenvalues().minCoeff());
    res.pass = res.C_min > 1e-10;
    return res;
}

struct A2Result {
    double incoherence = 0.0;  // || H_ScS H_SS^{-1} ||_inf
    double alpha = 1.0;
    bool pass = false;
};

/// alpha = 1 - max row sum of |H_ScS H_SS^{-1}|.
inline A2Result check_assumption2(const Eigen::MatrixXd& H_ScS, const Eigen::MatrixXd& H_SS) {
    if (H_SS.rows() == 0) throw NotApplicable("empty support");
    if (H_ScS.cols() != H_SS.rows()) throw ArgumentError("block shapes disagree");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(H_SS);
    if (!lu.isInvertible()) throw NotApplicable("H_SS is singular (positive-definiteness check fails)");
    A2Result res;
    if (H_ScS.rows() > 0) {
        const Eigen::MatrixXd prod = H_ScS * lu.inverse();
        res.incoherence = prod.cwiseAbs().rowwise().sum().maxCoeff();
    }
    res.alpha = 1.0 - res.incoherence;
    res.pass = res.alpha > 0.0;
    return res;
}

/// Delta(lambda, C_min, d) = (2 lambda / C_min)(2 sqrt(d) + 1/sqrt(|S_i|)).
inline double minimum_weight_threshold(double lambda, double C_min, std::size_t d, std::size_t support_size) {
    if (!(C_min > 0.0) || support_size == 0 || d == 0) throw NotApplicable("minimum-weight threshold undefined");
    return 2.0 * lambda / C_min * (2.0 * std::sqrt(static_cast<double>(d)) + 1.0 / std::sqrt(static_cast<double>(support_size)));
}

struct A3Result {
    double Delta = 0.0;
    double min_weight = 0.0;
    bool pass = false;
};

/// Player i passes iff its smallest nonzero head |beta*| exceeds Delta.
inline std::optional<A3Result> check_assumption3(const GameSpec& g, std::size_t i, double lambda, double C_min,
                                                 std::size_t d) {
    if (!(C_min > 0.0) || g.neighbors.at(i).empty()) return std::nullopt;
    A3Result res;
    res.Delta = minimum_weight_threshold(lambda, C_min, d, g.neighbors[i].size());
    res.min_weight = g.min_weight(i);
    res.pass = res.min_weight > res.Delta;
    return res;
}

/// The four candidate lower bounds on lambda, in the order
/// 20sqrt2 psi sqrt(d delta log d / N), 10sqrt2 sigma psi C sqrt(log d / N),
/// and the same two with log(n-d) divided by (1 - alpha/2).
inline std::array<double, 4> lambda_threshold_terms(double psi_bar, std::size_t n, double delta, std::size_t N,
                                                    std::size_t d, double C, double alpha, double sigma) {
    if (N < 1) throw ArgumentError("need N >= 1");
    if (n <= d) throw ArgumentError("need n > d (log(n-d) undefined)");
    if (d < 1) throw ArgumentError("need d >= 1");
    const double root2 = std::sqrt(2.0);
    const double Nd = static_cast<double>(N);
    const double dd = static_cast<double>(d);
    const double log_d = std::log(dd);
    const double log_nd = std::log(static_cast<double>(n - d));
    const double shrink = 1.0 - alpha / 2.0;
    return {20.0 * root2 * psi_bar * std::sqrt(dd * delta * log_d / Nd),
            10.0 * root2 * sigma * psi_bar * C * std::sqrt(log_d / Nd),
            20.0 * root2 * psi_bar / shrink * std::sqrt(dd * delta * log_nd / Nd),
            10.0 * root2 * sigma * psi_bar * C / shrink * std::sqrt(log_nd / Nd)};
}

/// g(psi_bar, n, delta, N, d, C, alpha): regularization weights above this
/// satisfy the structure-recovery condition.
inline double lambda_threshold(double psi_bar, std::size_t n, double delta, std::size_t N, std::size_t d, double C,
                               double alpha, double sigma) {
    const auto t = lambda_threshold_terms(psi_bar, n, delta, N, d, C, alpha, sigma);
    return *std::max_element(t.begin(), t.end());
}

struct ErrorBounds {
    double est_err_bound = 0.0;  // bound on ||beta*_S - beta^_S||_inf
    double payoff_eps = 0.0;     // bound on |u*_i - u^_i|
};

inline ErrorBounds error_bounds(double lambda, double C_min, std::size_t d, std::size_t support_size, double psi_bar,
                                double delta_tail) {
    ErrorBounds b;
    b.est_err_bound = minimum_weight_threshold(lambda, C_min, d, support_size);
    b.payoff_eps = b.est_err_bound * std::sqrt(static_cast<double>(d)) * psi_bar + psi_bar * delta_tail;
    return b;
}

/// Largest ||psi_S(x)||_2 over the rows of the design.
inline double feature_norm_bound(const Eigen::MatrixXd& design, const std::vector<std::size_t>& support_coords) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < design.rows(); ++s) {
        double sq = 0.0;
        for (std::size_t c : support_coords) {
            const double v = design(s, static_cast<Eigen::Index>(c));
            sq += v * v;
        }
        worst = std::max(worst, std::sqrt(sq));
    }
    return worst;
}

/// Lambda_min of a possibly non-symmetric block via its symmetric part, which
/// is what bounds v^T H v from below.
inline double min_eigen_symmetric_part(const Eigen::MatrixXd& A) {
    if (A.rows() == 0) throw NotApplicable("empty block");
    const Eigen::MatrixXd sym = 0.5 * (A + A.transpose());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

struct HatSummary {
    double C_min_hat = 0.0;
    double incoherence_hat = 0.0;
    bool eigen_ok = false;       // Lambda_min(H^_SS) >= C_min / 2
    bool incoherence_ok = false;  // ||H^_ScS H^_SS^{-1}||_inf <= 1 - alpha / 2
};

inline HatSummary summarize_hat(const HBlocks& hat, double C_min, double alpha) {
    HatSummary h;
    h.C_min_hat = min_eigen_symmetric_part(hat.H_SS);
    h.eigen_ok = h.C_min_hat >= C_min / 2.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hat.H_SS);
    if (lu.isInvertible()) {
        if (hat.H_ScS.rows() > 0)
            h.incoherence_hat = (hat.H_ScS * lu.inverse()).cwiseAbs().rowwise().sum().maxCoeff();
        h.incoherence_ok = h.incoherence_hat <= 1.0 - alpha / 2.0;
    } else {
        h.incoherence_hat = std::numeric_limits<double>::infinity();
    }
    return h;
}

struct HatFrequency {
    std::size_t replications = 0;
    double eigen_rate = 0.0;
    double incoherence_rate = 0.0;
    double joint_rate = 0.0;
};

/// Monte-Carlo frequency with which the noisy Gram matrix keeps half the
/// population eigenvalue and half the incoherence margin. Every replication
/// draws a fresh white-box dataset; C_min and alpha come from that same
/// dataset's clean H.
inline HatFrequency hat_frequency(const GameSpec& g, const BasisSet& basis, const NoiseModel& noise, std::size_t i,
                                  std::size_t N, std::size_t replications, std::uint64_t seed) {
    if (g.neighbors.at(i).empty()) throw NotApplicable("player has no in-neighbors");
    HatFrequency f;
    f.replications = replications;
    std::size_t eig = 0, inc = 0, both = 0;
    const auto coords = support_coordinates(g.n, i, basis.r(), g.neighbors[i]);
    for (std::size_t rep = 0; rep < replications; ++rep) {
        const auto s = build_sample_set(g, basis, noise, N, derive_seed(seed, stream::replication, rep), 0, true);
        const auto reg = assemble_regression(s, basis, i);
        const auto clean = compute_H(reg.design, coords);
        const auto a1 = check_assumption1(clean.H_SS);
        if (!a1.pass) continue;
        const auto a2 = check_assumption2(clean.H_ScS, clean.H_SS);
        const auto hat = compute_H_hat(reg.design, gamma_matrix(s, i, static_cast<std::size_t>(reg.design.cols())), coords);
        const auto h = summarize_hat(hat, a1.C_min, a2.alpha);
        eig += h.eigen_ok;
        inc += h.incoherence_ok;
        both += h.eigen_ok && h.incoherence_ok;
    }
    if (replications) {
        const double R = static_cast<double>(replications);
        f.eigen_rate = static_cast<double>(eig) / R;
        f.incoherence_rate = static_cast<double>(inc) / R;
        f.joint_rate = static_cast<double>(both) / R;
    }
    return f;
}

struct PlayerDiagnostics {
    std::size_t player = 0;
    std::size_t support_size = 0;
    double lambda = 0.0;
    double budget_C = 0.0;
    double delta_tail = 0.0;
    double min_weight = 0.0;
    double feature_norm_bound = 0.0;
    std::optional<double> C_min;
    std::optional<double> incoherence;
    std::optional<double> alpha;
    std::optional<double> Delta;
    std::optional<double> g_threshold;
    std::optional<double> est_err_bound;
    std::optional<double> payoff_eps;
    std::optional<HatSummary> hat;
    Verdict a1 = Verdict::NotApplicable;
    Verdict a2 = Verdict::NotApplicable;
    Verdict a3 = Verdict::NotApplicable;
    Verdict lambda_ok = Verdict::NotApplicable;

    /// A1, A2, A3 and lambda > g all hold.
    bool all_pass() const {
        return a1 == Verdict::Pass && a2 == Verdict::Pass && a3 == Verdict::Pass && lambda_ok == Verdict::Pass;
    }
};

struct DiagnoseOptions {
    double lambda = 0.0;
    /// Budget C; 0 means use each player's true ||beta*_i||_1.
    double budget_C = 0.0;
    /// sigma for g; negative means take it from the sample metadata (0 if absent).
    double sigma = -1.0;
    /// Tail bound delta; negative means compute it from the game's tails.
    double delta_tail = -1.0;
};

struct DiagnosticsReport {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t N = 0;
    std::size_t r = 0;
    double psi_bar = 1.0;
    double sigma = 0.0;
    bool white_box = false;
    std::vector<PlayerDiagnostics> players;
};

/// All assumption quantities for player i on its true support, evaluated on
/// an already assembled design.
inline PlayerDiagnostics diagnose_player(const GameSpec& g, const BasisSet& basis, const Eigen::MatrixXd& design,
                                         std::size_t i, double lambda, double budget_C, double sigma, double delta_tail,
                                         const Eigen::MatrixXd* gamma = nullptr) {
    PlayerDiagnostics pd;
    pd.player = i;
    pd.lambda = lambda;
    pd.support_size = g.neighbors.at(i).size();
    pd.budget_C = budget_C;
    pd.delta_tail = delta_tail;
    pd.min_weight = g.min_weight(i);
    const std::size_t N = static_cast<std::size_t>(design.rows());
    const auto coords = support_coordinates(g.n, i, basis.r(), g.neighbors[i]);
    pd.feature_norm_bound = feature_norm_bound(design, coords);
    if (coords.empty()) return pd;

    const auto blocks = compute_H(design, coords);
    const auto a1 = check_assumption1(blocks.H_SS);
    pd.C_min = a1.C_min;
    pd.a1 = verdict_of(a1.pass);
    if (!a1.pass) return pd;  // A2, A3 and the bounds all need an invertible block

    try {
        const auto a2 = check_assumption2(blocks.H_ScS, blocks.H_SS);
        pd.incoherence = a2.incoherence;
        pd.alpha = a2.alpha;
        pd.a2 = verdict_of(a2.pass);
    } catch (const NotApplicable&) {
        pd.a2 = Verdict::NotApplicable;
    }
    if (const auto a3 = check_assumption3(g, i, lambda, a1.C_min, g.d)) {
        pd.Delta = a3->Delta;
        pd.a3 = verdict_of(a3->pass);
    }
    if (pd.alpha && g.n > g.d) {
        pd.g_threshold = lambda_threshold(basis.psi_bar(), g.n, delta_tail, N, g.d, budget_C, *pd.alpha, sigma);
        pd.lambda_ok = verdict_of(lambda > *pd.g_threshold);
    }
    const auto eb = error_bounds(lambda, a1.C_min, g.d, pd.support_size, basis.psi_bar(), delta_tail);
    pd.est_err_bound = eb.est_err_bound;
    pd.payoff_eps = eb.payoff_eps;
    if (gamma && pd.alpha) pd.hat = summarize_hat(compute_H_hat(design, *gamma, coords), a1.C_min, *pd.alpha);
    return pd;
}

inline DiagnosticsReport diagnose(const GameSpec& g, const SampleSet& samples, const BasisSet& basis,
                                  const DiagnoseOptions& opt) {
    if (samples.players() != g.n) throw DataError("samples and game disagree on the number of players");
    DiagnosticsReport rep;
    rep.n = g.n;
    rep.d = g.d;
    rep.N = samples.size();
    rep.r = basis.r();
    rep.psi_bar = basis.psi_bar();
    rep.sigma = opt.sigma >= 0.0 ? opt.sigma : (samples.meta.noise ? samples.meta.noise->sigma : 0.0);
    rep.white_box = samples.meta.retained.has_value();
    for (std::size_t i = 0; i < g.n; ++i) {
        const auto reg = assemble_regression(samples, basis, i);
        const double C = opt.budget_C > 0.0 ? opt.budget_C : g.l1_norm(i, basis.r());
        const double delta = opt.delta_tail >= 0.0 ? opt.delta_tail : g.tail_bound(i, basis.r());
        std::optional<Eigen::MatrixXd> gamma;
        if (rep.white_box) gamma = gamma_matrix(samples, i, static_cast<std::size_t>(reg.design.cols()));
        rep.players.push_back(diagnose_player(g, basis, reg.design, i, opt.lambda, C, rep.sigma, delta,
                                              gamma ? &*gamma : nullptr));
    }
    return rep;
}

inline nlohmann::json to_json(const PlayerDiagnostics& p) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
    nlohmann::json j = {{"player", p.player + 1},
                        {"support_size", p.support_size},
                        {"lambda", p.lambda},
                        {"budget_C", p.budget_C},
                        {"delta_tail", p.delta_tail},
                        {"min_weight", p.min_weight},
                        {"feature_norm_bound", p.feature_norm_bound},
                        {"C_min", opt(p.C_min)},
                        {"incoherence", opt(p.incoherence)},
                        {"alpha", opt(p.alpha)},
                        {"Delta", opt(p.Delta)},
                        {"g_threshold", opt(p.g_threshold)},
                        {"est_err_bound", opt(p.est_err_bound)},
                        {"payoff_eps", opt(p.payoff_eps)},
                        {"verdicts",
                         {{"A1", verdict_name(p.a1)},
                          {"A2", verdict_name(p.a2)},
                          {"A3", verdict_name(p.a3)},
                          {"lambda", verdict_name(p.lambda_ok)}}}};
    if (p.hat)
        j["H_hat"] = {{"C_min_hat", p.hat->C_min_hat},
                      {"incoherence_hat", p.hat->incoherence_hat},
                      {"eigen_ok", p.hat->eigen_ok},
                      {"incoherence_ok", p.hat->incoherence_ok}};
    else
        j["H_hat"] = nullptr;
    return j;
}

inline nlohmann::json to_json(const DiagnosticsReport& r) {
    nlohmann::json players = nlohmann::json::array();
    for (const auto& p : r.players) players.push_back(to_json(p));
    return {{"n", r.n},
            {"d", r.d},
            {"n_samples", r.N},
            {"r", r.r},
            {"psi_bar", r.psi_bar},
            {"sigma", r.sigma},
            {"white_box", r.white_box},
            {"note", "H_hat is computed from its defining sum (1/N) sum (psi psi^T + psi gamma^T); its expectation over "
                     "gamma is H, not the other way round"},
            {"players", players}};
}

/// Fixed-width PASS/FAIL table, one row per player.
inline std::string render_table(const DiagnosticsReport& r) {
    auto num = [](const std::optional<double>& v) {
        if (!v) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", *v);
        return std::string(buf);
    };
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-7s %-9s %-9s %-9s %-9s %-5s %-5s %-5s %-6s\n", "player", "C_min", "alpha",
                  "Delta", "g", "A1", "A2", "A3", "lambda");
    out += line;
    for (const auto& p : r.players) {
        std::snprintf(line, sizeof(line), "%-7zu %-9s %-9s %-9s %-9s %-5s %-5s %-5s %-6s\n", p.player + 1,
                      num(p.C_min).c_str(), num(p.alpha).c_str(), num(p.Delta).c_str(), num(p.g_threshold).c_str(),
                      verdict_name(p.a1).c_str(), verdict_name(p.a2).c_str(), verdict_name(p.a3).c_str(),
                      verdict_name(p.lambda_ok).c_str());
        out += line;
    }
    return out;
}

}  // namespace gamelearn

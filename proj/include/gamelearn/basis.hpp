#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/error.hpp"

namespace gamelearn {

/// Joint actions are stored one play per row; rows are contiguous so a single
/// joint action can be passed around as a span.
using ActionMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TrigKind { CosCos = 0, CosSin = 1, SinCos = 2, SinSin = 3 };

/// One product term cos/sin(2*pi*l*x_i) * cos/sin(2*pi*m*x_j).
struct FourierTerm {
    int l = 1;
    int m = 1;
    TrigKind kind = TrigKind::CosCos;
};

/// Maps a 1-based basis index to its Fourier term.
///
/// Indices 1..4*order^2 run lexicographically over (l, m, kind) with
/// l, m in 1..order. Indices past that continue shell by shell: shell s holds
/// the pairs with max(l, m) == s, again in lexicographic order, so the first
/// 4*s^2 indices always cover {1..s}^2. The extension is only used to
/// materialize coefficient tails beyond the retained basis.
inline FourierTerm fourier_term(std::size_t k, int order) {
    if (k == 0) throw IndexError("basis index is 1-based");
    if (order < 1) throw ArgumentError("fourier order must be >= 1");
    const std::size_t zero = k - 1;
    const auto ord = static_cast<std::size_t>(order);
    if (zero < 4 * ord * ord) {
        const std::size_t pair = zero / 4;
        return {static_cast<int>(pair / ord) + 1, static_cast<int>(pair % ord) + 1,
                static_cast<TrigKind>(zero % 4)};
    }
    auto shell = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k) / 4.0)));
    while (4 * shell * shell < k) ++shell;
    while (shell > 1 && 4 * (shell - 1) * (shell - 1) >= k) --shell;
    const std::size_t offset = zero - 4 * (shell - 1) * (shell - 1);
    const std::size_t pair = offset / 4;
    const auto kind = static_cast<TrigKind>(offset % 4);
    const int s = static_cast<int>(shell);
    if (pair + 1 < shell) return {static_cast<int>(pair) + 1, s, kind};
    return {s, static_cast<int>(pair - (shell - 1)) + 1, kind};
}

/// Inverse of fourier_term for terms inside the retained block.
inline std::size_t fourier_index(int l, int m, TrigKind kind, int order) {
    if (l < 1 || m < 1 || l > order || m > order)
        throw IndexError("fourier frequency outside retained order");
    return (static_cast<std::size_t>(l - 1) * order + static_cast<std::size_t>(m - 1)) * 4
           + static_cast<std::size_t>(kind) + 1;
}

inline double eval_fourier_term(const FourierTerm& t, double xi, double xj) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double a = two_pi * t.l * xi;
    const double b = two_pi * t.m * xj;
    switch (t.kind) {
        case TrigKind::CosCos: return std::cos(a) * std::cos(b);
        case TrigKind::CosSin: return std::cos(a) * std::sin(b);
        case TrigKind::SinCos: return std::sin(a) * std::cos(b);
        case TrigKind::SinSin: return std::sin(a) * std::sin(b);
    }
    return 0.0;
}

/// The r pairwise basis functions psi_k(x_i, x_j) shared by the generator,
/// the oracle and the learner. Immutable once built.
class BasisSet {
public:
    enum class Kind { FourierPairwise, Custom };

    /// Custom evaluator, called with a 1-based index k in 1..r.
    using Evaluator = std::function<double(std::size_t, double, double)>;

    static BasisSet fourier(int order) {
        if (order < 1) throw ArgumentError("fourier order must be >= 1");
        BasisSet b;
        b.kind_ = Kind::FourierPairwise;
        b.order_ = order;
        b.r_ = 4 * static_cast<std::size_t>(order) * static_cast<std::size_t>(order);
        b.psi_bar_ = 1.0;
        return b;
    }

    /// psi_bar is never inferred: the caller states the sup-norm bound.
    static BasisSet custom(std::size_t r, double psi_bar, Evaluator f) {
        if (r < 1) throw ArgumentError("custom basis needs r >= 1");
        if (!(psi_bar > 0.0) || !std::isfinite(psi_bar))
            throw ArgumentError("custom basis needs a finite psi_bar > 0");
        if (!f) throw ArgumentError("custom basis needs an evaluator");
        BasisSet b;
        b.kind_ = Kind::Custom;
        b.r_ = r;
        b.psi_bar_ = psi_bar;
        b.eval_ = std::move(f);
        return b;
    }

    Kind kind() const noexcept { return kind_; }
    int order() const noexcept { return order_; }
    std::size_t r() const noexcept { return r_; }
    double psi_bar() const noexcept { return psi_bar_; }

    /// Largest index accepted by eval_extended.
    std::size_t capacity() const noexcept {
        return kind_ == Kind::FourierPairwise ? static_cast<std::size_t>(-1) : r_;
    }

    double eval(std::size_t k, double xi, double xj) const {
        if (k < 1 || k > r_) throw IndexError("basis index " + std::to_string(k) + " outside 1.." + std::to_string(r_));
        return eval_unchecked(k, xi, xj);
    }

    /// Like eval, but for the Fourier family also accepts k > r (tail terms).
    double eval_extended(std::size_t k, double xi, double xj) const {
        if (k < 1 || k > capacity())
            throw IndexError("basis index " + std::to_string(k) + " outside 1.." + std::to_string(capacity()));
        return eval_unchecked(k, xi, xj);
    }

    /// Writes psi_1..psi_r for the pair into out[0..r).
    void eval_all(double xi, double xj, std::span<double> out) const {
        if (out.size() < r_) throw ArgumentError("output span shorter than r");
        if (kind_ == Kind::Custom) {
            for (std::size_t k = 1; k <= r_; ++k) out[k - 1] = eval_(k, xi, xj);
            return;
        }
        thread_local std::vector<double> ci, si, cj, sj;
        trig_table(xi, ci, si);
        trig_table(xj, cj, sj);
        fill_products(ci, si, cj, sj, out);
    }

    bool operator==(const BasisSet& o) const {
        return kind_ == o.kind_ && order_ == o.order_ && r_ == o.r_ && psi_bar_ == o.psi_bar_;
    }

private:
    friend class FeatureBuilder;

    BasisSet() = default;

    double eval_unchecked(std::size_t k, double xi, double xj) const {
        if (kind_ == Kind::Custom) return eval_(k, xi, xj);
        return eval_fourier_term(fourier_term(k, order_), xi, xj);
    }

    void trig_table(double x, std::vector<double>& c, std::vector<double>& s) const {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        c.resize(static_cast<std::size_t>(order_));
        s.resize(static_cast<std::size_t>(order_));
        for (int l = 1; l <= order_; ++l) {
            c[l - 1] = std::cos(two_pi * l * x);
            s[l - 1] = std::sin(two_pi * l * x);
        }
    }

    void fill_products(std::span<const double> ci, std::span<const double> si, std::span<const double> cj,
                       std::span<const double> sj, std::span<double> out) const {
        std::size_t idx = 0;
        for (int l = 0; l < order_; ++l) {
            for (int m = 0; m < order_; ++m) {
                out[idx++] = ci[l] * cj[m];
                out[idx++] = ci[l] * sj[m];
                out[idx++] = si[l] * cj[m];
                out[idx++] = si[l] * sj[m];
            }
        }
    }

    Kind kind_ = Kind::FourierPairwise;
    int order_ = 0;
    std::size_t r_ = 0;
    double psi_bar_ = 1.0;
    Evaluator eval_;
};

/// psi_k(xi, xj), k 1-based in 1..r.
inline double eval_basis(const BasisSet& b, std::size_t k, double xi, double xj) {
    return b.eval(k, xi, xj);
}

/// Builds feature vectors for one joint action at a time. Caches the per-player
/// trigonometric tables so a row costs n*order trig calls instead of n*r.
class FeatureBuilder {
public:
    explicit FeatureBuilder(const BasisSet& b) : basis_(b) {}

    std::size_t length(std::size_t n) const { return basis_.r() * (n - 1); }

    /// Fills out with psi(x) for player i (0-based). Layout: neighbor j
    /// ascending with i skipped, then k ascending; entry (j, k) sits at
    /// slot(j) * r + (k - 1) where slot(j) = j - (j > i).
    void write(std::size_t i, std::span<const double> x, std::span<double> out) {
        const std::size_t n = x.size();
        if (n < 2) throw ArgumentError("feature vector needs at least two players");
        if (i >= n) throw IndexError("player index out of range");
        const std::size_t r = basis_.r();
        if (out.size() < r * (n - 1)) throw ArgumentError("feature output too short");
        if (basis_.kind() == BasisSet::Kind::Custom) {
            std::size_t slot = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                basis_.eval_all(x[i], x[j], out.subspan(slot * r, r));
                ++slot;
            }
            return;
        }
        load(x);
        const std::size_t ord = static_cast<std::size_t>(basis_.order());
        std::span<const double> ci(cos_.data() + i * ord, ord), si(sin_.data() + i * ord, ord);
        std::size_t slot = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            basis_.fill_products(ci, si, std::span<const double>(cos_.data() + j * ord, ord),
                                 std::span<const double>(sin_.data() + j * ord, ord), out.subspan(slot * r, r));
            ++slot;
        }
    }

    /// Prepares trig tables for x so repeated write() calls for different
    /// players on the same joint action reuse them.
    void load(std::span<const double> x) {
        if (basis_.kind() != BasisSet::Kind::FourierPairwise) return;
        if (loaded_.size() == x.size() && std::equal(loaded_.begin(), loaded_.end(), x.begin())) return;
        const std::size_t ord = static_cast<std::size_t>(basis_.order());
        cos_.resize(x.size() * ord);
        sin_.resize(x.size() * ord);
        constexpr double two_pi = 2.0 * std::numbers::pi;
        for (std::size_t j = 0; j < x.size(); ++j) {
            for (std::size_t l = 1; l <= ord; ++l) {
                cos_[j * ord + l - 1] = std::cos(two_pi * static_cast<double>(l) * x[j]);
                sin_[j * ord + l - 1] = std::sin(two_pi * static_cast<double>(l) * x[j]);
            }
        }
        loaded_.assign(x.begin(), x.end());
    }

private:
    const BasisSet& basis_;
    std::vector<double> cos_, sin_, loaded_;
};

/// Flat position of coefficient (j, k) in player i's feature vector.
/// j and i are 0-based players, k is the 1-based basis index.
inline std::size_t flat_index(std::size_t i, std::size_t j, std::size_t k, std::size_t r) {
    if (j == i) throw IndexError("a player is never its own neighbor");
    return (j - (j > i ? 1 : 0)) * r + (k - 1);
}

/// Player owning flat slot `pos` of player i's feature vector.
inline std::size_t neighbor_of_slot(std::size_t i, std::size_t pos, std::size_t r) {
    const std::size_t slot = pos / r;
    return slot + (slot >= i ? 1 : 0);
}

inline Eigen::VectorXd feature_vector(const BasisSet& b, std::size_t i, std::span<const double> x) {
    FeatureBuilder fb(b);
    Eigen::VectorXd out(static_cast<Eigen::Index>(fb.length(x.size())));
    fb.write(i, x, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

inline nlohmann::json to_json(const BasisSet& b) {
    if (b.kind() == BasisSet::Kind::FourierPairwise) return {{"kind", "fourier"}, {"order", b.order()}};
    return {{"kind", "custom"}, {"r", b.r()}, {"psi_bar", b.psi_bar()}};
}

/// Custom bases are code, so JSON only carries their metadata; pass the
/// evaluator to rebuild one.
inline BasisSet basis_from_json(const nlohmann::json& j, BasisSet::Evaluator custom = {}) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "fourier") return BasisSet::fourier(j.at("order").get<int>());
    if (kind == "custom") {
        if (!custom) throw ArgumentError("custom basis metadata needs an evaluator to be rebuilt");
        return BasisSet::custom(j.at("r").get<std::size_t>(), j.at("psi_bar").get<double>(), std::move(custom));
    }
    throw ArgumentError("unknown basis kind '" + kind + "'");
}

/// Parses the CLI spelling "fourier:ORDER".
inline BasisSet parse_basis(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    if (kind != "fourier" || colon == std::string::npos)
        throw ArgumentError("basis must be written fourier:ORDER, got '" + text + "'");
    std::size_t used = 0;
    int order = 0;
    try {
        order = std::stoi(text.substr(colon + 1), &used);
    } catch (const std::exception&) {
        throw ArgumentError("bad fourier order in '" + text + "'");
    }
    if (used != text.size() - colon - 1) throw ArgumentError("bad fourier order in '" + text + "'");
    return BasisSet::fourier(order);
}

/// Fourier order with 4*order^2 == r, or throws.
inline int fourier_order_for(std::size_t r) {
    for (int m = 1; 4 * static_cast<std::size_t>(m) * static_cast<std::size_t>(m) <= r; ++m)
        if (4 * static_cast<std::size_t>(m) * static_cast<std::size_t>(m) == r) return m;
    throw ArgumentError("r = " + std::to_string(r) + " is not 4*m^2 for the fourier basis");
}

}  // namespace gamelearn

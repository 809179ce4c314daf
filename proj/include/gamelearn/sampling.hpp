#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamelearn/basis.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/game.hpp"
#include "gamelearn/io.hpp"
#include "gamelearn/rng.hpp"

namespace gamelearn {

/// Zero-mean sub-Gaussian noise with variance proxy sigma^2.
/// Gaussian is N(0, sigma^2), UniformBounded is U[-sigma, sigma] and
/// RademacherScaled is +-sigma; all three have proxy at most sigma^2.
struct NoiseModel {
    enum class Family { Gaussian, UniformBounded, RademacherScaled };

    double sigma = 0.0;
    Family family = Family::Gaussian;

    double draw(Rng& rng) const {
        switch (family) {
            case Family::Gaussian: return sigma * std::normal_distribution<double>(0.0, 1.0)(rng);
            case Family::UniformBounded: return sigma * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
            case Family::RademacherScaled: return std::bernoulli_distribution(0.5)(rng) ? sigma : -sigma;
        }
        return 0.0;
    }

    void validate() const {
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ArgumentError("noise sigma must be finite and >= 0");
    }

    bool operator==(const NoiseModel&) const = default;
};

inline std::string family_name(NoiseModel::Family f) {
    switch (f) {
        case NoiseModel::Family::Gaussian: return "gaussian";
        case NoiseModel::Family::UniformBounded: return "uniform";
        case NoiseModel::Family::RademacherScaled: return "rademacher";
    }
    return "gaussian";
}

inline NoiseModel::Family parse_family(const std::string& s) {
    if (s == "gaussian") return NoiseModel::Family::Gaussian;
    if (s == "uniform") return NoiseModel::Family::UniformBounded;
    if (s == "rademacher") return NoiseModel::Family::RademacherScaled;
    throw ArgumentError("unknown noise family '" + s + "'");
}

/// Basis-noise draws gamma kept by a white-box oracle. For player i only the
/// coordinates that reach the payoff are drawn (j in S_i, k <= r); `coords`
/// holds their flat feature positions and `values` is N x coords.size().
struct RetainedNoise {
    std::vector<std::vector<std::size_t>> coords;
    std::vector<Eigen::MatrixXd> values;
};

struct SampleMeta {
    std::optional<std::uint64_t> seed;
    std::optional<NoiseModel> noise;
    std::size_t tail_truncation = 0;
    nlohmann::json basis;  // null when unknown (tabular data)
    std::string normalization = "none";
    std::optional<RetainedNoise> retained;
};

/// N joint actions with every player's noisy payoff, the learner-visible data.
struct SampleSet {
    ActionMatrix actions;    // N x n, rows are plays
    Eigen::MatrixXd payoffs;  // N x n, column i is u~_i
    SampleMeta meta;

    std::size_t size() const { return static_cast<std::size_t>(actions.rows()); }
    std::size_t players() const { return static_cast<std::size_t>(actions.cols()); }

    std::span<const double> action(std::size_t s) const {
        return {actions.data() + s * players(), players()};
    }

    void validate() const {
        if (actions.rows() != payoffs.rows() || actions.cols() != payoffs.cols())
            throw DataError("actions and payoffs disagree on shape");
        if (!payoffs.allFinite()) throw DataError("non-finite payoff");
        if (!actions.allFinite()) throw DataError("non-finite action");
    }
};

/// N i.i.d. joint actions uniform on [0,1]^n.
inline ActionMatrix draw_actions(std::size_t n, std::size_t N, std::uint64_t seed) {
    if (N < 1) throw ArgumentError("need at least one sample");
    Rng rng(derive_seed(seed, stream::actions));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ActionMatrix x(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
    for (Eigen::Index s = 0; s < x.rows(); ++s)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(s, j) = unif(rng);
    return x;
}

/// One call of the noisy black-box oracle: u~_i(x) = sum_{j in S_i} sum_k
/// beta*_{ijk} (psi_k + gamma_k), with fresh gamma for every (j, k <= T).
/// When gamma_out is non-empty it receives the draws for k <= basis.r in
/// (neighbor, k) order.
inline double noisy_payoff(const GameSpec& g, const BasisSet& basis, const NoiseModel& noise, std::size_t i,
                           std::span<const double> x, Rng& rng, std::size_t tail_truncation,
                           std::span<double> gamma_out = {}) {
    if (tail_truncation < basis.r()) throw ArgumentError("tail_truncation must be >= basis r");
    if (i >= g.n || x.size() != g.n) throw IndexError("player or action size mismatch");
    const std::size_t r = basis.r();
    if (!gamma_out.empty() && gamma_out.size() != g.neighbors[i].size() * r)
        throw ArgumentError("gamma buffer must hold |S_i| * r draws");
    double u = 0.0;
    std::size_t slot = 0;
    for (std::size_t j : g.neighbors[i]) {
        for (std::size_t k = 1; k <= tail_truncation; ++k) {
            const double gamma = noise.draw(rng);
            if (!gamma_out.empty() && k <= r) gamma_out[slot * r + k - 1] = gamma;
            const double b = g.coefficient(i, j, k);
            if (b == 0.0) continue;
            u += b * basis.eval_extended(k, x[i], x[j]);
            if (gamma != 0.0) u += b * gamma;
        }
        ++slot;
    }
    return u;
}

/// Composes draw_actions and noisy_payoff. Player i draws its noise from its
/// own stream derive_seed(seed, noise, i), so columns can be built in any
/// order (or in parallel) with identical results.
inline SampleSet build_sample_set(const GameSpec& g, const BasisSet& basis, const NoiseModel& noise, std::size_t N,
                                  std::uint64_t seed, std::size_t tail_truncation = 0, bool retain_noise = false) {
    noise.validate();
    if (tail_truncation == 0) tail_truncation = std::max(basis.r(), g.r_true);
    SampleSet out;
    out.actions = draw_actions(g.n, N, seed);
    out.payoffs.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(g.n));
    out.meta.seed = seed;
    out.meta.noise = noise;
    out.meta.tail_truncation = tail_truncation;
    out.meta.basis = to_json(basis);
    const std::size_t r = basis.r();
    RetainedNoise kept;
    if (retain_noise) {
        kept.coords.resize(g.n);
        kept.values.resize(g.n);
    }
    std::vector<double> gamma;
    for (std::size_t i = 0; i < g.n; ++i) {
        Rng rng(derive_seed(seed, stream::noise, i));
        const std::size_t width = g.neighbors[i].size() * r;
        if (retain_noise) {
            for (std::size_t j : g.neighbors[i])
                for (std::size_t k = 1; k <= r; ++k) kept.coords[i].push_back(flat_index(i, j, k, r));
            kept.values[i].resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(width));
            gamma.assign(width, 0.0);
        }
        for (std::size_t s = 0; s < N; ++s) {
            out.payoffs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = noisy_payoff(
                g, basis, noise, i, out.action(s), rng, tail_truncation,
                retain_noise ? std::span<double>(gamma) : std::span<double>{});
            if (retain_noise)
                for (std::size_t c = 0; c < width; ++c)
                    kept.values[i](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) = gamma[c];
        }
    }
    if (retain_noise) out.meta.retained = std::move(kept);
    return out;
}

inline nlohmann::json meta_to_json(const SampleSet& s) {
    nlohmann::json j;
    j["n_samples"] = s.size();
    j["players"] = s.players();
    if (s.meta.seed) j["seed"] = *s.meta.seed;
    if (s.meta.noise) j["noise"] = {{"family", family_name(s.meta.noise->family)}, {"sigma", s.meta.noise->sigma}};
    j["tail_truncation"] = s.meta.tail_truncation;
    j["basis"] = s.meta.basis;
    j["normalization"] = s.meta.normalization;
    if (s.meta.retained) {
        nlohmann::json players = nlohmann::json::array();
        const auto& kept = *s.meta.retained;
        for (std::size_t i = 0; i < kept.coords.size(); ++i) {
            nlohmann::json rows = nlohmann::json::array();
            for (Eigen::Index r = 0; r < kept.values[i].rows(); ++r) {
                std::vector<double> row(static_cast<std::size_t>(kept.values[i].cols()));
                for (Eigen::Index c = 0; c < kept.values[i].cols(); ++c) row[static_cast<std::size_t>(c)] = kept.values[i](r, c);
                rows.push_back(row);
            }
            players.push_back({{"player", i + 1}, {"coords", kept.coords[i]}, {"values", rows}});
        }
        j["retained_noise"] = players;
    }
    return j;
}

inline void meta_from_json(const nlohmann::json& j, SampleSet& s) {
    if (j.contains("seed")) s.meta.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise"))
        s.meta.noise = NoiseModel{j.at("noise").at("sigma").get<double>(),
                                  parse_family(j.at("noise").at("family").get<std::string>())};
    s.meta.tail_truncation = j.value("tail_truncation", std::size_t{0});
    s.meta.basis = j.value("basis", nlohmann::json());
    s.meta.normalization = j.value("normalization", std::string("none"));
    if (j.contains("retained_noise")) {
        RetainedNoise kept;
        const auto& players = j.at("retained_noise");
        kept.coords.resize(s.players());
        kept.values.resize(s.players());
        for (const auto& p : players) {
            const auto i = p.at("player").get<std::size_t>() - 1;
            if (i >= s.players()) throw DataError("retained noise names an unknown player");
            kept.coords[i] = p.at("coords").get<std::vector<std::size_t>>();
            const auto& rows = p.at("values");
            if (rows.size() != s.size()) throw DataError("retained noise row count differs from samples");
            kept.values[i].resize(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(kept.coords[i].size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto row = rows[r].get<std::vector<double>>();
                if (row.size() != kept.coords[i].size()) throw DataError("retained noise row width mismatch");
                for (std::size_t c = 0; c < row.size(); ++c)
                    kept.values[i](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
            }
        }
        s.meta.retained = std::move(kept);
    }
}

namespace detail {

template <class Matrix>
std::string matrix_csv(const Matrix& m, const std::string& prefix) {
    std::string out;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += ',';
        out += prefix + std::to_string(c + 1);
    }
    out += '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            out += io::format_double(m(r, c));
        }
        out += '\n';
    }
    return out;
}

}  // namespace detail

inline std::string actions_csv(const ActionMatrix& a) { return detail::matrix_csv(a, "player_"); }
inline std::string payoffs_csv(const Eigen::MatrixXd& p) { return detail::matrix_csv(p, "u_"); }

/// Writes actions.csv, payoffs.csv and meta.json into dir.
inline void write_sample_set(const SampleSet& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::write_text(dir / "actions.csv", actions_csv(s.actions));
    io::write_text(dir / "payoffs.csv", payoffs_csv(s.payoffs));
    io::write_json(dir / "meta.json", meta_to_json(s));
}

/// Reads the CSV pair (and meta.json when present) verbatim, without any
/// normalization. Tabular data that needs rescaling goes through load_table.
inline SampleSet read_sample_set(const std::filesystem::path& dir) {
    const auto a = io::read_csv(dir / "actions.csv");
    const auto p = io::read_csv(dir / "payoffs.csv");
    if (a.header.size() != p.header.size())
        throw DataError("actions.csv has " + std::to_string(a.header.size()) + " players, payoffs.csv has "
                        + std::to_string(p.header.size()));
    if (a.rows.size() != p.rows.size())
        throw DataError("actions.csv has " + std::to_string(a.rows.size()) + " rows, payoffs.csv has "
                        + std::to_string(p.rows.size()));
    if (a.rows.empty()) throw DataError("no samples in " + dir.string());
    SampleSet s;
    const auto N = static_cast<Eigen::Index>(a.rows.size());
    const auto n = static_cast<Eigen::Index>(a.header.size());
    s.actions.resize(N, n);
    s.payoffs.resize(N, n);
    for (Eigen::Index r = 0; r < N; ++r)
        for (Eigen::Index c = 0; c < n; ++c) {
            s.actions(r, c) = a.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            s.payoffs(r, c) = p.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    if (std::filesystem::exists(dir / "meta.json")) meta_from_json(io::read_json(dir / "meta.json"), s);
    s.validate();
    return s;
}

}  // namespace gamelearn

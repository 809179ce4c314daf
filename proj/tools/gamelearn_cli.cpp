#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gamelearn/basis.hpp"
#include "gamelearn/diagnostics.hpp"
#include "gamelearn/error.hpp"
#include "gamelearn/experiments.hpp"
#include "gamelearn/game.hpp"
#include "gamelearn/ingest.hpp"
#include "gamelearn/io.hpp"
#include "gamelearn/learn.hpp"
#include "gamelearn/parallel.hpp"
#include "gamelearn/recovery.hpp"
#include "gamelearn/sampling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gamelearn;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitConvergence = 4;
constexpr int kExitMismatch = 5;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const fs::path& p) { return hex64(io::fnv1a(io::read_text(p))); }

/// Inputs, outputs and seeds of one run; written next to the outputs.
struct Manifest {
    std::vector<std::string> args;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;

    void input_dir(const fs::path& dir) {
        for (const char* f : {"actions.csv", "payoffs.csv", "meta.json"})
            if (fs::exists(dir / f)) inputs.push_back(dir / f);
    }

    void write(const fs::path& where) const {
        json in = json::object(), out = json::object();
        for (const auto& p : inputs) in[p.generic_string()] = file_hash(p);
        for (const auto& p : outputs) out[p.generic_string()] = file_hash(p);
        json j = {{"tool", "gamelearn"},
                  {"version", GAMELEARN_VERSION},
                  {"args", args},
                  {"cwd", fs::current_path().generic_string()},
                  {"seeds", seeds},
                  {"inputs", in},
                  {"outputs", out}};
        io::write_json(where, j);
    }
};

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

SampleSet read_samples(const fs::path& dir, const std::string& normalization) {
    if (fs::exists(dir / "meta.json")) return read_sample_set(dir);
    return load_table(dir / "actions.csv", dir / "payoffs.csv", parse_normalization(normalization));
}

std::pair<std::size_t, std::size_t> parse_shape(const std::string& s) {
    const auto x = s.find('x');
    try {
        if (x != std::string::npos) {
            std::size_t a = 0, b = 0;
            const auto rows = std::stoull(s.substr(0, x), &a);
            const auto cols = std::stoull(s.substr(x + 1), &b);
            if (a == x && b == s.size() - x - 1) return {rows, cols};
        }
    } catch (const std::logic_error&) {
    }
    throw ArgumentError("shape must be ROWSxCOLS, got '" + s + "'");
}

int run(const std::vector<std::string>& args);

struct Options {
    // generate
    std::size_t n = 0, d = 0, r = 0;
    double min_weight = 0.5;
    std::string tail = "zero";
    std::uint64_t seed = 0;
    std::string out;
    // sample
    std::string game_path;
    std::size_t n_samples = 0;
    double sigma = 0.0;
    std::string family = "gaussian";
    std::string out_dir;
    bool retain_noise = false;
    std::size_t tail_truncation = 0;
    // learn
    std::string samples_dir;
    std::string basis = "fourier:2";
    std::string lambda = "auto";
    double budget = std::numeric_limits<double>::infinity();
    double tau = -1.0;
    double tol = 1e-8;
    double delta = 0.0;
    std::size_t degree = 0;
    std::string dot;
    std::size_t jobs = default_jobs();
    std::string normalize = "minmax";
    std::size_t grid_size = 20;
    // diagnose
    double diag_lambda = 0.0;
    double diag_budget = 0.0;
    double diag_sigma = -1.0;
    double diag_delta = -1.0;
    std::string diag_basis;
    // sweep
    std::string config;
    // influence
    std::string result;
    // fixture
    std::string shape = "47x31";
    std::size_t fixture_r = 4;
    double fixture_weight = 1.0;
    // rerun
    std::string manifest;
};

int cmd_generate(const Options& o, Manifest& m) {
    const auto tail = parse_tail(o.tail);
    const auto basis = BasisSet::fourier(fourier_order_for(o.r));
    const auto g = generate_game(o.n, o.d, o.r, o.seed, o.min_weight, tail, to_json(basis));
    io::write_json(o.out, to_json(g));
    m.seeds["game"] = o.seed;
    m.outputs.push_back(o.out);
    m.write(manifest_for_file(o.out));
    std::cout << "wrote game with n=" << g.n << " d=" << g.d << " r=" << g.r_true << " to " << o.out << "\n";
    return 0;
}

int cmd_sample(const Options& o, Manifest& m) {
    const auto g = game_from_json(io::read_json(o.game_path));
    g.validate();
    m.inputs.push_back(o.game_path);
    const auto basis = basis_from_json(g.basis);
    const NoiseModel noise{o.sigma, parse_family(o.family)};
    const auto s = build_sample_set(g, basis, noise, o.n_samples, o.seed, o.tail_truncation, o.retain_noise);
    write_sample_set(s, o.out_dir);
    const fs::path dir(o.out_dir);
    m.seeds["samples"] = o.seed;
    for (const char* f : {"actions.csv", "payoffs.csv", "meta.json"}) m.outputs.push_back(dir / f);
    m.write(dir / "manifest.json");
    std::cout << "wrote " << s.size() << " samples for " << s.players() << " players to " << o.out_dir << "\n";
    return 0;
}

int cmd_learn(const Options& o, Manifest& m) {
    const fs::path dir(o.samples_dir);
    const auto samples = read_samples(dir, o.normalize);
    m.input_dir(dir);
    const auto basis = parse_basis(o.basis);
    LearnOptions lo;
    if (o.lambda != "auto") {
        try {
            std::size_t used = 0;
            lo.lambda = std::stod(o.lambda, &used);
            if (used != o.lambda.size()) throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
            throw ArgumentError("--lambda must be 'auto' or a number, got '" + o.lambda + "'");
        }
    }
    lo.budget_C = o.budget;
    lo.tau = o.tau;
    lo.tol = o.tol;
    lo.delta = o.delta;
    lo.d = o.degree;
    lo.jobs = o.jobs;
    lo.grid_size = o.grid_size;
    std::optional<GameSpec> truth;
    if (!o.game_path.empty()) {
        truth = game_from_json(io::read_json(o.game_path));
        truth->validate();
        m.inputs.push_back(o.game_path);
    }
    const auto res = learn_game(samples, basis, lo, truth ? &*truth : nullptr);
    auto j = to_json(res, basis, truth ? &*truth : nullptr);
    j["normalization"] = samples.meta.normalization;
    io::write_json(o.out, j);
    m.outputs.push_back(o.out);
    if (!o.dot.empty()) {
        io::write_text(o.dot, to_dot(res.recovery.graph));
        m.outputs.push_back(o.dot);
    }
    m.write(manifest_for_file(o.out));
    std::cout << "learned " << res.recovery.graph.edge_count() << " edges over " << samples.players() << " players";
    if (truth) std::cout << " (exact_match " << (j["exact_match"].get<bool>() ? "true" : "false") << ")";
    std::cout << "\n";
    return 0;
}

int cmd_diagnose(const Options& o, Manifest& m) {
    const auto g = game_from_json(io::read_json(o.game_path));
    g.validate();
    m.inputs.push_back(o.game_path);
    const fs::path dir(o.samples_dir);
    const auto samples = read_sample_set(dir);
    m.input_dir(dir);
    BasisSet basis = !o.diag_basis.empty()            ? parse_basis(o.diag_basis)
                     : !samples.meta.basis.is_null() ? basis_from_json(samples.meta.basis)
                                                      : basis_from_json(g.basis);
    DiagnoseOptions opt;
    opt.lambda = o.diag_lambda;
    opt.budget_C = o.diag_budget;
    opt.sigma = o.diag_sigma;
    opt.delta_tail = o.diag_delta;
    const auto rep = diagnose(g, samples, basis, opt);
    io::write_json(o.out, to_json(rep));
    m.outputs.push_back(o.out);
    m.write(manifest_for_file(o.out));
    std::cout << render_table(rep);
    return 0;
}

int cmd_sweep(const Options& o, Manifest& m) {
    const auto cfg = sweep_from_json(io::read_json(o.config));
    m.inputs.push_back(o.config);
    {
        const fs::path out(o.out);
        const auto config = fs::weakly_canonical(o.config);
        for (const auto& p : {out, fs::path(out).replace_filename(out.stem().string() + "_summary.json"),
                              fs::path(out).replace_filename(out.stem().string() + "_scaling.csv")})
            if (fs::weakly_canonical(p) == config) throw ArgumentError("sweep output would overwrite the config " + o.config);
    }
    m.seeds["base"] = cfg.defaults.base_seed;
    std::vector<CellResult> cells;
    for (const auto& c : cfg.cells()) {
        cells.push_back(run_cell(c, o.jobs));
        const auto& cr = cells.back();
        std::cout << "n=" << c.n << " d=" << c.d << " r=" << c.r() << " N=" << c.N << " sigma=" << c.sigma
                  << " lambda=" << c.lambda.label() << "  exact_recovery_rate=" << cr.exact_recovery_rate << "\n";
    }
    const fs::path out(o.out);
    io::write_text(out, cells_csv(cells));
    m.outputs.push_back(out);
    json summary = {{"cells", json::array()}};
    for (const auto& cr : cells) summary["cells"].push_back(to_json(cr));
    if (cfg.scaling) {
        CellConfig base = cfg.defaults;
        base.d = cfg.scaling->d;
        base.order = fourier_order_for(cfg.r.front());
        base.sigma = cfg.sigma.front();
        base.lambda = cfg.lambda.front();
        const auto sc = scaling_study(base, cfg.scaling->n, cfg.scaling->bisection, o.jobs);
        fs::path curve = out;
        curve.replace_filename(out.stem().string() + "_scaling.csv");
        io::write_text(curve, scaling_csv(sc));
        m.outputs.push_back(curve);
        summary["scaling"] = to_json(sc);
        for (const auto& p : sc.points)
            std::cout << "scaling n=" << p.n << " N*=" << p.N_star << (p.saturated ? " (saturated)" : "") << "\n";
    }
    fs::path js = out;
    js.replace_filename(out.stem().string() + "_summary.json");
    io::write_json(js, summary);
    m.outputs.push_back(js);
    m.write(manifest_for_file(out));
    return 0;
}

int cmd_influence(const Options& o, Manifest& m) {
    const auto j = io::read_json(o.result);
    m.inputs.push_back(o.result);
    if (!j.contains("graph")) throw DataError(o.result + " has no graph");
    const auto ranking = influence_ranking(graph_from_json(j.at("graph")));
    std::cout << render_ranking(ranking);
    const json out = {{"ranking", to_json(ranking)}};
    if (!o.out.empty()) {
        io::write_json(o.out, out);
        m.outputs.push_back(o.out);
        m.write(manifest_for_file(o.out));
    } else {
        std::cout << out.dump(2) << "\n";
    }
    return 0;
}

int cmd_fixture(const Options& o, Manifest& m) {
    const auto [rows, cols] = parse_shape(o.shape);
    const auto f = generate_fixture(rows, cols, o.seed, o.fixture_r, o.fixture_weight);
    const fs::path dir(o.out_dir);
    write_fixture(f, dir);
    m.seeds["fixture"] = o.seed;
    for (const char* name : {"actions.csv", "payoffs.csv", "truth.json"}) m.outputs.push_back(dir / name);
    m.write(dir / "manifest.json");
    std::cout << "wrote " << rows << "x" << cols << " fixture to " << o.out_dir << " (planted hub: player "
              << f.hub + 1 << ")\n";
    return 0;
}

/// Re-executes a manifest's command from its working directory and checks
/// that every recorded output hash is reproduced.
int cmd_rerun(const Options& o) {
    const auto j = io::read_json(o.manifest);
    const auto args = j.at("args").get<std::vector<std::string>>();
    if (!args.empty() && args.front() == "rerun") throw ArgumentError("a rerun manifest cannot be rerun");
    const auto expected = j.at("outputs");
    const auto previous = fs::current_path();
    fs::current_path(j.at("cwd").get<std::string>());
    const int rc = run(args);
    int status = rc;
    if (rc == 0) {
        for (const auto& [path, hash] : expected.items()) {
            const bool same = fs::exists(path) && file_hash(path) == hash.get<std::string>();
            std::cout << (same ? "identical  " : "DIFFERS    ") << path << "\n";
            if (!same) status = kExitMismatch;
        }
    }
    fs::current_path(previous);
    return status;
}

void print_error(const char* kind, const std::string& message, std::size_t row = 0, std::size_t col = 0) {
    json e = {{"error", kind}, {"message", message}};
    if (row) e["row"] = row;
    if (col) e["column"] = col;
    std::cerr << e.dump() << "\n";
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"Learn graphical games from payoff samples", "gamelearn"};
    app.set_version_flag("--version", GAMELEARN_VERSION);
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("generate", "Generate a random game");
    gen->add_option("--n", o.n, "players")->required();
    gen->add_option("--d", o.d, "in-neighbors per player")->required();
    gen->add_option("--r", o.r, "basis terms per edge (4*m^2)")->required();
    gen->add_option("--min-weight", o.min_weight, "smallest |coefficient|");
    gen->add_option("--tail", o.tail, "zero | powerlaw:COEF:EXPONENT");
    gen->add_option("--seed", o.seed);
    gen->add_option("--out", o.out, "game JSON")->required();

    auto* smp = app.add_subcommand("sample", "Draw noisy payoff samples from a game");
    smp->add_option("--game", o.game_path)->required();
    smp->add_option("--n-samples", o.n_samples)->required();
    smp->add_option("--sigma", o.sigma);
    smp->add_option("--family", o.family, "gaussian | uniform | rademacher");
    smp->add_option("--seed", o.seed);
    smp->add_option("--tail-truncation", o.tail_truncation, "basis terms evaluated per edge (0: automatic)");
    smp->add_flag("--retain-noise", o.retain_noise, "store the basis noise for white-box diagnostics");
    smp->add_option("--out-dir", o.out_dir)->required();

    auto* lrn = app.add_subcommand("learn", "Recover the game graph from samples");
    lrn->add_option("--samples", o.samples_dir, "directory with actions.csv and payoffs.csv")->required();
    lrn->add_option("--basis", o.basis, "fourier:ORDER");
    lrn->add_option("--lambda", o.lambda, "auto | VALUE");
    lrn->add_option("--budget", o.budget, "l1 budget C");
    lrn->add_option("--tau", o.tau, "support threshold (default 10*tol)");
    lrn->add_option("--tol", o.tol, "solver KKT tolerance");
    lrn->add_option("--delta", o.delta, "tail bound for --lambda auto");
    lrn->add_option("--d", o.degree, "in-degree bound for --lambda auto without --game");
    lrn->add_option("--game", o.game_path, "true game, for metrics and --lambda auto");
    lrn->add_option("--normalize", o.normalize, "minmax | zscore-logistic (tables without meta.json)");
    lrn->add_option("--grid-size", o.grid_size, "lambda grid length when auto falls back to a grid");
    lrn->add_option("--jobs", o.jobs);
    lrn->add_option("--out", o.out)->required();
    lrn->add_option("--dot", o.dot);

    auto* dia = app.add_subcommand("diagnose", "Check the recovery assumptions on the true support");
    dia->add_option("--game", o.game_path)->required();
    dia->add_option("--samples", o.samples_dir)->required();
    dia->add_option("--lambda", o.diag_lambda)->required();
    dia->add_option("--budget", o.diag_budget, "l1 budget C (0: true l1 norm)");
    dia->add_option("--sigma", o.diag_sigma, "noise scale (default: from meta.json)");
    dia->add_option("--delta", o.diag_delta, "tail bound (default: from the game)");
    dia->add_option("--basis", o.diag_basis, "fourier:ORDER (default: from meta.json)");
    dia->add_option("--out", o.out)->required();

    auto* swp = app.add_subcommand("sweep", "Run a grid of recovery experiments");
    swp->add_option("--config", o.config)->required();
    swp->add_option("--out", o.out, "long-format CSV")->required();
    swp->add_option("--jobs", o.jobs);

    auto* inf = app.add_subcommand("influence", "Rank players by out-degree in a learned graph");
    inf->add_option("--result", o.result)->required();
    inf->add_option("--out", o.out, "ranking JSON");

    auto* fix = app.add_subcommand("fixture", "Write a synthetic tabular data set from a planted hub game");
    fix->add_option("--shape", o.shape, "ROWSxCOLS");
    fix->add_option("--seed", o.seed);
    fix->add_option("--r-true", o.fixture_r, "nonzero basis terms per planted edge");
    fix->add_option("--min-weight", o.fixture_weight);
    fix->add_option("--out-dir", o.out_dir)->required();

    auto* rer = app.add_subcommand("rerun", "Re-execute a run manifest and compare outputs");
    rer->add_option("--manifest", o.manifest)->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    Manifest m;
    m.args = args;
    try {
        if (*gen) return cmd_generate(o, m);
        if (*smp) return cmd_sample(o, m);
        if (*lrn) return cmd_learn(o, m);
        if (*dia) return cmd_diagnose(o, m);
        if (*swp) return cmd_sweep(o, m);
        if (*inf) return cmd_influence(o, m);
        if (*fix) return cmd_fixture(o, m);
        if (*rer) return cmd_rerun(o);
    } catch (const ArgumentError& e) {
        print_error("usage", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        print_error("data", e.what(), e.row(), e.col());
        return kExitData;
    } catch (const IndexError& e) {
        print_error("data", e.what());
        return kExitData;
    } catch (const NotApplicable& e) {
        print_error("data", e.what());
        return kExitData;
    } catch (const json::exception& e) {
        print_error("data", e.what());
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        print_error("data", e.what());
        return kExitData;
    } catch (const ConvergenceError& e) {
        print_error("convergence", e.what());
        return kExitConvergence;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(std::vector<std::string>(argv + 1, argv + argc));
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
}

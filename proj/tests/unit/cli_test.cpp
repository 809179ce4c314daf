#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "gamelearn/game.hpp"
#include "gamelearn/io.hpp"

namespace fs = std::filesystem;
using namespace gamelearn;

namespace {

struct Cli {
    fs::path dir;

    explicit Cli(const std::string& name) : dir(fs::temp_directory_path() / ("gamelearn_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }

    int operator()(const std::string& args, const std::string& stderr_file = "err.txt") const {
        const std::string cmd = "cd '" + dir.string() + "' && GAMELEARN_JOBS=2 '" GAMELEARN_CLI "' " + args
                                + " > out.txt 2> " + stderr_file;
        const int rc = std::system(cmd.c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    }

    std::string read(const std::string& name) const { return io::read_text(dir / name); }
};

}  // namespace

TEST(Cli, TwoPlayerPipelineRecoversExactly) {
    Cli cli("two");
    ASSERT_EQ(cli("generate --n 2 --d 1 --r 4 --seed 1 --out game.json"), 0);
    ASSERT_EQ(cli("sample --game game.json --n-samples 200 --sigma 0 --seed 2 --out-dir data"), 0);
    ASSERT_EQ(cli("learn --samples data --lambda 0.001 --basis fourier:1 --game game.json --out result.json --dot g.dot"), 0);
    const auto j = io::read_json(cli.dir / "result.json");
    EXPECT_TRUE(j.at("exact_match").get<bool>());
    EXPECT_NE(cli.read("g.dot").find("->"), std::string::npos);
    ASSERT_EQ(cli("influence --result result.json --out rank.json"), 0);
    EXPECT_EQ(io::read_json(cli.dir / "rank.json").at("ranking").size(), 2u);
}

TEST(Cli, FixtureShapeAndHubRanksFirst) {
    Cli cli("fixture");
    ASSERT_EQ(cli("fixture --shape 47x31 --seed 5 --out-dir fx"), 0);
    const auto a = io::read_csv(cli.dir / "fx" / "actions.csv");
    EXPECT_EQ(a.header.size(), 31u);
    EXPECT_EQ(a.rows.size(), 47u);
    ASSERT_EQ(cli("learn --samples fx --out fx_result.json"), 0);
    ASSERT_EQ(cli("influence --result fx_result.json --out fx_rank.json"), 0);
    const auto truth = io::read_json(cli.dir / "fx" / "truth.json");
    const auto rank = io::read_json(cli.dir / "fx_rank.json").at("ranking");
    // the hub is the in-neighbor of every other player
    const auto g = game_from_json(truth);
    std::vector<std::size_t> out(g.n, 0);
    for (const auto& nb : g.neighbors)
        for (std::size_t j : nb) ++out[j];
    const std::size_t hub = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
    EXPECT_EQ(out[hub], g.n - 1);
    EXPECT_EQ(rank[0].at("player").get<std::size_t>(), hub + 1);
}

TEST(Cli, RerunsAreByteIdentical) {
    Cli cli("rerun");
    ASSERT_EQ(cli("generate --n 6 --d 2 --r 4 --seed 3 --out game.json"), 0);
    ASSERT_EQ(cli("sample --game game.json --n-samples 300 --sigma 0.1 --seed 4 --out-dir data"), 0);
    ASSERT_EQ(cli("learn --samples data --basis fourier:1 --out a.json"), 0);
    ASSERT_EQ(cli("learn --samples data --basis fourier:1 --out b.json"), 0);
    EXPECT_EQ(cli.read("a.json"), cli.read("b.json"));
    EXPECT_EQ(cli("rerun --manifest a.json.manifest.json"), 0);
    EXPECT_EQ(cli("rerun --manifest data/manifest.json"), 0);
    // tamper with the recorded output and the rerun must flag it
    io::write_text(cli.dir / "a.json", "{}");
    auto m = io::read_json(cli.dir / "a.json.manifest.json");
    for (auto& [k, v] : m.at("outputs").items()) v = "0000000000000000";
    io::write_json(cli.dir / "tampered.json", m);
    EXPECT_EQ(cli("rerun --manifest tampered.json"), 5);
}

TEST(Cli, ExitCodesAndStructuredErrors) {
    Cli cli("errors");
    EXPECT_EQ(cli("learn --out x.json"), 2);
    EXPECT_EQ(cli("nonsense"), 2);
    EXPECT_EQ(cli("generate --n 3 --d 3 --r 4 --out g.json"), 2);
    io::write_text(cli.dir / "actions.csv", "p1,p2\n0.1,0.2\n0.3,oops\n");
    io::write_text(cli.dir / "payoffs.csv", "u1,u2\n1,2\n3,4\n");
    EXPECT_EQ(cli("learn --samples . --lambda 0.1 --out r.json"), 3);
    const auto err = nlohmann::json::parse(cli.read("err.txt"));
    EXPECT_EQ(err.at("error"), "data");
    EXPECT_EQ(err.at("row"), 3);
    EXPECT_EQ(err.at("column"), 2);
    EXPECT_EQ(cli("learn --samples missing_dir --lambda 0.1 --out r.json"), 3);
}

TEST(Cli, SweepWritesLongFormatCsv) {
    Cli cli("sweep");
    io::write_text(cli.dir / "sweep.json",
                   R"({"n":[4],"d":[1],"r":[4],"N":[50,100],"sigma":[0.1],"lambda":["fixed:0.05"],"trials":3,"seed":1})");
    ASSERT_EQ(cli("sweep --config sweep.json --out sweep.csv"), 0);
    const auto csv = cli.read("sweep.csv");
    EXPECT_EQ(csv.rfind("n,d,r,N,sigma,lambda_rule,metric,value\n", 0), 0u);
    EXPECT_NE(csv.find("exact_recovery_rate"), std::string::npos);
    EXPECT_TRUE(fs::exists(cli.dir / "sweep.csv.manifest.json"));
}

TEST(Cli, DiagnoseReportsVerdicts) {
    Cli cli("diagnose");
    ASSERT_EQ(cli("generate --n 5 --d 2 --r 4 --seed 3 --out game.json"), 0);
    ASSERT_EQ(cli("sample --game game.json --n-samples 500 --sigma 0.1 --seed 4 --retain-noise --out-dir data"), 0);
    ASSERT_EQ(cli("diagnose --game game.json --samples data --lambda 0.05 --out diag.json"), 0);
    const auto j = io::read_json(cli.dir / "diag.json");
    EXPECT_EQ(j.at("players").size(), 5u);
    EXPECT_NE(cli.read("out.txt").find("A1"), std::string::npos);
}

TEST(Cli, SweepNeverOverwritesItsConfig) {
    Cli cli("sweep_clobber");
    const std::string cfg = R"({"n":[4],"d":[1],"r":[4],"N":[50],"sigma":[0.1],"lambda":["fixed:0.05"],"trials":2})";
    io::write_text(cli.dir / "s.json", cfg);
    ASSERT_EQ(cli("sweep --config s.json --out s.csv"), 0);
    EXPECT_EQ(cli.read("s.json"), cfg);
    EXPECT_TRUE(fs::exists(cli.dir / "s_summary.json"));
    io::write_text(cli.dir / "t_summary.json", cfg);
    EXPECT_EQ(cli("sweep --config t_summary.json --out t.csv"), 2);
    EXPECT_EQ(cli.read("t_summary.json"), cfg);
}

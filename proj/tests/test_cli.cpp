#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cli_app.hpp"

using namespace ogan;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("ogan_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    const auto b = read_file_bytes(p);
    return {b.begin(), b.end()};
}

}  // namespace

TEST(RunConfig, PrecedenceCliOverFileOverDefaults) {
    const auto dir = scratch("precedence");
    const std::string file = "# experiment\ntrain.epochs = 7\nsplit.fraction = 0.5\n";
    write_file_bytes(dir / "run.cfg", {file.begin(), file.end()});
    KeyValueConfig overrides;
    overrides.set("split.fraction", "0.75");
    const auto c = cli::resolve_config(dir / "run.cfg", overrides);
    EXPECT_EQ(c.get("train.epochs"), "7");
    EXPECT_EQ(c.get("split.fraction"), "0.75");
    EXPECT_EQ(c.get("train.l1_weight"), "100");
    EXPECT_EQ(c.get("occlusion.fill"), "128");
    fs::remove_all(dir);
}

TEST(RunConfig, UnknownKeysRejected) {
    const auto dir = scratch("unknown");
    const std::string file = "train.epoch = 7\n";
    write_file_bytes(dir / "run.cfg", {file.begin(), file.end()});
    EXPECT_THROW(cli::resolve_config(dir / "run.cfg", {}), ArgumentError);
    const auto r = invoke({"split", "--out", dir.string(), "--set", "split.fractoin=0.5"});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error[argument]: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    fs::remove_all(dir);
}

TEST(RunConfig, ResolvedConfigIsEchoedAndReproducesTheRun) {
    const auto dir = scratch("echo");
    ASSERT_EQ(invoke({"gen-corpus", "--out", dir.string(), "--count", "3", "--size", "16", "--seed", "4"}).code, 0);
    const auto echoed = slurp(dir / "resolved_config.txt");
    const auto manifest = slurp(dir / "manifest.tsv");
    // Re-running from the echoed file alone gives the same corpus.
    const auto again = scratch("echo2");
    write_file_bytes(again / "cfg.txt", {echoed.begin(), echoed.end()});
    ASSERT_EQ(invoke({"gen-corpus", "--out", again.string(), "--config", (again / "cfg.txt").string()}).code, 0);
    EXPECT_EQ(slurp(again / "manifest.tsv"), manifest);
    EXPECT_EQ(slurp(again / "images/pair_0002_y.ppm"), slurp(dir / "images/pair_0002_y.ppm"));
    EXPECT_EQ(slurp(again / "resolved_config.txt"), echoed);
    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST(Cli, GenCorpusThenSplitGivesEightyTwenty) {
    const auto dir = scratch("split");
    ASSERT_EQ(invoke({"gen-corpus", "--out", dir.string(), "--count", "100", "--seed", "7", "--size", "16"}).code, 0);
    const auto r = invoke({"split", "--out", dir.string(), "--fraction", "0.8", "--seed", "7"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = load_manifest(dir / "manifest.tsv");
    EXPECT_EQ(m.records.size(), 100u);
    EXPECT_EQ(m.count(SplitTag::train), 80u);
    EXPECT_EQ(m.count(SplitTag::test), 20u);
    fs::remove_all(dir);
}

TEST(Cli, EightCommandPipelineComposes) {
    const auto dir = scratch("pipeline");
    const auto out = dir.string();
    const std::vector<std::vector<std::string>> steps{
        {"gen-corpus", "--out", out, "--count", "10", "--size", "32"},
        {"occlude", "--out", out},
        {"split", "--out", out},
        {"train", "--out", out, "--epochs", "2", "--set", "train.checkpoint_every=1"},
        {"infer", "--out", out},
        {"overlay", "--out", out, "--latency-reps", "2"},
        {"eval", "--out", out},
    };
    for (const auto& s : steps) {
        const auto r = invoke(s);
        ASSERT_EQ(r.code, 0) << s[0] << ": " << r.err;
    }
    EXPECT_TRUE(fs::exists(dir / "checkpoints/epoch_1.ogck"));
    EXPECT_TRUE(fs::exists(dir / "checkpoints/epoch_2.ogck"));
    EXPECT_TRUE(fs::exists(dir / "loss_report.tsv"));
    EXPECT_TRUE(fs::exists(dir / "eval/report.tsv"));
    EXPECT_TRUE(fs::exists(dir / "overlays/latency.tsv"));
    const auto m = load_manifest(dir / "manifest.tsv");
    for (const auto& rec : m.select(SplitTag::test)) {
        EXPECT_TRUE(fs::exists(dir / "infer" / (rec.id + "_recon.ppm")));
        EXPECT_TRUE(fs::exists(dir / "overlays" / (rec.id + "_overlay.ppm")));
        EXPECT_TRUE(fs::exists(dir / "eval/grids" / (rec.id + "_grid.ppm")));
    }
    const auto report = slurp(dir / "eval/report.tsv");
    EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), static_cast<long>(m.count(SplitTag::test)) + 1);

    // Alpha 0 leaves every composite byte-identical to its input.
    ASSERT_EQ(invoke({"overlay", "--out", out, "--alpha", "0", "--latency-reps", "0"}).code, 0);
    for (const auto& rec : m.select(SplitTag::test))
        EXPECT_EQ(slurp(dir / "overlays" / (rec.id + "_overlay.ppm")), slurp(dir / rec.x_path)) << rec.id;

    // Resume continues the same trajectory.
    const auto resumed = scratch("pipeline_resume");
    fs::create_directories(resumed);
    fs::copy(dir / "manifest.tsv", resumed / "manifest.tsv");
    ASSERT_EQ(invoke({"train", "--out", resumed.string(), "--corpus", out, "--epochs", "2", "--resume",
                   (dir / "checkpoints/epoch_1.ogck").string()})
                  .code,
              0);
    EXPECT_EQ(slurp(resumed / "checkpoints/epoch_2.ogck"), slurp(dir / "checkpoints/epoch_2.ogck"));
    fs::remove_all(resumed);
    fs::remove_all(dir);
}

TEST(Cli, ExitCodesByCategory) {
    const auto dir = scratch("codes");
    auto r = invoke({"occlude", "--out", dir.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error[io]: ", 0), 0u) << r.err;

    EXPECT_EQ(invoke({"split", "--out", dir.string(), "--fraction", "zero"}).code, 1);
    EXPECT_EQ(invoke({"frobnicate"}).code, 1);
    EXPECT_EQ(invoke({}).code, 1);
    EXPECT_EQ(invoke({"--help"}).code, 0);

    ASSERT_EQ(invoke({"gen-corpus", "--out", dir.string(), "--count", "4", "--size", "16"}).code, 0);
    r = invoke({"eval", "--out", dir.string()});
    EXPECT_EQ(r.code, 2) << r.err;  // no checkpoint yet

    ASSERT_EQ(invoke({"occlude", "--out", dir.string()}).code, 0);
    ASSERT_EQ(invoke({"split", "--out", dir.string(), "--fraction", "0.5"}).code, 0);
    r = invoke({"train", "--out", dir.string(), "--epochs", "3", "--set", "train.learning_rate=1e30"});
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_EQ(r.err.rfind("error[numeric]: ", 0), 0u) << r.err;

    std::string bad = "OGCKjunk";
    write_file_bytes(dir / "bad.ogck", {bad.begin(), bad.end()});
    EXPECT_EQ(invoke({"infer", "--out", dir.string(), "--checkpoint", (dir / "bad.ogck").string()}).code, 2);
    fs::remove_all(dir);
}

TEST(Cli, BinaryReportsExitCode) {
    const auto dir = scratch("binary");
    const std::string cmd = std::string(OGAN_CLI_PATH) + " occlude --out " + dir.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    ASSERT_NE(status, -1);
    EXPECT_EQ(WEXITSTATUS(status), 2);
    fs::remove_all(dir);
}

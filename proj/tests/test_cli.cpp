#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace lfae;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int status = -1;
    std::string output;
};

RunResult run(const std::string& args)
{
    const std::string cmd = std::string(LFAE_CLI_PATH) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        r.output.append(buf.data(), n);
    }
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string read_file(const fs::path& p)
{
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

/// A toy dataset: `count` 3x3 light fields of 32x32 views under root/scene_k.
void write_toy_dataset(const fs::path& root, std::size_t count)
{
    for (std::size_t k = 0; k < count; ++k) {
        save_light_field(fx::synthetic_field(3, 32, 1.0, k + 1), root / ("scene_" + std::to_string(k)));
    }
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

} // namespace

TEST(Cli, InfoReportsDefaultArchitecture)
{
    const RunResult r = run("info");
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("compression ratio 48.600"), std::string::npos) << r.output;
    const std::size_t params = parameter_count(ModelConfig{});
    EXPECT_NE(r.output.find("parameters        " + std::to_string(params)), std::string::npos);
    EXPECT_NE(r.output.find("model bytes (f32) " + std::to_string(4 * params)), std::string::npos);
    EXPECT_NE(r.output.find("[1,2048,16,16]"), std::string::npos);
    EXPECT_NE(r.output.find("merge"), std::string::npos);
}

TEST(Cli, InfoReportsToyArchitecture)
{
    const RunResult r = run("info --toy");
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("compression ratio 8.640"), std::string::npos) << r.output;
}

TEST(Cli, ConfigErrorsHaveStablePrefix)
{
    const RunResult r = run("info --grid 4");
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.output.rfind("error[config]: ", 0), 0u) << r.output;
}

TEST(Cli, ZeroEpochsWritesEmptyHistory)
{
    fx::TempDir dir("cli0");
    write_toy_dataset(dir.path() / "data", 1);
    const RunResult r = run("train --toy --data " + q(dir.path() / "data") + " --epochs 0 --out " +
                            q(dir.path() / "h.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(read_file(dir.path() / "h.csv"), "epoch,lr,train_mse,test_mse\n");
}

TEST(Cli, TrainEncodeDecodeEval)
{
    fx::TempDir dir("cli");
    const fs::path data = dir.path() / "data";
    write_toy_dataset(data, 2);
    const fs::path ck = dir.path() / "ck";
    RunResult r = run("train --toy --data " + q(data) + " --test scene_1 --epochs 2 --iters-per-epoch 2 --batch 2 " +
                      "--min-crop 24 --checkpoint-dir " + q(ck) + " --checkpoint-every 1 --seed 3 --out " +
                      q(dir.path() / "h.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("epoch    1"), std::string::npos) << r.output;
    EXPECT_EQ(count_lines(read_file(dir.path() / "h.csv")), 3u);
    EXPECT_TRUE(fs::exists(ck / "epoch_0001.lfck"));
    ASSERT_TRUE(fs::exists(ck / "final.lfck"));

    const fs::path enc = dir.path() / "scene.lfae";
    r = run("encode --checkpoint " + q(ck / "final.lfck") + " --input " + q(data / "scene_0") + " --out " + q(enc));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("encoded 9 views in"), std::string::npos) << r.output;
    EXPECT_EQ(fs::file_size(enc), encoded_file_bytes(32, 128));

    const fs::path out = dir.path() / "decoded";
    r = run("decode --checkpoint " + q(ck / "final.lfck") + " --input " + q(enc) + " --out " + q(out));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_NE(r.output.find("decoded 9 views in"), std::string::npos);
    const LightField back = load_light_field(DatasetLayout{out, DatasetLayout{}.pattern, 3, 3}, "");
    EXPECT_EQ(back.height(), 32u);
    EXPECT_EQ(back.view_count(), 9u);

    r = run("eval --checkpoint " + q(ck / "final.lfck") + " --data " + q(data) + " --out " + q(dir.path() / "r.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(count_lines(read_file(dir.path() / "r.csv")), 4u);
    EXPECT_NE(r.output.find("Mean"), std::string::npos);
}

TEST(Cli, TrainingIsDeterministicGivenSeed)
{
    fx::TempDir dir("clidet");
    const fs::path data = dir.path() / "data";
    write_toy_dataset(data, 2);
    const std::string base = "train --toy --data " + q(data) + " --epochs 2 --iters-per-epoch 2 --batch 2 --min-crop 24 ";
    ASSERT_EQ(run(base + "--seed 4 --out " + q(dir.path() / "a.csv")).status, 0);
    ASSERT_EQ(run(base + "--seed 4 --out " + q(dir.path() / "b.csv")).status, 0);
    EXPECT_EQ(read_file(dir.path() / "a.csv"), read_file(dir.path() / "b.csv"));
}

TEST(Cli, ConfigFileIsOverriddenByFlags)
{
    fx::TempDir dir("clicfg");
    const fs::path data = dir.path() / "data";
    write_toy_dataset(data, 1);
    std::ofstream(dir.path() / "run.ini") << "[train]\nepochs=2\niters-per-epoch=1\nbatch=1\ntoy=true\n";
    RunResult r = run("train --config " + q(dir.path() / "run.ini") + " --data " + q(data) + " --out " +
                      q(dir.path() / "a.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(count_lines(read_file(dir.path() / "a.csv")), 3u);
    r = run("train --config " + q(dir.path() / "run.ini") + " --data " + q(data) + " --epochs 1 --out " +
            q(dir.path() / "b.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(count_lines(read_file(dir.path() / "b.csv")), 2u);
}

TEST(Cli, EvalIdentityModeIsPerfect)
{
    fx::TempDir dir("cliid");
    const fs::path data = dir.path() / "data";
    write_toy_dataset(data, 4);
    const RunResult r = run("eval --identity --grid 3 --data " + q(data) + " --out " + q(dir.path() / "r.csv"));
    ASSERT_EQ(r.status, 0) << r.output;
    const std::string csv = read_file(dir.path() / "r.csv");
    EXPECT_EQ(count_lines(csv), 6u);
    EXPECT_EQ(count_lines(r.output), 6u);
    EXPECT_NE(csv.find("scene_0,0.0000000,inf,1.0000000"), std::string::npos) << csv;
    EXPECT_NE(csv.find("Mean,0.0000000,inf,1.0000000"), std::string::npos) << csv;
}

TEST(Cli, TruncatedEncodingIsCorruption)
{
    fx::TempDir dir("clitrunc");
    const Model<float> m = build_model<float>(toy_config());
    write_checkpoint_file(Checkpoint<float>{m, std::nullopt, 0}, dir.path() / "m.lfck");
    write_encoded_file(encode(m, fx::synthetic_field(3, 32, 1.0, 1)), dir.path() / "x.lfae");
    fs::resize_file(dir.path() / "x.lfae", 500);
    const RunResult r = run("decode --checkpoint " + q(dir.path() / "m.lfck") + " --input " +
                            q(dir.path() / "x.lfae") + " --out " + q(dir.path() / "o"));
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.output.rfind("error[corrupt]: ", 0), 0u) << r.output;
}

TEST(Cli, ForeignArchitectureIsIncompatible)
{
    fx::TempDir dir("cliforeign");
    const Model<float> m = build_model<float>(toy_config());
    ModelConfig other = toy_config();
    other.channel_schedule = {4, 8, 16, 32, 64};
    write_checkpoint_file(Checkpoint<float>{build_model<float>(other), std::nullopt, 0}, dir.path() / "o.lfck");
    write_encoded_file(encode(m, fx::synthetic_field(3, 32, 1.0, 1)), dir.path() / "x.lfae");
    const RunResult r = run("decode --checkpoint " + q(dir.path() / "o.lfck") + " --input " +
                            q(dir.path() / "x.lfae") + " --out " + q(dir.path() / "o"));
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.output.rfind("error[incompatible]: ", 0), 0u) << r.output;
}

TEST(Cli, MissingViewIsReported)
{
    fx::TempDir dir("climissing");
    save_light_field(fx::noise_field(9, 32, 1), dir.path() / "lf");
    fs::remove(dir.path() / "lf" / "input_Cam040.png");
    const Model<float> m = build_model<float>([] {
        ModelConfig c;
        c.spatial = 32;
        c.channel_schedule = {4, 4, 4, 4, 4};
        return c;
    }());
    write_checkpoint_file(Checkpoint<float>{m, std::nullopt, 0}, dir.path() / "m.lfck");
    const RunResult r = run("encode --checkpoint " + q(dir.path() / "m.lfck") + " --input " + q(dir.path() / "lf") +
                            " --out " + q(dir.path() / "x.lfae"));
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.output.rfind("error[missing-view]: ", 0), 0u) << r.output;
    EXPECT_NE(r.output.find("40"), std::string::npos);
}

TEST(Cli, EmptyDatasetFails)
{
    fx::TempDir dir("cliempty");
    const RunResult r = run("train --toy --data " + q(dir.path()) + " --out " + q(dir.path() / "h.csv"));
    EXPECT_NE(r.status, 0);
    EXPECT_EQ(r.output.rfind("error[io]: ", 0), 0u) << r.output;
}

TEST(Cli, HelpDocumentsPrecedence)
{
    const RunResult r = run("--help");
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.output.find("then the --config file"), std::string::npos) << r.output;
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace nncm;
namespace fs = std::filesystem;

namespace
{
class Cli : public ::testing::Test
{
protected:
    void SetUp() override
    {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("nncm_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string &name) const { return (dir_ / name).string(); }

    /// Runs the CLI with `args`; stdout+stderr land in output_.
    int run(const std::string &args, const std::string &env = "")
    {
        const std::string log = path("cli.log");
        const std::string cmd = env + " " + NNCM_CLI_PATH + " " + args + " > " + log + " 2>&1";
        const int status = std::system(cmd.c_str());
        output_ = read_file(log);
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    void write(const std::string &name, const std::string &text) const { std::ofstream(path(name)) << text; }

    std::size_t data_rows(const std::string &name) const
    {
        const auto text = read_file(path(name));
        std::size_t n = 0;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#')
                ++n;
        return n == 0 ? 0 : n - 1;
    }

    std::string small_config() const
    {
        const auto cfg = path("small.json");
        std::ofstream(cfg) << R"({"grid": {"train": {"v_gs": {"count": 30}, "v_ds": {"count": 30}, "dense_factor": 1},
                                          "test": {"v_gs": {"count": 20}, "v_ds": {"count": 20}}},
                                 "train": {"max_epochs": 300, "layer_sizes": [2, 4, 4, 1]}})";
        return cfg;
    }

    fs::path dir_;
    std::string output_;
};
}

TEST_F(Cli, GenerateDefaultSizes)
{
    ASSERT_EQ(run("generate --out " + dir_.string()), 0) << output_;
    EXPECT_EQ(data_rows("train.csv"), 11984u);
    EXPECT_EQ(data_rows("test.csv"), 56000u);
    EXPECT_NE(output_.find("11984"), std::string::npos);
    const auto first = read_file(path("train.csv"));
    ASSERT_EQ(run("generate --out " + dir_.string()), 0);
    EXPECT_EQ(read_file(path("train.csv")), first);
}

TEST_F(Cli, UnwritableOutputDirectory)
{
    EXPECT_EQ(run("generate --out /proc/nncm-no-such-dir"), 2);
    EXPECT_NE(output_.find("error"), std::string::npos);
}

TEST_F(Cli, UsageErrors)
{
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("fit-core"), 2);
    EXPECT_EQ(run("fit-core --train " + path("missing.csv")), 2);
    EXPECT_EQ(run("generate --config " + path("missing.json")), 2);
    write("bad.json", R"({"trian": {}})");
    EXPECT_EQ(run("generate --config " + path("bad.json")), 2);
    EXPECT_NE(output_.find("trian"), std::string::npos);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, FitCoreRecoversOracle)
{
    const std::string out = " --out " + dir_.string();
    ASSERT_EQ(run("generate" + out), 0);
    ASSERT_EQ(run("fit-core --train " + path("train.csv") + out), 0) << output_;
    const auto m = load_model(path("model.json"));
    const OracleParams oracle;
    EXPECT_LT(test::rel_err(m.core.p, oracle.base.p), 1e-2);
    EXPECT_LT(test::rel_err(m.core.v_ss, oracle.base.v_ss), 1e-2);
    EXPECT_LT(test::rel_err(m.core.v_t, oracle.base.v_t), 1e-2);
    EXPECT_EQ(m.net, identity_network({2, 10, 20, 1}));
    EXPECT_EQ(read_model(write_model(m)), m);
}

TEST_F(Cli, TrainZeroEpochsKeepsModel)
{
    const std::string out = " --config " + small_config() + " --out " + dir_.string();
    ASSERT_EQ(run("generate" + out), 0);
    ASSERT_EQ(run("fit-core --train " + path("train.csv") + out), 0);
    const auto before = load_model(path("model.json"));
    ASSERT_EQ(run("train --max-epochs 0 --model " + path("model.json") + " --train " + path("train.csv") + out), 0)
        << output_;
    const auto after = load_model(path("model.json"));
    EXPECT_EQ(after.net, before.net);
    EXPECT_EQ(after.core, before.core);
    EXPECT_EQ(read_file(path("cost.csv")), "epoch,cost\n");
}

TEST_F(Cli, PipelineOnSmallConfig)
{
    const std::string out = " --config " + small_config() + " --out " + dir_.string();
    const std::string model = " --model " + path("model.json");
    ASSERT_EQ(run("generate" + out), 0);
    ASSERT_EQ(run("fit-core --train " + path("train.csv") + out), 0);

    // 300 epochs do not reach the 1e-6 target: threshold failure.
    EXPECT_EQ(run("train" + model + " --train " + path("train.csv") + out), 1) << output_;
    EXPECT_EQ(data_rows("cost.csv"), 300u);
    const auto trained = load_model(path("model.json"));
    EXPECT_EQ(trained.metadata.epochs, 300u);
    EXPECT_EQ(trained.net.layer_sizes, (std::vector<std::size_t>{2, 4, 4, 1}));

    EXPECT_EQ(run("gummel" + model + out), 0) << output_;
    const auto gummel = nlohmann::json::parse(read_file(path("gummel.json")));
    EXPECT_LT(gummel.at("metrics").at("discontinuity").get<double>(), 1e-2);
    EXPECT_EQ(gummel.at("v_x").size(), 201u);

    ASSERT_EQ(run("gummel --format csv" + model + out), 0);
    EXPECT_EQ(data_rows("gummel.csv"), 201u);

    ASSERT_EQ(run("predict" + model + out), 0) << output_;
    EXPECT_EQ(read_file(path("predict.csv")).rfind("v_gs,v_ds,i_ds,g_m,g_ds\n", 0), 0u);
    EXPECT_EQ(data_rows("predict.csv"), 71u * 8u);

    const int rc = run("validate --format csv --test " + path("test.csv") + model + out);
    EXPECT_TRUE(rc == 0 || rc == 1) << output_;
    EXPECT_NE(read_file(path("validation.csv")).find("\ni_ds,"), std::string::npos);
    EXPECT_EQ(run("validate --format xml --test " + path("test.csv") + model + out), 2);
}

TEST_F(Cli, ValidateAgainstOwnOutput)
{
    const TrainedModel m{{1e-4, 0.035, 0.3, 2.0}, identity_network({2, 4, 1}), {}};
    save_model(path("model.json"), m);
    std::vector<IVSample> data;
    for (const auto &s : generate_grid(GridSpec{{0.0, 0.7, 71}, {0.001, 0.7, 71}, 0.0, 1}, OracleParams{}))
        data.push_back({s.bias, ids_full(s.bias, m).i_ds});
    save_csv(path("self.csv"), data);
    ASSERT_EQ(run("validate --model " + path("model.json") + " --test " + path("self.csv") + " --out " + dir_.string()),
              0)
        << output_;
    const auto j = nlohmann::json::parse(read_file(path("validation.json")));
    EXPECT_EQ(j.at("i_ds").at("max_percent").get<double>(), 0.0);
    // Reference conductances are finite differences of the CSV currents, so
    // only the current error vanishes.
    EXPECT_GT(j.at("g_m").at("max_percent").get<double>(), 0.0);
    EXPECT_LT(j.at("g_m").at("max_percent").get<double>(), 5.0);
    EXPECT_LT(j.at("g_ds").at("max_percent").get<double>(), 25.0);
}

TEST_F(Cli, ValidateThresholdFailure)
{
    TrainedModel m{{1e-4, 0.035, 0.3, 2.0}, identity_network({2, 4, 1}), {}};
    m.net.biases.back()(0) = 1.05;
    save_model(path("model.json"), m);
    save_csv(path("oracle.csv"), generate_grid(GridSpec{{0.0, 0.7, 20}, {0.001, 0.7, 20}, 0.0, 1}, OracleParams{}));
    EXPECT_EQ(run("validate --model " + path("model.json") + " --test " + path("oracle.csv") + " --out " +
                  dir_.string()),
              1);
}

TEST_F(Cli, ExportVerilogA)
{
    TrainedModel m{{1e-4, 0.035, 0.3, 2.0}, test::random_net({2, 10, 20, 1}, 6, 0.5), {}};
    save_model(path("model.json"), m);
    const std::string args = "export-va --name fetx --model " + path("model.json") + " --out " + dir_.string();
    ASSERT_EQ(run(args, "SOURCE_DATE_EPOCH=1700000000"), 0) << output_;
    const auto first = read_file(path("fetx.va"));
    EXPECT_NE(first.find("// date: epoch 1700000000\n"), std::string::npos);
    EXPECT_EQ(first, emit_veriloga(m, {"fetx", TanhStyle::builtin, "epoch 1700000000"}).source);

    ASSERT_EQ(run(args + " --date 2026-10-18"), 0);
    EXPECT_NE(read_file(path("fetx.va")).find("// date: 2026-10-18\n"), std::string::npos);

    ASSERT_EQ(run(args + " --tanh exp --date x"), 0);
    EXPECT_EQ(read_file(path("fetx.va")).find("tanh("), std::string::npos);
    EXPECT_EQ(run(args + " --tanh sinh"), 2);
}

TEST_F(Cli, ExportRefusesUnverifiableModule)
{
    // Currents overflow to infinity, so the re-evaluated module cannot be
    // checked against the library.
    TrainedModel m{{1e308, 0.035, 0.3, 2.0}, identity_network({2, 3, 1}), {}};
    m.net.biases.back()(0) = 10.0;
    save_model(path("model.json"), m);
    EXPECT_EQ(run("export-va --model " + path("model.json") + " --out " + dir_.string()), 1);
    EXPECT_FALSE(fs::exists(path("nncm_fet.va")));
}

TEST_F(Cli, DivergenceExitsWithEpoch)
{
    write("diverge.json", R"({"grid": {"train": {"v_gs": {"count": 25}, "v_ds": {"count": 25}, "dense_factor": 1}},
                              "train": {"learning_rate": 1e200, "max_epochs": 50, "layer_sizes": [2, 3, 1]}})");
    const std::string out = " --config " + path("diverge.json") + " --out " + dir_.string();
    ASSERT_EQ(run("generate" + out), 0);
    ASSERT_EQ(run("fit-core --train " + path("train.csv") + out), 0) << output_;
    EXPECT_EQ(run("train --model " + path("model.json") + " --train " + path("train.csv") + out), 1);
    EXPECT_NE(output_.find("epoch"), std::string::npos) << output_;
}

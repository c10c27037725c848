#include <gtest/gtest.h>

#include <filesystem>

#include "test_support.hpp"

using namespace nncm;

namespace
{
TrainedModel sample_model()
{
    TrainedModel m{{1.0017e-4, 0.0350001, 0.3000032, 2.0}, test::random_net({2, 10, 20, 1}, 3), {}};
    m.net.weights[1](4, 7) = 1.0 / 3.0;
    m.net.biases[0](2) = -5e-324;
    m.metadata = {42, 18000, 9.9999e-7, "0123456789abcdef"};
    return m;
}
}

TEST(ModelFile, RoundTripIsBitwise)
{
    const auto m = sample_model();
    EXPECT_EQ(read_model(write_model(m)), m);
    EXPECT_EQ(write_model(read_model(write_model(m))), write_model(m));
}

TEST(ModelFile, FileRoundTrip)
{
    const auto path = (std::filesystem::temp_directory_path() / "nncm_model_roundtrip.json").string();
    const auto m = sample_model();
    save_model(path, m);
    EXPECT_EQ(load_model(path), m);
    std::filesystem::remove(path);
}

TEST(ModelFile, Layout)
{
    const auto j = nlohmann::json::parse(write_model(sample_model()));
    EXPECT_EQ(j.at("format"), "nncm-model");
    EXPECT_EQ(j.at("version"), 1);
    EXPECT_EQ(j.at("core").at("V_T").get<double>(), 0.3000032);
    EXPECT_EQ(j.at("mlp").at("layer_sizes").get<std::vector<std::size_t>>(), (std::vector<std::size_t>{2, 10, 20, 1}));
    EXPECT_EQ(j.at("mlp").at("weights").at(1).size(), 200u);
    EXPECT_EQ(j.at("mlp").at("weights").at(1).at(4 * 10 + 7).get<double>(), 1.0 / 3.0);
    EXPECT_EQ(j.at("metadata").at("dataset_fingerprint"), "0123456789abcdef");
}

TEST(ModelFile, RejectsBadInput)
{
    auto j = model_to_json(sample_model());
    auto bad = j;
    bad["version"] = 2;
    EXPECT_THROW(model_from_json(bad), DataError);

    bad = j;
    bad["format"] = "other";
    EXPECT_THROW(model_from_json(bad), DataError);

    bad = j;
    bad["mlp"]["weights"][0].erase(0);
    EXPECT_THROW(model_from_json(bad), ShapeError);

    bad = j;
    bad["mlp"]["biases"].erase(2);
    EXPECT_THROW(model_from_json(bad), ShapeError);

    bad = j;
    bad["core"]["V_SS"] = -1.0;
    EXPECT_THROW(model_from_json(bad), DataError);

    bad = j;
    bad.erase("metadata");
    EXPECT_THROW(model_from_json(bad), DataError);

    EXPECT_THROW(read_model("{not json"), DataError);
    EXPECT_THROW(load_model("/nonexistent/model.json"), IoError);
}

TEST(RunConfig, DefaultsMatchLibraryDefaults)
{
    const auto cfg = run_config_from_json(nlohmann::json::object());
    EXPECT_EQ(cfg.seed, 1u);
    EXPECT_EQ(cfg.train.eta_g, 0.5);
    EXPECT_EQ(cfg.train.eta_d, 1e-3);
    EXPECT_EQ(cfg.train.layer_sizes, (std::vector<std::size_t>{2, 10, 20, 1}));
    EXPECT_EQ(grid_geometry(cfg.train_grid).size(), 11984u);
    EXPECT_EQ(grid_geometry(cfg.test_grid).size(), 56000u);
    EXPECT_EQ(cfg.gummel.points, 201u);
    EXPECT_EQ(cfg.validation.floor, 1e-3);
}

TEST(RunConfig, OverridesAndSeedPropagation)
{
    const auto cfg = run_config_from_json(nlohmann::json::parse(R"({
        "seed": 9,
        "grid": {"train": {"v_gs": {"count": 10}, "dense_factor": 1}},
        "oracle": {"a1": 0.9},
        "train": {"eta_G": 0.25, "max_epochs": 12, "layer_sizes": [2, 4, 1]},
        "validation": {"max_g_ds_percent": 30},
        "gummel": {"points": 51}
    })"));
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.train.seed, 9u);
    EXPECT_EQ(cfg.fit.seed, 9u);
    EXPECT_EQ(cfg.train_grid.v_gs.count, 10u);
    EXPECT_EQ(cfg.train_grid.v_gs.hi, 0.7);
    EXPECT_EQ(cfg.train_grid.dense_factor, 1u);
    EXPECT_EQ(cfg.oracle.a1, 0.9);
    EXPECT_EQ(cfg.train.eta_g, 0.25);
    EXPECT_EQ(cfg.train.max_epochs, 12u);
    EXPECT_EQ(cfg.validation.max_g_ds_percent, 30.0);
    EXPECT_EQ(cfg.gummel.points, 51u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues)
{
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"sede": 1})")), DataError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"train": {"lr": 1}})")), DataError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"train": {"max_epochs": "many"}})")), DataError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"train": {"learning_rate": -1}})")), DataError);
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"grid": {"test": {"v_ds": {"count": 1}}}})")),
                 DataError);
    EXPECT_THROW(load_run_config("/nonexistent/config.json"), IoError);
}

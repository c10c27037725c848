#ifndef NNCM_RUN_CONFIG_HPP
#define NNCM_RUN_CONFIG_HPP

// Pipeline configuration, read from one JSON file. Every key is optional
// and defaults to the values below; unknown keys are rejected.
//
// {
//   "seed": 1,
//   "grid": {"train": GRID, "test": GRID},
//   "oracle": {"P", "V_SS", "V_T", "beta", "a0", "a1", "a2"},
//   "fit_core": {"max_abs_vds", "current_floor", "restarts", "min_samples"},
//   "train": {"eta_G", "eta_D", "learning_rate", "beta1", "beta2", "epsilon_hat",
//             "max_epochs", "target_cost", "layer_sizes"},
//   "validation": {"floor", "bin_edges_percent", "max_i_ds_percent",
//                  "max_g_m_percent", "max_g_ds_percent"},
//   "gummel": {"v_g", "v_x_max", "points"},
//   "predict": GRID
// }
// GRID = {"v_gs": AXIS, "v_ds": AXIS, "dense_below", "dense_factor"}
// AXIS = {"lo", "hi", "count"}

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "core_model.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "training.hpp"
#include "validation.hpp"

namespace nncm
{

struct RunConfig
{
    std::uint64_t seed = 1;
    GridSpec train_grid = GridSpec::training_default();
    GridSpec test_grid = GridSpec::test_default();
    OracleParams oracle{};
    FitCoreConfig fit{};
    TrainConfig train{};
    ValidationConfig validation{};
    GummelConfig gummel{};
    GridSpec predict_grid{{0.0, 0.7, 71}, {0.0, 0.7, 8}, 0.0, 1};

    /// Propagates the top-level seed into the stages that consume one.
    void apply_seed(std::uint64_t s)
    {
        seed = s;
        fit.seed = s;
        train.seed = s;
    }
};

namespace config_detail
{
inline void check_keys(const nlohmann::json &j, std::string_view where, std::initializer_list<std::string_view> keys)
{
    if (!j.is_object())
        throw DataError("config: '" + std::string(where) + "' must be an object");
    for (const auto &[k, v] : j.items())
    {
        bool known = false;
        for (auto key : keys)
            known = known || key == k;
        if (!known)
            throw DataError("config: unknown key '" + std::string(where) + "." + k + "'");
    }
}

template <class T> void read(const nlohmann::json &j, const char *key, T &out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

inline void read_axis(const nlohmann::json &j, const char *key, std::string_view where, AxisSpec &axis)
{
    if (!j.contains(key))
        return;
    const auto &a = j.at(key);
    check_keys(a, std::string(where) + "." + key, {"lo", "hi", "count"});
    read(a, "lo", axis.lo);
    read(a, "hi", axis.hi);
    read(a, "count", axis.count);
}

inline void read_grid(const nlohmann::json &j, std::string_view where, GridSpec &g)
{
    check_keys(j, where, {"v_gs", "v_ds", "dense_below", "dense_factor"});
    read_axis(j, "v_gs", where, g.v_gs);
    read_axis(j, "v_ds", where, g.v_ds);
    read(j, "dense_below", g.dense_below);
    read(j, "dense_factor", g.dense_factor);
    g.validate();
}
}

inline RunConfig run_config_from_json(const nlohmann::json &j)
{
    using namespace config_detail;
    RunConfig cfg;
    try
    {
        check_keys(j, "", {"seed", "grid", "oracle", "fit_core", "train", "validation", "gummel", "predict"});
        std::uint64_t seed = cfg.seed;
        read(j, "seed", seed);
        cfg.apply_seed(seed);

        if (j.contains("grid"))
        {
            const auto &g = j.at("grid");
            check_keys(g, "grid", {"train", "test"});
            if (g.contains("train"))
                read_grid(g.at("train"), "grid.train", cfg.train_grid);
            if (g.contains("test"))
                read_grid(g.at("test"), "grid.test", cfg.test_grid);
        }
        if (j.contains("oracle"))
        {
            const auto &o = j.at("oracle");
            check_keys(o, "oracle", {"P", "V_SS", "V_T", "beta", "a0", "a1", "a2"});
            read(o, "P", cfg.oracle.base.p);
            read(o, "V_SS", cfg.oracle.base.v_ss);
            read(o, "V_T", cfg.oracle.base.v_t);
            read(o, "beta", cfg.oracle.base.beta);
            read(o, "a0", cfg.oracle.a0);
            read(o, "a1", cfg.oracle.a1);
            read(o, "a2", cfg.oracle.a2);
            cfg.oracle.validate();
        }
        if (j.contains("fit_core"))
        {
            const auto &f = j.at("fit_core");
            check_keys(f, "fit_core", {"max_abs_vds", "current_floor", "restarts", "min_samples"});
            read(f, "max_abs_vds", cfg.fit.max_abs_vds);
            read(f, "current_floor", cfg.fit.current_floor);
            read(f, "restarts", cfg.fit.restarts);
            read(f, "min_samples", cfg.fit.min_samples);
        }
        if (j.contains("train"))
        {
            const auto &t = j.at("train");
            check_keys(t, "train", {"eta_G", "eta_D", "learning_rate", "beta1", "beta2", "epsilon_hat", "max_epochs",
                                    "target_cost", "layer_sizes"});
            read(t, "eta_G", cfg.train.eta_g);
            read(t, "eta_D", cfg.train.eta_d);
            read(t, "learning_rate", cfg.train.learning_rate);
            read(t, "beta1", cfg.train.beta1);
            read(t, "beta2", cfg.train.beta2);
            read(t, "epsilon_hat", cfg.train.epsilon_hat);
            read(t, "max_epochs", cfg.train.max_epochs);
            read(t, "target_cost", cfg.train.target_cost);
            read(t, "layer_sizes", cfg.train.layer_sizes);
            cfg.train.validate();
        }
        if (j.contains("validation"))
        {
            const auto &v = j.at("validation");
            check_keys(v, "validation",
                       {"floor", "bin_edges_percent", "max_i_ds_percent", "max_g_m_percent", "max_g_ds_percent"});
            read(v, "floor", cfg.validation.floor);
            read(v, "bin_edges_percent", cfg.validation.bin_edges);
            read(v, "max_i_ds_percent", cfg.validation.max_i_ds_percent);
            read(v, "max_g_m_percent", cfg.validation.max_g_m_percent);
            read(v, "max_g_ds_percent", cfg.validation.max_g_ds_percent);
        }
        if (j.contains("gummel"))
        {
            const auto &g = j.at("gummel");
            check_keys(g, "gummel", {"v_g", "v_x_max", "points"});
            read(g, "v_g", cfg.gummel.v_g);
            read(g, "v_x_max", cfg.gummel.v_x_max);
            read(g, "points", cfg.gummel.points);
        }
        if (j.contains("predict"))
            read_grid(j.at("predict"), "predict", cfg.predict_grid);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw DataError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string &path)
{
    try
    {
        return run_config_from_json(nlohmann::json::parse(read_file(path)));
    }
    catch (const nlohmann::json::parse_error &e)
    {
        throw DataError(path + ": " + e.what());
    }
}

}

#endif

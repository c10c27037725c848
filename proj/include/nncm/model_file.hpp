#ifndef NNCM_MODEL_FILE_HPP
#define NNCM_MODEL_FILE_HPP

// JSON model file:
// {
//   "format": "nncm-model", "version": 1,
//   "core": {"P", "V_SS", "V_T", "beta"},
//   "mlp": {"layer_sizes": [...], "weights": [[row-major]...], "biases": [[...]...]},
//   "metadata": {"seed", "epochs", "final_cost", "dataset_fingerprint"}
// }

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "correction_network.hpp"
#include "dataset.hpp"
#include "error.hpp"

namespace nncm
{

inline constexpr int kModelFileVersion = 1;

inline nlohmann::json core_to_json(const CoreParams &c)
{
    return {{"P", c.p}, {"V_SS", c.v_ss}, {"V_T", c.v_t}, {"beta", c.beta}};
}

inline CoreParams core_from_json(const nlohmann::json &j)
{
    CoreParams c{j.at("P").get<double>(), j.at("V_SS").get<double>(), j.at("V_T").get<double>(),
                 j.at("beta").get<double>()};
    c.validate();
    return c;
}

inline nlohmann::json model_to_json(const TrainedModel &m)
{
    nlohmann::json weights = nlohmann::json::array(), biases = nlohmann::json::array();
    for (std::size_t l = 0; l < m.net.layer_count(); ++l)
    {
        nlohmann::json w = nlohmann::json::array(), b = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.net.weights[l].rows(); ++r)
        {
            for (Eigen::Index c = 0; c < m.net.weights[l].cols(); ++c)
                w.push_back(m.net.weights[l](r, c));
            b.push_back(m.net.biases[l](r));
        }
        weights.push_back(std::move(w));
        biases.push_back(std::move(b));
    }
    return {{"format", "nncm-model"},
            {"version", kModelFileVersion},
            {"core", core_to_json(m.core)},
            {"mlp", {{"layer_sizes", m.net.layer_sizes}, {"weights", weights}, {"biases", biases}}},
            {"metadata",
             {{"seed", m.metadata.seed},
              {"epochs", m.metadata.epochs},
              {"final_cost", m.metadata.final_cost},
              {"dataset_fingerprint", m.metadata.dataset_fingerprint}}}};
}

inline TrainedModel model_from_json(const nlohmann::json &j)
{
    try
    {
        if (j.at("format").get<std::string>() != "nncm-model")
            throw DataError("not an nncm model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFileVersion)
            throw DataError("unsupported model file version " + std::to_string(version));

        TrainedModel m;
        m.core = core_from_json(j.at("core"));
        const auto &mlp = j.at("mlp");
        m.net = Mlp::zeros(mlp.at("layer_sizes").get<std::vector<std::size_t>>());
        const auto &weights = mlp.at("weights");
        const auto &biases = mlp.at("biases");
        if (weights.size() != m.net.layer_count() || biases.size() != m.net.layer_count())
            throw ShapeError("model file layer count does not match layer_sizes");
        for (std::size_t l = 0; l < m.net.layer_count(); ++l)
        {
            const auto w = weights[l].get<std::vector<double>>();
            const auto b = biases[l].get<std::vector<double>>();
            auto &W = m.net.weights[l];
            if (w.size() != static_cast<std::size_t>(W.size()) || b.size() != static_cast<std::size_t>(W.rows()))
                throw ShapeError("model file layer " + std::to_string(l) + " has wrong array lengths");
            for (Eigen::Index r = 0; r < W.rows(); ++r)
            {
                for (Eigen::Index c = 0; c < W.cols(); ++c)
                    W(r, c) = w[static_cast<std::size_t>(r * W.cols() + c)];
                m.net.biases[l](r) = b[static_cast<std::size_t>(r)];
            }
        }
        m.net.validate();
        const auto &meta = j.at("metadata");
        m.metadata.seed = meta.at("seed").get<std::uint64_t>();
        m.metadata.epochs = meta.at("epochs").get<std::size_t>();
        m.metadata.final_cost = meta.at("final_cost").get<double>();
        m.metadata.dataset_fingerprint = meta.at("dataset_fingerprint").get<std::string>();
        return m;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

inline std::string write_model(const TrainedModel &m) { return model_to_json(m).dump(2) + "\n"; }

inline TrainedModel read_model(const std::string &text)
{
    try
    {
        return model_from_json(nlohmann::json::parse(text));
    }
    catch (const nlohmann::json::parse_error &e)
    {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
}

inline void save_model(const std::string &path, const TrainedModel &m)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    f << write_model(m);
    if (!f)
        throw IoError("failed writing " + path);
}

inline TrainedModel load_model(const std::string &path) { return read_model(read_file(path)); }

}

#endif

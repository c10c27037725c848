#ifndef NNCM_CORRECTION_NETWORK_HPP
#define NNCM_CORRECTION_NETWORK_HPP

// Correction factor eps(V_GS, V_GD) = mlp(T(V_GS, V_GD)) with the
// swap-invariant featurization T = (V_GS + V_GD, V_DS^2), and the
// full model I = I_core * eps.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "core_model.hpp"
#include "error.hpp"

namespace nncm
{

/// Tanh multilayer perceptron: hidden layers use tanh, the output layer is affine.
/// weights[l] has shape layer_sizes[l+1] x layer_sizes[l].
struct Mlp
{
    std::vector<std::size_t> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    std::size_t layer_count() const { return weights.size(); }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
            n += layer_sizes[l + 1] * (layer_sizes[l] + 1);
        return n;
    }

    void validate() const
    {
        if (layer_sizes.size() < 2 || layer_sizes.front() != 2 || layer_sizes.back() != 1)
            throw ShapeError("mlp layer sizes must start with 2 and end with 1");
        if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
            throw ShapeError("mlp layer count does not match layer sizes");
        for (std::size_t l = 0; l < weights.size(); ++l)
        {
            const auto rows = static_cast<Eigen::Index>(layer_sizes[l + 1]);
            const auto cols = static_cast<Eigen::Index>(layer_sizes[l]);
            if (layer_sizes[l] == 0 || weights[l].rows() != rows || weights[l].cols() != cols ||
                biases[l].size() != rows)
                throw ShapeError("mlp layer " + std::to_string(l) + " has inconsistent shape");
            if (!weights[l].allFinite() || !biases[l].allFinite())
                throw ShapeError("mlp layer " + std::to_string(l) + " has non-finite entries");
        }
    }

    /// Parameters in layer order: row-major weights, then biases.
    std::vector<double> flatten() const
    {
        std::vector<double> out;
        out.reserve(parameter_count());
        for (std::size_t l = 0; l < weights.size(); ++l)
        {
            for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
                for (Eigen::Index c = 0; c < weights[l].cols(); ++c)
                    out.push_back(weights[l](r, c));
            for (Eigen::Index r = 0; r < biases[l].size(); ++r)
                out.push_back(biases[l](r));
        }
        return out;
    }

    void assign(std::span<const double> flat)
    {
        if (flat.size() != parameter_count())
            throw ShapeError("parameter vector length does not match network");
        std::size_t k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
        {
            for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
                for (Eigen::Index c = 0; c < weights[l].cols(); ++c)
                    weights[l](r, c) = flat[k++];
            for (Eigen::Index r = 0; r < biases[l].size(); ++r)
                biases[l](r) = flat[k++];
        }
    }

    /// Zero-filled network of the given shape.
    static Mlp zeros(const std::vector<std::size_t> &sizes)
    {
        Mlp net;
        net.layer_sizes = sizes;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
        {
            const auto rows = static_cast<Eigen::Index>(sizes[l + 1]);
            const auto cols = static_cast<Eigen::Index>(sizes[l]);
            net.weights.push_back(Eigen::MatrixXd::Zero(rows, cols));
            net.biases.push_back(Eigen::VectorXd::Zero(rows));
        }
        return net;
    }

    friend bool operator==(const Mlp &a, const Mlp &b)
    {
        return a.layer_sizes == b.layer_sizes && a.flatten() == b.flatten();
    }
};

struct TransformedInput
{
    double u = 0.0; ///< V_GS + V_GD
    double v = 0.0; ///< V_DS^2
};

/// Image of a bias-space direction under the Jacobian of the transform.
struct TransformedDirection
{
    double du = 0.0;
    double dv = 0.0;
};

inline TransformedInput transform_t(const BiasPoint &bias)
{
    const double v_ds = bias.v_gs - bias.v_gd;
    return {bias.v_gs + bias.v_gd, v_ds * v_ds};
}

inline TransformedDirection transform_t_pushforward(const BiasPoint &bias, const DirectionVector &dir)
{
    return {dir.d_vgs + dir.d_vgd, 2.0 * (bias.v_gs - bias.v_gd) * (dir.d_vgs - dir.d_vgd)};
}

/// Pre-activations z and activations a of every hidden layer; a[0] is the input.
struct ForwardCache
{
    std::vector<Eigen::VectorXd> z;
    std::vector<Eigen::VectorXd> a;
};

struct ForwardResult
{
    double eps = 0.0;
    ForwardCache cache;
};

inline ForwardResult mlp_forward(const TransformedInput &x, const Mlp &net)
{
    net.validate();
    ForwardResult out;
    const std::size_t hidden = net.layer_count() - 1;
    out.cache.a.reserve(hidden + 1);
    out.cache.z.reserve(hidden);
    out.cache.a.push_back(Eigen::Vector2d(x.u, x.v));
    for (std::size_t l = 0; l < hidden; ++l)
    {
        out.cache.z.push_back(net.weights[l] * out.cache.a.back() + net.biases[l]);
        out.cache.a.push_back(out.cache.z.back().array().tanh().matrix());
    }
    out.eps = net.weights.back().row(0).dot(out.cache.a.back()) + net.biases.back()(0);
    return out;
}

/// Forward-mode derivative of the network output along `dir`, reusing the
/// activations of a forward pass. Biases drop out; each hidden layer maps
/// d -> tanh'(z) .* (W d).
inline double mlp_directional_derivative(const ForwardCache &cache, const TransformedDirection &dir, const Mlp &net)
{
    const std::size_t hidden = net.layer_count() - 1;
    if (cache.z.size() != hidden || cache.a.size() != hidden + 1)
        throw ShapeError("forward cache does not match network depth");
    for (std::size_t l = 0; l < hidden; ++l)
        if (cache.z[l].size() != net.weights[l].rows())
            throw ShapeError("forward cache does not match network layer " + std::to_string(l));

    Eigen::VectorXd d = Eigen::Vector2d(dir.du, dir.dv);
    for (std::size_t l = 0; l < hidden; ++l)
    {
        const Eigen::ArrayXd slope = 1.0 - cache.a[l + 1].array().square();
        d = (slope * (net.weights[l] * d).array()).matrix();
    }
    return net.weights.back().row(0).dot(d);
}

inline double eps_predict(const BiasPoint &bias, const Mlp &net)
{
    return mlp_forward(transform_t(bias), net).eps;
}

/// Partial derivatives of eps with respect to each terminal voltage.
struct EpsGradient
{
    double d_vg = 0.0;
    double d_vd = 0.0;
    double d_vs = 0.0;
};

inline EpsGradient eps_grad(const BiasPoint &bias, const Mlp &net)
{
    const auto fwd = mlp_forward(transform_t(bias), net);
    auto along = [&](const DirectionVector &dir) {
        return mlp_directional_derivative(fwd.cache, transform_t_pushforward(bias, dir), net);
    };
    return {along(DirectionVector::gate()), along(DirectionVector::drain()), along(DirectionVector::source())};
}

/// Glorot-uniform weights, zero hidden biases, output bias 1 so a fresh
/// network leaves the core model unchanged on average.
inline Mlp init_weights(const std::vector<std::size_t> &layer_sizes, std::uint64_t seed)
{
    if (layer_sizes.size() < 2 || layer_sizes.front() != 2 || layer_sizes.back() != 1)
        throw ShapeError("layer sizes must start with 2 and end with 1");
    for (auto s : layer_sizes)
        if (s == 0)
            throw ShapeError("layer sizes must be positive");

    Mlp net = Mlp::zeros(layer_sizes);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < net.layer_count(); ++l)
    {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer_sizes[l] + layer_sizes[l + 1]));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c)
                net.weights[l](r, c) = dist(rng);
    }
    net.biases.back()(0) = 1.0;
    return net;
}

/// Identity correction (eps == 1 everywhere) of the given shape.
inline Mlp identity_network(const std::vector<std::size_t> &layer_sizes)
{
    Mlp net = Mlp::zeros(layer_sizes);
    net.validate();
    net.biases.back()(0) = 1.0;
    return net;
}

struct ModelMetadata
{
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    double final_cost = 0.0;
    std::string dataset_fingerprint;

    friend bool operator==(const ModelMetadata &, const ModelMetadata &) = default;
};

struct TrainedModel
{
    CoreParams core;
    Mlp net;
    ModelMetadata metadata;

    void validate() const
    {
        core.validate();
        net.validate();
    }

    friend bool operator==(const TrainedModel &, const TrainedModel &) = default;
};

/// Drain current and its gate/drain conductances (source held fixed).
struct DeviceResponse
{
    double i_ds = 0.0;
    double g_m = 0.0;
    double g_ds = 0.0;
};

/// Derivative of I_core * eps along `dir` (product rule).
inline double ids_directional(const BiasPoint &bias, const DirectionVector &dir, const TrainedModel &model)
{
    const auto fwd = mlp_forward(transform_t(bias), model.net);
    const double d_eps = mlp_directional_derivative(fwd.cache, transform_t_pushforward(bias, dir), model.net);
    return ids_core_directional(bias, dir, model.core) * fwd.eps + ids_core(bias, model.core) * d_eps;
}

inline DeviceResponse ids_full(const BiasPoint &bias, const TrainedModel &model)
{
    const auto fwd = mlp_forward(transform_t(bias), model.net);
    const double core = ids_core(bias, model.core);
    auto along = [&](const DirectionVector &dir) {
        const double d_eps = mlp_directional_derivative(fwd.cache, transform_t_pushforward(bias, dir), model.net);
        return ids_core_directional(bias, dir, model.core) * fwd.eps + core * d_eps;
    };
    return {core * fwd.eps, along(DirectionVector::gate()), along(DirectionVector::drain())};
}

}

#endif

#ifndef NNCM_TEST_SUPPORT_HPP
#define NNCM_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <random>

#include "nncm/nncm.hpp"

namespace nncm::test
{

/// Random network with weights uniform in [-scale, scale] and biases in [-0.5, 0.5].
inline Mlp random_net(const std::vector<std::size_t> &sizes, std::uint64_t seed, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> w(-scale, scale), b(-0.5, 0.5);
    Mlp net = Mlp::zeros(sizes);
    for (std::size_t l = 0; l < net.layer_count(); ++l)
    {
        for (Eigen::Index i = 0; i < net.weights[l].size(); ++i)
            net.weights[l](i) = w(rng);
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
            net.biases[l](i) = b(rng);
    }
    return net;
}

inline BiasPoint random_bias(std::mt19937_64 &rng, double lo = -0.5, double hi = 1.0)
{
    std::uniform_real_distribution<double> d(lo, hi);
    const double a = d(rng);
    return {a, d(rng)};
}

inline double rel_err(double got, double want, double floor = 1e-300)
{
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

/// Central difference of f at x with step h.
template <class F> double central(F &&f, double x, double h)
{
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Five-point central difference of f at x with step h.
template <class F> double five_point(F &&f, double x, double h)
{
    return (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
}

/// Model evaluated from terminal voltages (source-referenced bias).
inline double current_at(const TrainedModel &m, double v_g, double v_d, double v_s)
{
    return ids_full({v_g - v_s, v_g - v_d}, m).i_ds;
}

}

#endif

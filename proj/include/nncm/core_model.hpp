#ifndef NNCM_CORE_MODEL_HPP
#define NNCM_CORE_MODEL_HPP

// EKV-style core current: I = P * (phi(V_GS)^beta - phi(V_GD)^beta),
// phi(V) = V_SS * softplus((V - V_T) / V_SS).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "simplex.hpp"

namespace nncm
{

struct CoreParams
{
    double p = 1.0;     ///< current prefactor, A / V^beta
    double v_ss = 0.026; ///< slope voltage, V
    double v_t = 0.3;   ///< threshold voltage, V
    double beta = 2.0;

    void validate() const
    {
        if (!std::isfinite(p) || !std::isfinite(v_ss) || !std::isfinite(v_t) || !std::isfinite(beta))
            throw DataError("core parameters must be finite");
        if (!(p > 0.0) || !(v_ss > 0.0) || !(beta > 0.0))
            throw DataError("core parameters require P > 0, V_SS > 0, beta > 0");
    }

    friend bool operator==(const CoreParams &, const CoreParams &) = default;
};

/// Operating point in (V_GS, V_GD). V_DS is always derived.
struct BiasPoint
{
    double v_gs = 0.0;
    double v_gd = 0.0;

    static constexpr BiasPoint from_vds(double v_gs, double v_ds) { return {v_gs, v_gs - v_ds}; }
    constexpr double v_ds() const { return v_gs - v_gd; }
    constexpr BiasPoint swapped() const { return {v_gd, v_gs}; }

    friend bool operator==(const BiasPoint &, const BiasPoint &) = default;
};

struct IVSample
{
    BiasPoint bias;
    double i_ds = 0.0;

    friend bool operator==(const IVSample &, const IVSample &) = default;
};

/// Differentiation direction in (V_GS, V_GD) space.
struct DirectionVector
{
    double d_vgs = 0.0;
    double d_vgd = 0.0;

    // Terminal-voltage directions with the other two terminals held fixed.
    static constexpr DirectionVector gate() { return {1.0, 1.0}; }
    static constexpr DirectionVector drain() { return {0.0, -1.0}; }
    static constexpr DirectionVector source() { return {-1.0, 0.0}; }
};

/// log(1 + exp(x)) without overflow.
inline double softplus(double x)
{
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double logistic(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail
{
inline void require_finite(double v, const char *what)
{
    if (!std::isfinite(v))
        throw DataError(std::string("non-finite ") + what);
}
}

inline double phi(double v_gx, const CoreParams &core)
{
    detail::require_finite(v_gx, "gate voltage in phi");
    return core.v_ss * softplus((v_gx - core.v_t) / core.v_ss);
}

/// d phi / d v_gx.
inline double phi_prime(double v_gx, const CoreParams &core)
{
    detail::require_finite(v_gx, "gate voltage in phi_prime");
    return logistic((v_gx - core.v_t) / core.v_ss);
}

inline double ids_core(const BiasPoint &bias, const CoreParams &core)
{
    return core.p * (std::pow(phi(bias.v_gs, core), core.beta) - std::pow(phi(bias.v_gd, core), core.beta));
}

/// Derivative of ids_core along `dir`.
inline double ids_core_directional(const BiasPoint &bias, const DirectionVector &dir, const CoreParams &core)
{
    const double side_s = std::pow(phi(bias.v_gs, core), core.beta - 1.0) * phi_prime(bias.v_gs, core) * dir.d_vgs;
    const double side_d = std::pow(phi(bias.v_gd, core), core.beta - 1.0) * phi_prime(bias.v_gd, core) * dir.d_vgd;
    return core.p * core.beta * (side_s - side_d);
}

struct FitCoreConfig
{
    /// Only samples with |V_DS| at or below this take part in the fit.
    double max_abs_vds = 0.05;
    double current_floor = 1e-30;
    double beta = 2.0;
    std::uint64_t seed = 0;
    std::size_t restarts = 6;
    std::size_t min_samples = 20;
    SimplexOptions simplex{};
};

/// Mean squared log-current error of `core` against `samples`.
inline double core_log_error(std::span<const IVSample> samples, const CoreParams &core, double floor)
{
    double acc = 0.0;
    for (const auto &s : samples)
    {
        const double r = std::log(std::abs(s.i_ds) + floor) - std::log(std::abs(ids_core(s.bias, core)) + floor);
        acc += r * r;
    }
    return acc / static_cast<double>(samples.size());
}

/// Extracts (P, V_SS, V_T) from low-|V_DS| IV data by minimizing log-current
/// error with restarted Nelder-Mead over (ln P, ln V_SS, V_T). beta is not fit.
inline CoreParams fit_core(std::span<const IVSample> samples, const FitCoreConfig &cfg = {})
{
    if (samples.empty())
        throw DataError("fit_core: no samples");

    std::vector<IVSample> used;
    for (const auto &s : samples)
    {
        if (!std::isfinite(s.bias.v_gs) || !std::isfinite(s.bias.v_gd) || !std::isfinite(s.i_ds))
            throw DataError("fit_core: non-finite sample");
        if (std::abs(s.bias.v_ds()) <= cfg.max_abs_vds && s.bias.v_ds() != 0.0)
            used.push_back(s);
    }
    if (used.size() < std::max<std::size_t>(cfg.min_samples, 3))
        throw DataError("fit_core: " + std::to_string(used.size()) + " samples with |V_DS| <= " +
                        std::to_string(cfg.max_abs_vds) + " V, need at least " +
                        std::to_string(std::max<std::size_t>(cfg.min_samples, 3)));

    auto [lo, hi] = std::minmax_element(used.begin(), used.end(), [](const IVSample &a, const IVSample &b) {
        return std::abs(a.i_ds) < std::abs(b.i_ds);
    });
    if (std::abs(hi->i_ds) == std::abs(lo->i_ds))
        throw DataError("fit_core: all currents are equal");

    double vg_lo = HUGE_VAL, vg_hi = -HUGE_VAL;
    for (const auto &s : used)
    {
        vg_lo = std::min(vg_lo, std::max(s.bias.v_gs, s.bias.v_gd));
        vg_hi = std::max(vg_hi, std::max(s.bias.v_gs, s.bias.v_gd));
    }

    auto to_params = [&](const std::vector<double> &x) {
        return CoreParams{std::exp(x[0]), std::exp(x[1]), x[2], cfg.beta};
    };
    auto objective = [&](const std::vector<double> &x) {
        return core_log_error(used, to_params(x), cfg.current_floor);
    };

    // Start with V_T mid-window and P matched at the largest-current sample.
    CoreParams start{1.0, 0.04, 0.5 * (vg_lo + vg_hi), cfg.beta};
    const double unit = std::abs(ids_core(hi->bias, start));
    start.p = unit > 0.0 ? std::abs(hi->i_ds) / unit : 1.0;

    std::vector<double> x{std::log(start.p), std::log(start.v_ss), start.v_t};
    const std::vector<double> steps{1.0, 0.5, 0.1};

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);

    SimplexResult best = minimize_simplex(objective, x, steps, cfg.simplex);
    for (std::size_t r = 0; r < cfg.restarts; ++r)
    {
        std::vector<double> s(steps.size());
        const double shrink = std::pow(0.3, static_cast<double>(r + 1));
        for (std::size_t j = 0; j < s.size(); ++j)
            s[j] = steps[j] * std::max(shrink, 1e-4) * jitter(rng);
        SimplexResult trial = minimize_simplex(objective, best.x, s, cfg.simplex);
        if (trial.value <= best.value)
            best = std::move(trial);
    }

    CoreParams out = to_params(best.x);
    out.validate();
    return out;
}

}

#endif

#ifndef NNCM_SIMPLEX_HPP
#define NNCM_SIMPLEX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace nncm
{

struct SimplexOptions
{
    std::size_t max_evaluations = 20000;
    /// Stop once the spread of objective values across the simplex falls below this.
    double f_tolerance = 1e-15;
    double x_tolerance = 1e-12;
};

struct SimplexResult
{
    std::vector<double> x;
    double value = 0.0;
    std::size_t evaluations = 0;
};

/// Nelder-Mead minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
/// `steps` gives the initial simplex edge along each coordinate.
inline SimplexResult minimize_simplex(const std::function<double(const std::vector<double> &)> &f,
                                      std::vector<double> x0, const std::vector<double> &steps,
                                      const SimplexOptions &opts = {})
{
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i)
        pts[i + 1][i] += steps[i];

    std::size_t evals = 0;
    auto eval = [&](const std::vector<double> &x) {
        ++evals;
        double v = f(x);
        return std::isfinite(v) ? v : HUGE_VAL;
    };

    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        fv[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);

    auto along = [&](double t, std::vector<double> &out) {
        // centroid + t * (centroid - worst)
        const auto &worst = pts[order[n]];
        for (std::size_t j = 0; j < n; ++j)
            out[j] = centroid[j] + t * (centroid[j] - worst[j]);
    };

    while (evals < opts.max_evaluations)
    {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });

        const double f_best = fv[order[0]];
        const double f_worst = fv[order[n]];
        double x_spread = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                x_spread = std::max(x_spread, std::abs(pts[order[i]][j] - pts[order[0]][j]));
        if (std::abs(f_worst - f_best) <= opts.f_tolerance && x_spread <= opts.x_tolerance)
            break;
        if (x_spread <= opts.x_tolerance * 1e-3)
            break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                centroid[j] += pts[order[i]][j] / static_cast<double>(n);

        along(1.0, trial);
        const double f_reflect = eval(trial);
        if (f_reflect < f_best)
        {
            along(2.0, trial2);
            const double f_expand = eval(trial2);
            if (f_expand < f_reflect)
            {
                pts[order[n]] = trial2;
                fv[order[n]] = f_expand;
            }
            else
            {
                pts[order[n]] = trial;
                fv[order[n]] = f_reflect;
            }
            continue;
        }
        if (f_reflect < fv[order[n - 1]])
        {
            pts[order[n]] = trial;
            fv[order[n]] = f_reflect;
            continue;
        }

        const bool outside = f_reflect < f_worst;
        along(outside ? 0.5 : -0.5, trial2);
        const double f_contract = eval(trial2);
        if (f_contract < (outside ? f_reflect : f_worst))
        {
            pts[order[n]] = trial2;
            fv[order[n]] = f_contract;
            continue;
        }

        const auto best = pts[order[0]];
        for (std::size_t i = 1; i <= n; ++i)
        {
            auto &p = pts[order[i]];
            for (std::size_t j = 0; j < n; ++j)
                p[j] = best[j] + 0.5 * (p[j] - best[j]);
            fv[order[i]] = eval(p);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    return {pts[best], fv[best], evals};
}

}

#endif

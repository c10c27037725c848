#ifndef NNCM_VALIDATION_HPP
#define NNCM_VALIDATION_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "correction_network.hpp"
#include "dataset.hpp"
#include "error.hpp"

namespace nncm
{

/// Reference device data with conductances.
struct ReferencePoint
{
    BiasPoint bias;
    double i_ds = 0.0;
    double g_m = 0.0;
    double g_ds = 0.0;
};

/// Reference points from grid IV data; g_m and g_ds come from
/// second-order finite differences of the current over the grid.
inline std::vector<ReferencePoint> reference_from_grid(std::span<const IVSample> samples)
{
    std::vector<BiasPoint> points;
    std::vector<double> current;
    for (const auto &s : samples)
    {
        points.push_back(s.bias);
        current.push_back(s.i_ds);
    }
    const auto partials = grid_partials(infer_grid(points), current);
    std::vector<ReferencePoint> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[i] = {samples[i].bias, samples[i].i_ds, partials.d_vg[i], partials.d_vd[i]};
    return out;
}

struct ValidationConfig
{
    /// Percent errors are only formed where |reference| > floor * max |reference|.
    double floor = 1e-3;
    /// Histogram bin edges in percent; the last bin is open-ended.
    std::vector<double> bin_edges{0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
    double max_i_ds_percent = 2.0;
    double max_g_m_percent = 5.0;
    double max_g_ds_percent = 25.0;
};

struct QuantityError
{
    double max_percent = 0.0;
    double rms_percent = 0.0;
    std::size_t count = 0;
    double threshold = 0.0; ///< absolute cutoff actually used
    std::vector<std::size_t> histogram;
};

struct ErrorReport
{
    double floor = 0.0;
    std::vector<double> bin_edges;
    QuantityError i_ds, g_m, g_ds;

    bool within(const ValidationConfig &cfg) const
    {
        return i_ds.max_percent <= cfg.max_i_ds_percent && g_m.max_percent <= cfg.max_g_m_percent &&
               g_ds.max_percent <= cfg.max_g_ds_percent;
    }
};

namespace detail
{
inline QuantityError percent_errors(std::span<const double> predicted, std::span<const double> reference,
                                    const ValidationConfig &cfg)
{
    QuantityError q;
    double ref_max = 0.0;
    for (double r : reference)
        ref_max = std::max(ref_max, std::abs(r));
    q.threshold = cfg.floor * ref_max;
    q.histogram.assign(cfg.bin_edges.size(), 0);
    double sq = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i)
    {
        if (!(std::abs(reference[i]) > q.threshold))
            continue;
        const double pct = 100.0 * std::abs(predicted[i] - reference[i]) / std::abs(reference[i]);
        q.max_percent = std::max(q.max_percent, pct);
        sq += pct * pct;
        ++q.count;
        const auto bin = std::upper_bound(cfg.bin_edges.begin(), cfg.bin_edges.end(), pct) - cfg.bin_edges.begin();
        if (bin > 0)
            ++q.histogram[static_cast<std::size_t>(bin - 1)];
    }
    q.rms_percent = q.count ? std::sqrt(sq / static_cast<double>(q.count)) : 0.0;
    return q;
}
}

inline ErrorReport error_metrics(const TrainedModel &model, std::span<const ReferencePoint> reference,
                                 const ValidationConfig &cfg = {})
{
    if (reference.empty())
        throw DataError("error_metrics: empty reference set");
    model.validate();
    const std::size_t n = reference.size();
    std::vector<double> pi(n), pm(n), pd(n), ri(n), rm(n), rd(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto r = ids_full(reference[i].bias, model);
        pi[i] = r.i_ds;
        pm[i] = r.g_m;
        pd[i] = r.g_ds;
        ri[i] = reference[i].i_ds;
        rm[i] = reference[i].g_m;
        rd[i] = reference[i].g_ds;
    }
    return {cfg.floor, cfg.bin_edges, detail::percent_errors(pi, ri, cfg), detail::percent_errors(pm, rm, cfg),
            detail::percent_errors(pd, rd, cfg)};
}

struct GummelConfig
{
    double v_g = 0.5;
    double v_x_max = 0.1;
    std::size_t points = 201;
};

/// Source at -V_X, drain at +V_X, gate at V_G.
struct GummelReport
{
    double v_g = 0.0;
    std::vector<double> v_x;
    std::vector<double> i_ds;
    std::vector<double> d_i;  ///< dI/dV_X, analytic
    std::vector<double> d2_i; ///< d2I/dV_X2, central difference of the analytic first derivative

    double max_abs_d2 = 0.0;
    /// max |I(x) + I(-x)| / |I(x)|
    double oddness = 0.0;
    /// max |I'(x) - I'(-x)| / |I'(x)|
    double derivative_evenness = 0.0;
    /// |d2I(0)| / max |d2I|
    double d2_at_zero = 0.0;
    /// Jump between one-sided linear extrapolations of d2I to V_X = 0, over max |d2I|.
    double discontinuity = 0.0;
    /// |d2I(+h) - d2I(-h)| / max |d2I|; for an odd smooth I this is ~2 h |I'''(0)| / max |d2I|.
    double symmetric_difference = 0.0;

    bool passes(double oddness_tol = 1e-14, double d2_tol = 1e-6, double jump_tol = 1e-2) const
    {
        return oddness <= oddness_tol && d2_at_zero <= d2_tol && discontinuity < jump_tol;
    }
};

inline GummelReport gummel_sweep(const TrainedModel &model, const GummelConfig &cfg = {})
{
    if (cfg.points % 2 == 0 || cfg.points < 5)
        throw DataError("gummel_sweep: point count must be odd and at least 5");
    if (!(cfg.v_x_max > 0.0) || !std::isfinite(cfg.v_g))
        throw DataError("gummel_sweep: v_x_max must be positive");
    model.validate();

    const auto n = static_cast<long>(cfg.points);
    const long c = (n - 1) / 2;
    const double h = cfg.v_x_max / static_cast<double>(c);
    auto bias_at = [&](double x) { return BiasPoint{cfg.v_g + x, cfg.v_g - x}; };
    // f' on the sweep extended by one step at each end, so every point gets a centered d2.
    std::vector<double> d1_ext(static_cast<std::size_t>(n + 2));
    for (long j = -1; j <= n; ++j)
        d1_ext[static_cast<std::size_t>(j + 1)] =
            ids_directional(bias_at(h * static_cast<double>(j - c)), {1.0, -1.0}, model);

    GummelReport r;
    r.v_g = cfg.v_g;
    for (long j = 0; j < n; ++j)
    {
        const double x = h * static_cast<double>(j - c);
        const auto k = static_cast<std::size_t>(j + 1);
        r.v_x.push_back(x);
        r.i_ds.push_back(ids_full(bias_at(x), model).i_ds);
        r.d_i.push_back(d1_ext[k]);
        r.d2_i.push_back((d1_ext[k + 1] - d1_ext[k - 1]) / (2.0 * h));
    }

    for (double v : r.d2_i)
        r.max_abs_d2 = std::max(r.max_abs_d2, std::abs(v));
    const double tiny = std::numeric_limits<double>::min();
    for (long j = 0; j < n; ++j)
    {
        const auto a = static_cast<std::size_t>(j), b = static_cast<std::size_t>(n - 1 - j);
        if (r.i_ds[a] != 0.0)
            r.oddness = std::max(r.oddness, std::abs(r.i_ds[a] + r.i_ds[b]) / std::abs(r.i_ds[a]));
        else if (r.i_ds[b] != 0.0)
            r.oddness = HUGE_VAL;
        r.derivative_evenness =
            std::max(r.derivative_evenness, std::abs(r.d_i[a] - r.d_i[b]) / std::max(std::abs(r.d_i[a]), tiny));
    }
    const auto z = static_cast<std::size_t>(c);
    const double scale = std::max(r.max_abs_d2, tiny);
    r.d2_at_zero = std::abs(r.d2_i[z]) / scale;
    r.symmetric_difference = std::abs(r.d2_i[z + 1] - r.d2_i[z - 1]) / scale;
    const double right = 2.0 * r.d2_i[z + 1] - r.d2_i[z + 2];
    const double left = 2.0 * r.d2_i[z - 1] - r.d2_i[z - 2];
    r.discontinuity = std::abs(right - left) / scale;
    return r;
}

enum class ReportFormat
{
    csv,
    json
};

inline ReportFormat parse_report_format(std::string_view tag)
{
    if (tag == "csv")
        return ReportFormat::csv;
    if (tag == "json")
        return ReportFormat::json;
    throw DataError("unknown report format '" + std::string(tag) + "' (expected csv or json)");
}

inline nlohmann::json to_json(const QuantityError &q)
{
    return {{"max_percent", q.max_percent},
            {"rms_percent", q.rms_percent},
            {"count", q.count},
            {"threshold", q.threshold},
            {"histogram", q.histogram}};
}

inline nlohmann::json to_json(const ErrorReport &r)
{
    return {{"floor", r.floor},
            {"bin_edges_percent", r.bin_edges},
            {"i_ds", to_json(r.i_ds)},
            {"g_m", to_json(r.g_m)},
            {"g_ds", to_json(r.g_ds)}};
}

inline nlohmann::json to_json(const GummelReport &r)
{
    return {{"v_g", r.v_g},
            {"v_x", r.v_x},
            {"i_ds", r.i_ds},
            {"dI_dVx", r.d_i},
            {"d2I_dVx2", r.d2_i},
            {"metrics",
             {{"oddness", r.oddness},
              {"derivative_evenness", r.derivative_evenness},
              {"d2_at_zero", r.d2_at_zero},
              {"discontinuity", r.discontinuity},
              {"symmetric_difference", r.symmetric_difference},
              {"max_abs_d2", r.max_abs_d2}}}};
}

/// CSV columns: quantity,count,threshold,max_percent,rms_percent,bin_0..bin_{k-1}
/// where bin_i counts errors in [edge_i, edge_{i+1}) percent (last bin open).
inline std::string to_csv(const ErrorReport &r)
{
    std::string out = "# floor=" + format_double(r.floor) + "\n# bin_edges_percent=";
    for (std::size_t i = 0; i < r.bin_edges.size(); ++i)
        out += (i ? ";" : "") + format_double(r.bin_edges[i]);
    out += "\nquantity,count,threshold,max_percent,rms_percent";
    for (std::size_t i = 0; i < r.bin_edges.size(); ++i)
        out += ",bin_" + std::to_string(i);
    out += "\n";
    auto row = [&](const char *name, const QuantityError &q) {
        out += std::string(name) + "," + std::to_string(q.count) + "," + format_double(q.threshold) + "," +
               format_double(q.max_percent) + "," + format_double(q.rms_percent);
        for (auto c : q.histogram)
            out += "," + std::to_string(c);
        out += "\n";
    };
    row("i_ds", r.i_ds);
    row("g_m", r.g_m);
    row("g_ds", r.g_ds);
    return out;
}

/// CSV columns: v_x,i_ds,dI_dVx,d2I_dVx2; metrics in leading '#' lines.
inline std::string to_csv(const GummelReport &r)
{
    std::string out = "# v_g=" + format_double(r.v_g) + "\n";
    out += "# oddness=" + format_double(r.oddness) + "\n";
    out += "# derivative_evenness=" + format_double(r.derivative_evenness) + "\n";
    out += "# d2_at_zero=" + format_double(r.d2_at_zero) + "\n";
    out += "# discontinuity=" + format_double(r.discontinuity) + "\n";
    out += "# symmetric_difference=" + format_double(r.symmetric_difference) + "\n";
    out += "v_x,i_ds,dI_dVx,d2I_dVx2\n";
    for (std::size_t i = 0; i < r.v_x.size(); ++i)
        out += format_double(r.v_x[i]) + "," + format_double(r.i_ds[i]) + "," + format_double(r.d_i[i]) + "," +
               format_double(r.d2_i[i]) + "\n";
    return out;
}

template <class Report> std::string render_report(const Report &report, ReportFormat format)
{
    return format == ReportFormat::json ? to_json(report).dump(2) + "\n" : to_csv(report);
}

template <class Report> void export_report(const Report &report, const std::string &path, ReportFormat format)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    f << render_report(report, format);
    if (!f)
        throw IoError("failed writing " + path);
}

template <class Report> void export_report(const Report &report, const std::string &path, std::string_view format)
{
    export_report(report, path, parse_report_format(format));
}

}

#endif

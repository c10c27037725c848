#ifndef NNCM_DATASET_HPP
#define NNCM_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "core_model.hpp"
#include "correction_network.hpp"
#include "error.hpp"

namespace nncm
{

/// One training row: eps and its terminal-voltage derivatives at a bias point.
struct CorrectionSample
{
    BiasPoint bias;
    double eps = 0.0;
    double d_eps_dvg = 0.0;
    double d_eps_dvd = 0.0;
};

struct EpsSample
{
    BiasPoint bias;
    double eps = 0.0;
};

struct AxisSpec
{
    double lo = 0.0;
    double hi = 1.0;
    std::size_t count = 2;
};

/// Rectangular (V_GS, V_DS) grid. Intervals lying entirely at or below
/// `dense_below` volts are split into `dense_factor` sub-intervals.
struct GridSpec
{
    AxisSpec v_gs{0.0, 0.7, 72};
    AxisSpec v_ds{0.001, 0.7, 69};
    double dense_below = 0.2;
    std::size_t dense_factor = 3;

    void validate() const
    {
        for (const auto *axis : {&v_gs, &v_ds})
        {
            if (!std::isfinite(axis->lo) || !std::isfinite(axis->hi) || !(axis->lo < axis->hi))
                throw DataError("grid axis requires finite lo < hi");
            if (axis->count < 2)
                throw DataError("grid axis requires at least 2 points");
        }
        if (dense_factor < 1)
            throw DataError("densification factor must be at least 1");
    }

    /// 12k-point training grid over the supply window V_GS, V_DS <= 0.7 V.
    static GridSpec training_default() { return {}; }

    /// Uniform 56k-point evaluation grid over the same window.
    static GridSpec test_default() { return {{0.0, 0.7, 224}, {0.001, 0.7, 250}, 0.2, 1}; }
};

/// Synthetic device: core model times a smooth, swap-invariant correction
/// eps_true(u, v) = 1 + a1 * v * (1 + a2 * logistic(u / a0)).
struct OracleParams
{
    CoreParams base{1e-4, 0.035, 0.3, 2.0};
    double a0 = 0.5;
    double a1 = 1.4;
    double a2 = 0.5;

    void validate() const
    {
        base.validate();
        if (!std::isfinite(a0) || !std::isfinite(a1) || !std::isfinite(a2) || a0 == 0.0)
            throw DataError("oracle shape coefficients must be finite with a0 != 0");
    }
};

/// Geometry of a rectangular grid; samples are ordered v_gs-major.
struct GridGeometry
{
    std::vector<double> v_gs;
    std::vector<double> v_ds;

    std::size_t size() const { return v_gs.size() * v_ds.size(); }
};

inline std::vector<double> axis_points(const AxisSpec &axis, double dense_below, std::size_t dense_factor)
{
    const auto n = axis.count;
    const double h = (axis.hi - axis.lo) / static_cast<double>(n - 1);
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        const double x0 = axis.lo + h * static_cast<double>(i);
        const double x1 = axis.lo + h * static_cast<double>(i + 1);
        const std::size_t parts = x1 <= dense_below ? dense_factor : 1;
        for (std::size_t k = 0; k < parts; ++k)
            out.push_back(x0 + (x1 - x0) * static_cast<double>(k) / static_cast<double>(parts));
    }
    out.push_back(axis.hi);
    return out;
}

inline GridGeometry grid_geometry(const GridSpec &spec)
{
    spec.validate();
    return {axis_points(spec.v_gs, spec.dense_below, spec.dense_factor),
            axis_points(spec.v_ds, spec.dense_below, spec.dense_factor)};
}

inline double eps_true(const TransformedInput &x, const OracleParams &p)
{
    return 1.0 + p.a1 * x.v * (1.0 + p.a2 * logistic(x.u / p.a0));
}

inline double synthetic_oracle(const BiasPoint &bias, const OracleParams &p)
{
    return ids_core(bias, p.base) * eps_true(transform_t(bias), p);
}

namespace detail
{
template <class CurrentFn> std::vector<IVSample> sample_grid(const GridGeometry &g, CurrentFn &&current)
{
    std::vector<IVSample> out;
    out.reserve(g.size());
    for (double v_gs : g.v_gs)
        for (double v_ds : g.v_ds)
        {
            const auto bias = BiasPoint::from_vds(v_gs, v_ds);
            out.push_back({bias, current(bias)});
        }
    return out;
}

inline bool close_volts(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }
}

inline std::vector<IVSample> generate_grid(const GridSpec &spec, const OracleParams &oracle)
{
    oracle.validate();
    return detail::sample_grid(grid_geometry(spec),
                               [&](const BiasPoint &b) { return synthetic_oracle(b, oracle); });
}

/// Picks the grid points out of externally supplied data; every grid point
/// must be present (matched on V_GS and V_DS to 1 nV).
inline std::vector<IVSample> generate_grid(const GridSpec &spec, std::span<const IVSample> data)
{
    std::vector<IVSample> sorted(data.begin(), data.end());
    auto key = [](const IVSample &s) { return std::pair{s.bias.v_gs, s.bias.v_ds()}; };
    std::sort(sorted.begin(), sorted.end(), [&](const IVSample &a, const IVSample &b) { return key(a) < key(b); });

    return detail::sample_grid(grid_geometry(spec), [&](const BiasPoint &b) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), b.v_gs - 1e-9, [](const IVSample &s, double v) {
            return s.bias.v_gs < v;
        });
        for (auto j = it; j != sorted.end() && j->bias.v_gs <= b.v_gs + 1e-9; ++j)
            if (detail::close_volts(j->bias.v_ds(), b.v_ds()))
                return j->i_ds;
        throw DataError("data has no sample at v_gs=" + std::to_string(b.v_gs) + " v_ds=" + std::to_string(b.v_ds()));
    });
}

/// Recovers the grid axes from v_gs-major ordered samples.
inline GridGeometry infer_grid(std::span<const BiasPoint> points)
{
    GridGeometry g;
    if (points.empty())
        throw DataError("empty sample set is not a grid");
    const double first_gs = points.front().v_gs;
    for (const auto &p : points)
    {
        if (!detail::close_volts(p.v_gs, first_gs))
            break;
        g.v_ds.push_back(p.v_ds());
    }
    if (points.size() % g.v_ds.size() != 0)
        throw DataError("samples do not form a rectangular (v_gs, v_ds) grid");
    for (std::size_t i = 0; i < points.size(); i += g.v_ds.size())
        g.v_gs.push_back(points[i].v_gs);

    for (std::size_t i = 0; i < g.v_gs.size(); ++i)
        for (std::size_t j = 0; j < g.v_ds.size(); ++j)
        {
            const auto &p = points[i * g.v_ds.size() + j];
            if (!detail::close_volts(p.v_gs, g.v_gs[i]) || !detail::close_volts(p.v_ds(), g.v_ds[j]))
                throw DataError("sample " + std::to_string(i * g.v_ds.size() + j) + " is off the grid");
        }
    auto strictly_increasing = [](const std::vector<double> &v) {
        return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
    };
    if (g.v_gs.size() < 3 || g.v_ds.size() < 3 || !strictly_increasing(g.v_gs) || !strictly_increasing(g.v_ds))
        throw DataError("grid axes need at least 3 strictly increasing points");
    return g;
}

namespace detail
{
/// Derivative at x[at] of the quadratic through (x[k], f[k]) for k in {i0, i0+1, i0+2}.
inline double three_point_derivative(const std::vector<double> &x, std::size_t i0, std::size_t at,
                                     const auto &f)
{
    const double xa = x[i0], xb = x[i0 + 1], xc = x[i0 + 2], t = x[at];
    const double wa = ((t - xb) + (t - xc)) / ((xa - xb) * (xa - xc));
    const double wb = ((t - xa) + (t - xc)) / ((xb - xa) * (xb - xc));
    const double wc = ((t - xa) + (t - xb)) / ((xc - xa) * (xc - xb));
    return wa * f(i0) + wb * f(i0 + 1) + wc * f(i0 + 2);
}

inline double axis_derivative(const std::vector<double> &x, std::size_t at, const auto &f)
{
    if (at == 0)
        return three_point_derivative(x, 0, 0, f);
    if (at + 1 == x.size())
        return three_point_derivative(x, at - 2, at, f);
    return three_point_derivative(x, at - 1, at, f);
}
}

struct GridPartials
{
    std::vector<double> d_vg;
    std::vector<double> d_vd;
};

/// Second-order finite-difference partials of grid values with respect to
/// V_G (fixed V_D, V_S) and V_D (fixed V_G, V_S): centered in the interior,
/// one-sided at the edges, exact for quadratics on nonuniform spacing.
inline GridPartials grid_partials(const GridGeometry &g, std::span<const double> values)
{
    if (values.size() != g.size())
        throw DataError("value count does not match grid size");
    const std::size_t nd = g.v_ds.size();
    GridPartials out{std::vector<double>(values.size()), std::vector<double>(values.size())};
    for (std::size_t i = 0; i < g.v_gs.size(); ++i)
        for (std::size_t j = 0; j < nd; ++j)
        {
            out.d_vg[i * nd + j] =
                detail::axis_derivative(g.v_gs, i, [&](std::size_t k) { return values[k * nd + j]; });
            out.d_vd[i * nd + j] =
                detail::axis_derivative(g.v_ds, j, [&](std::size_t k) { return values[i * nd + k]; });
        }
    return out;
}

/// Minimum |V_DS| for which eps = I / I_core is formed.
inline constexpr double kMinEpsVds = 1e-3;

inline std::vector<EpsSample> compute_eps(std::span<const IVSample> samples, const CoreParams &core)
{
    core.validate();
    std::vector<EpsSample> out;
    out.reserve(samples.size());
    for (const auto &s : samples)
    {
        const double v_ds = s.bias.v_ds();
        auto where = [&] {
            return "(v_gs=" + std::to_string(s.bias.v_gs) + ", v_ds=" + std::to_string(v_ds) + ")";
        };
        if (!(std::abs(v_ds) >= kMinEpsVds * (1.0 - 1e-9)))
            throw DataError("compute_eps: |v_ds| below 1 mV at " + where());
        const double denom = ids_core(s.bias, core);
        if (!(std::abs(denom) >= 1e-30))
            throw DataError("compute_eps: core current below 1e-30 A at " + where());
        out.push_back({s.bias, s.i_ds / denom});
    }
    return out;
}

inline std::vector<CorrectionSample> fd_derivative_targets(std::span<const EpsSample> samples,
                                                           const GridGeometry &grid)
{
    if (samples.size() != grid.size())
        throw DataError("fd_derivative_targets: sample count does not match grid");
    std::vector<double> eps(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        const auto &b = samples[i].bias;
        const std::size_t nd = grid.v_ds.size();
        if (!detail::close_volts(b.v_gs, grid.v_gs[i / nd]) || !detail::close_volts(b.v_ds(), grid.v_ds[i % nd]))
            throw DataError("fd_derivative_targets: sample " + std::to_string(i) + " is off the grid");
        eps[i] = samples[i].eps;
    }
    const auto partials = grid_partials(grid, eps);
    std::vector<CorrectionSample> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out[i] = {samples[i].bias, eps[i], partials.d_vg[i], partials.d_vd[i]};
    return out;
}

/// Grid data to training rows: eps against `core`, then FD derivative targets.
inline std::vector<CorrectionSample> prepare_training_set(std::span<const IVSample> grid_samples,
                                                          const CoreParams &core)
{
    std::vector<BiasPoint> points;
    points.reserve(grid_samples.size());
    for (const auto &s : grid_samples)
        points.push_back(s.bias);
    const auto geometry = infer_grid(points);
    const auto eps = compute_eps(grid_samples, core);
    return fd_derivative_targets(eps, geometry);
}

// CSV: header "v_gs,v_ds,i_ds", '#' comment lines, SI units.

inline std::string format_double(double v)
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace detail
{
inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double &out)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}
}

inline std::string write_csv(std::span<const IVSample> samples, const std::vector<std::string> &comments = {})
{
    std::string out;
    for (const auto &c : comments)
        out += "# " + c + "\n";
    out += "v_gs,v_ds,i_ds\n";
    for (const auto &s : samples)
        out += format_double(s.bias.v_gs) + "," + format_double(s.bias.v_ds()) + "," + format_double(s.i_ds) + "\n";
    return out;
}

inline std::vector<IVSample> read_csv(std::string_view text)
{
    std::vector<IVSample> out;
    bool header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size())
    {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        const auto line = detail::trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#')
            continue;
        if (!header)
        {
            std::string compact;
            for (char c : line)
                if (c != ' ' && c != '\t')
                    compact += c;
            if (compact != "v_gs,v_ds,i_ds")
                throw ParseError(line_no, "line " + std::to_string(line_no) + ": expected header v_gs,v_ds,i_ds");
            header = true;
            continue;
        }
        double v[3];
        std::size_t field = 0, start = 0;
        for (; field < 3; ++field)
        {
            const auto comma = line.find(',', start);
            const bool last = field == 2;
            if (last != (comma == std::string_view::npos))
                throw ParseError(line_no, "line " + std::to_string(line_no) + ": expected 3 comma-separated fields");
            const auto cell = line.substr(start, last ? std::string_view::npos : comma - start);
            if (!detail::parse_double(cell, v[field]) || !std::isfinite(v[field]))
                throw ParseError(line_no, "line " + std::to_string(line_no) + ": field " + std::to_string(field + 1) +
                                              " is not a finite number");
            start = comma + 1;
        }
        if (std::abs(v[0]) > 100.0 || std::abs(v[1]) > 100.0)
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": voltage beyond 100 V (expected volts)");
        out.push_back({BiasPoint::from_vds(v[0], v[1]), v[2]});
    }
    if (!header)
        throw ParseError(line_no, "csv has no header line");
    return out;
}

inline void save_csv(const std::string &path, std::span<const IVSample> samples,
                     const std::vector<std::string> &comments = {})
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path + " for writing");
    f << write_csv(samples, comments);
    if (!f)
        throw IoError("failed writing " + path);
}

inline std::string read_file(const std::string &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::vector<IVSample> load_csv(const std::string &path)
{
    try
    {
        return read_csv(read_file(path));
    }
    catch (const ParseError &e)
    {
        throw ParseError(e.position(), path + ": " + e.what());
    }
}

/// FNV-1a over the canonical CSV text of a dataset.
inline std::string dataset_fingerprint(std::span<const IVSample> samples)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : write_csv(samples))
    {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}

#endif

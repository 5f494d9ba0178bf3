#pragma once

// Quilt comparison, ablation sweeps and render timing.

#include "lfr/metrics.hpp"
#include "lfr/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace lfr {

struct ViewMetrics {
    int j = 1;
    int i = 1;
    double psnr = 0;
    double ssim = 0;
};

struct QuiltComparison {
    std::vector<ViewMetrics> views;  // quilt order
    double mean_psnr = 0;
    double mean_ssim = 0;
};

/// Per-view metrics between two quilt images with the same layout.
inline QuiltComparison compare_quilt_images(const Image8& a, const Image8& b, int views_x, int views_y) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw ConfigError("compare: quilt images differ in size");
    if (views_x < 1 || views_y < 1 || a.width % views_x != 0 || a.height % views_y != 0)
        throw ConfigError("compare: quilt size is not divisible by the view grid");
    QuiltComparison out;
    for (int i = 1; i <= views_y; ++i)
        for (int j = 1; j <= views_x; ++j) {
            const ImageRGB ta = to_float(quilt_tile(a, views_x, views_y, j, i));
            const ImageRGB tb = to_float(quilt_tile(b, views_x, views_y, j, i));
            out.views.push_back({j, i, psnr(ta, tb), ssim(ta, tb)});
        }
    for (const auto& v : out.views) {
        out.mean_psnr += v.psnr;
        out.mean_ssim += v.ssim;
    }
    out.mean_psnr /= double(out.views.size());
    out.mean_ssim /= double(out.views.size());
    return out;
}

/// Metrics on the finalized (8-bit, over `background`) views, i.e. exactly
/// what the PNG outputs contain.
inline QuiltComparison compare_quilts(const Quilt& a, const Quilt& b, const Float3& background = {0, 0, 0}) {
    const auto& ca = a.config;
    const auto& cb = b.config;
    if (ca.views_x != cb.views_x || ca.views_y != cb.views_y || ca.res_x != cb.res_x || ca.res_y != cb.res_y)
        throw ConfigError("compare: quilt configurations differ");
    return compare_quilt_images(finalize_quilt(a, background), finalize_quilt(b, background), ca.views_x, ca.views_y);
}

inline nlohmann::json to_json(const QuiltComparison& c) {
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : c.views) views.push_back({{"j", v.j}, {"i", v.i}, {"psnr", v.psnr}, {"ssim", v.ssim}});
    return {{"mean_psnr", c.mean_psnr}, {"mean_ssim", c.mean_ssim}, {"views", views}};
}

namespace detail {
template <class F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median over `repeats` timed runs after `warmup` untimed ones.
template <class F>
double timed_median(F&& f, int repeats, int warmup) {
    for (int w = 0; w < warmup; ++w) f();
    std::vector<double> t;
    for (int r = 0; r < std::max(1, repeats); ++r) t.push_back(time_ms(f));
    return median(std::move(t));
}
}  // namespace detail

struct AblationConfig {
    DisplayConfig display;
    bool adaptive_filter = true;
};

struct AblationRow {
    int n_chunk = 0;
    double plane_scale = 0;
    Interp interp = Interp::nearest;
    Precision precision = Precision::u8;
    bool adaptive_filter = true;
    int views = 0;
    double psnr = 0;
    double ssim = 0;
    double render_ms_quilt = 0;
    double render_ms_baseline = 0;
    double speedup = 0;
    std::size_t peak_plane_memory_bytes = 0;
    bool ok = true;
    std::string error;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    static std::string csv_header() {
        return "n_chunk,plane_scale,interp,precision,adaptive_filter,views,psnr,ssim,lpips,render_ms_quilt,"
               "render_ms_baseline,speedup,peak_plane_memory_bytes,status";
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << csv_header() << '\n';
        char buf[512];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%s,%s,%d,%d,%.17g,%.17g,,%.17g,%.17g,%.17g,%zu,", r.n_chunk,
                          r.plane_scale, to_string(r.interp).c_str(), to_string(r.precision).c_str(),
                          int(r.adaptive_filter), r.views, r.psnr, r.ssim, r.render_ms_quilt, r.render_ms_baseline,
                          r.speedup, r.peak_plane_memory_bytes);
            os << buf;
            if (r.ok) {
                os << "ok";
            } else {
                std::string e = r.error;
                std::replace(e.begin(), e.end(), '"', '\'');
                os << "\"failed: " << e << '"';
            }
            os << '\n';
        }
        return os.str();
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json j = {{"n_chunk", r.n_chunk},
                                {"plane_scale", r.plane_scale},
                                {"interp", to_string(r.interp)},
                                {"precision", to_string(r.precision)},
                                {"adaptive_filter", r.adaptive_filter},
                                {"views", r.views},
                                {"psnr", r.psnr},
                                {"ssim", r.ssim},
                                {"lpips", nullptr},
                                {"render_ms_quilt", r.render_ms_quilt},
                                {"render_ms_baseline", r.render_ms_baseline},
                                {"speedup", r.speedup},
                                {"peak_plane_memory_bytes", r.peak_plane_memory_bytes},
                                {"ok", r.ok}};
            if (!r.ok) j["error"] = r.error;
            arr.push_back(std::move(j));
        }
        return {{"rows", arr}};
    }
};

struct AblationOptions {
    int timing_repeats = 1;
    int warmup = 0;
    bool measure_time = true;
};

namespace detail {
// Fields the per-view baseline depends on.
inline auto baseline_key(const DisplayConfig& c) {
    return std::make_tuple(c.d_focal, c.fov_x, c.fov_y, c.view_angle_x, c.view_angle_y, c.views_x, c.views_y, c.res_x,
                           c.res_y);
}
}  // namespace detail

/// Runs each configuration against the per-view baseline. Rows run in order;
/// a failing row is recorded and the sweep continues. Baselines are shared
/// between rows with the same view geometry.
inline AblationReport run_ablation(const Scene& scene, const CameraPose& base, const std::vector<AblationConfig>& grid,
                                   const AblationOptions& opts = {}) {
    AblationReport report;
    std::map<decltype(detail::baseline_key(DisplayConfig{})), std::pair<Quilt, double>> baselines;
    for (const auto& entry : grid) {
        AblationRow row;
        const DisplayConfig& cfg = entry.display;
        row.n_chunk = cfg.n_chunk;
        row.plane_scale = cfg.plane_scale;
        row.interp = cfg.interp;
        row.precision = cfg.plane_precision;
        row.adaptive_filter = entry.adaptive_filter;
        row.views = cfg.view_count();
        try {
            validate(cfg);
            const auto key = detail::baseline_key(cfg);
            auto it = baselines.find(key);
            if (it == baselines.end()) {
                Quilt q;
                const double ms = opts.measure_time
                                      ? detail::timed_median([&] { q = render_quilt_baseline(scene, cfg, base); },
                                                             opts.timing_repeats, opts.warmup)
                                      : detail::time_ms([&] { q = render_quilt_baseline(scene, cfg, base); });
                it = baselines.emplace(key, std::make_pair(std::move(q), ms)).first;
            }
            RenderOptions ro;
            ro.raster.adaptive_filter = entry.adaptive_filter;
            Quilt quilt;
            auto run = [&] { quilt = render_quilt_sweep(scene, cfg, base, ro); };
            row.render_ms_quilt =
                opts.measure_time ? detail::timed_median(run, opts.timing_repeats, opts.warmup) : detail::time_ms(run);
            row.render_ms_baseline = it->second.second;
            row.speedup = row.render_ms_baseline / row.render_ms_quilt;
            const auto cmp = compare_quilts(quilt, it->second.first);
            row.psnr = cmp.mean_psnr;
            row.ssim = cmp.mean_ssim;
            const auto [pw, ph] = plane_pixel_grid(cfg);
            row.peak_plane_memory_bytes = std::size_t(cfg.n_chunk) * std::size_t(pw) * std::size_t(ph) * 4 *
                                          (cfg.plane_precision == Precision::u8 ? 1 : 4);
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

struct BenchmarkRow {
    int views = 0;
    int n_chunk = 0;
    double baseline_ms = 0;
    double quilt_ms = 0;
    double speedup = 0;
    std::size_t plane_memory_bytes = 0;
};

/// Median wall time of the full per-view baseline and the plane-sweep quilt.
/// Scene loading is excluded; warm-up runs absorb first-touch allocation.
inline BenchmarkRow benchmark(const Scene& scene, const DisplayConfig& cfg, const CameraPose& base, int repeats = 3,
                              int warmup = 1) {
    validate(cfg);
    if (warmup < 1) throw ArgumentError("benchmark: warmup must be >= 1");
    BenchmarkRow row;
    row.views = cfg.view_count();
    row.n_chunk = cfg.n_chunk;
    row.baseline_ms = detail::timed_median([&] { (void)render_quilt_baseline(scene, cfg, base); }, repeats, warmup);
    row.quilt_ms = detail::timed_median([&] { (void)render_quilt_sweep(scene, cfg, base); }, repeats, warmup);
    row.speedup = row.baseline_ms / row.quilt_ms;
    const auto [pw, ph] = plane_pixel_grid(cfg);
    row.plane_memory_bytes =
        std::size_t(cfg.n_chunk) * pw * ph * 4 * (cfg.plane_precision == Precision::u8 ? 1 : 4);
    return row;
}

inline nlohmann::json to_json(const BenchmarkRow& r) {
    return {{"views", r.views},           {"n_chunk", r.n_chunk}, {"baseline_ms", r.baseline_ms},
            {"quilt_ms", r.quilt_ms},     {"speedup", r.speedup}, {"plane_memory_bytes", r.plane_memory_bytes}};
}

/// Least-squares line fit; returns (slope, intercept, r^2).
inline std::tuple<double, double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
    const double slope = cxy / vx;
    const double r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
    return {slope, (sy - slope * sx) / n, r2};
}

}  // namespace lfr

#pragma once

// Swizzle blending: every quilt pixel is projected onto each sweeping plane,
// the plane is sampled and the samples are alpha-composited front to back.

#include "lfr/display.hpp"
#include "lfr/image.hpp"
#include "lfr/parallel.hpp"
#include "lfr/raster.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <type_traits>
#include <vector>

namespace lfr {

/// Half an 8-bit quantum: pixels whose accumulated transmittance drops below
/// this can no longer change their quantized value.
inline constexpr float swizzle_termination_t = 1.0f / 512.0f;

struct PlaneSample {
    std::array<float, 3> color{0.0f, 0.0f, 0.0f};
    float transmittance = 1.0f;
};

namespace detail {

inline float lerp(float a, float b, float w) { return a + w * (b - a); }

inline double ndc_to_texel(double ndc, int size) { return 0.5 * (ndc + 1.0) * size - 0.5; }

}  // namespace detail

/// Samples plane k at a signed normalized coordinate. Coordinates outside
/// [-1, 1] are transparent (c = 0, t = 1); inside, neighbours clamp to the edge.
inline PlaneSample sample_plane(const PlaneStack& planes, int k, const Vec2& coord, Interp mode) {
    if (k < 0 || k >= planes.n) throw ArgumentError("sample_plane: plane index out of range");
    PlaneSample s;
    if (!(coord.x() >= -1.0 && coord.x() <= 1.0 && coord.y() >= -1.0 && coord.y() <= 1.0)) return s;
    const double px = detail::ndc_to_texel(coord.x(), planes.width);
    const double py = detail::ndc_to_texel(coord.y(), planes.height);
    if (mode == Interp::nearest) {
        const int ix = std::clamp(static_cast<int>(std::floor(px + 0.5)), 0, planes.width - 1);
        const int iy = std::clamp(static_cast<int>(std::floor(py + 0.5)), 0, planes.height - 1);
        const auto t = planes.texel(k, ix, iy);
        s.color = {t[0], t[1], t[2]};
        s.transmittance = t[3];
        return s;
    }
    const double fx = std::floor(px), fy = std::floor(py);
    const float wx = static_cast<float>(px - fx), wy = static_cast<float>(py - fy);
    const int x0 = std::clamp(int(fx), 0, planes.width - 1), x1 = std::clamp(int(fx) + 1, 0, planes.width - 1);
    const int y0 = std::clamp(int(fy), 0, planes.height - 1), y1 = std::clamp(int(fy) + 1, 0, planes.height - 1);
    const auto t00 = planes.texel(k, x0, y0), t10 = planes.texel(k, x1, y0);
    const auto t01 = planes.texel(k, x0, y1), t11 = planes.texel(k, x1, y1);
    std::array<float, 4> v{};
    for (int c = 0; c < 4; ++c)
        v[c] = detail::lerp(detail::lerp(t00[c], t10[c], wx), detail::lerp(t01[c], t11[c], wx), wy);
    s.color = {v[0], v[1], v[2]};
    s.transmittance = v[3];
    return s;
}

/// V_y x V_x grid of views; view (row i, column j), 1-based, lives at index
/// (i - 1) * V_x + (j - 1). Colours are premultiplied, composited over the
/// background only by finalize().
struct Quilt {
    DisplayConfig config;
    std::vector<RasterImage> views;

    Quilt() = default;
    explicit Quilt(const DisplayConfig& cfg) : config(cfg) {
        views.assign(std::size_t(cfg.view_count()), RasterImage(cfg.res_x, cfg.res_y));
    }

    RasterImage& view(int j, int i) { return views[std::size_t(i - 1) * config.views_x + (j - 1)]; }
    const RasterImage& view(int j, int i) const { return views[std::size_t(i - 1) * config.views_x + (j - 1)]; }
};

/// One finalized view: premultiplied colour over an opaque background.
inline Image8 finalize_view(const RasterImage& v, const Float3& background = {0, 0, 0}) {
    Image8 out(v.color.width, v.color.height, 3);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const float* c = v.color.pixel(x, y);
            const float t = v.transmittance.at(x, y);
            for (int ch = 0; ch < 3; ++ch) out.pixel(x, y)[ch] = quantize_unit(c[ch] + t * background[ch]);
        }
    return out;
}

/// Tiles views into one image: V_x columns by V_y rows, view 1 at the bottom
/// left, left to right then bottom to top.
inline Image8 finalize_quilt(const Quilt& q, const Float3& background = {0, 0, 0}) {
    const auto& c = q.config;
    Image8 out(c.views_x * c.res_x, c.views_y * c.res_y, 3);
    for (int i = 1; i <= c.views_y; ++i)
        for (int j = 1; j <= c.views_x; ++j) {
            const Image8 tile = finalize_view(q.view(j, i), background);
            const int ox = (j - 1) * c.res_x, oy = (c.views_y - i) * c.res_y;
            for (int y = 0; y < c.res_y; ++y)
                std::copy_n(tile.pixel(0, y), std::size_t(c.res_x) * 3, out.pixel(ox, oy + y));
        }
    return out;
}

/// Cuts view (j, i) back out of a quilt image laid out by finalize_quilt.
inline Image8 quilt_tile(const Image8& quilt, int views_x, int views_y, int j, int i) {
    const int w = quilt.width / views_x, h = quilt.height / views_y;
    Image8 tile(w, h, quilt.channels);
    const int ox = (j - 1) * w, oy = (views_y - i) * h;
    for (int y = 0; y < h; ++y) std::copy_n(quilt.pixel(ox, oy + y), std::size_t(w) * quilt.channels, tile.pixel(0, y));
    return tile;
}

/// "<stem>_qs{V_x}x{V_y}a{aspect}.png", aspect = N_x / N_y.
inline std::string quilt_filename(const std::string& stem, const DisplayConfig& c) {
    char aspect[32];
    std::snprintf(aspect, sizeof aspect, "%.4g", double(c.res_x) / c.res_y);
    return stem + "_qs" + std::to_string(c.views_x) + "x" + std::to_string(c.views_y) + "a" + aspect + ".png";
}

struct QuiltLayout {
    int views_x = 0;
    int views_y = 0;
    double aspect = 0;
};

inline std::optional<QuiltLayout> parse_quilt_filename(const std::string& name) {
    static const std::regex pattern(R"(_qs(\d+)x(\d+)a([0-9.]+)\.png$)");
    std::smatch m;
    if (!std::regex_search(name, m, pattern)) return std::nullopt;
    return QuiltLayout{std::stoi(m[1]), std::stoi(m[2]), std::stod(m[3])};
}

inline nlohmann::json quilt_sidecar(const DisplayConfig& c) {
    return {{"display_config", to_json(c)},
            {"layout", "views tiled V_x columns by V_y rows; view 1 bottom-left, row-major left-to-right, "
                       "bottom-to-top"},
            {"quilt_width", c.views_x * c.res_x},
            {"quilt_height", c.views_y * c.res_y}};
}

struct SwizzleOptions {
    bool early_termination = true;
};

namespace detail {

/// Conservative texel-space window outside which every sample of the plane is
/// exactly transparent, for nearest and bilinear lookups alike.
inline bool texel_window(const PlaneBounds& b, double& lo_x, double& hi_x, double& lo_y, double& hi_y) {
    if (b.empty()) return false;
    lo_x = b.x0 - 1.5;
    hi_x = b.x1 + 0.5;
    lo_y = b.y0 - 1.5;
    hi_y = b.y1 + 0.5;
    return true;
}

/// Half-open runs [a, b) of non-clear texels, per plane row.
struct RowRuns {
    int height = 0;
    std::vector<std::vector<std::pair<int, int>>> runs;  // [k * height + y]

    explicit RowRuns(const PlaneStack& planes) : height(planes.height) {
        runs.resize(std::size_t(planes.n) * planes.height);
        for (int k = 0; k < planes.n; ++k) {
            const PlaneBounds& b = planes.bounds[k];
            if (b.empty()) continue;
            for (int y = b.y0; y < b.y1; ++y) {
                auto& row = runs[std::size_t(k) * height + y];
                int x = b.x0;
                while (x < b.x1) {
                    while (x < b.x1 && planes.texel_is_clear(k, x, y)) ++x;
                    if (x == b.x1) break;
                    const int a = x;
                    while (x < b.x1 && !planes.texel_is_clear(k, x, y)) ++x;
                    row.emplace_back(a, x);
                }
            }
        }
    }

    const std::vector<std::pair<int, int>>& at(int k, int y) const { return runs[std::size_t(k) * height + y]; }
};

/// Horizontal lookup for one quilt column on one plane: texel columns and
/// weight, or xa < 0 when the sample falls outside the plane (transparent).
struct ColumnLookup {
    std::int32_t xa = -1;
    std::int32_t xb = -1;
    float wx = 0.0f;
};

/// Same arithmetic as sample_plane, evaluated once per (view, plane, column).
inline void column_lookups(const AxisProjection& px_proj, int nx, int pw, Interp mode, ColumnLookup* out) {
    for (int x = 0; x < nx; ++x) {
        ColumnLookup& l = out[x];
        const double u_plane = px_proj((2.0 * x + 1.0) / nx - 1.0);
        if (!(u_plane >= -1.0 && u_plane <= 1.0)) continue;
        const double px = ndc_to_texel(u_plane, pw);
        if (mode == Interp::nearest) {
            l.xa = l.xb = std::clamp(static_cast<int>(std::floor(px + 0.5)), 0, pw - 1);
        } else {
            const double fx = std::floor(px);
            l.wx = static_cast<float>(px - fx);
            l.xa = std::clamp(int(fx), 0, pw - 1);
            l.xb = std::clamp(int(fx) + 1, 0, pw - 1);
        }
    }
}

/// Blends plane k into pixels [x0, x1) of one quilt row.
template <bool Bilinear, class Texel>
inline void blend_span(const Texel* plane, int pw, int ph, const ColumnLookup* cols, double ty, int x0, int x1,
                       float* color_row, float* trans_row, bool early_termination) {
    constexpr float scale = std::is_same_v<Texel, std::uint8_t> ? 1.0f / 255.0f : 1.0f;
    int iy0, iy1 = 0;
    float wy = 0.0f;
    if constexpr (Bilinear) {
        const double fy = std::floor(ty);
        wy = static_cast<float>(ty - fy);
        iy0 = std::clamp(int(fy), 0, ph - 1);
        iy1 = std::clamp(int(fy) + 1, 0, ph - 1);
    } else {
        iy0 = std::clamp(static_cast<int>(std::floor(ty + 0.5)), 0, ph - 1);
    }
    const Texel* row0 = plane + std::size_t(iy0) * pw * 4;
    const Texel* row1 = plane + std::size_t(iy1) * pw * 4;
    for (int x = x0; x < x1; ++x) {
        float& T = trans_row[x];
        if (early_termination && T < swizzle_termination_t) continue;
        const ColumnLookup l = cols[x];
        if (l.xa < 0) continue;  // transparent
        float v[4];
        if constexpr (Bilinear) {
            const Texel* a0 = row0 + 4 * l.xa;
            const Texel* b0 = row0 + 4 * l.xb;
            const Texel* a1 = row1 + 4 * l.xa;
            const Texel* b1 = row1 + 4 * l.xb;
            for (int c = 0; c < 4; ++c)
                v[c] = lerp(lerp(float(a0[c]) * scale, float(b0[c]) * scale, l.wx),
                            lerp(float(a1[c]) * scale, float(b1[c]) * scale, l.wx), wy);
        } else {
            const Texel* t = row0 + 4 * l.xa;
            for (int c = 0; c < 4; ++c) v[c] = float(t[c]) * scale;
        }
        float* c = color_row + 3 * x;
        c[0] += T * v[0];
        c[1] += T * v[1];
        c[2] += T * v[2];
        T *= v[3];
    }
}

}  // namespace detail

/// Composites the plane stack into every quilt view:
///   C += T * c_k,  T *= t_k  over planes in ascending distance.
/// Samples that can only see clear texels (c = 0, t = 1) are skipped, which
/// leaves the result bit-identical.
inline Quilt swizzle_blend(const PlaneStack& planes, const DisplayConfig& cfg, const ReferenceCamera& ref,
                           const SwizzleOptions& opts = {}) {
    validate(cfg);
    Quilt quilt(cfg);
    if (planes.n == 0) return quilt;

    std::vector<int> order(planes.n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return planes.distance[a] < planes.distance[b]; });

    const int nv = cfg.view_count();
    std::vector<QuiltViewParams> params;
    params.reserve(nv);
    for (int i = 1; i <= cfg.views_y; ++i)
        for (int j = 1; j <= cfg.views_x; ++j) params.push_back(quilt_view_params(cfg, j, i));

    // (view, plane) projections, evaluated once.
    std::vector<PlaneProjection> proj(std::size_t(nv) * planes.n);
    for (int v = 0; v < nv; ++v)
        for (int k = 0; k < planes.n; ++k)
            proj[std::size_t(v) * planes.n + k] = plane_projection(cfg, ref, params[v], planes.distance[k]);

    const detail::RowRuns row_runs(planes);
    const int nx = cfg.res_x, ny = cfg.res_y;
    const int pw = planes.width, ph = planes.height;
    std::vector<detail::ColumnLookup> columns(std::size_t(nv) * planes.n * nx);
    parallel_for(std::size_t(nv) * planes.n, [&](std::size_t vk) {
        if (planes.bounds[vk % planes.n].empty()) return;
        detail::column_lookups(proj[vk].x, nx, pw, cfg.interp, columns.data() + vk * nx);
    });
    parallel_for(std::size_t(nv) * ny, [&](std::size_t item) {
        const int v = int(item / ny), y = int(item % ny);
        RasterImage& out = quilt.views[v];
        float* color_row = out.color.pixel(0, y);
        float* trans_row = &out.transmittance.at(0, y);
        const double vy = (2.0 * y + 1.0) / ny - 1.0;
        std::vector<std::pair<int, int>> spans;
        for (int k : order) {
            double lo_x, hi_x, lo_y, hi_y;
            if (!detail::texel_window(planes.bounds[k], lo_x, hi_x, lo_y, hi_y)) continue;
            const PlaneProjection& p = proj[std::size_t(v) * planes.n + k];
            const double vy_plane = p.y(vy);
            if (!(vy_plane >= -1.0 && vy_plane <= 1.0)) continue;
            const double ty = detail::ndc_to_texel(vy_plane, ph);
            if (ty < lo_y || ty > hi_y) continue;

            // texel rows the lookup can touch (same arithmetic as sample_plane)
            int rows[2];
            int n_rows = 1;
            if (cfg.interp == Interp::nearest) {
                rows[0] = std::clamp(static_cast<int>(std::floor(ty + 0.5)), 0, ph - 1);
            } else {
                const int fy = int(std::floor(ty));
                rows[0] = std::clamp(fy, 0, ph - 1);
                rows[1] = std::clamp(fy + 1, 0, ph - 1);
                n_rows = rows[1] == rows[0] ? 1 : 2;
            }

            // a run [a, b) is reachable from texel coordinates [a - 1, b] (nearest
            // needs only [a - 0.5, b - 0.5]); map through the inverse affine x
            // projection, widened by a rounding margin
            auto pixel_of_texel = [&](double tx) {
                const double u_plane = (tx + 0.5) * 2.0 / pw - 1.0;
                const double u = (u_plane * p.x.denominator - p.x.principal_term) / p.x.slope_term;
                return 0.5 * ((u + 1.0) * nx - 1.0);
            };
            spans.clear();
            for (int r = 0; r < n_rows; ++r)
                for (const auto& [a, b] : row_runs.at(k, rows[r])) {
                    const double reach = cfg.interp == Interp::nearest ? 0.5 : 1.0;
                    const double pa = pixel_of_texel(a - reach), pb = pixel_of_texel(b - 1.0 + reach);
                    constexpr double margin = 1e-6;
                    const int x0 = std::max(0, int(std::ceil(std::min(pa, pb) - margin)));
                    const int x1 = std::min(nx, int(std::floor(std::max(pa, pb) + margin)) + 1);
                    if (x0 < x1) spans.emplace_back(x0, x1);
                }
            if (spans.empty()) continue;
            std::sort(spans.begin(), spans.end());

            int done = 0;  // pixels below `done` already blended for this plane
            for (auto [x0, x1] : spans) {
                x0 = std::max(x0, done);
                if (x0 < x1) {
                    const bool et = opts.early_termination;
                    const detail::ColumnLookup* cols = columns.data() + (std::size_t(v) * planes.n + k) * nx;
                    if (planes.precision == Precision::u8) {
                        const std::uint8_t* data = planes.u8.data() + planes.offset(k, 0, 0);
                        if (cfg.interp == Interp::bilinear)
                            detail::blend_span<true>(data, pw, ph, cols, ty, x0, x1, color_row, trans_row, et);
                        else
                            detail::blend_span<false>(data, pw, ph, cols, ty, x0, x1, color_row, trans_row, et);
                    } else {
                        const float* data = planes.f32.data() + planes.offset(k, 0, 0);
                        if (cfg.interp == Interp::bilinear)
                            detail::blend_span<true>(data, pw, ph, cols, ty, x0, x1, color_row, trans_row, et);
                        else
                            detail::blend_span<false>(data, pw, ph, cols, ty, x0, x1, color_row, trans_row, et);
                    }
                }
                done = std::max(done, x1);
            }
        }
    });
    return quilt;
}

/// Per-texel product of plane transmittances on the shared plane grid.
inline ImageGray blend_order_check(const PlaneStack& planes) {
    ImageGray residual(planes.width, planes.height, 1.0f);
    for (int k = 0; k < planes.n; ++k)
        for (int y = 0; y < planes.height; ++y)
            for (int x = 0; x < planes.width; ++x) residual.at(x, y) *= planes.texel(k, x, y)[3];
    return residual;
}

}  // namespace lfr

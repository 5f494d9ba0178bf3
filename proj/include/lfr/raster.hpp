#pragma once

// Software splatting. One tiled front-to-back compositor serves both the
// conventional per-view renderer and the per-chunk sweeping-plane renderer;
// only the camera, primitive subset and anti-aliasing strength differ.

#include "lfr/chunking.hpp"
#include "lfr/display.hpp"
#include "lfr/image.hpp"
#include "lfr/parallel.hpp"
#include "lfr/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <vector>

namespace lfr {

/// Screen-space dilation (pixel^2) hard-coded by the reference 3DGS rasterizer.
inline constexpr double default_filter_strength = 0.3;
/// Splats are evaluated out to a Mahalanobis distance of 3 (squared distance 9).
inline constexpr double gaussian_cutoff_sq = 9.0;
inline constexpr float min_alpha = 1.0f / 255.0f;
inline constexpr float max_alpha = 0.99f;
/// A pixel stops accepting splats once its transmittance would drop below this.
inline constexpr float raster_termination_t = 1e-4f;
inline constexpr int tile_size = 16;
/// Primitives closer than this to the camera (scene units) are not drawn.
inline constexpr double near_clip = 1e-2;

struct Splat2D {
    Vec2 mean;
    Mat2 covariance;  // dilated
    Float3 color{};   // straight (non-premultiplied) colour
    float opacity = 0;  // includes the dilation compensation factor
    double depth = 0;
};

struct FilterParams {
    double base_strength = default_filter_strength;
    double effective_strength = default_filter_strength;
};

/// Rotation matrix of a (w, x, y, z) quaternion; normalizes defensively.
inline Mat3 quaternion_matrix(const Float4& q) {
    Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    if (quat.norm() == 0) return Mat3::Identity();
    return quat.normalized().toRotationMatrix();
}

inline Mat3 gaussian_covariance(const GaussianScene& scene, std::size_t i) {
    const Mat3 r = quaternion_matrix(scene.rotation[i]);
    const auto& ls = scene.log_scale[i];
    const Vec3 s(std::exp(double(ls[0])), std::exp(double(ls[1])), std::exp(double(ls[2])));
    const Mat3 m = r * s.asDiagonal();
    return m * m.transpose();
}

/// Undilated screen-space covariance of a 3D covariance seen from `cam`
/// (first-order EWA). `p` is the mean in camera coordinates.
inline Mat2 project_covariance(const PinholeCamera& cam, const Vec3& p, const Mat3& cov_world) {
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / p.z(), 0.0, -cam.fx * p.x() / (p.z() * p.z()), 0.0, cam.fy / p.z(),
        -cam.fy * p.y() / (p.z() * p.z());
    const Mat3 w = cam.pose.rotation.transpose();
    const Eigen::Matrix<double, 2, 3> t = j * w;
    return t * cov_world * t.transpose();
}

/// EWA projection with screen-space dilation by `filter_strength` and the
/// matching opacity compensation sqrt(det(S) / det(S + sI)). Returns nullopt
/// for Gaussians behind the near clip.
inline std::optional<Splat2D> project_gaussian(const PinholeCamera& cam, const GaussianScene& scene, std::size_t i,
                                               double filter_strength, const Float3& color) {
    const auto& pw = scene.position[i];
    const Vec3 p = cam.pose.to_camera(Vec3(pw[0], pw[1], pw[2]));
    if (!(p.z() > near_clip)) return std::nullopt;
    const Mat2 cov = project_covariance(cam, p, gaussian_covariance(scene, i));
    const Mat2 dilated = cov + filter_strength * Mat2::Identity();
    const double det_dilated = dilated.determinant();
    if (!(det_dilated > 0)) return std::nullopt;
    const double compensation = std::sqrt(std::max(0.0, cov.determinant()) / det_dilated);
    Splat2D s;
    s.mean = cam.project_camera(p);
    s.covariance = dilated;
    s.color = color;
    s.opacity = static_cast<float>(sigmoid(scene.opacity_logit[i]) * compensation);
    s.depth = p.z();
    return s;
}

/// Premultiplied colour plus transmittance of a rendered view or plane.
struct RasterImage {
    ImageRGB color;
    ImageGray transmittance;

    RasterImage() = default;
    RasterImage(int w, int h) : color(w, h, 0.0f), transmittance(w, h, 1.0f) {}
};

namespace detail {

struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
    bool empty() const { return x0 >= x1 || y0 >= y1; }
};

inline PixelRect clip_rect(double minx, double miny, double maxx, double maxy, int w, int h) {
    PixelRect r;
    r.x0 = std::max(0, static_cast<int>(std::floor(minx)));
    r.y0 = std::max(0, static_cast<int>(std::floor(miny)));
    r.x1 = std::min(w, static_cast<int>(std::ceil(maxx)) + 1);
    r.y1 = std::min(h, static_cast<int>(std::ceil(maxy)) + 1);
    return r;
}

struct GaussianFootprint {
    Vec2 mean;
    double conic_a, conic_b, conic_c;  // inverse covariance (a b; b c)
    float opacity;
    Float3 color;

    float alpha(int px, int py) const {
        const double dx = px - mean.x(), dy = py - mean.y();
        const double m2 = conic_a * dx * dx + 2.0 * conic_b * dx * dy + conic_c * dy * dy;
        if (m2 > gaussian_cutoff_sq) return 0.0f;
        return std::min(max_alpha, opacity * static_cast<float>(std::exp(-0.5 * m2)));
    }
};

struct VoxelFootprint {
    Vec3 box_min, box_max;  // world
    double density, size;
    Float3 color;
    const PinholeCamera* cam;

    float alpha(int px, int py) const {
        const Vec3 ray_cam = cam->pixel_ray(px, py);
        const Vec3 dir = cam->pose.rotation * ray_cam;
        const Vec3& o = cam->pose.position;
        double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            if (dir[a] == 0.0) {
                if (o[a] < box_min[a] || o[a] > box_max[a]) return 0.0f;
                continue;
            }
            double ta = (box_min[a] - o[a]) / dir[a], tb = (box_max[a] - o[a]) / dir[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        if (!(t1 >= t0) || t1 <= 0.0) return 0.0f;
        // through-voxel path length approximated by size / |cos(ray, view axis)|
        const double path = std::min(size * ray_cam.norm(), size * std::sqrt(3.0));
        return std::min(max_alpha, static_cast<float>(1.0 - std::exp(-density * path)));
    }
};

/// Composites depth-sorted footprints front to back into `out`, tile by tile.
template <typename Footprint>
void composite_tiles(const std::vector<Footprint>& prims, const std::vector<PixelRect>& rects, RasterImage& out,
                     bool parallel = true) {
    const int w = out.color.width, h = out.color.height;
    const int tiles_x = (w + tile_size - 1) / tile_size, tiles_y = (h + tile_size - 1) / tile_size;
    std::vector<std::vector<std::uint32_t>> bins(std::size_t(tiles_x) * tiles_y);
    for (std::uint32_t p = 0; p < prims.size(); ++p) {
        const PixelRect& r = rects[p];
        if (r.empty()) continue;
        for (int ty = r.y0 / tile_size; ty <= (r.y1 - 1) / tile_size; ++ty)
            for (int tx = r.x0 / tile_size; tx <= (r.x1 - 1) / tile_size; ++tx)
                bins[std::size_t(ty) * tiles_x + tx].push_back(p);
    }
    auto render_tile = [&](std::size_t t) {
        const auto& bin = bins[t];
        if (bin.empty()) return;
        const int tx = int(t % tiles_x), ty = int(t / tiles_x);
        const int x_end = std::min(w, (tx + 1) * tile_size), y_end = std::min(h, (ty + 1) * tile_size);
        for (int y = ty * tile_size; y < y_end; ++y)
            for (int x = tx * tile_size; x < x_end; ++x) {
                float T = 1.0f;
                float c[3] = {0.0f, 0.0f, 0.0f};
                for (std::uint32_t p : bin) {
                    const PixelRect& r = rects[p];
                    if (x < r.x0 || x >= r.x1 || y < r.y0 || y >= r.y1) continue;
                    const float a = prims[p].alpha(x, y);
                    if (a < min_alpha) continue;
                    const float next_t = T * (1.0f - a);
                    if (next_t < raster_termination_t) break;
                    for (int ch = 0; ch < 3; ++ch) c[ch] += prims[p].color[ch] * a * T;
                    T = next_t;
                }
                float* dst = out.color.pixel(x, y);
                dst[0] = c[0];
                dst[1] = c[1];
                dst[2] = c[2];
                out.transmittance.at(x, y) = T;
            }
    };
    if (parallel) parallel_for(bins.size(), render_tile);
    else for (std::size_t t = 0; t < bins.size(); ++t) render_tile(t);
}

inline Float3 clamp_unit(const Float3& c) {
    return {std::clamp(c[0], 0.0f, 1.0f), std::clamp(c[1], 0.0f, 1.0f), std::clamp(c[2], 0.0f, 1.0f)};
}

/// Shared raster of a primitive subset (already in front-to-back order).
/// Gaussian colours are evaluated toward `color_origin`.
inline RasterImage raster_subset(const Scene& scene, const PinholeCamera& cam, std::span<const std::uint32_t> ids,
                                 double filter_strength, const Vec3& color_origin, bool parallel) {
    RasterImage out(cam.width, cam.height);
    if (const auto* g = std::get_if<GaussianScene>(&scene)) {
        std::vector<GaussianFootprint> prims;
        std::vector<PixelRect> rects;
        prims.reserve(ids.size());
        rects.reserve(ids.size());
        for (std::uint32_t i : ids) {
            const auto& pw = g->position[i];
            const Vec3 pos(pw[0], pw[1], pw[2]);
            const Float3 color = clamp_unit(eval_sh(*g, i, (pos - color_origin).normalized()));
            const auto splat = project_gaussian(cam, *g, i, filter_strength, color);
            if (!splat) continue;
            const Mat2 conic = splat->covariance.inverse();
            const Mat2& cv = splat->covariance;
            const double mid = 0.5 * (cv(0, 0) + cv(1, 1));
            const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - cv.determinant()));
            const double radius = std::ceil(3.0 * std::sqrt(lambda_max));
            prims.push_back({splat->mean, conic(0, 0), conic(0, 1), conic(1, 1), splat->opacity, splat->color});
            rects.push_back(clip_rect(splat->mean.x() - radius, splat->mean.y() - radius, splat->mean.x() + radius,
                                      splat->mean.y() + radius, cam.width, cam.height));
        }
        composite_tiles(prims, rects, out, parallel);
    } else {
        const auto& v = std::get<VoxelScene>(scene);
        std::vector<VoxelFootprint> prims;
        std::vector<PixelRect> rects;
        for (std::uint32_t i : ids) {
            const Voxel& vx = v.occupied[i];
            const Vec3 lo = v.voxel_min(vx), hi = lo + Vec3::Constant(v.voxel_size);
            double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
            bool visible = true;
            for (int corner = 0; corner < 8; ++corner) {
                const Vec3 wc((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(),
                              (corner & 4) ? hi.z() : lo.z());
                const Vec3 pc = cam.pose.to_camera(wc);
                if (!(pc.z() > near_clip)) {
                    visible = false;
                    break;
                }
                const Vec2 px = cam.project_camera(pc);
                minx = std::min(minx, px.x());
                miny = std::min(miny, px.y());
                maxx = std::max(maxx, px.x());
                maxy = std::max(maxy, px.y());
            }
            if (!visible) continue;
            prims.push_back({lo, hi, vx.density, v.voxel_size, clamp_unit(vx.rgb), &cam});
            rects.push_back(clip_rect(minx, miny, maxx, maxy, cam.width, cam.height));
        }
        composite_tiles(prims, rects, out, parallel);
    }
    return out;
}

/// Primitive ids in front-to-back order for `cam` (camera depth, then id).
inline std::vector<std::uint32_t> depth_order(const Scene& scene, const PinholeCamera& cam) {
    std::vector<std::pair<double, std::uint32_t>> keyed;
    if (const auto* g = std::get_if<GaussianScene>(&scene)) {
        for (std::uint32_t i = 0; i < g->size(); ++i) {
            const auto& p = g->position[i];
            keyed.emplace_back(cam.pose.to_camera(Vec3(p[0], p[1], p[2])).z(), i);
        }
    } else {
        const auto& v = std::get<VoxelScene>(scene);
        for (std::uint32_t i = 0; i < v.size(); ++i)
            keyed.emplace_back(cam.pose.to_camera(v.voxel_center(v.occupied[i])).z(), i);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::uint32_t> ids(keyed.size());
    std::transform(keyed.begin(), keyed.end(), ids.begin(), [](const auto& k) { return k.second; });
    return ids;
}

}  // namespace detail

/// Conventional single-view render: every primitive, sorted by (depth, index),
/// composited front to back. Colours are evaluated toward the camera centre
/// unless `color_origin` is given.
inline RasterImage render_perspective(const Scene& scene, const PinholeCamera& cam,
                                      double filter_strength = default_filter_strength, bool parallel = true,
                                      std::optional<Vec3> color_origin = std::nullopt) {
    const auto ids = detail::depth_order(scene, cam);
    return detail::raster_subset(scene, cam, ids, filter_strength, color_origin.value_or(cam.pose.position), parallel);
}

/// Screen-space dilation for the reference camera, rescaled by the ratio of
/// base-camera to reference-camera pixel footprints on the focal plane.
inline double adaptive_filter_strength(const DisplayConfig& cfg, const ReferenceCamera& ref,
                                       double base_strength = default_filter_strength) {
    const double ratio = cfg.d_focal * std::tan(0.5 * cfg.fov_x) /
                         ((cfg.d_focal - ref.d_forward) * std::tan(0.5 * ref.fov_x_ref)) * cfg.plane_scale;
    return base_strength * ratio * ratio;
}

// ---------------------------------------------------------------------------
// Sweeping planes.

struct PlaneBounds {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open occupied texel rectangle
    bool empty() const { return x0 >= x1 || y0 >= y1; }
};

/// N fronto-parallel planes of premultiplied RGB + transmittance, stored
/// interleaved as [plane][y][x][r g b t] in u8 or f32.
struct PlaneStack {
    int n = 0;
    int width = 0;
    int height = 0;
    Precision precision = Precision::u8;
    std::vector<double> distance;
    std::vector<std::uint8_t> u8;
    std::vector<float> f32;
    std::vector<PlaneBounds> bounds;
    double filter_strength = default_filter_strength;

    PlaneStack() = default;
    PlaneStack(int planes, int w, int h, Precision p) : n(planes), width(w), height(h), precision(p) {
        distance.assign(planes, 0.0);
        bounds.assign(planes, PlaneBounds{});
        const std::size_t count = std::size_t(planes) * w * h * 4;
        if (p == Precision::u8) {
            u8.assign(count, 0);
            for (std::size_t i = 3; i < count; i += 4) u8[i] = 255;
        } else {
            f32.assign(count, 0.0f);
            for (std::size_t i = 3; i < count; i += 4) f32[i] = 1.0f;
        }
    }

    std::size_t offset(int k, int x, int y) const { return ((std::size_t(k) * height + y) * width + x) * 4; }

    /// Dequantized (r, g, b, t).
    std::array<float, 4> texel(int k, int x, int y) const {
        const std::size_t o = offset(k, x, y);
        if (precision == Precision::f32) return {f32[o], f32[o + 1], f32[o + 2], f32[o + 3]};
        constexpr float inv = 1.0f / 255.0f;
        return {u8[o] * inv, u8[o + 1] * inv, u8[o + 2] * inv, u8[o + 3] * inv};
    }

    void set_texel(int k, int x, int y, const std::array<float, 4>& v) {
        const std::size_t o = offset(k, x, y);
        if (precision == Precision::f32) {
            for (int c = 0; c < 4; ++c) f32[o + c] = v[c];
        } else {
            for (int c = 0; c < 4; ++c) u8[o + c] = quantize_unit(v[c]);
        }
    }

    bool texel_is_clear(int k, int x, int y) const {
        const std::size_t o = offset(k, x, y);
        if (precision == Precision::f32)
            return f32[o] == 0.0f && f32[o + 1] == 0.0f && f32[o + 2] == 0.0f && f32[o + 3] == 1.0f;
        return u8[o] == 0 && u8[o + 1] == 0 && u8[o + 2] == 0 && u8[o + 3] == 255;
    }

    void update_bounds(int k) {
        PlaneBounds b{width, height, 0, 0};
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (!texel_is_clear(k, x, y)) {
                    b.x0 = std::min(b.x0, x);
                    b.y0 = std::min(b.y0, y);
                    b.x1 = std::max(b.x1, x + 1);
                    b.y1 = std::max(b.y1, y + 1);
                }
        bounds[k] = b.empty() ? PlaneBounds{} : b;
    }

    /// Storage accounting: planes x H x W x 4 channels x bytes per channel.
    std::size_t memory_bytes() const {
        return std::size_t(n) * height * width * 4 * (precision == Precision::u8 ? 1 : 4);
    }

    void store(int k, const RasterImage& img) {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const float* c = img.color.pixel(x, y);
                set_texel(k, x, y, {c[0], c[1], c[2], img.transmittance.at(x, y)});
            }
        update_bounds(k);
    }

    friend bool operator==(const PlaneStack& a, const PlaneStack& b) {
        return a.n == b.n && a.width == b.width && a.height == b.height && a.precision == b.precision &&
               a.distance == b.distance && a.u8 == b.u8 && a.f32 == b.f32;
    }
};

struct ChunkRasterOptions {
    bool adaptive_filter = true;
    /// Gaussian blur sigma (plane texels) for voxel scenes; negative selects
    /// the default 0.5 * plane_scale, zero disables.
    double voxel_lowpass_sigma = -1.0;
};

/// Separable Gaussian blur of every plane's colour and transmittance with
/// clamp-to-edge borders. sigma == 0 leaves the stack untouched.
inline void lowpass_planes(PlaneStack& planes, double sigma) {
    if (sigma < 0) throw ArgumentError("lowpass_planes: sigma must be >= 0");
    if (sigma == 0.0 || planes.n == 0) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
    for (double& k : kernel) k /= norm;

    const int w = planes.width, h = planes.height;
    parallel_for(std::size_t(planes.n), [&](std::size_t kk) {
        const int k = int(kk);
        std::vector<std::array<double, 4>> src(std::size_t(w) * h), tmp(std::size_t(w) * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto t = planes.texel(k, x, y);
                src[std::size_t(y) * w + x] = {t[0], t[1], t[2], t[3]};
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::array<double, 4> acc{};
                for (int i = -radius; i <= radius; ++i) {
                    const auto& s = src[std::size_t(y) * w + std::clamp(x + i, 0, w - 1)];
                    for (int c = 0; c < 4; ++c) acc[c] += kernel[i + radius] * s[c];
                }
                tmp[std::size_t(y) * w + x] = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::array<double, 4> acc{};
                for (int i = -radius; i <= radius; ++i) {
                    const auto& s = tmp[std::size_t(std::clamp(y + i, 0, h - 1)) * w + x];
                    for (int c = 0; c < 4; ++c) acc[c] += kernel[i + radius] * s[c];
                }
                planes.set_texel(k, x, y, {float(acc[0]), float(acc[1]), float(acc[2]), float(acc[3])});
            }
        planes.update_bounds(k);
    });
}

/// Rasterizes every chunk onto its own plane from the reference camera. Each
/// chunk is composited independently; colours are evaluated toward the base
/// camera. Planes carry the chunk median distances (base-relative).
inline PlaneStack rasterize_chunks(const Scene& scene, const ReferenceCamera& ref, const CulledSet& culled,
                                   const ChunkPartition& partition, const DisplayConfig& cfg,
                                   const ChunkRasterOptions& opts = {}) {
    const PinholeCamera cam = plane_camera(cfg, ref);
    PlaneStack planes(cfg.n_chunk, cam.width, cam.height, cfg.plane_precision);
    planes.filter_strength = opts.adaptive_filter ? adaptive_filter_strength(cfg, ref) : default_filter_strength;
    if (partition.empty) {
        std::fill(planes.distance.begin(), planes.distance.end(), cfg.d_focal);
        return planes;
    }
    if (partition.n_chunk != cfg.n_chunk) throw ConfigError("partition chunk count differs from n_chunk");
    planes.distance = partition.plane_distance;
    parallel_for(std::size_t(cfg.n_chunk), [&](std::size_t k) {
        const auto& members = partition.chunks[k];
        if (members.empty()) return;
        std::vector<std::uint32_t> ids(members.size());
        std::transform(members.begin(), members.end(), ids.begin(), [&](auto pos) { return culled.indices[pos]; });
        const RasterImage img =
            detail::raster_subset(scene, cam, ids, planes.filter_strength, ref.base_position(), /*parallel=*/false);
        planes.store(int(k), img);
    });
    if (std::holds_alternative<VoxelScene>(scene)) {
        const double sigma = opts.voxel_lowpass_sigma < 0 ? 0.5 * cfg.plane_scale : opts.voxel_lowpass_sigma;
        lowpass_planes(planes, sigma);
    }
    return planes;
}

inline nlohmann::json plane_metadata(const PlaneStack& p) {
    nlohmann::json bounds = nlohmann::json::array();
    for (const auto& b : p.bounds) bounds.push_back({b.x0, b.y0, b.x1, b.y1});
    return {{"n_chunk", p.n},
            {"width", p.width},
            {"height", p.height},
            {"precision", to_string(p.precision)},
            {"plane_distance", p.distance},
            {"filter_strength", p.filter_strength},
            {"memory_bytes", p.memory_bytes()},
            {"occupied_bounds", bounds}};
}

/// Writes plane_XXX_color.png / plane_XXX_trans.png pairs plus planes.json.
inline void dump_planes(const PlaneStack& p, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    for (int k = 0; k < p.n; ++k) {
        Image8 color(p.width, p.height, 3), trans(p.width, p.height, 1);
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x) {
                const auto t = p.texel(k, x, y);
                for (int c = 0; c < 3; ++c) color.pixel(x, y)[c] = quantize_unit(t[c]);
                trans.pixel(x, y)[0] = quantize_unit(t[3]);
            }
        char name[64];
        std::snprintf(name, sizeof name, "/plane_%03d_color.png", k);
        write_png(dir + name, color);
        std::snprintf(name, sizeof name, "/plane_%03d_trans.png", k);
        write_png(dir + name, trans);
    }
    const std::string meta = plane_metadata(p).dump(2);
    write_file(dir + "/planes.json", std::span(reinterpret_cast<const std::uint8_t*>(meta.data()), meta.size()));
}

}  // namespace lfr

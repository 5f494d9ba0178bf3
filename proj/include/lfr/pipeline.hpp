#pragma once

// End-to-end quilt rendering: the plane-sweep path (cull, chunk, rasterize
// planes, swizzle) and the conventional per-view path used as ground truth.

#include "lfr/chunking.hpp"
#include "lfr/display.hpp"
#include "lfr/raster.hpp"
#include "lfr/scene.hpp"
#include "lfr/swizzle.hpp"

namespace lfr {

struct RenderOptions {
    ChunkRasterOptions raster;
    SwizzleOptions swizzle;
    Float3 background{0.0f, 0.0f, 0.0f};
};

struct PlaneSweep {
    ReferenceCamera ref;
    CulledSet culled;
    ChunkPartition partition;
    PlaneStack planes;
};

inline PlaneSweep build_planes(const Scene& scene, const DisplayConfig& cfg, const CameraPose& base,
                               const RenderOptions& opts = {}) {
    validate(cfg);
    PlaneSweep s;
    s.ref = reference_camera(cfg, base);
    const PinholeCamera cam = plane_camera(cfg, s.ref);
    const double strength = opts.raster.adaptive_filter ? adaptive_filter_strength(cfg, s.ref) : default_filter_strength;
    s.culled = cull_and_depth(scene, s.ref, near_clip, std::sqrt(strength) / cam.fx, std::sqrt(strength) / cam.fy);
    s.partition = quantile_chunk(s.culled.depths, cfg.n_chunk);
    s.planes = rasterize_chunks(scene, s.ref, s.culled, s.partition, cfg, opts.raster);
    return s;
}

inline Quilt render_quilt_sweep(const Scene& scene, const DisplayConfig& cfg, const CameraPose& base,
                                const RenderOptions& opts = {}) {
    const PlaneSweep s = build_planes(scene, cfg, base, opts);
    return swizzle_blend(s.planes, cfg, s.ref, opts.swizzle);
}

inline PinholeCamera quilt_view_camera(const DisplayConfig& cfg, const CameraPose& base, int j, int i) {
    return view_camera(cfg, base, quilt_view_params(cfg, j, i));
}

/// Conventional rendering of one quilt view with the fixed 3DGS filter.
inline RasterImage render_view_baseline(const Scene& scene, const DisplayConfig& cfg, const CameraPose& base, int j,
                                        int i) {
    return render_perspective(scene, quilt_view_camera(cfg, base, j, i), default_filter_strength);
}

/// Renders every quilt view independently.
inline Quilt render_quilt_baseline(const Scene& scene, const DisplayConfig& cfg, const CameraPose& base) {
    validate(cfg);
    Quilt q(cfg);
    parallel_for(std::size_t(cfg.view_count()), [&](std::size_t v) {
        const int j = int(v % cfg.views_x) + 1, i = int(v / cfg.views_x) + 1;
        q.views[v] = render_perspective(scene, quilt_view_camera(cfg, base, j, i), default_filter_strength,
                                        /*parallel=*/false);
    });
    return q;
}

}  // namespace lfr

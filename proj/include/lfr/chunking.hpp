#pragma once

// Frustum culling against the reference camera and quantile binning of the
// surviving primitives into depth chunks, one sweeping plane per chunk.

#include "lfr/display.hpp"
#include "lfr/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace lfr {

struct CulledSet {
    std::vector<std::uint32_t> indices;  // ascending primitive indices
    std::vector<double> depths;          // base-camera-relative depth per kept primitive
};

/// Culling guard band. A Gaussian is kept while its 3-sigma footprint (largest
/// axis scale, stretched by the off-axis projection) plus the screen-space
/// dilation, given as sqrt(s) / f per axis in tangent units, can reach the
/// reference image. Voxels keep a conservative corner bound. Centres closer
/// than `near` to the reference camera are dropped.
inline CulledSet cull_and_depth(const Scene& scene, const ReferenceCamera& ref, double near = 1e-2,
                                double dilation_tan_x = 0.0, double dilation_tan_y = 0.0) {
    const double tx = std::tan(0.5 * ref.fov_x_ref);
    const double ty = std::tan(0.5 * ref.fov_y_ref);
    CulledSet out;
    auto keep = [&](std::uint32_t i, const Vec3& p) {
        out.indices.push_back(i);
        out.depths.push_back(p.z() + ref.d_forward);
    };
    if (const auto* g = std::get_if<GaussianScene>(&scene)) {
        for (std::uint32_t i = 0; i < g->size(); ++i) {
            const auto& w = g->position[i];
            const Vec3 p = ref.pose.to_camera(Vec3(w[0], w[1], w[2]));
            if (!(p.z() > near)) continue;
            const auto& ls = g->log_scale[i];
            const double sigma = std::exp(double(std::max({ls[0], ls[1], ls[2]}))) / p.z();
            // marginal screen std along an axis is at most sigma * sqrt(1 + a^2)
            auto reaches = [&](double a, double t, double dil) {
                return std::abs(a) - t <= 3.0 * std::sqrt(sigma * sigma * (1.0 + a * a) + dil * dil);
            };
            if (reaches(p.x() / p.z(), tx, dilation_tan_x) && reaches(p.y() / p.z(), ty, dilation_tan_y)) keep(i, p);
        }
    } else {
        const auto& v = std::get<VoxelScene>(scene);
        const double half = 0.5 * v.voxel_size;
        const double diagonal = std::sqrt(3.0) * v.voxel_size;
        for (std::uint32_t i = 0; i < v.size(); ++i) {
            const Vec3 p = ref.pose.to_camera(v.voxel_center(v.occupied[i]));
            if (!(p.z() > near)) continue;
            // the nearest corner lies at most half * (1 + t) beyond the centre's frustum offset
            const double mx = std::max(diagonal, half * (1.0 + tx)), my = std::max(diagonal, half * (1.0 + ty));
            if (std::abs(p.x()) > p.z() * tx + mx || std::abs(p.y()) > p.z() * ty + my) continue;
            keep(i, p);
        }
    }
    return out;
}

/// Depth chunks. `chunks[k]` lists positions into the depth array handed to
/// quantile_chunk (not primitive ids), sorted by (depth, position).
struct ChunkPartition {
    int n_chunk = 0;
    bool empty = true;
    std::vector<double> boundaries;      // n_chunk + 1, non-decreasing
    std::vector<double> plane_distance;  // n_chunk, median depth per chunk
    std::vector<int> assignment;         // position -> chunk
    std::vector<std::vector<std::uint32_t>> chunks;

    std::size_t chunk_size(int k) const { return chunks[k].size(); }
};

namespace detail {
// `members` is already in ascending depth order.
inline double chunk_median(std::span<const double> depths, const std::vector<std::uint32_t>& members) {
    const std::size_t n = members.size();
    if (n % 2 == 1) return depths[members[n / 2]];
    return 0.5 * (depths[members[n / 2 - 1]] + depths[members[n / 2]]);
}
}  // namespace detail

/// Boundaries are nearest-rank percentiles at 0, 100/N, ..., 100; a depth joins
/// the lowest chunk whose upper boundary is >= it, so ties stay in the lower
/// chunk. Plane distance is the chunk median (mean of the middle pair for even
/// sizes); an empty chunk sits at the midpoint of its boundary interval.
inline ChunkPartition quantile_chunk(std::span<const double> depths, int n_chunk) {
    if (n_chunk < 1) throw ArgumentError("quantile_chunk: n_chunk must be >= 1");
    ChunkPartition part;
    part.n_chunk = n_chunk;
    part.chunks.resize(n_chunk);
    const std::size_t n = depths.size();
    if (n == 0) return part;
    part.empty = false;

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return depths[a] < depths[b]; });

    part.boundaries.resize(n_chunk + 1);
    part.boundaries[0] = depths[order[0]];
    for (int k = 1; k <= n_chunk; ++k) {
        // nearest rank: ceil(k n / N), 1-based
        const std::size_t rank = (std::size_t(k) * n + n_chunk - 1) / std::size_t(n_chunk);
        part.boundaries[k] = depths[order[std::max<std::size_t>(rank, 1) - 1]];
    }

    part.assignment.assign(n, 0);
    int k = 0;
    for (std::uint32_t pos : order) {
        while (k < n_chunk - 1 && depths[pos] > part.boundaries[k + 1]) ++k;
        part.assignment[pos] = k;
        part.chunks[k].push_back(pos);
    }

    part.plane_distance.resize(n_chunk);
    for (int c = 0; c < n_chunk; ++c) {
        part.plane_distance[c] = part.chunks[c].empty()
                                     ? 0.5 * (part.boundaries[c] + part.boundaries[c + 1])
                                     : detail::chunk_median(depths, part.chunks[c]);
    }
    return part;
}

inline nlohmann::json to_json(const ChunkPartition& p) {
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& c : p.chunks) counts.push_back(c.size());
    return {{"n_chunk", p.n_chunk},
            {"empty", p.empty},
            {"boundaries", p.boundaries},
            {"plane_distance", p.plane_distance},
            {"counts", counts}};
}

}  // namespace lfr

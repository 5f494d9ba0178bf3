#include "lfr/chunking.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace lfr;

namespace {

// Brute-force nearest-rank percentile: smallest sorted value whose rank
// r (1-based) satisfies r / n >= p.
double nearest_rank(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    for (std::size_t r = 1; r <= v.size(); ++r)
        if (double(r) * 100.0 >= p * double(v.size()) - 1e-9) return v[r - 1];
    return v.back();
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(QuantileChunk, EightDepthsTwoChunks) {
    const std::vector<double> d{5, 1, 8, 3, 2, 7, 4, 6};
    const auto p = quantile_chunk(d, 2);
    ASSERT_FALSE(p.empty);
    std::set<double> lo, hi;
    for (auto i : p.chunks[0]) lo.insert(d[i]);
    for (auto i : p.chunks[1]) hi.insert(d[i]);
    EXPECT_EQ(lo, (std::set<double>{1, 2, 3, 4}));
    EXPECT_EQ(hi, (std::set<double>{5, 6, 7, 8}));
    EXPECT_DOUBLE_EQ(p.plane_distance[0], 2.5);
    EXPECT_DOUBLE_EQ(p.plane_distance[1], 6.5);
    EXPECT_EQ(p.boundaries, (std::vector<double>{1, 4, 8}));
}

TEST(QuantileChunk, SingleChunkHoldsEverythingAtGlobalMedian) {
    const std::vector<double> d{3, 9, 1, 4, 4};
    const auto p = quantile_chunk(d, 1);
    EXPECT_EQ(p.chunks[0].size(), 5u);
    EXPECT_DOUBLE_EQ(p.plane_distance[0], 4.0);
}

TEST(QuantileChunk, EqualDepthsCollapseIntoTheFirstChunk) {
    const std::vector<double> d(10, 2.5);
    const auto p = quantile_chunk(d, 4);
    for (double b : p.boundaries) EXPECT_EQ(b, 2.5);
    EXPECT_EQ(p.chunks[0].size(), 10u);
    for (int k = 1; k < 4; ++k) {
        EXPECT_TRUE(p.chunks[k].empty());
        EXPECT_EQ(p.plane_distance[k], 2.5);  // midpoint of an empty interval
    }
}

TEST(QuantileChunk, EmptyInputFlagsAnEmptyPartition) {
    const auto p = quantile_chunk(std::vector<double>{}, 8);
    EXPECT_TRUE(p.empty);
    EXPECT_EQ(p.chunks.size(), 8u);
    EXPECT_THROW(quantile_chunk(std::vector<double>{1.0}, 0), ArgumentError);
}

TEST(QuantileChunk, EmptyChunkSitsAtIntervalMidpoint) {
    // boundaries {0, 0, 10}: every zero goes to chunk 0 (ties go low) and the
    // remaining 10 in chunk 1; with {0,0,0,10} and 3 chunks chunk 1 is empty.
    const std::vector<double> d{0, 0, 0, 10, 10, 10};
    const auto p = quantile_chunk(d, 3);
    ASSERT_EQ(p.boundaries, (std::vector<double>{0, 0, 10, 10}));
    EXPECT_EQ(p.chunks[0].size(), 3u);
    EXPECT_EQ(p.chunks[1].size(), 3u);
    EXPECT_TRUE(p.chunks[2].empty());
    EXPECT_DOUBLE_EQ(p.plane_distance[2], 10.0);
    EXPECT_DOUBLE_EQ(p.plane_distance[1], 10.0);
}

TEST(QuantileChunk, MatchesBruteForceOracleOnRandomInputs) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 400; ++trial) {
        const int n = 1 + int(rng() % 300);
        const int n_chunk = 1 + int(rng() % 40);
        const bool ties = trial % 3 == 0;
        std::vector<double> d(n);
        std::uniform_real_distribution<double> u(0.5, 9.0);
        for (auto& x : d) x = ties ? std::round(u(rng)) : u(rng);
        const auto p = quantile_chunk(d, n_chunk);

        for (int k = 0; k <= n_chunk; ++k)
            ASSERT_EQ(p.boundaries[k], nearest_rank(d, 100.0 * k / n_chunk)) << "trial " << trial << " k " << k;

        // Every depth lands in the lowest chunk whose upper boundary covers it.
        std::vector<int> seen(n, 0);
        for (int k = 0; k < n_chunk; ++k) {
            std::vector<double> members;
            for (auto i : p.chunks[k]) {
                ++seen[i];
                members.push_back(d[i]);
                int expect = 0;
                while (expect < n_chunk - 1 && d[i] > p.boundaries[expect + 1]) ++expect;
                ASSERT_EQ(expect, k);
                ASSERT_EQ(p.assignment[i], k);
            }
            if (members.empty())
                ASSERT_DOUBLE_EQ(p.plane_distance[k], 0.5 * (p.boundaries[k] + p.boundaries[k + 1]));
            else
                ASSERT_DOUBLE_EQ(p.plane_distance[k], median_of(members));
        }
        for (int c : seen) ASSERT_EQ(c, 1);  // disjoint, covering partition

        if (!ties) {
            std::size_t lo = n, hi = 0;
            for (const auto& c : p.chunks) {
                lo = std::min(lo, c.size());
                hi = std::max(hi, c.size());
            }
            ASSERT_LE(hi - lo, 1u) << "n " << n << " n_chunk " << n_chunk;
        }
    }
}

TEST(CullAndDepth, BehindAndFocalCenter) {
    DisplayConfig cfg;
    cfg.view_angle_x = 0.0;
    const auto ref = reference_camera(cfg, CameraPose{});
    GaussianScene s;
    const float dc[3] = {0, 0, 0};
    s.push_back({0, 0, -1}, {-4, -4, -4}, {1, 0, 0, 0}, 0.0f, dc);
    s.push_back({0, 0, float(cfg.d_focal)}, {-4, -4, -4}, {1, 0, 0, 0}, 0.0f, dc);
    s.push_back({5, 0, 1}, {-4, -4, -4}, {1, 0, 0, 0}, 0.0f, dc);
    const auto c = cull_and_depth(s, ref);
    ASSERT_EQ(c.indices, (std::vector<std::uint32_t>{1}));
    EXPECT_DOUBLE_EQ(c.depths[0], cfg.d_focal);
}

TEST(CullAndDepth, DepthsAreBaseRelative) {
    DisplayConfig cfg;  // 35 deg viewing angle -> positive forward distance
    const auto ref = reference_camera(cfg, CameraPose{});
    ASSERT_GT(ref.d_forward, 0.1);
    GaussianScene s;
    const float dc[3] = {0, 0, 0};
    s.push_back({0.1f, 0, 3.0f}, {-4, -4, -4}, {1, 0, 0, 0}, 0.0f, dc);
    const auto c = cull_and_depth(s, ref);
    ASSERT_EQ(c.depths.size(), 1u);
    EXPECT_NEAR(c.depths[0], 3.0, 1e-12);
}

// Kept fraction of the depth-ramp generator against a Monte-Carlo estimate
// drawn from the same distribution (positions and footprint sizes), for a
// reference camera narrower than the generator's 60 degree spread.
TEST(CullAndDepth, DepthRampKeptFractionMatchesMonteCarlo) {
    for (const double view_angle : {0.0, 35.0}) {
        DisplayConfig cfg;
        cfg.fov_x = cfg.fov_y = deg2rad(40.0);
        cfg.view_angle_x = deg2rad(view_angle);
        const auto ref = reference_camera(cfg, CameraPose{});

        std::size_t kept = 0, total = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Scene scene = generate_synthetic("depth-ramp", seed);
            kept += cull_and_depth(scene, ref).indices.size();
            total += scene_size(scene);
        }
        const double measured = double(kept) / double(total);

        // independent oracle
        const double df = cfg.d_focal;
        const double t_ref = df * std::tan(0.5 * cfg.fov_x) / (df - ref.d_forward);
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int samples = 2'000'000;
        int inside = 0;
        for (int i = 0; i < samples; ++i) {
            const double z = synthetic::ramp_near + (synthetic::ramp_far - synthetic::ramp_near) * u(rng);
            const double half = synthetic::ramp_lateral * z * synthetic::half_fov_tan;
            const double x = half * (2 * u(rng) - 1), y = half * (2 * u(rng) - 1);
            const double base = synthetic::ramp_sigma_min *
                                std::pow(synthetic::ramp_sigma_max / synthetic::ramp_sigma_min, u(rng)) * z /
                                synthetic::focal_depth;
            const double widest = std::max({0.6 + 0.8 * u(rng), 0.6 + 0.8 * u(rng), 0.6 + 0.8 * u(rng)});
            const double zr = z - ref.d_forward;
            if (!(zr > 1e-2)) continue;
            // 3-sigma footprint of the widest axis, stretched off-axis by sqrt(1 + a^2)
            const double sigma = base * widest / zr;
            auto reaches = [&](double a) { return std::abs(a) - t_ref <= 3.0 * sigma * std::sqrt(1.0 + a * a); };
            if (reaches(x / zr) && reaches(y / zr)) ++inside;
        }
        const double expected = double(inside) / samples;
        EXPECT_GT(expected, 0.2);
        EXPECT_LT(expected, 0.95);
        EXPECT_NEAR(measured, expected, 0.02) << "view angle " << view_angle;
    }
}

TEST(CullAndDepth, VoxelsUseTheirCenters) {
    DisplayConfig cfg;
    cfg.view_angle_x = 0.0;
    const auto ref = reference_camera(cfg, CameraPose{});
    const Scene grid = generate_synthetic("grid");
    const auto c = cull_and_depth(grid, ref);
    const auto& v = std::get<VoxelScene>(grid);
    ASSERT_FALSE(c.indices.empty());
    for (std::size_t i = 0; i < c.indices.size(); ++i)
        EXPECT_NEAR(c.depths[i], v.voxel_center(v.occupied[c.indices[i]]).z(), 1e-12);
}

#include "lfr/display.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace lfr;
using namespace lfr::oracle;

namespace {

using ld = long double;
constexpr ld pi_l = 3.141592653589793238462643383279502884L;
ld rad(ld deg) { return deg * pi_l / 180.0L; }

DisplayConfig make_config(double d_focal, double fov_deg, double phi_deg, int views, int res = 128) {
    DisplayConfig c;
    c.d_focal = d_focal;
    c.fov_x = c.fov_y = deg2rad(fov_deg);
    c.view_angle_x = deg2rad(phi_deg);
    c.view_angle_y = 0.0;
    c.views_x = views;
    c.views_y = 1;
    c.res_x = c.res_y = res;
    return c;
}

// Outer rays of the two extreme views cross the optical axis where the
// reference camera must sit: intersect the line from (delta, 0) to the far
// edge (-W, d_focal) of the focal window with x = 0.
ld axis_crossing(ld d_focal, ld fov, ld phi) {
    const ld delta = d_focal * std::tan(phi / 2);
    const ld w = d_focal * std::tan(fov / 2);
    const ld t = delta / (w + delta);
    return t * d_focal;
}

}  // namespace

TEST(ForwardDistance, DefaultDisplayMatchesGeometricConstruction) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 45);
    const ld oracle = axis_crossing(2.0L, rad(60), rad(35));
    EXPECT_NEAR(forward_distance(c), double(oracle), 1e-12);
    // direct high-precision evaluation of the closed form
    const ld tp = std::tan(rad(17.5L)), tt = std::tan(rad(30));
    EXPECT_NEAR(forward_distance(c), double(2.0L * tp / (tp + tt)), 1e-12);
}

TEST(ForwardDistance, ViewAngleEqualToFovGivesHalfFocal) {
    for (double f : {0.5, 2.0, 7.0})
        for (double a : {20.0, 60.0, 100.0}) EXPECT_NEAR(forward_distance(make_config(f, a, a, 9)), f / 2, 1e-12);
}

TEST(ForwardDistance, ZeroViewAngleAndShiftClamp) {
    EXPECT_EQ(forward_distance(make_config(2.0, 60.0, 0.0, 1)), 0.0);
    DisplayConfig c = make_config(2.0, 60.0, 35.0, 45);
    const double d = forward_distance(c);
    c.d_shift = 0.25;
    EXPECT_NEAR(forward_distance(c), d - 0.25, 1e-15);
    c.d_shift = 10.0;
    EXPECT_EQ(forward_distance(c), 0.0);
}

TEST(ForwardDistance, LargerAxisWins) {
    DisplayConfig c = make_config(2.0, 60.0, 10.0, 9);
    c.view_angle_y = deg2rad(40.0);
    c.views_y = 3;
    EXPECT_NEAR(forward_distance(c), double(axis_crossing(2.0L, rad(60), rad(40))), 1e-12);
}

TEST(ReferenceCamera, FieldOfView) {
    DisplayConfig c = make_config(2.0, 90.0, 0.0, 1);
    const ReferenceCamera r = reference_camera(c, CameraPose{}, 1.0);
    EXPECT_NEAR(r.fov_x_ref, 2.0 * std::atan(2.0), 1e-14);
    EXPECT_NEAR(std::tan(0.5 * r.fov_x_ref), 2.0 * std::tan(0.5 * c.fov_x), 1e-12);

    const ReferenceCamera r0 = reference_camera(c, CameraPose{}, 0.0);
    EXPECT_NEAR(r0.fov_x_ref, c.fov_x, 1e-15);
    EXPECT_NEAR(r0.fov_y_ref, c.fov_y, 1e-15);
}

TEST(ReferenceCamera, PositionedAlongForwardAxis) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 45);
    const CameraPose base = CameraPose::look_at(Vec3(1, 2, 3), Vec3(2, 2, 5));
    const ReferenceCamera r = reference_camera(c, base);
    EXPECT_NEAR((r.pose.position - (base.position + r.d_forward * base.forward())).norm(), 0.0, 1e-14);
    EXPECT_TRUE(r.pose.rotation.isApprox(base.rotation));
}

TEST(ReferenceCamera, RejectsForwardDistanceBeyondFocalPlane) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 45);
    EXPECT_THROW(reference_camera(c, CameraPose{}, 2.0), GeometryError);
    EXPECT_THROW(reference_camera(c, CameraPose{}, -0.1), GeometryError);
}

TEST(QuiltViewParams, FirstOfNine) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 9);
    const auto v = quilt_view_params(c, 1, 1);
    EXPECT_NEAR(v.rho_x, -deg2rad(17.5), 1e-15);
    EXPECT_NEAR(v.offset_x, double(2.0L * std::tan(rad(-17.5L))), 1e-14);
    EXPECT_NEAR(v.principal_x, double(std::tan(rad(-17.5L)) / std::tan(rad(30))), 1e-14);
    EXPECT_EQ(v.rho_y, 0.0);
}

TEST(QuiltViewParams, MiddleViewIsOnAxisAndMirroredViewsAreOpposite) {
    for (int views : {1, 3, 9, 45}) {
        const DisplayConfig c = make_config(2.0, 60.0, 35.0, views);
        EXPECT_EQ(quilt_view_params(c, (views + 1) / 2, 1).rho_x, 0.0);
        for (int j = 1; j <= views; ++j)
            EXPECT_EQ(quilt_view_params(c, j, 1).rho_x, -quilt_view_params(c, views + 1 - j, 1).rho_x);
    }
}

TEST(QuiltViewParams, OutOfRange) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 9);
    EXPECT_THROW(quilt_view_params(c, 0, 1), ArgumentError);
    EXPECT_THROW(quilt_view_params(c, 10, 1), ArgumentError);
    EXPECT_THROW(quilt_view_params(c, 1, 2), ArgumentError);
}

TEST(PlaneProjection, HighPrecisionSpotValue) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 9);
    const ReferenceCamera ref = reference_camera(c, CameraPose{});
    const auto view = quilt_view_params(c, 1, 1);
    const double d_k = 1.5 * c.d_focal;
    const Vec2 got = project_quilt_to_plane(c, ref, view, Vec2(0.5, 0.0), d_k);

    const ld tp = std::tan(rad(17.5L)), tt = std::tan(rad(30));
    const ld d_fwd = 2.0L * tp / (tp + tt);
    const ld t_ref = 2.0L * tt / (2.0L - d_fwd);
    const ld rho = -rad(17.5L);
    const ld dk = 3.0L;
    const ld oracle = ((2.0L - dk) * std::tan(rho) + dk * tt * 0.5L) / ((dk - d_fwd) * t_ref);
    EXPECT_NEAR(got.x(), double(oracle), 1e-12);
    EXPECT_NEAR(got.y(), 0.0, 1e-15);
}

TEST(PlaneProjection, RejectsPlaneBehindReferenceCamera) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 9);
    const ReferenceCamera ref = reference_camera(c, CameraPose{});
    EXPECT_THROW(plane_projection(c, ref, quilt_view_params(c, 1, 1), ref.d_forward), GeometryError);
}

TEST(PlaneProjection, FocalPlaneIsAFixedPointAcrossRandomConfigs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1500; ++trial) {
        const DisplayConfig c = random_config(rng);
        const ReferenceCamera ref = reference_camera(c, CameraPose{});
        std::uniform_int_distribution<int> jx(1, c.views_x), iy(1, c.views_y);
        const auto v = quilt_view_params(c, jx(rng), iy(rng));
        const Vec2 uv(u(rng), u(rng));
        const Vec2 p = project_quilt_to_plane(c, ref, v, uv, c.d_focal);
        worst = std::max(worst, (p - uv).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(PlaneProjection, MatchesRayPlaneConstructionAcrossRandomConfigs) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0), unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1500; ++trial) {
        const DisplayConfig c = random_config(rng);
        const Vec3 eye(u(rng), u(rng), u(rng));
        const CameraPose base = CameraPose::look_at(eye, eye + Vec3(0.3 * u(rng), 0.3 * u(rng), 1.0));
        const ReferenceCamera ref = reference_camera(c, base);
        std::uniform_int_distribution<int> jx(1, c.views_x), iy(1, c.views_y);
        const auto v = quilt_view_params(c, jx(rng), iy(rng));
        const double d_k = ref.d_forward + (0.05 + 4.0 * unit(rng)) * (c.d_focal - ref.d_forward);
        const Vec2 uv(u(rng), u(rng));
        const Vec2 got = project_quilt_to_plane(c, ref, v, uv, d_k);
        const Vec2 want = ray_plane_oracle(c, base, ref, v, uv, d_k);
        worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(PlaneProjection, MiddleViewIsPureScale) {
    const DisplayConfig c = make_config(2.0, 60.0, 35.0, 9);
    const ReferenceCamera ref = reference_camera(c, CameraPose{});
    const auto v = quilt_view_params(c, 5, 1);
    const auto p = plane_projection(c, ref, v, 3.7);
    EXPECT_EQ(p.x.principal_term, 0.0);
    EXPECT_NEAR(p.x(0.4) / 0.4, p.x(-0.9) / -0.9, 1e-14);
}

TEST(PlaneGrid, CeilOfScaledResolution) {
    DisplayConfig c = make_config(2.0, 60.0, 35.0, 9, 100);
    c.plane_scale = 1.5;
    EXPECT_EQ(plane_pixel_grid(c), std::make_pair(150, 150));
    c.plane_scale = 1.234;
    EXPECT_EQ(plane_pixel_grid(c).first, 124);
    c.res_x = 3;
    c.plane_scale = 0.1;
    EXPECT_EQ(plane_pixel_grid(c).first, 1);
}

TEST(DisplayConfigValidation, NamesOffendingField) {
    auto expect_field = [](DisplayConfig c, const std::string& field) {
        try {
            validate(c);
            FAIL() << "expected error for " << field;
        } catch (const ConfigError& e) {
            EXPECT_EQ(std::string(e.what()).rfind(field + ":", 0), 0u) << e.what();
        }
    };
    DisplayConfig c;
    c.d_focal = 0;
    expect_field(c, "d_focal");
    c = {};
    c.fov_x = deg2rad(200);
    expect_field(c, "fov_x");
    c = {};
    c.views_x = 0;
    expect_field(c, "views_x");
    c = {};
    c.n_chunk = 0;
    expect_field(c, "n_chunk");
    c = {};
    c.plane_scale = -1;
    expect_field(c, "plane_scale");
    c = {};
    c.d_shift = -0.5;
    expect_field(c, "d_shift");
}

TEST(DisplayConfigIo, FileRoundTripIsExact) {
    DisplayConfig c = make_config(2.25, 47.5, 31.0, 17);
    c.views_y = 3;
    c.view_angle_y = deg2rad(12.0);
    c.n_chunk = 77;
    c.plane_scale = 1.75;
    c.interp = Interp::bilinear;
    c.plane_precision = Precision::f32;
    c.d_shift = 0.125;
    std::istringstream in(format_display_config(c));
    const DisplayConfig back = parse_display_config(in);
    EXPECT_EQ(back.views_x, c.views_x);
    EXPECT_EQ(back.interp, c.interp);
    EXPECT_EQ(back.plane_precision, c.plane_precision);
    EXPECT_NEAR(back.fov_x, c.fov_x, 1e-15);
    EXPECT_NEAR(back.view_angle_y, c.view_angle_y, 1e-15);
    EXPECT_EQ(back.d_shift, c.d_shift);
}

TEST(DisplayConfigIo, ParsesCommentsAndRejectsGarbage) {
    std::istringstream ok("# header\n n_chunk = 16  # trailing\n\nfov = 40\ninterp=bilinear\n");
    const DisplayConfig c = parse_display_config(ok);
    EXPECT_EQ(c.n_chunk, 16);
    EXPECT_NEAR(c.fov_y, deg2rad(40), 1e-15);
    EXPECT_EQ(c.interp, Interp::bilinear);

    std::istringstream bad_key("frobnicate = 3\n");
    EXPECT_THROW(parse_display_config(bad_key), ConfigError);
    std::istringstream bad_value("n_chunk = 3.5\n");
    EXPECT_THROW(parse_display_config(bad_value), ConfigError);
    std::istringstream no_eq("n_chunk 3\n");
    EXPECT_THROW(parse_display_config(no_eq), ConfigError);
}

TEST(DisplayConfigIo, JsonMergeIsPartialAndValidated) {
    const DisplayConfig c = merge_json(DisplayConfig{}, {{"n_chunk", 64}, {"interp", "bilinear"}});
    EXPECT_EQ(c.n_chunk, 64);
    EXPECT_EQ(c.interp, Interp::bilinear);
    EXPECT_EQ(c.views_x, DisplayConfig{}.views_x);
    EXPECT_THROW(merge_json(DisplayConfig{}, {{"fov_x", 200}}), ConfigError);
    EXPECT_EQ(from_json(to_json(c)).n_chunk, 64);
}

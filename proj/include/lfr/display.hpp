#pragma once

// Light-field display geometry: display parameterization, the forward-moved
// reference camera that covers the display volume, the per-view off-axis
// cameras of the quilt, and the quilt-pixel to sweeping-plane projection.

#include "lfr/camera.hpp"
#include "lfr/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>

namespace lfr {

enum class Interp { nearest, bilinear };
enum class Precision { u8, f32 };

inline std::string to_string(Interp m) { return m == Interp::nearest ? "nearest" : "bilinear"; }
inline std::string to_string(Precision p) { return p == Precision::u8 ? "u8" : "f32"; }

inline Interp parse_interp(const std::string& s) {
    if (s == "nearest") return Interp::nearest;
    if (s == "bilinear") return Interp::bilinear;
    throw ArgumentError("unknown interpolation mode '" + s + "' (expected nearest|bilinear)");
}

inline Precision parse_precision(const std::string& s) {
    if (s == "u8") return Precision::u8;
    if (s == "f32") return Precision::f32;
    throw ArgumentError("unknown plane precision '" + s + "' (expected u8|f32)");
}

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Display and quilt parameterization. Angles are radians; lengths are scene
/// units measured from the base camera along its viewing axis.
struct DisplayConfig {
    double d_focal = 2.0;
    double fov_x = deg2rad(60.0);
    double fov_y = deg2rad(60.0);
    double view_angle_x = deg2rad(35.0);
    double view_angle_y = 0.0;
    int views_x = 45;
    int views_y = 1;
    int res_x = 512;
    int res_y = 512;
    double d_shift = 0.0;
    int n_chunk = 128;
    double plane_scale = 2.0;
    Interp interp = Interp::nearest;
    Precision plane_precision = Precision::u8;

    int view_count() const { return views_x * views_y; }

    friend bool operator==(const DisplayConfig&, const DisplayConfig&) = default;
};

/// Throws ConfigError naming the first offending field.
inline void validate(const DisplayConfig& c) {
    auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
    const double pi = std::numbers::pi;
    if (!(c.d_focal > 0) || !std::isfinite(c.d_focal)) fail("d_focal", "must be positive");
    if (!(c.fov_x > 0 && c.fov_x < pi)) fail("fov_x", "must lie in (0, 180) degrees");
    if (!(c.fov_y > 0 && c.fov_y < pi)) fail("fov_y", "must lie in (0, 180) degrees");
    if (!(c.view_angle_x >= 0 && c.view_angle_x < pi)) fail("view_angle_x", "must lie in [0, 180) degrees");
    if (!(c.view_angle_y >= 0 && c.view_angle_y < pi)) fail("view_angle_y", "must lie in [0, 180) degrees");
    if (c.views_x < 1) fail("views_x", "must be >= 1");
    if (c.views_y < 1) fail("views_y", "must be >= 1");
    if (c.res_x < 1) fail("res_x", "must be >= 1");
    if (c.res_y < 1) fail("res_y", "must be >= 1");
    if (!(c.d_shift >= 0) || !std::isfinite(c.d_shift)) fail("d_shift", "must be >= 0");
    if (c.n_chunk < 1) fail("n_chunk", "must be >= 1");
    if (!(c.plane_scale > 0) || !std::isfinite(c.plane_scale)) fail("plane_scale", "must be positive");
}

/// Distance the reference camera moves forward from the base camera so that
/// its frustum contains every viewing ray behind the focal plane, minus the
/// backward shift and clamped at zero. The result lies in [0, d_focal). An
/// axis with a single view has no viewing spread and contributes nothing.
inline double forward_distance(const DisplayConfig& cfg) {
    validate(cfg);
    auto axis = [&](double view_angle, double fov, int views) {
        if (views == 1) return 0.0;
        const double tv = std::tan(0.5 * view_angle);
        return cfg.d_focal * tv / (tv + std::tan(0.5 * fov));
    };
    const double d = std::max(axis(cfg.view_angle_x, cfg.fov_x, cfg.views_x), axis(cfg.view_angle_y, cfg.fov_y, cfg.views_y));
    return std::max(0.0, d - cfg.d_shift);
}

struct ReferenceCamera {
    CameraPose pose;
    double d_forward = 0.0;
    double fov_x_ref = 0.0;
    double fov_y_ref = 0.0;

    Vec3 base_position() const { return pose.position - d_forward * pose.forward(); }
};

inline ReferenceCamera reference_camera(const DisplayConfig& cfg, const CameraPose& base, double d_forward) {
    validate(cfg);
    if (!(d_forward >= 0.0 && d_forward < cfg.d_focal))
        throw GeometryError("reference camera: forward distance must lie in [0, d_focal)");
    const double remaining = cfg.d_focal - d_forward;
    ReferenceCamera ref;
    ref.d_forward = d_forward;
    ref.pose = base;
    ref.pose.position = base.position + d_forward * base.forward();
    ref.fov_x_ref = 2.0 * std::atan(cfg.d_focal * std::tan(0.5 * cfg.fov_x) / remaining);
    ref.fov_y_ref = 2.0 * std::atan(cfg.d_focal * std::tan(0.5 * cfg.fov_y) / remaining);
    return ref;
}

inline ReferenceCamera reference_camera(const DisplayConfig& cfg, const CameraPose& base) {
    return reference_camera(cfg, base, forward_distance(cfg));
}

/// Plane raster size: (ceil(P_s * N_x), ceil(P_s * N_y)).
inline std::pair<int, int> plane_pixel_grid(const DisplayConfig& cfg) {
    // Guard against P_s * N landing a hair above an integer.
    auto dim = [&](int n) { return static_cast<int>(std::ceil(cfg.plane_scale * n - 1e-9)); };
    return {std::max(1, dim(cfg.res_x)), std::max(1, dim(cfg.res_y))};
}

/// Reference camera as a pinhole raster on the plane grid.
inline PinholeCamera plane_camera(const DisplayConfig& cfg, const ReferenceCamera& ref) {
    const auto [w, h] = plane_pixel_grid(cfg);
    return PinholeCamera::from_fov(ref.pose, ref.fov_x_ref, ref.fov_y_ref, w, h);
}

/// Angular position of one quilt view. Indices are 1-based (column j, row i).
struct QuiltViewParams {
    int view_col = 1;
    int view_row = 1;
    double rho_x = 0.0;
    double rho_y = 0.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
    double principal_x = 0.0;
    double principal_y = 0.0;
};

namespace detail {
// rho = angle * ((idx-1)/(count-1) - 1/2), written with an integer numerator so
// that mirrored indices give exactly opposite angles. A single view sits at 0.
inline double view_angle_at(double angle, int idx, int count) {
    if (count == 1) return 0.0;
    return angle * double(2 * (idx - 1) - (count - 1)) / double(2 * (count - 1));
}
}  // namespace detail

inline QuiltViewParams quilt_view_params(const DisplayConfig& cfg, int j, int i) {
    if (j < 1 || j > cfg.views_x) throw ArgumentError("quilt view column out of range: " + std::to_string(j));
    if (i < 1 || i > cfg.views_y) throw ArgumentError("quilt view row out of range: " + std::to_string(i));
    QuiltViewParams v;
    v.view_col = j;
    v.view_row = i;
    v.rho_x = detail::view_angle_at(cfg.view_angle_x, j, cfg.views_x);
    v.rho_y = detail::view_angle_at(cfg.view_angle_y, i, cfg.views_y);
    v.offset_x = cfg.d_focal * std::tan(v.rho_x);
    v.offset_y = cfg.d_focal * std::tan(v.rho_y);
    v.principal_x = std::tan(v.rho_x) / std::tan(0.5 * cfg.fov_x);
    v.principal_y = std::tan(v.rho_y) / std::tan(0.5 * cfg.fov_y);
    return v;
}

/// Off-axis camera of one quilt view: shifted by the view offset in the base
/// camera's image plane, principal point aimed at the focal-plane centre.
inline PinholeCamera view_camera(const DisplayConfig& cfg, const CameraPose& base, const QuiltViewParams& v) {
    PinholeCamera cam = PinholeCamera::from_fov(base, cfg.fov_x, cfg.fov_y, cfg.res_x, cfg.res_y);
    cam.pose.position = base.position + v.offset_x * base.right() + v.offset_y * base.down();
    cam.cx += 0.5 * cfg.res_x * v.principal_x;
    cam.cy += 0.5 * cfg.res_y * v.principal_y;
    return cam;
}

/// One axis of the quilt-to-plane mapping u' = (A + B u) / D for a fixed
/// (view, plane) pair. The swizzle kernel and project_quilt_to_plane share
/// this evaluation so they agree to the bit.
struct AxisProjection {
    double principal_term = 0.0;  // (d_focal - d_k) tan(rho)
    double slope_term = 0.0;      // d_k tan(fov / 2)
    double denominator = 1.0;     // (d_k - d_forward) tan(fov_ref / 2)

    double operator()(double u) const { return (principal_term + slope_term * u) / denominator; }
};

struct PlaneProjection {
    AxisProjection x;
    AxisProjection y;

    Vec2 operator()(const Vec2& uv) const { return {x(uv.x()), y(uv.y())}; }
};

inline PlaneProjection plane_projection(const DisplayConfig& cfg, const ReferenceCamera& ref,
                                        const QuiltViewParams& view, double d_k) {
    if (!(d_k > ref.d_forward))
        throw GeometryError("plane distance must lie in front of the reference camera");
    PlaneProjection p;
    p.x = {(cfg.d_focal - d_k) * std::tan(view.rho_x), d_k * std::tan(0.5 * cfg.fov_x),
           (d_k - ref.d_forward) * std::tan(0.5 * ref.fov_x_ref)};
    p.y = {(cfg.d_focal - d_k) * std::tan(view.rho_y), d_k * std::tan(0.5 * cfg.fov_y),
           (d_k - ref.d_forward) * std::tan(0.5 * ref.fov_y_ref)};
    return p;
}

/// Maps a signed normalized quilt-view coordinate (u, v) to the signed
/// normalized coordinate on the sweeping plane at base-relative depth d_k.
inline Vec2 project_quilt_to_plane(const DisplayConfig& cfg, const ReferenceCamera& ref,
                                   const QuiltViewParams& view, const Vec2& uv, double d_k) {
    return plane_projection(cfg, ref, view, d_k)(uv);
}

// ---------------------------------------------------------------------------
// Configuration file: "key = value" lines, '#' comments, angles in degrees.

inline nlohmann::json to_json(const DisplayConfig& c) {
    return {
        {"d_focal", c.d_focal},
        {"fov_x", rad2deg(c.fov_x)},
        {"fov_y", rad2deg(c.fov_y)},
        {"view_angle_x", rad2deg(c.view_angle_x)},
        {"view_angle_y", rad2deg(c.view_angle_y)},
        {"views_x", c.views_x},
        {"views_y", c.views_y},
        {"res_x", c.res_x},
        {"res_y", c.res_y},
        {"d_shift", c.d_shift},
        {"n_chunk", c.n_chunk},
        {"plane_scale", c.plane_scale},
        {"interp", to_string(c.interp)},
        {"plane_precision", to_string(c.plane_precision)},
    };
}

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || text.find_first_not_of(" \t", used) != std::string::npos)
        throw ConfigError(key + ": expected a number, got '" + text + "'");
    return v;
}

inline int parse_count(const std::string& key, double v) {
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": expected an integer");
    return static_cast<int>(v);
}

}  // namespace detail

/// Sets one field from its file/JSON textual form. Angles are in degrees.
inline void set_field(DisplayConfig& c, const std::string& key, const std::string& value) {
    if (key == "interp") {
        try {
            c.interp = parse_interp(value);
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("interp: ") + e.what());
        }
        return;
    }
    if (key == "precision") return set_field(c, "plane_precision", value);
    if (key == "fov") {
        set_field(c, "fov_x", value);
        return set_field(c, "fov_y", value);
    }
    if (key == "plane_precision") {
        try {
            c.plane_precision = parse_precision(value);
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("plane_precision: ") + e.what());
        }
        return;
    }
    const double v = detail::parse_number(key, value);
    if (key == "d_focal") c.d_focal = v;
    else if (key == "fov_x") c.fov_x = deg2rad(v);
    else if (key == "fov_y") c.fov_y = deg2rad(v);
    else if (key == "view_angle_x") c.view_angle_x = deg2rad(v);
    else if (key == "view_angle_y") c.view_angle_y = deg2rad(v);
    else if (key == "views_x") c.views_x = detail::parse_count(key, v);
    else if (key == "views_y") c.views_y = detail::parse_count(key, v);
    else if (key == "res_x") c.res_x = detail::parse_count(key, v);
    else if (key == "res_y") c.res_y = detail::parse_count(key, v);
    else if (key == "d_shift") c.d_shift = v;
    else if (key == "n_chunk") c.n_chunk = detail::parse_count(key, v);
    else if (key == "plane_scale") c.plane_scale = v;
    else throw ConfigError("unknown display config key '" + key + "'");
}

/// Applies the keys present in `j` on top of `base` (JSON numbers or strings).
inline DisplayConfig merge_json(DisplayConfig base, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("display config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) set_field(base, key, value.get<std::string>());
        else if (value.is_number()) {
            std::ostringstream os;
            os.precision(17);
            os << value.get<double>();
            set_field(base, key, os.str());
        } else {
            throw ConfigError(key + ": expected a number or string");
        }
    }
    validate(base);
    return base;
}

inline DisplayConfig from_json(const nlohmann::json& j) { return merge_json(DisplayConfig{}, j); }

inline DisplayConfig parse_display_config(std::istream& in) {
    DisplayConfig c;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("display config line " + std::to_string(lineno) + ": expected 'key = value'");
        set_field(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate(c);
    return c;
}

inline DisplayConfig load_display_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open display config " + path);
    return parse_display_config(in);
}

inline std::string format_display_config(const DisplayConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "# light-field display configuration (angles in degrees)\n";
    const nlohmann::json fields = to_json(c);
    for (const auto& [key, value] : fields.items()) {
        os << key << " = ";
        if (value.is_string()) os << value.get<std::string>();
        else os << value;
        os << '\n';
    }
    return os.str();
}

}  // namespace lfr

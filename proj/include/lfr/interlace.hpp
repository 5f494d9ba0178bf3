#pragma once

// Slanted-lenticular interlacing: assigns every panel subpixel to one quilt
// view from a calibration profile (pitch, slant, centre phase) and builds the
// base image shown on the panel.

#include "lfr/display.hpp"
#include "lfr/error.hpp"
#include "lfr/image.hpp"
#include "lfr/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace lfr {

enum class SubpixelOrder { rgb, bgr };

struct CalibrationProfile {
    int panel_w = 1536;
    int panel_h = 2048;
    double pitch = 246.0;  // lenticules across the panel width
    double slant = 0.0;    // horizontal pixels per pixel row (tangent of the lens slant)
    double center = 0.0;   // phase offset in [0, 1)
    SubpixelOrder subpixel_order = SubpixelOrder::rgb;
    bool invert = false;
    int total_views = 45;

    friend bool operator==(const CalibrationProfile&, const CalibrationProfile&) = default;
};

inline void validate(const CalibrationProfile& c) {
    if (c.panel_w < 1 || c.panel_h < 1) throw ConfigError("calibration: panel size must be positive");
    if (!(c.pitch > 0) || !std::isfinite(c.pitch)) throw ConfigError("calibration: pitch must be positive");
    if (!std::isfinite(c.slant)) throw ConfigError("calibration: slant must be finite");
    if (!(c.center >= 0.0 && c.center < 1.0)) throw ConfigError("calibration: center must lie in [0, 1)");
    if (c.total_views < 1) throw ConfigError("calibration: total_views must be >= 1");
}

namespace detail {
/// Phase numerator in subpixel units: (3x + slot + 3y * slant) * pitch - 3 * center * panel_w.
/// Dividing once at the end keeps slice boundaries that fall exactly on
/// subpixel edges exact.
inline double phase_numerator(const CalibrationProfile& cal, double x, double y, int channel) {
    const int slot = cal.subpixel_order == SubpixelOrder::rgb ? channel : 2 - channel;
    return (3.0 * x + slot + 3.0 * y * cal.slant) * cal.pitch - 3.0 * cal.center * cal.panel_w;
}
}  // namespace detail

/// Unwrapped lens phase of a subpixel, in lenticule periods:
/// (x + slot / 3 + y * slant) * pitch / panel_w - center.
inline double subpixel_phase_raw(const CalibrationProfile& cal, double x, double y, int channel) {
    return detail::phase_numerator(cal, x, y, channel) / (3.0 * cal.panel_w);
}

inline double subpixel_phase(const CalibrationProfile& cal, int x, int y, int channel) {
    const double raw = subpixel_phase_raw(cal, x, y, channel);
    return raw - std::floor(raw);
}

/// floor(frac(phase) * total_views), reversed when the profile is inverted.
inline int subpixel_view_index(const CalibrationProfile& cal, int x, int y, int channel) {
    if (channel < 0 || channel > 2) throw ArgumentError("subpixel channel must be 0, 1 or 2");
    const double scaled = detail::phase_numerator(cal, x, y, channel) * cal.total_views / (3.0 * cal.panel_w);
    const long long n = cal.total_views;
    const int v = static_cast<int>(((static_cast<long long>(std::floor(scaled)) % n) + n) % n);
    return cal.invert ? cal.total_views - 1 - v : v;
}

/// Rotates the lens array by `delta_degrees` on top of the current slant.
inline CalibrationProfile simulate_misalignment(const CalibrationProfile& cal, double delta_degrees) {
    if (delta_degrees == 0.0) return cal;
    CalibrationProfile out = cal;
    out.slant = std::tan(std::atan(cal.slant) + deg2rad(delta_degrees));
    return out;
}

/// Phase difference between two profiles at a subpixel, in subpixel widths.
inline double phase_error_subpixels(const CalibrationProfile& reference, const CalibrationProfile& other, double x,
                                    double y, int channel) {
    const double periods = subpixel_phase_raw(other, x, y, channel) - subpixel_phase_raw(reference, x, y, channel);
    const double subpixels_per_period = 3.0 * reference.panel_w / reference.pitch;
    return periods * subpixels_per_period;
}

/// Quilt view feeding panel view `view` when the quilt holds `quilt_views`
/// views: nearest view by angular position.
inline int quilt_view_for(int view, int total_views, int quilt_views) {
    if (quilt_views == total_views) return view;
    const double q = (view + 0.5) * quilt_views / total_views - 0.5;
    return std::clamp(static_cast<int>(std::lround(q)), 0, quilt_views - 1);
}

namespace detail {
inline float bilinear_channel(const Image8& img, double sx, double sy, int channel) {
    sx = std::clamp(sx, 0.0, double(img.width - 1));
    sy = std::clamp(sy, 0.0, double(img.height - 1));
    const int x0 = int(sx), y0 = int(sy);
    const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
    const double wx = sx - x0, wy = sy - y0;
    const double top = (1 - wx) * img.pixel(x0, y0)[channel] + wx * img.pixel(x1, y0)[channel];
    const double bottom = (1 - wx) * img.pixel(x0, y1)[channel] + wx * img.pixel(x1, y1)[channel];
    return float((1 - wy) * top + wy * bottom);
}
}  // namespace detail

/// Builds the panel image. `views` are finalized quilt views in quilt order
/// (view 1 first); each panel subpixel copies its channel from the assigned
/// view, bilinearly resampled to panel resolution.
inline Image8 interlace(std::span<const Image8> views, const CalibrationProfile& cal) {
    validate(cal);
    if (views.empty()) throw ConfigError("interlace: quilt has no views");
    const int w = views[0].width, h = views[0].height;
    for (const auto& v : views)
        if (v.width != w || v.height != h || v.channels != 3)
            throw ConfigError("interlace: quilt views must share one RGB resolution");
    const int nq = static_cast<int>(views.size());
    Image8 out(cal.panel_w, cal.panel_h, 3);
    const double scale_x = double(w) / cal.panel_w, scale_y = double(h) / cal.panel_h;
    parallel_for(std::size_t(cal.panel_h), [&](std::size_t yy) {
        const int y = int(yy);
        const double sy = (y + 0.5) * scale_y - 0.5;
        for (int x = 0; x < cal.panel_w; ++x) {
            const double sx = (x + 0.5) * scale_x - 0.5;
            for (int c = 0; c < 3; ++c) {
                const int view = quilt_view_for(subpixel_view_index(cal, x, y, c), cal.total_views, nq);
                out.pixel(x, y)[c] = static_cast<std::uint8_t>(
                    std::clamp(std::lround(detail::bilinear_channel(views[view], sx, sy, c)), 0L, 255L));
            }
        }
    });
    return out;
}

inline nlohmann::json to_json(const CalibrationProfile& c) {
    return {{"panel_w", c.panel_w},
            {"panel_h", c.panel_h},
            {"pitch", c.pitch},
            {"slant", c.slant},
            {"center", c.center},
            {"subpixel_order", c.subpixel_order == SubpixelOrder::rgb ? "RGB" : "BGR"},
            {"invert", c.invert},
            {"total_views", c.total_views}};
}

namespace detail {
/// Vendor files wrap numbers as {"value": x}.
inline double calib_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("calibration: missing key '") + key + "'");
    const auto& v = j.at(key);
    if (v.is_object() && v.contains("value")) return v.at("value").get<double>();
    if (v.is_number() || v.is_boolean()) return v.get<double>();
    throw ConfigError(std::string("calibration: key '") + key + "' is not a number");
}
}  // namespace detail

/// Reads either the project's own keys (panel_w, panel_h, pitch, slant, center,
/// subpixel_order, invert, total_views) or a vendor visual.json (pitch in
/// lenses per inch, slope, center, invView, screenW, screenH, DPI). Vendor
/// pitch/slope describe a bottom-up texture space; they are converted to
/// lenticules per panel width and a top-down slant here.
inline CalibrationProfile calibration_from_json(const nlohmann::json& j, int default_views = 45) {
    CalibrationProfile c;
    if (j.contains("slope") || j.contains("DPI")) {
        const double w = detail::calib_number(j, "screenW"), h = detail::calib_number(j, "screenH");
        const double dpi = detail::calib_number(j, "DPI"), slope = detail::calib_number(j, "slope");
        if (slope == 0.0) throw ConfigError("calibration: slope must be non-zero");
        c.panel_w = static_cast<int>(w);
        c.panel_h = static_cast<int>(h);
        c.pitch = detail::calib_number(j, "pitch") * w / dpi * std::cos(std::atan(1.0 / slope));
        const double tilt = h / (w * slope);
        c.slant = -1.0 / slope;
        const double center = detail::calib_number(j, "center") - tilt * c.pitch;
        c.center = center - std::floor(center);
        c.invert = j.contains("invView") && detail::calib_number(j, "invView") != 0.0;
        c.subpixel_order = j.contains("flipSubp") && detail::calib_number(j, "flipSubp") != 0.0 ? SubpixelOrder::bgr
                                                                                                 : SubpixelOrder::rgb;
        c.total_views = j.contains("viewCount") ? int(detail::calib_number(j, "viewCount")) : default_views;
    } else {
        c.panel_w = int(detail::calib_number(j, "panel_w"));
        c.panel_h = int(detail::calib_number(j, "panel_h"));
        c.pitch = detail::calib_number(j, "pitch");
        c.slant = detail::calib_number(j, "slant");
        c.center = detail::calib_number(j, "center");
        if (j.contains("subpixel_order")) {
            const auto s = j.at("subpixel_order").get<std::string>();
            if (s == "RGB") c.subpixel_order = SubpixelOrder::rgb;
            else if (s == "BGR") c.subpixel_order = SubpixelOrder::bgr;
            else throw ConfigError("calibration: subpixel_order must be RGB or BGR");
        }
        if (j.contains("invert")) c.invert = j.at("invert").get<bool>();
        c.total_views = j.contains("total_views") ? int(detail::calib_number(j, "total_views")) : default_views;
    }
    validate(c);
    return c;
}

inline CalibrationProfile load_calibration(const std::string& path, int default_views = 45) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open calibration " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("calibration " + path + ": " + e.what());
    }
    return calibration_from_json(j, default_views);
}

}  // namespace lfr

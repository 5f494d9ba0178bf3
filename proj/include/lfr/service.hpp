#pragma once

// Interactive rendering over HTTP for a single viewer session.
//
//   GET  /api/scene             scene metadata (404 when no scene is loaded)
//   GET  /api/config            current display config and base pose
//   POST /api/config            partial config and/or pose; 422 with per-field errors
//   GET  /api/frame?view=&mode= one quilt view as PNG (mode sweep|baseline|split)
//   GET  /api/quilt             full quilt PNG
//   GET  /api/quilt/meta        quilt sidecar JSON
//   GET  /api/stats             timing, cache hit rate, plane memory
//   GET  /api/cache             current cache keys and which caches are populated
//
// Three caches: derived display geometry (keyed by the config), the plane
// stack (config + pose; interp excluded) and the finalized quilt (plane key +
// interp). Renders are serialized; config updates swap atomically.

#include "lfr/eval.hpp"
#include "lfr/image.hpp"
#include "lfr/pipeline.hpp"
#include "lfr/scene.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace lfr {

inline nlohmann::json to_json(const CameraPose& p) {
    nlohmann::json rot = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rot.push_back({p.rotation(r, 0), p.rotation(r, 1), p.rotation(r, 2)});
    return {{"position", {p.position.x(), p.position.y(), p.position.z()}}, {"rotation", rot}};
}

namespace detail {

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline std::string config_signature(const DisplayConfig& c, bool with_interp) {
    std::string s;
    for (double v : {c.d_focal, c.fov_x, c.fov_y, c.view_angle_x, c.view_angle_y, c.d_shift, c.plane_scale})
        s += exact(v) + ",";
    for (int v : {c.views_x, c.views_y, c.res_x, c.res_y, c.n_chunk}) s += std::to_string(v) + ",";
    s += to_string(c.plane_precision);
    if (with_interp) s += "," + to_string(c.interp);
    return s;
}

inline std::string pose_signature(const CameraPose& p) {
    std::string s;
    for (int i = 0; i < 3; ++i) s += exact(p.position[i]) + ",";
    for (int i = 0; i < 9; ++i) s += exact(p.rotation.data()[i]) + ",";
    return s;
}

inline Vec3 json_vec3(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(field + ": expected an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw ConfigError(field + ": expected an array of 3 numbers");
        v[i] = j[i].get<double>();
        if (!std::isfinite(v[i])) throw ConfigError(field + ": must be finite");
    }
    return v;
}

/// "field: message" -> field
inline std::string error_field(const std::string& msg, const std::string& fallback) {
    const auto colon = msg.find(':');
    if (colon == std::string::npos || msg.find(' ') < colon) return fallback;
    return msg.substr(0, colon);
}

}  // namespace detail

/// Applies a partial pose: position, then either a row-major 3x3 rotation
/// (columns right, down, forward) or a look-at target.
inline CameraPose merge_pose(CameraPose pose, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("pose: expected an object");
    for (const auto& [key, _] : j.items())
        if (key != "position" && key != "rotation" && key != "target" && key != "down")
            throw ConfigError("pose." + key + ": unknown pose field");
    if (j.contains("position")) pose.position = detail::json_vec3(j.at("position"), "pose.position");
    if (j.contains("rotation") && j.contains("target"))
        throw ConfigError("pose.rotation: give either rotation or target, not both");
    if (j.contains("rotation")) {
        const auto& r = j.at("rotation");
        if (!r.is_array() || r.size() != 3) throw ConfigError("pose.rotation: expected 3 rows of 3 numbers");
        Mat3 m;
        for (int row = 0; row < 3; ++row) m.row(row) = detail::json_vec3(r[row], "pose.rotation").transpose();
        CameraPose candidate{pose.position, m};
        if (!candidate.is_orthonormal()) throw ConfigError("pose.rotation: must be a proper rotation");
        pose.rotation = m;
    } else if (j.contains("target")) {
        const Vec3 target = detail::json_vec3(j.at("target"), "pose.target");
        const Vec3 down = j.contains("down") ? detail::json_vec3(j.at("down"), "pose.down") : Vec3::UnitY();
        if ((target - pose.position).norm() < 1e-12) throw ConfigError("pose.target: coincides with position");
        try {
            pose = CameraPose::look_at(pose.position, target, down);
        } catch (const GeometryError& e) {
            throw ConfigError(std::string("pose.target: ") + e.what());
        }
    }
    return pose;
}

class RenderService {
public:
    RenderService(std::optional<Scene> scene, DisplayConfig cfg, CameraPose pose = {}, RenderOptions opts = {})
        : scene_(std::move(scene)), opts_(opts) {
        validate(cfg);
        state_ = std::make_shared<const State>(State{cfg, pose});
    }

    struct State {
        DisplayConfig config;
        CameraPose pose;
    };

    std::shared_ptr<const State> state() const {
        std::lock_guard lock(state_mutex_);
        return state_;
    }

    struct Keys {
        std::string config, plane, quilt;
    };

    static Keys keys_for(const State& s) {
        const std::string cfg = detail::config_signature(s.config, false);
        Keys k;
        k.config = detail::fnv1a_hex(cfg);
        k.plane = detail::fnv1a_hex(cfg + "|" + detail::pose_signature(s.pose));
        k.quilt = detail::fnv1a_hex(cfg + "|" + detail::pose_signature(s.pose) + "|" + to_string(s.config.interp));
        return k;
    }

    /// Applies a POST /api/config body. Returns the errors (field, message);
    /// nothing is applied unless the whole update is valid.
    std::vector<std::pair<std::string, std::string>> apply_update(const nlohmann::json& body) {
        std::vector<std::pair<std::string, std::string>> errors;
        if (!body.is_object()) return {{"body", "expected a JSON object"}};
        const auto current = state();
        DisplayConfig cfg = current->config;
        CameraPose pose = current->pose;
        auto set_config = [&](const nlohmann::json& fields) {
            for (const auto& [key, value] : fields.items()) {
                try {
                    if (value.is_string()) set_field(cfg, key, value.get<std::string>());
                    else if (value.is_number()) set_field(cfg, key, nlohmann::json(value).dump());
                    else throw ConfigError(key + ": expected a number or string");
                } catch (const Error& e) {
                    errors.emplace_back(key, e.what());
                }
            }
        };
        for (const auto& [key, value] : body.items()) {
            if (key == "pose") {
                try {
                    pose = merge_pose(pose, value);
                } catch (const Error& e) {
                    errors.emplace_back(detail::error_field(e.what(), "pose"), e.what());
                }
            } else if (key == "config") {
                if (value.is_object()) set_config(value);
                else errors.emplace_back("config", "expected an object");
            } else {
                set_config(nlohmann::json{{key, value}});
            }
        }
        if (errors.empty()) {
            try {
                validate(cfg);
            } catch (const ConfigError& e) {
                errors.emplace_back(detail::error_field(e.what(), "config"), e.what());
            }
        }
        if (!errors.empty()) return errors;
        auto next = std::make_shared<const State>(State{cfg, pose});
        std::lock_guard lock(state_mutex_);
        state_ = std::move(next);
        return {};
    }

    struct Frame {
        Image8 image;
        bool cache_hit = false;
        std::optional<double> psnr;
    };

    /// Finalized quilt for the current state.
    Frame quilt() {
        const auto s = state();
        std::lock_guard lock(render_mutex_);
        const bool hit = ensure_quilt(*s);
        return {quilt_image_, hit, std::nullopt};
    }

    enum class Mode { sweep, baseline, split };

    /// One view (1-based linear index in quilt order).
    Frame frame(int view, Mode mode) {
        const auto s = state();
        const auto& c = s->config;
        if (view < 1 || view > c.view_count()) throw ArgumentError("view out of range");
        const int j = (view - 1) % c.views_x + 1, i = (view - 1) / c.views_x + 1;
        std::lock_guard lock(render_mutex_);
        Frame f;
        if (mode == Mode::sweep) {
            f.cache_hit = ensure_quilt(*s);
            f.image = quilt_tile(quilt_image_, c.views_x, c.views_y, j, i);
            return f;
        }
        bool base_hit = false;
        const Image8 base = baseline_view(*s, j, i, base_hit);
        if (mode == Mode::baseline) {
            f.image = base;
            f.cache_hit = base_hit;
            return f;
        }
        const bool quilt_hit = ensure_quilt(*s);
        const Image8 sweep = quilt_tile(quilt_image_, c.views_x, c.views_y, j, i);
        f.cache_hit = base_hit && quilt_hit;
        f.psnr = psnr(sweep, base);
        f.image = Image8(c.res_x * 2, c.res_y, 3);
        for (int y = 0; y < c.res_y; ++y) {
            std::copy_n(sweep.pixel(0, y), std::size_t(c.res_x) * 3, f.image.pixel(0, y));
            std::copy_n(base.pixel(0, y), std::size_t(c.res_x) * 3, f.image.pixel(c.res_x, y));
        }
        return f;
    }

    nlohmann::json stats() const {
        std::lock_guard lock(stats_mutex_);
        const std::size_t lookups = hits_ + misses_;
        return {{"last_render_ms", last_render_ms_ ? nlohmann::json(*last_render_ms_) : nlohmann::json(nullptr)},
                {"render_ms", render_ms_},
                {"renders", render_ms_.size()},
                {"cache_hits", hits_},
                {"cache_misses", misses_},
                {"cache_hit_rate", lookups ? double(hits_) / double(lookups) : 0.0},
                {"plane_memory_bytes", plane_memory_},
                {"frame_counter", frames_}};
    }

    nlohmann::json cache_info() {
        const auto s = state();
        const Keys k = keys_for(*s);
        std::lock_guard lock(render_mutex_);
        return {{"config_key", k.config},
                {"plane_key", k.plane},
                {"quilt_key", k.quilt},
                {"config_cache", cached_config_key_},
                {"plane_cache", cached_plane_key_},
                {"quilt_cache", cached_quilt_key_},
                {"config_cache_valid", !cached_config_key_.empty() && cached_config_key_ == k.config},
                {"plane_cache_valid", !cached_plane_key_.empty() && cached_plane_key_ == k.plane},
                {"quilt_cache_valid", !cached_quilt_key_.empty() && cached_quilt_key_ == k.quilt}};
    }

    bool has_scene() const { return scene_.has_value(); }
    const Scene& scene() const { return *scene_; }

    void register_routes(httplib::Server& srv) {
        srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Expose-Headers", "X-Cache, X-PSNR, X-View, X-Quilt-Key"}});
        srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        auto json_reply = [](httplib::Response& res, int status, const nlohmann::json& body) {
            res.status = status;
            res.set_content(body.dump(), "application/json");
        };
        auto need_scene = [this, json_reply](httplib::Response& res) {
            if (scene_) return true;
            json_reply(res, 404, {{"error", "no scene loaded"}});
            return false;
        };

        srv.Get("/api/scene", [this, need_scene](const httplib::Request&, httplib::Response& res) {
            if (!need_scene(res)) return;
            res.set_content(scene_metadata(*scene_).dump(), "application/json");
        });
        srv.Get("/api/config", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(config_reply().dump(), "application/json");
        });
        srv.Post("/api/config", [this, json_reply](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception& e) {
                json_reply(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}});
                return;
            }
            const auto errors = apply_update(body);
            if (!errors.empty()) {
                nlohmann::json list = nlohmann::json::array();
                for (const auto& [field, msg] : errors) list.push_back({{"field", field}, {"message", msg}});
                json_reply(res, 422, {{"errors", list}});
                return;
            }
            json_reply(res, 200, config_reply());
        });
        srv.Get("/api/frame", [this, need_scene, json_reply](const httplib::Request& req, httplib::Response& res) {
            if (!need_scene(res)) return;
            const auto s = state();
            int view = 0;
            const std::string v = req.has_param("view") ? req.get_param_value("view") : "center";
            if (v == "center") {
                const auto& c = s->config;
                view = ((c.views_y + 1) / 2 - 1) * c.views_x + (c.views_x + 1) / 2;
            } else {
                try {
                    std::size_t used = 0;
                    view = std::stoi(v, &used);
                    if (used != v.size()) view = 0;
                } catch (const std::exception&) {
                    view = 0;
                }
            }
            Mode mode = Mode::sweep;
            const std::string m = req.has_param("mode") ? req.get_param_value("mode") : "sweep";
            if (m == "baseline") mode = Mode::baseline;
            else if (m == "split") mode = Mode::split;
            else if (m != "sweep") return json_reply(res, 400, {{"error", "mode must be sweep, baseline or split"}});
            if (view < 1 || view > s->config.view_count())
                return json_reply(res, 400, {{"error", "view must be center or 1.." +
                                                           std::to_string(s->config.view_count())}});
            try {
                const Frame f = frame(view, mode);
                send_png(res, f);
                res.set_header("X-View", std::to_string(view));
            } catch (const Error& e) {
                json_reply(res, 500, {{"error", e.what()}});
            }
        });
        srv.Get("/api/quilt", [this, need_scene, json_reply](const httplib::Request&, httplib::Response& res) {
            if (!need_scene(res)) return;
            try {
                send_png(res, quilt());
                res.set_header("X-Quilt-Key", keys_for(*state()).quilt);
            } catch (const Error& e) {
                json_reply(res, 500, {{"error", e.what()}});
            }
        });
        srv.Get("/api/quilt/meta", [this](const httplib::Request&, httplib::Response& res) {
            const auto s = state();
            auto j = quilt_sidecar(s->config);
            j["filename"] = quilt_filename("quilt", s->config);
            res.set_content(j.dump(), "application/json");
        });
        srv.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(stats().dump(), "application/json");
        });
        srv.Get("/api/cache", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(cache_info().dump(), "application/json");
        });
    }

private:
    nlohmann::json config_reply() const {
        const auto s = state();
        const Keys k = keys_for(*s);
        return {{"config", to_json(s->config)},
                {"pose", to_json(s->pose)},
                {"keys", {{"config", k.config}, {"plane", k.plane}, {"quilt", k.quilt}}}};
    }

    void send_png(httplib::Response& res, const Frame& f) {
        const auto png = encode_png(f.image);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
        res.set_header("X-Cache", f.cache_hit ? "HIT" : "MISS");
        if (f.psnr) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", *f.psnr);
            res.set_header("X-PSNR", buf);
        }
        std::lock_guard lock(stats_mutex_);
        ++frames_;
    }

    void record(bool hit, std::optional<double> ms = std::nullopt) {
        std::lock_guard lock(stats_mutex_);
        (hit ? hits_ : misses_)++;
        if (ms) {
            last_render_ms_ = *ms;
            render_ms_.push_back(*ms);
            if (render_ms_.size() > 64) render_ms_.erase(render_ms_.begin());
        }
        plane_memory_ = sweep_ ? sweep_->planes.memory_bytes() : 0;
    }

    // Caller holds render_mutex_. Returns true on a quilt cache hit.
    bool ensure_quilt(const State& s) {
        if (!scene_) throw ArgumentError("no scene loaded");
        const Keys k = keys_for(s);
        if (cached_quilt_key_ == k.quilt) {
            record(true);
            return true;
        }
        const auto t0 = std::chrono::steady_clock::now();
        if (cached_config_key_ != k.config) {
            // config-only derived state: validation and reference geometry
            validate(s.config);
            (void)forward_distance(s.config);
            (void)plane_pixel_grid(s.config);
            cached_config_key_ = k.config;
        }
        if (cached_plane_key_ != k.plane) {
            sweep_.reset();
            sweep_ = std::make_unique<PlaneSweep>(build_planes(*scene_, s.config, s.pose, opts_));
            cached_plane_key_ = k.plane;
        }
        const Quilt q = swizzle_blend(sweep_->planes, s.config, sweep_->ref, opts_.swizzle);
        quilt_image_ = finalize_quilt(q, opts_.background);
        cached_quilt_key_ = k.quilt;
        record(false, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        return false;
    }

    Image8 baseline_view(const State& s, int j, int i, bool& hit) {
        if (!scene_) throw ArgumentError("no scene loaded");
        const std::string key = keys_for(s).plane + "#" + std::to_string(j) + "," + std::to_string(i);
        if (auto it = baseline_cache_.find(key); it != baseline_cache_.end()) {
            hit = true;
            record(true);
            return it->second;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Image8 img = finalize_view(render_view_baseline(*scene_, s.config, s.pose, j, i), opts_.background);
        if (baseline_cache_.size() >= 256) baseline_cache_.clear();
        baseline_cache_.emplace(key, img);
        hit = false;
        record(false, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        return img;
    }

    std::optional<Scene> scene_;
    RenderOptions opts_;

    mutable std::mutex state_mutex_;
    std::shared_ptr<const State> state_;

    std::mutex render_mutex_;
    std::string cached_config_key_, cached_plane_key_, cached_quilt_key_;
    std::unique_ptr<PlaneSweep> sweep_;
    Image8 quilt_image_;
    std::map<std::string, Image8> baseline_cache_;

    mutable std::mutex stats_mutex_;
    std::size_t hits_ = 0, misses_ = 0, frames_ = 0, plane_memory_ = 0;
    std::optional<double> last_render_ms_;
    std::vector<double> render_ms_;
};

}  // namespace lfr

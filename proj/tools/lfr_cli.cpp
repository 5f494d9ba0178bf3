// lfr: command-line driver for quilt rendering, comparison, ablation,
// interlacing, benchmarking and the HTTP service.

#include "lfr/lfr.hpp"
#include "lfr/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace lfr;

namespace {

struct Common {
    std::string scene = "synthetic:depth-ramp";
    std::string display_config;
    std::optional<int> n_chunk;
    std::optional<double> plane_scale;
    std::optional<std::string> interp;
    std::optional<std::string> precision;
    std::optional<int> views_x, views_y, res;
    std::optional<double> d_shift;
    std::string out;
    std::uint64_t seed = 0;
    std::vector<double> position{0, 0, 0};
    std::vector<double> target;
    bool no_adaptive = false;
};

void add_scene_flags(CLI::App* app, Common& c) {
    app->add_option("--scene", c.scene, "Scene: synthetic:<grid|shell|depth-ramp|single>, .ply or .lfvx")
        ->capture_default_str();
    app->add_option("--seed", c.seed, "Seed for synthetic scenes")->capture_default_str();
    app->add_option("--camera-position", c.position, "Base camera position x y z")->expected(3);
    app->add_option("--camera-target", c.target, "Base camera look-at target x y z")->expected(3);
}

void add_display_flags(CLI::App* app, Common& c) {
    app->add_option("--display-config", c.display_config, "Display config file (key = value lines)");
    app->add_option("--n-chunk", c.n_chunk, "Number of depth chunks / planes");
    app->add_option("--plane-scale", c.plane_scale, "Plane resolution scale P_s");
    app->add_option("--interp", c.interp, "Plane sampling: nearest|bilinear");
    app->add_option("--precision", c.precision, "Plane storage: u8|f32");
    app->add_option("--views-x", c.views_x, "Horizontal view count");
    app->add_option("--views-y", c.views_y, "Vertical view count");
    app->add_option("--res", c.res, "Per-view resolution (square)");
    app->add_option("--d-shift", c.d_shift, "Backward shift of the reference camera");
}

DisplayConfig display_from(const Common& c) {
    DisplayConfig cfg = c.display_config.empty() ? DisplayConfig{} : load_display_config(c.display_config);
    if (c.n_chunk) cfg.n_chunk = *c.n_chunk;
    if (c.plane_scale) cfg.plane_scale = *c.plane_scale;
    if (c.interp) cfg.interp = parse_interp(*c.interp);
    if (c.precision) cfg.plane_precision = parse_precision(*c.precision);
    if (c.views_x) cfg.views_x = *c.views_x;
    if (c.views_y) cfg.views_y = *c.views_y;
    if (c.res) cfg.res_x = cfg.res_y = *c.res;
    if (c.d_shift) cfg.d_shift = *c.d_shift;
    validate(cfg);
    return cfg;
}

CameraPose pose_from(const Common& c) {
    CameraPose pose;
    pose.position = Vec3(c.position[0], c.position[1], c.position[2]);
    if (!c.target.empty()) pose = CameraPose::look_at(pose.position, Vec3(c.target[0], c.target[1], c.target[2]));
    return pose;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& s) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << s;
}

/// "--out" naming: a .png path is used as is; anything else is a stem that
/// receives the quilt naming pattern.
std::string quilt_output_path(const std::string& out, const DisplayConfig& cfg) {
    if (out.size() > 4 && out.substr(out.size() - 4) == ".png") return out;
    return quilt_filename(out.empty() ? "quilt" : out, cfg);
}

void save_quilt(const Quilt& q, const std::string& out, const nlohmann::json& extra) {
    const std::string path = quilt_output_path(out, q.config);
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_png(path, finalize_quilt(q));
    auto side = quilt_sidecar(q.config);
    side.update(extra);
    write_json(fs::path(path).replace_extension(".json").string(), side);
    std::cout << path << '\n';
}

template <class T>
std::vector<T> parse_list(const std::string& s, T (*conv)(const std::string&)) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(conv(item));
    if (out.empty()) throw ArgumentError("empty list '" + s + "'");
    return out;
}

int to_int(const std::string& s) { return std::stoi(s); }
double to_double(const std::string& s) { return std::stod(s); }
std::string to_str(const std::string& s) { return s; }

QuiltLayout layout_for(const std::string& path, std::optional<int> vx, std::optional<int> vy) {
    QuiltLayout l;
    if (auto parsed = parse_quilt_filename(fs::path(path).filename().string())) l = *parsed;
    if (vx) l.views_x = *vx;
    if (vy) l.views_y = *vy;
    else if (vx && l.views_y < 1) l.views_y = 1;  // a bare --views-x means a single row
    if (l.views_x < 1 || l.views_y < 1)
        throw ArgumentError("cannot infer the view grid of " + path + "; pass --views-x/--views-y");
    return l;
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Light-field quilt renderer"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = LFR_THREADS or hardware)");

    Common rq;
    auto* render_quilt = app.add_subcommand("render-quilt", "Render a quilt with the plane-sweep pipeline");
    add_scene_flags(render_quilt, rq);
    add_display_flags(render_quilt, rq);
    render_quilt->add_option("--out", rq.out, "Output .png path or stem");
    std::string dump_planes;
    render_quilt->add_option("--dump-planes", dump_planes, "Directory for per-plane PNGs and metadata");
    render_quilt->add_flag("--no-adaptive-filter", rq.no_adaptive, "Use the fixed 0.3 filter on the planes");

    Common rb;
    auto* render_baseline = app.add_subcommand("render-baseline", "Render every quilt view independently");
    add_scene_flags(render_baseline, rb);
    add_display_flags(render_baseline, rb);
    render_baseline->add_option("--out", rb.out, "Output .png path or stem");

    std::string cmp_a, cmp_b, cmp_out;
    std::optional<int> cmp_vx, cmp_vy;
    auto* compare = app.add_subcommand("compare", "Per-view PSNR/SSIM between two quilt PNGs");
    compare->add_option("a", cmp_a, "First quilt PNG")->required();
    compare->add_option("b", cmp_b, "Second quilt PNG (reference)")->required();
    compare->add_option("--views-x", cmp_vx, "Override view grid columns");
    compare->add_option("--views-y", cmp_vy, "Override view grid rows");
    compare->add_option("--out", cmp_out, "Write JSON report here (default stdout)");

    Common ab;
    std::string sweep_chunks, sweep_scales, sweep_interp, sweep_precision, sweep_adaptive = "1";
    int ab_repeats = 1;
    auto* ablate = app.add_subcommand("ablate", "Sweep pipeline knobs against the per-view baseline");
    add_scene_flags(ablate, ab);
    add_display_flags(ablate, ab);
    ablate->add_option("--sweep-n-chunk", sweep_chunks, "Comma list of n_chunk values");
    ablate->add_option("--sweep-plane-scale", sweep_scales, "Comma list of plane scales");
    ablate->add_option("--sweep-interp", sweep_interp, "Comma list: nearest,bilinear");
    ablate->add_option("--sweep-precision", sweep_precision, "Comma list: u8,f32");
    ablate->add_option("--sweep-adaptive", sweep_adaptive, "Comma list of 1/0 (adaptive filter on/off)")
        ->capture_default_str();
    ablate->add_option("--repeats", ab_repeats, "Timed repeats per row")->capture_default_str();
    ablate->add_option("--out", ab.out, "Output stem (writes <stem>.csv and <stem>.json)")->required();

    std::string il_quilt, il_cal, il_out;
    std::optional<int> il_vx, il_vy;
    double il_misalign = 0.0;
    std::string il_view_map;
    auto* interlace_cmd = app.add_subcommand("interlace", "Interlace a quilt PNG for a lenticular panel");
    interlace_cmd->add_option("quilt", il_quilt, "Quilt PNG")->required();
    interlace_cmd->add_option("--calibration", il_cal, "Calibration JSON (own keys or vendor visual.json)")
        ->required();
    interlace_cmd->add_option("--views-x", il_vx, "Override view grid columns");
    interlace_cmd->add_option("--views-y", il_vy, "Override view grid rows");
    interlace_cmd->add_option("--misalign-deg", il_misalign, "Extra lens rotation in degrees");
    interlace_cmd->add_option("--view-map", il_view_map, "Also write the green-channel view-index map PNG");
    interlace_cmd->add_option("--out", il_out, "Output panel PNG")->required();

    Common bn;
    std::string bench_views = "9,25,45", bench_out;
    int bench_repeats = 3, bench_warmup = 1;
    auto* bench = app.add_subcommand("bench", "Time baseline vs plane-sweep across view counts");
    add_scene_flags(bench, bn);
    add_display_flags(bench, bn);
    bench->add_option("--views", bench_views, "Comma list of horizontal view counts")->capture_default_str();
    bench->add_option("--repeats", bench_repeats, "Timed repeats")->capture_default_str();
    bench->add_option("--warmup", bench_warmup, "Untimed warm-up runs (>= 1)")->capture_default_str();
    bench->add_option("--out", bench_out, "Write JSON report here (default stdout)");

    Common sv;
    int port = 8080;
    std::string host = "127.0.0.1";
    bool no_scene = false;
    auto* serve = app.add_subcommand("serve", "Run the HTTP rendering service");
    add_scene_flags(serve, sv);
    add_display_flags(serve, sv);
    serve->add_option("--port", port, "Port (0 = any free port)")->capture_default_str();
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_flag("--no-scene", no_scene, "Start without a scene");

    CLI11_PARSE(app, argc, argv);

    try {
        if (threads > 0) set_thread_count(threads);

        if (*render_quilt) {
            const DisplayConfig cfg = display_from(rq);
            RenderOptions opts;
            opts.raster.adaptive_filter = !rq.no_adaptive;
            const Scene scene = load_scene(rq.scene, rq.seed);
            const PlaneSweep s = build_planes(scene, cfg, pose_from(rq), opts);
            if (!dump_planes.empty()) lfr::dump_planes(s.planes, dump_planes);
            const Quilt q = swizzle_blend(s.planes, cfg, s.ref, opts.swizzle);
            save_quilt(q, rq.out,
                       {{"renderer", "plane-sweep"},
                        {"scene", rq.scene},
                        {"chunks", to_json(s.partition)["counts"]},
                        {"plane_memory_bytes", s.planes.memory_bytes()}});
        } else if (*render_baseline) {
            const DisplayConfig cfg = display_from(rb);
            const Scene scene = load_scene(rb.scene, rb.seed);
            save_quilt(render_quilt_baseline(scene, cfg, pose_from(rb)), rb.out,
                       {{"renderer", "baseline"}, {"scene", rb.scene}});
        } else if (*compare) {
            const Image8 a = read_png(cmp_a), b = read_png(cmp_b);
            const QuiltLayout l = layout_for(cmp_a, cmp_vx, cmp_vy);
            const auto report = to_json(compare_quilt_images(to_rgb8(to_float(a)), to_rgb8(to_float(b)), l.views_x,
                                                             l.views_y));
            if (cmp_out.empty()) std::cout << report.dump(2) << '\n';
            else write_json(cmp_out, report);
        } else if (*ablate) {
            const DisplayConfig base_cfg = display_from(ab);
            const auto chunks = sweep_chunks.empty() ? std::vector<int>{base_cfg.n_chunk}
                                                     : parse_list<int>(sweep_chunks, to_int);
            const auto scales = sweep_scales.empty() ? std::vector<double>{base_cfg.plane_scale}
                                                     : parse_list<double>(sweep_scales, to_double);
            const auto interps = sweep_interp.empty() ? std::vector<std::string>{to_string(base_cfg.interp)}
                                                      : parse_list<std::string>(sweep_interp, to_str);
            const auto precs = sweep_precision.empty()
                                   ? std::vector<std::string>{to_string(base_cfg.plane_precision)}
                                   : parse_list<std::string>(sweep_precision, to_str);
            const auto adapt = parse_list<int>(sweep_adaptive, to_int);
            std::vector<AblationConfig> grid;
            for (int nc : chunks)
                for (double ps : scales)
                    for (const auto& in : interps)
                        for (const auto& pr : precs)
                            for (int ad : adapt) {
                                AblationConfig a{base_cfg, ad != 0};
                                a.display.n_chunk = nc;
                                a.display.plane_scale = ps;
                                a.display.interp = parse_interp(in);
                                a.display.plane_precision = parse_precision(pr);
                                grid.push_back(a);
                            }
            const Scene scene = load_scene(ab.scene, ab.seed);
            AblationOptions opts;
            opts.timing_repeats = ab_repeats;
            const auto report = run_ablation(scene, pose_from(ab), grid, opts);
            write_text(ab.out + ".csv", report.to_csv());
            auto j = report.to_json();
            j["scene"] = ab.scene;
            j["display_config"] = to_json(base_cfg);
            write_json(ab.out + ".json", j);
            std::cout << report.to_csv();
            for (const auto& r : report.rows)
                if (!r.ok) return 2;
        } else if (*interlace_cmd) {
            const Image8 quilt = read_png(il_quilt);
            const QuiltLayout l = layout_for(il_quilt, il_vx, il_vy);
            if (quilt.width % l.views_x || quilt.height % l.views_y)
                throw ConfigError("quilt size is not divisible by the view grid");
            const Image8 rgb = to_rgb8(to_float(quilt));
            std::vector<Image8> views;
            for (int i = 1; i <= l.views_y; ++i)
                for (int j = 1; j <= l.views_x; ++j) views.push_back(quilt_tile(rgb, l.views_x, l.views_y, j, i));
            CalibrationProfile cal = simulate_misalignment(load_calibration(il_cal, l.views_x * l.views_y), il_misalign);
            write_png(il_out, interlace(views, cal));
            if (!il_view_map.empty()) {
                Image8 map(cal.panel_w, cal.panel_h, 1);
                for (int y = 0; y < cal.panel_h; ++y)
                    for (int x = 0; x < cal.panel_w; ++x)
                        map.pixel(x, y)[0] = std::uint8_t(subpixel_view_index(cal, x, y, 1) * 255 /
                                                          std::max(1, cal.total_views - 1));
                write_png(il_view_map, map);
            }
            std::cout << il_out << '\n';
        } else if (*bench) {
            DisplayConfig cfg = display_from(bn);
            const Scene scene = load_scene(bn.scene, bn.seed);
            nlohmann::json rows = nlohmann::json::array();
            std::vector<double> vs, base_ms;
            for (int v : parse_list<int>(bench_views, to_int)) {
                cfg.views_x = v;
                cfg.views_y = 1;
                const auto row = benchmark(scene, cfg, pose_from(bn), bench_repeats, bench_warmup);
                rows.push_back(to_json(row));
                vs.push_back(v);
                base_ms.push_back(row.baseline_ms);
                std::cerr << "V=" << v << " baseline " << row.baseline_ms << " ms, quilt " << row.quilt_ms
                          << " ms, speedup " << row.speedup << "x\n";
            }
            nlohmann::json report = {{"scene", bn.scene}, {"threads", thread_count()}, {"rows", rows}};
            if (vs.size() >= 3) report["baseline_linear_r2"] = std::get<2>(linear_fit(vs, base_ms));
            if (bench_out.empty()) std::cout << report.dump(2) << '\n';
            else write_json(bench_out, report);
        } else if (*serve) {
            const DisplayConfig cfg = display_from(sv);
            std::optional<Scene> scene;
            if (!no_scene) scene = load_scene(sv.scene, sv.seed);
            RenderService service(std::move(scene), cfg, pose_from(sv));
            httplib::Server server;
            service.register_routes(server);
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
            if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            server.listen_after_bind();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

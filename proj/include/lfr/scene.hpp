#pragma once

#include "lfr/camera.hpp"
#include "lfr/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace lfr {

static_assert(std::endian::native == std::endian::little, "scene files are read as little-endian");

using Float3 = std::array<float, 3>;
using Float4 = std::array<float, 4>;

/// 3D Gaussian splats in the raw (pre-activation) form they are stored in:
/// log scales, opacity logits, quaternions (w, x, y, z) and SH coefficients.
struct GaussianScene {
    int sh_degree = 0;
    std::vector<Float3> position;
    std::vector<Float3> log_scale;
    std::vector<Float4> rotation;
    std::vector<float> opacity_logit;
    /// count x K x 3, K = (degree + 1)^2, coefficient-major per Gaussian.
    std::vector<float> sh;

    std::size_t size() const { return position.size(); }
    int coeff_count() const { return (sh_degree + 1) * (sh_degree + 1); }

    float sh_at(std::size_t i, int k, int channel) const {
        return sh[(i * coeff_count() + k) * 3 + channel];
    }

    void push_back(const Float3& pos, const Float3& lscale, const Float4& rot, float logit,
                   std::span<const float> coeffs) {
        if (coeffs.size() != std::size_t(coeff_count()) * 3) throw ArgumentError("SH coefficient count mismatch");
        position.push_back(pos);
        log_scale.push_back(lscale);
        rotation.push_back(rot);
        opacity_logit.push_back(logit);
        sh.insert(sh.end(), coeffs.begin(), coeffs.end());
    }

    friend bool operator==(const GaussianScene&, const GaussianScene&) = default;
};

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }
inline float logit(float p) { return std::log(p / (1.0f - p)); }

struct Voxel {
    std::array<int, 3> index{};
    float density = 0.0f;
    Float3 rgb{};

    friend bool operator==(const Voxel&, const Voxel&) = default;
};

/// Sparse voxels with constant density and colour per cell.
struct VoxelScene {
    Float3 grid_origin{};
    float voxel_size = 1.0f;
    std::vector<Voxel> occupied;

    std::size_t size() const { return occupied.size(); }

    Vec3 voxel_min(const Voxel& v) const {
        return {grid_origin[0] + v.index[0] * double(voxel_size), grid_origin[1] + v.index[1] * double(voxel_size),
                grid_origin[2] + v.index[2] * double(voxel_size)};
    }
    Vec3 voxel_center(const Voxel& v) const { return voxel_min(v) + Vec3::Constant(0.5 * voxel_size); }

    friend bool operator==(const VoxelScene&, const VoxelScene&) = default;
};

using Scene = std::variant<GaussianScene, VoxelScene>;

inline std::size_t scene_size(const Scene& s) {
    return std::visit([](const auto& v) { return v.size(); }, s);
}

// ---------------------------------------------------------------------------
// Spherical harmonics (real basis, 3DGS sign conventions).

namespace sh {
inline constexpr double c0 = 0.28209479177387814;
inline constexpr double c1 = 0.4886025119029199;
inline constexpr std::array<double, 5> c2{1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                          -1.0925484305920792, 0.5462742152960396};
inline constexpr std::array<double, 7> c3{-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                          -0.5900435899266435};

/// Basis values for degree <= 3 in 3DGS order; `out` receives (degree+1)^2 entries.
inline void basis(int degree, const Vec3& d, std::span<double> out) {
    const double x = d.x(), y = d.y(), z = d.z();
    out[0] = c0;
    if (degree < 1) return;
    out[1] = -c1 * y;
    out[2] = c1 * z;
    out[3] = -c1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z, xy = x * y, yz = y * z, xz = x * z;
    out[4] = c2[0] * xy;
    out[5] = c2[1] * yz;
    out[6] = c2[2] * (2.0 * zz - xx - yy);
    out[7] = c2[3] * xz;
    out[8] = c2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = c3[0] * y * (3.0 * xx - yy);
    out[10] = c3[1] * xy * z;
    out[11] = c3[2] * y * (4.0 * zz - xx - yy);
    out[12] = c3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = c3[4] * x * (4.0 * zz - xx - yy);
    out[14] = c3[5] * z * (xx - yy);
    out[15] = c3[6] * x * (xx - 3.0 * yy);
}
}  // namespace sh

/// View-dependent colour of Gaussian `index` seen along unit `direction`
/// (from the camera towards the Gaussian), with the +0.5 offset and clamped at 0.
inline Float3 eval_sh(const GaussianScene& scene, std::size_t index, const Vec3& direction) {
    std::array<double, 16> basis{};
    sh::basis(scene.sh_degree, direction, basis);
    Float3 rgb{};
    const int k_count = scene.coeff_count();
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < k_count; ++k) acc += basis[k] * scene.sh_at(index, k, c);
        rgb[c] = static_cast<float>(std::max(0.0, acc + 0.5));
    }
    return rgb;
}

// ---------------------------------------------------------------------------
// PLY (binary little-endian, INRIA 3DGS property naming).

namespace detail {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

inline PlyType ply_type(const std::string& name) {
    static const std::map<std::string, PlyType> types{
        {"char", PlyType::i8},    {"int8", PlyType::i8},     {"uchar", PlyType::u8},   {"uint8", PlyType::u8},
        {"short", PlyType::i16},  {"int16", PlyType::i16},   {"ushort", PlyType::u16}, {"uint16", PlyType::u16},
        {"int", PlyType::i32},    {"int32", PlyType::i32},   {"uint", PlyType::u32},   {"uint32", PlyType::u32},
        {"float", PlyType::f32},  {"float32", PlyType::f32}, {"double", PlyType::f64}, {"float64", PlyType::f64}};
    auto it = types.find(name);
    if (it == types.end()) throw FormatError("ply: unknown property type '" + name + "'");
    return it->second;
}

inline std::size_t ply_size(PlyType t) {
    switch (t) {
        case PlyType::i8:
        case PlyType::u8: return 1;
        case PlyType::i16:
        case PlyType::u16: return 2;
        case PlyType::i32:
        case PlyType::u32:
        case PlyType::f32: return 4;
        case PlyType::f64: return 8;
    }
    return 0;
}

template <typename T>
T load_le(const std::uint8_t* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

inline float ply_read(PlyType t, const std::uint8_t* p) {
    switch (t) {
        case PlyType::i8: return float(load_le<std::int8_t>(p));
        case PlyType::u8: return float(load_le<std::uint8_t>(p));
        case PlyType::i16: return float(load_le<std::int16_t>(p));
        case PlyType::u16: return float(load_le<std::uint16_t>(p));
        case PlyType::i32: return float(load_le<std::int32_t>(p));
        case PlyType::u32: return float(load_le<std::uint32_t>(p));
        case PlyType::f32: return load_le<float>(p);
        case PlyType::f64: return float(load_le<double>(p));
    }
    return 0.0f;
}

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<std::pair<std::string, PlyType>> properties;
    std::size_t stride() const {
        std::size_t s = 0;
        for (const auto& p : properties) s += ply_size(p.second);
        return s;
    }
};

inline int sh_degree_from_rest(std::size_t rest) {
    for (int degree = 0; degree <= 3; ++degree)
        if (rest == std::size_t(3 * ((degree + 1) * (degree + 1) - 1))) return degree;
    throw FormatError("ply: " + std::to_string(rest) + " f_rest_* properties do not match SH degree 0..3");
}

}  // namespace detail

inline GaussianScene parse_gaussian_ply(std::span<const std::uint8_t> bytes) {
    using namespace detail;
    // Header.
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        if (pos >= bytes.size()) throw FormatError("ply: header is not terminated by end_header");
        std::string line(reinterpret_cast<const char*>(bytes.data() + start), pos - start);
        ++pos;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line() != "ply") throw FormatError("ply: missing 'ply' magic");
    std::vector<PlyElement> elements;
    bool have_format = false;
    for (;;) {
        const std::string line = next_line();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "comment" || word == "obj_info" || word.empty()) continue;
        if (word == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt != "binary_little_endian")
                throw FormatError("ply: only binary_little_endian is supported, got '" + fmt + "'");
            have_format = true;
        } else if (word == "element") {
            PlyElement e;
            long long count = -1;
            ls >> e.name >> count;
            if (!ls || count < 0) throw FormatError("ply: malformed element line '" + line + "'");
            e.count = static_cast<std::size_t>(count);
            elements.push_back(std::move(e));
        } else if (word == "property") {
            if (elements.empty()) throw FormatError("ply: property before any element");
            std::string type, name;
            ls >> type;
            if (type == "list") throw FormatError("ply: list properties are not supported");
            ls >> name;
            if (!ls) throw FormatError("ply: malformed property line '" + line + "'");
            elements.back().properties.emplace_back(name, ply_type(type));
        } else {
            throw FormatError("ply: unexpected header line '" + line + "'");
        }
    }
    if (!have_format) throw FormatError("ply: missing format line");

    // Locate the vertex element.
    std::size_t data_offset = pos;
    const PlyElement* vertex = nullptr;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
        data_offset += e.count * e.stride();
    }
    if (!vertex) throw FormatError("ply: no vertex element");

    std::map<std::string, std::pair<std::size_t, PlyType>> props;
    std::size_t offset = 0;
    for (const auto& [name, type] : vertex->properties) {
        props[name] = {offset, type};
        offset += ply_size(type);
    }
    auto require = [&](const std::string& name) {
        auto it = props.find(name);
        if (it == props.end()) throw FormatError("ply: missing required property '" + name + "'");
        return it->second;
    };
    std::size_t rest = 0;
    while (props.count("f_rest_" + std::to_string(rest))) ++rest;
    for (const auto& [name, _] : props)
        if (name.rfind("f_rest_", 0) == 0 && std::stoul(name.substr(7)) >= rest)
            throw FormatError("ply: f_rest_* properties are not contiguous");

    GaussianScene scene;
    scene.sh_degree = sh_degree_from_rest(rest);
    const int k_count = scene.coeff_count();

    const auto px = require("x"), py = require("y"), pz = require("z");
    const std::array dc{require("f_dc_0"), require("f_dc_1"), require("f_dc_2")};
    const auto op = require("opacity");
    const std::array sc{require("scale_0"), require("scale_1"), require("scale_2")};
    const std::array rt{require("rot_0"), require("rot_1"), require("rot_2"), require("rot_3")};
    std::vector<std::pair<std::size_t, PlyType>> rest_props;
    for (std::size_t r = 0; r < rest; ++r) rest_props.push_back(require("f_rest_" + std::to_string(r)));

    const std::size_t stride = vertex->stride();
    if (data_offset + vertex->count * stride > bytes.size())
        throw IoError("ply: file truncated (" + std::to_string(bytes.size()) + " bytes, need " +
                      std::to_string(data_offset + vertex->count * stride) + ")");

    scene.position.reserve(vertex->count);
    std::vector<float> coeffs(std::size_t(k_count) * 3);
    for (std::size_t i = 0; i < vertex->count; ++i) {
        const std::uint8_t* rec = bytes.data() + data_offset + i * stride;
        auto get = [&](const std::pair<std::size_t, PlyType>& p) { return ply_read(p.second, rec + p.first); };
        Float4 q{get(rt[0]), get(rt[1]), get(rt[2]), get(rt[3])};
        const double n2 = double(q[0]) * q[0] + double(q[1]) * q[1] + double(q[2]) * q[2] + double(q[3]) * q[3];
        if (n2 == 0.0) {
            q = {1.0f, 0.0f, 0.0f, 0.0f};
        } else if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) {
            const double inv = 1.0 / std::sqrt(n2);
            for (float& c : q) c = static_cast<float>(c * inv);
        }
        for (int c = 0; c < 3; ++c) {
            coeffs[c] = get(dc[c]);
            for (int k = 1; k < k_count; ++k) coeffs[k * 3 + c] = get(rest_props[c * (k_count - 1) + (k - 1)]);
        }
        scene.push_back({get(px), get(py), get(pz)}, {get(sc[0]), get(sc[1]), get(sc[2])}, q, get(op), coeffs);
    }
    return scene;
}

inline GaussianScene load_gaussian_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_gaussian_ply(bytes);
}

/// Serializes in the INRIA layout (x y z nx ny nz f_dc f_rest opacity scale rot).
inline std::vector<std::uint8_t> serialize_gaussian_ply(const GaussianScene& scene) {
    const int k_count = scene.coeff_count();
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << "\n";
    std::vector<std::string> names{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (int r = 0; r < 3 * (k_count - 1); ++r) names.push_back("f_rest_" + std::to_string(r));
    for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"})
        names.emplace_back(n);
    for (const auto& n : names) header << "property float " << n << "\n";
    header << "end_header\n";
    const std::string h = header.str();
    std::vector<std::uint8_t> out(h.begin(), h.end());
    std::vector<float> rec;
    rec.reserve(names.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        rec.clear();
        rec.insert(rec.end(), scene.position[i].begin(), scene.position[i].end());
        rec.insert(rec.end(), {0.0f, 0.0f, 0.0f});
        for (int c = 0; c < 3; ++c) rec.push_back(scene.sh_at(i, 0, c));
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < k_count; ++k) rec.push_back(scene.sh_at(i, k, c));
        rec.push_back(scene.opacity_logit[i]);
        rec.insert(rec.end(), scene.log_scale[i].begin(), scene.log_scale[i].end());
        rec.insert(rec.end(), scene.rotation[i].begin(), scene.rotation[i].end());
        const auto* p = reinterpret_cast<const std::uint8_t*>(rec.data());
        out.insert(out.end(), p, p + rec.size() * sizeof(float));
    }
    return out;
}

inline void save_gaussian_ply(const std::string& path, const GaussianScene& scene) {
    const auto bytes = serialize_gaussian_ply(scene);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

// ---------------------------------------------------------------------------
// Voxel file: "LFVX", u32 version (1), f32 origin[3], f32 voxel_size,
// u64 count, then count records of {i32 index[3], f32 density, f32 rgb[3]}.

inline constexpr std::uint32_t voxel_format_version = 1;

inline std::vector<std::uint8_t> serialize_voxels(const VoxelScene& scene) {
    std::vector<std::uint8_t> out;
    auto put = [&](const auto& v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        out.insert(out.end(), p, p + sizeof(v));
    };
    out.insert(out.end(), {'L', 'F', 'V', 'X'});
    put(voxel_format_version);
    for (float f : scene.grid_origin) put(f);
    put(scene.voxel_size);
    put(std::uint64_t(scene.occupied.size()));
    for (const auto& v : scene.occupied) {
        for (std::int32_t i : v.index) put(i);
        put(v.density);
        for (float c : v.rgb) put(c);
    }
    return out;
}

inline VoxelScene parse_voxels(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t header = 4 + 4 + 12 + 4 + 8;
    constexpr std::size_t record = 12 + 4 + 12;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "LFVX", 4) != 0) throw FormatError("voxel file: bad magic");
    if (bytes.size() < header) throw IoError("voxel file: truncated header");
    const auto version = detail::load_le<std::uint32_t>(bytes.data() + 4);
    if (version != voxel_format_version)
        throw FormatError("voxel file: unsupported version " + std::to_string(version));
    VoxelScene scene;
    for (int i = 0; i < 3; ++i) scene.grid_origin[i] = detail::load_le<float>(bytes.data() + 8 + 4 * i);
    scene.voxel_size = detail::load_le<float>(bytes.data() + 20);
    const auto count = detail::load_le<std::uint64_t>(bytes.data() + 24);
    if (!(scene.voxel_size > 0)) throw FormatError("voxel file: voxel_size must be positive");
    if (count > (bytes.size() - header) / record || header + count * record > bytes.size())
        throw IoError("voxel file: truncated records");
    std::set<std::array<int, 3>> seen;
    scene.occupied.resize(count);
    for (std::uint64_t n = 0; n < count; ++n) {
        const std::uint8_t* p = bytes.data() + header + n * record;
        Voxel& v = scene.occupied[n];
        for (int i = 0; i < 3; ++i) v.index[i] = detail::load_le<std::int32_t>(p + 4 * i);
        v.density = detail::load_le<float>(p + 12);
        for (int i = 0; i < 3; ++i) v.rgb[i] = detail::load_le<float>(p + 16 + 4 * i);
        if (!std::isfinite(v.density) || v.density < 0) throw FormatError("voxel file: invalid density");
        if (!seen.insert(v.index).second) throw FormatError("voxel file: duplicate voxel index");
    }
    return scene;
}

inline void save_voxels(const std::string& path, const VoxelScene& scene) {
    const auto bytes = serialize_voxels(scene);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline VoxelScene load_voxels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_voxels(bytes);
}

// ---------------------------------------------------------------------------
// Synthetic scenes. All are built for the default display: base camera at the
// origin looking along +z with the focal plane at z = 2.

namespace synthetic {

inline constexpr double focal_depth = 2.0;
inline constexpr double half_fov_tan = 0.57735026918962576;  // tan(30 deg)

/// Depth interval and lateral extent of the depth-ramp scene: centres are
/// uniform in depth over [ramp_near, ramp_far] and uniform in x, y over the
/// base camera frustum widened by ramp_lateral.
inline constexpr double ramp_near = 1.6;
inline constexpr double ramp_far = 4.4;
inline constexpr double ramp_lateral = 1.0;
inline constexpr int ramp_count = 1000;
inline constexpr double ramp_sigma_min = 0.012;  // world units at depth 2
inline constexpr double ramp_sigma_max = 0.035;

inline std::vector<float> dc_only(const Float3& rgb) {
    return {float((rgb[0] - 0.5) / sh::c0), float((rgb[1] - 0.5) / sh::c0), float((rgb[2] - 0.5) / sh::c0)};
}

inline Float4 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return {float(q[0]), float(q[1]), float(q[2]), float(q[3])};
}

inline GaussianScene single() {
    GaussianScene s;
    const float log_sigma = std::log(0.05f);
    s.push_back({0.0f, 0.0f, float(focal_depth)}, {log_sigma, log_sigma, log_sigma}, {1, 0, 0, 0}, logit(0.8f),
                dc_only({0.9f, 0.6f, 0.3f}));
    return s;
}

inline GaussianScene depth_ramp(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GaussianScene s;
    for (int i = 0; i < ramp_count; ++i) {
        const double z = ramp_near + (ramp_far - ramp_near) * unit(rng);
        const double half = ramp_lateral * z * half_fov_tan;
        const double x = half * (2.0 * unit(rng) - 1.0);
        const double y = half * (2.0 * unit(rng) - 1.0);
        const double base = std::exp(std::log(ramp_sigma_min) +
                                     (std::log(ramp_sigma_max) - std::log(ramp_sigma_min)) * unit(rng)) *
                            z / focal_depth;
        Float3 lscale;
        for (float& l : lscale) l = float(std::log(base * (0.6 + 0.8 * unit(rng))));
        const float opacity = float(0.55 + 0.4 * unit(rng));
        const Float3 rgb{float(0.1 + 0.85 * unit(rng)), float(0.1 + 0.85 * unit(rng)), float(0.1 + 0.85 * unit(rng))};
        s.push_back({float(x), float(y), float(z)}, lscale, random_rotation(rng), logit(opacity), dc_only(rgb));
    }
    return s;
}

/// Gaussians on a spherical shell with mild degree-1 view dependence.
inline GaussianScene shell(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    GaussianScene s;
    s.sh_degree = 1;
    const Vec3 center(0.0, 0.0, 2.5);
    for (int i = 0; i < 1500; ++i) {
        Vec3 dir(normal(rng), normal(rng), normal(rng));
        dir.normalize();
        const Vec3 p = center + 0.8 * dir;
        const float ls = float(std::log(0.02 + 0.02 * unit(rng)));
        std::vector<float> coeffs(12);
        const Float3 rgb{float(0.5 + 0.4 * dir.x()), float(0.5 + 0.4 * dir.y()), float(0.5 + 0.4 * dir.z())};
        const auto dc = dc_only(rgb);
        std::copy(dc.begin(), dc.end(), coeffs.begin());
        for (int k = 3; k < 12; ++k) coeffs[k] = float(0.15 * (unit(rng) - 0.5));
        s.push_back({float(p.x()), float(p.y()), float(p.z())}, {ls, ls, float(ls + std::log(0.5))},
                    random_rotation(rng), logit(float(0.6 + 0.35 * unit(rng))), coeffs);
    }
    return s;
}

/// Axis-aligned coloured lattice of voxels straddling the focal plane.
inline VoxelScene grid(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    VoxelScene s;
    constexpr int n = 16;
    s.voxel_size = 0.1f;
    s.grid_origin = {-0.8f, -0.8f, 1.4f};
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                if ((i + 2 * j + 3 * k) % 5 != 0) continue;
                Voxel v;
                v.index = {i, j, k};
                v.density = float(12.0 * jitter(rng));
                v.rgb = {float(i) / (n - 1), float(j) / (n - 1), 1.0f - float(k) / (n - 1)};
                s.occupied.push_back(v);
            }
    return s;
}

}  // namespace synthetic

inline const std::vector<std::string>& synthetic_names() {
    static const std::vector<std::string> names{"grid", "shell", "depth-ramp", "single"};
    return names;
}

inline Scene generate_synthetic(const std::string& name, std::uint64_t seed = 0) {
    if (name == "single") return synthetic::single();
    if (name == "depth-ramp") return synthetic::depth_ramp(seed);
    if (name == "shell") return synthetic::shell(seed);
    if (name == "grid") return synthetic::grid(seed);
    throw ArgumentError("unknown synthetic scene '" + name + "' (expected grid|shell|depth-ramp|single)");
}

/// Resolves a scene source: "synthetic:<name>", a .ply file or a .lfvx file.
inline Scene load_scene(const std::string& source, std::uint64_t seed = 0) {
    constexpr std::string_view prefix = "synthetic:";
    if (source.rfind(prefix, 0) == 0) return generate_synthetic(source.substr(prefix.size()), seed);
    auto ends_with = [&](std::string_view suffix) {
        return source.size() >= suffix.size() && source.compare(source.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".ply")) return load_gaussian_ply(source);
    if (ends_with(".lfvx")) return load_voxels(source);
    throw ArgumentError("cannot infer scene kind from '" + source + "' (use .ply, .lfvx or synthetic:<name>)");
}

/// Metadata summary: kind, primitive count, bounds, SH degree.
inline nlohmann::json scene_metadata(const Scene& scene) {
    nlohmann::json j;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    if (const auto* g = std::get_if<GaussianScene>(&scene)) {
        j["kind"] = "gaussian";
        j["sh_degree"] = g->sh_degree;
        for (const auto& p : g->position) {
            const Vec3 v(p[0], p[1], p[2]);
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    } else {
        const auto& v = std::get<VoxelScene>(scene);
        j["kind"] = "voxel";
        j["sh_degree"] = nullptr;
        j["voxel_size"] = v.voxel_size;
        for (const auto& vx : v.occupied) {
            lo = lo.cwiseMin(v.voxel_min(vx));
            hi = hi.cwiseMax(v.voxel_min(vx) + Vec3::Constant(v.voxel_size));
        }
    }
    j["count"] = scene_size(scene);
    if (scene_size(scene) > 0) {
        j["bounds_min"] = {lo.x(), lo.y(), lo.z()};
        j["bounds_max"] = {hi.x(), hi.y(), hi.z()};
    }
    return j;
}

}  // namespace lfr

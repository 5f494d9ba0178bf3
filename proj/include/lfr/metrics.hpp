#pragma once

// Image quality metrics on [0, 1] floats.

#include "lfr/error.hpp"
#include "lfr/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace lfr {

/// Reported for identical images instead of +inf.
inline constexpr double psnr_cap_db = 99.0;

inline double mse(const ImageRGB& a, const ImageRGB& b) {
    if (a.width != b.width || a.height != b.height) throw ArgumentError("metrics: image dimensions differ");
    if (a.data.empty()) throw ArgumentError("metrics: empty image");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        sum += d * d;
    }
    return sum / double(a.data.size());
}

inline double psnr(const ImageRGB& a, const ImageRGB& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return psnr_cap_db;
    return std::min(psnr_cap_db, 10.0 * std::log10(1.0 / m));
}

/// 8-bit images: integer squared error, exact for any size.
inline double psnr(const Image8& a, const Image8& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw ArgumentError("metrics: image dimensions differ");
    if (a.data.empty()) throw ArgumentError("metrics: empty image");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const int d = int(a.data[i]) - int(b.data[i]);
        sum += std::uint64_t(d * d);
    }
    if (sum == 0) return psnr_cap_db;
    const double m = double(sum) / (255.0 * 255.0 * double(a.data.size()));
    return std::min(psnr_cap_db, 10.0 * std::log10(1.0 / m));
}

/// Rec. 601 luma.
inline ImageGray luma(const ImageRGB& img) {
    ImageGray out(img.width, img.height, 0.0f);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const float* p = img.pixel(x, y);
            out.at(x, y) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
        }
    return out;
}

namespace detail {

inline std::vector<double> gaussian_window_1d(int size, double sigma) {
    std::vector<double> w(size);
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - (size - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

inline double ssim_term(double mx, double my, double vx, double vy, double cxy) {
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace detail

/// SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// mean over fully contained windows. Images smaller than the window use one
/// uniform window over the whole image.
inline double ssim(const ImageRGB& a, const ImageRGB& b) {
    if (a.width != b.width || a.height != b.height) throw ArgumentError("metrics: image dimensions differ");
    if (a.width == 0 || a.height == 0) throw ArgumentError("metrics: empty image");
    const ImageGray ga = luma(a), gb = luma(b);
    const int w = a.width, h = a.height;
    constexpr int win = 11;

    if (w < win || h < win) {
        const double n = double(w) * h;
        double mx = 0, my = 0;
        for (int i = 0; i < w * h; ++i) {
            mx += ga.data[i];
            my += gb.data[i];
        }
        mx /= n;
        my /= n;
        double vx = 0, vy = 0, cxy = 0;
        for (int i = 0; i < w * h; ++i) {
            const double dx = ga.data[i] - mx, dy = gb.data[i] - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
        return detail::ssim_term(mx, my, vx / n, vy / n, cxy / n);
    }

    const auto g = detail::gaussian_window_1d(win, 1.5);
    // separable filtering of x, y, x^2, y^2, xy; horizontal pass first
    const int ow = w - win + 1, oh = h - win + 1;
    std::vector<double> hx(std::size_t(ow) * h), hy(hx.size()), hxx(hx.size()), hyy(hx.size()), hxy(hx.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int k = 0; k < win; ++k) {
                const double p = ga.at(x + k, y), q = gb.at(x + k, y);
                sx += g[k] * p;
                sy += g[k] * q;
                sxx += g[k] * p * p;
                syy += g[k] * q * q;
                sxy += g[k] * p * q;
            }
            const std::size_t i = std::size_t(y) * ow + x;
            hx[i] = sx;
            hy[i] = sy;
            hxx[i] = sxx;
            hyy[i] = syy;
            hxy[i] = sxy;
        }
    double total = 0.0;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
            for (int k = 0; k < win; ++k) {
                const std::size_t i = std::size_t(y + k) * ow + x;
                mx += g[k] * hx[i];
                my += g[k] * hy[i];
                exx += g[k] * hxx[i];
                eyy += g[k] * hyy[i];
                exy += g[k] * hxy[i];
            }
            total += detail::ssim_term(mx, my, exx - mx * mx, eyy - my * my, exy - mx * my);
        }
    return total / (double(ow) * oh);
}

inline double ssim(const Image8& a, const Image8& b) { return ssim(to_float(a), to_float(b)); }

}  // namespace lfr

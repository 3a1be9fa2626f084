#ifndef XCT_METRICS_HPP
#define XCT_METRICS_HPP

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "xct/core.hpp"

namespace xct {

inline double psnr(const Image2D& a, const Image2D& b, double data_range) {
    require(a.width == b.width && a.height == b.height, "psnr: shape mismatch");
    require(data_range > 0.0, "psnr: data_range must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

struct SsimParams {
    int window = 7;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

// Mean SSIM over uniform square windows fully inside the image, with
// sample (N-1) covariance normalization, matching the common reference
// implementation's uniform-window defaults.
inline double ssim(const Image2D& a, const Image2D& b, const SsimParams& params) {
    require(a.width == b.width && a.height == b.height, "ssim: shape mismatch");
    int win = params.window;
    require(win % 2 == 1, "ssim: window must be odd");
    require(win <= a.width && win <= a.height, "ssim: window exceeds image");
    require(params.data_range > 0.0, "ssim: data_range must be > 0");

    double c1 = params.k1 * params.data_range * params.k1 * params.data_range;
    double c2 = params.k2 * params.data_range * params.k2 * params.data_range;
    double n = static_cast<double>(win) * win;
    double cov_norm = n / (n - 1.0);

    double total = 0.0;
    std::size_t count = 0;
    for (int y = 0; y + win <= a.height; ++y) {
        for (int x = 0; x + win <= a.width; ++x) {
            double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int wy = 0; wy < win; ++wy) {
                for (int wx = 0; wx < win; ++wx) {
                    double va = a.at(y + wy, x + wx);
                    double vb = b.at(y + wy, x + wx);
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            double ma = sa / n, mb = sb / n;
            double va = cov_norm * (saa / n - ma * ma);
            double vb = cov_norm * (sbb / n - mb * mb);
            double vab = cov_norm * (sab / n - ma * mb);
            total += (2.0 * ma * mb + c1) * (2.0 * vab + c2) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

inline std::vector<std::pair<double, double>> line_profile(const Image2D& img, int row) {
    require(row >= 0 && row < img.height, "line_profile: row out of range");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(img.width));
    double half = 0.5 * (img.width - 1);
    for (int x = 0; x < img.width; ++x)
        out.emplace_back((x - half) * img.pixel_size, img.at(row, x));
    return out;
}

inline void write_profile_csv(const std::string& path,
                              const std::vector<std::pair<double, double>>& profile) {
    std::ofstream f(path);
    require(f.good(), "write_profile_csv: cannot open " + path);
    f << "x_mm,value\n";
    f.precision(17);
    for (const auto& [x, v] : profile)
        f << x << "," << v << "\n";
    require(f.good(), "write_profile_csv: failed writing " + path);
}

// Exact squared Euclidean distance transform (two-pass lower-envelope
// algorithm), distance of each nonzero pixel to the nearest zero pixel in
// pixel units.
inline std::vector<double> distance_transform(const std::vector<double>& mask, int width,
                                              int height) {
    const double big = 1e18;
    std::vector<double> f(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        f[i] = mask[i] != 0.0 ? big : 0.0;

    auto dt1d = [](const std::vector<double>& src, std::vector<double>& dst) {
        int n = static_cast<int>(src.size());
        std::vector<int> v(static_cast<std::size_t>(n));
        std::vector<double> z(static_cast<std::size_t>(n) + 1);
        int k = 0;
        v[0] = 0;
        z[0] = -1e20;
        z[1] = 1e20;
        for (int q = 1; q < n; ++q) {
            double s;
            for (;;) {
                int p = v[static_cast<std::size_t>(k)];
                s = (src[static_cast<std::size_t>(q)] + q * q -
                     (src[static_cast<std::size_t>(p)] + p * p)) /
                    (2.0 * q - 2.0 * p);
                if (s > z[static_cast<std::size_t>(k)]) break;
                --k;
            }
            ++k;
            v[static_cast<std::size_t>(k)] = q;
            z[static_cast<std::size_t>(k)] = s;
            z[static_cast<std::size_t>(k) + 1] = 1e20;
        }
        k = 0;
        for (int q = 0; q < n; ++q) {
            while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
            int p = v[static_cast<std::size_t>(k)];
            dst[static_cast<std::size_t>(q)] =
                (q - p) * (q - p) + src[static_cast<std::size_t>(p)];
        }
    };

    std::vector<double> col_in(static_cast<std::size_t>(height)),
        col_out(static_cast<std::size_t>(height));
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y)
            col_in[static_cast<std::size_t>(y)] = f[static_cast<std::size_t>(y) * width + x];
        dt1d(col_in, col_out);
        for (int y = 0; y < height; ++y)
            f[static_cast<std::size_t>(y) * width + x] = col_out[static_cast<std::size_t>(y)];
    }
    std::vector<double> row_in(static_cast<std::size_t>(width)),
        row_out(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x)
            row_in[static_cast<std::size_t>(x)] = f[static_cast<std::size_t>(y) * width + x];
        dt1d(row_in, row_out);
        for (int x = 0; x < width; ++x)
            f[static_cast<std::size_t>(y) * width + x] =
                std::sqrt(row_out[static_cast<std::size_t>(x)]);
    }
    return f;
}

// Cupping index: mean over the band 2..6 pixels inside the mask boundary
// divided by the mean over the core deeper than 6 pixels; 1.0 means flat.
// The innermost two pixel rings are excluded because any band-limited
// reconstruction rolls off there even without beam hardening.
inline double cupping_index(const Image2D& img, const Image2D& mask) {
    require(img.width == mask.width && img.height == mask.height,
            "cupping_index: shape mismatch");
    for (double v : mask.data)
        require(v == 0.0 || v == 1.0, "cupping_index: mask must be binary");

    auto dist = distance_transform(mask.data, mask.width, mask.height);
    double band_sum = 0.0, core_sum = 0.0;
    std::size_t band_n = 0, core_n = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > 6.0) {
            core_sum += img.data[i];
            ++core_n;
        } else if (dist[i] > 2.0) {
            band_sum += img.data[i];
            ++band_n;
        }
    }
    require(band_n > 0, "cupping_index: empty boundary band");
    require(core_n > 0, "cupping_index: empty core band");
    return (band_sum / static_cast<double>(band_n)) / (core_sum / static_cast<double>(core_n));
}

} // namespace xct

#endif

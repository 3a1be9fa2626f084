#ifndef XCT_RECON_HPP
#define XCT_RECON_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "xct/core.hpp"
#include "xct/projector.hpp"

namespace xct {

enum class FilterWindow { ramlak, hann };

namespace detail {

// Band-limited ramp kernel sampled at detector pitch tau:
// h[0] = 1/(4 tau^2), h[n] = -1/(pi^2 n^2 tau^2) for odd n, 0 for even n.
// The Hann variant smooths it with the [1/4, 1/2, 1/4] spatial stencil,
// which is exactly a Hann apodization of the frequency response.
inline std::vector<double> ramp_kernel(int half_width, double tau, FilterWindow window) {
    const double pi = 3.14159265358979323846;
    std::vector<double> h(static_cast<std::size_t>(2 * half_width + 1), 0.0);
    for (int n = -half_width; n <= half_width; ++n) {
        double v = 0.0;
        if (n == 0) v = 1.0 / (4.0 * tau * tau);
        else if (n % 2 != 0) v = -1.0 / (pi * pi * n * n * tau * tau);
        h[static_cast<std::size_t>(n + half_width)] = v;
    }
    if (window == FilterWindow::hann) {
        std::vector<double> s(h.size(), 0.0);
        for (std::size_t i = 1; i + 1 < h.size(); ++i)
            s[i] = 0.25 * h[i - 1] + 0.5 * h[i] + 0.25 * h[i + 1];
        h = std::move(s);
    }
    return h;
}

// direct convolution of one detector row with the ramp kernel, scaled by tau
inline void filter_row(const double* row, int n, const std::vector<double>& kernel,
                       int half_width, double tau, double* out) {
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        int j_lo = std::max(0, i - half_width);
        int j_hi = std::min(n - 1, i + half_width);
        for (int j = j_lo; j <= j_hi; ++j)
            acc += row[j] * kernel[static_cast<std::size_t>(i - j + half_width)];
        out[i] = acc * tau;
    }
}

inline double mean_angle_step(const std::vector<double>& angles) {
    if (angles.size() < 2) return 0.0;
    return (angles.back() - angles.front()) / static_cast<double>(angles.size() - 1);
}

} // namespace detail

// Filtered backprojection. Parallel beams accept half-turn or full-turn
// coverage (full turns are counted with half weight); fan beams require a
// full turn, with cosine pre-weighting at the isocenter-rescaled detector
// and inverse-square distance weighting in the backprojection.
inline Image2D fbp(const Sinogram& sino, int width, int height, double pixel_size,
                   FilterWindow window = FilterWindow::ramlak) {
    sino.validate();
    require(sino.num_views >= 2, "fbp: need at least 2 views");
    const Geometry& g = sino.geometry;
    const double pi = 3.14159265358979323846;
    const int nb = sino.num_bins;
    const int nv = sino.num_views;

    double dtheta = detail::mean_angle_step(g.angles);
    require(dtheta > 0.0, "fbp: degenerate angle list");
    double span = dtheta * nv; // closed span assuming uniform steps

    Image2D img(width, height, pixel_size);
    const double half_w = 0.5 * (width - 1), half_h = 0.5 * (height - 1);

    if (g.kind == GeometryKind::parallel) {
        double turns = std::max(1.0, std::round(span / pi));
        double scale = dtheta / turns;
        auto kernel = detail::ramp_kernel(nb, g.detector_spacing, window);
        std::vector<double> filt(static_cast<std::size_t>(nb));
        for (int v = 0; v < nv; ++v) {
            detail::filter_row(&sino.data[static_cast<std::size_t>(v) * nb], nb, kernel, nb,
                               g.detector_spacing, filt.data());
            double c = std::cos(g.angles[static_cast<std::size_t>(v)]);
            double s = std::sin(g.angles[static_cast<std::size_t>(v)]);
            for (int y = 0; y < height; ++y) {
                double py = (y - half_h) * pixel_size;
                for (int x = 0; x < width; ++x) {
                    double px = (x - half_w) * pixel_size;
                    double t = px * c + py * s;
                    double f = (t - g.detector_offset) / g.detector_spacing + 0.5 * (nb - 1);
                    auto i0 = static_cast<int>(std::floor(f));
                    if (i0 < 0 || i0 >= nb - 1) continue;
                    double w = f - i0;
                    img.at(y, x) += scale * ((1.0 - w) * filt[static_cast<std::size_t>(i0)] +
                                             w * filt[static_cast<std::size_t>(i0 + 1)]);
                }
            }
        }
        return img;
    }

    // fan beam, flat detector
    require(span > 1.9 * pi, "fbp: fan geometry requires a full-turn scan");
    const double rsc = g.source_to_center, rsd = g.source_to_detector;
    const double mag = rsc / rsd;
    const double tau = g.detector_spacing * mag;      // detector pitch at isocenter
    const double off = g.detector_offset * mag;
    auto kernel = detail::ramp_kernel(nb, tau, window);
    std::vector<double> row(static_cast<std::size_t>(nb)), filt(static_cast<std::size_t>(nb));
    double scale = dtheta / 2.0; // full-turn redundancy
    for (int v = 0; v < nv; ++v) {
        for (int b = 0; b < nb; ++b) {
            double u = (b - 0.5 * (nb - 1)) * tau + off;
            row[static_cast<std::size_t>(b)] =
                sino.at(v, b) * rsc / std::sqrt(rsc * rsc + u * u);
        }
        detail::filter_row(row.data(), nb, kernel, nb, tau, filt.data());
        double c = std::cos(g.angles[static_cast<std::size_t>(v)]);
        double s = std::sin(g.angles[static_cast<std::size_t>(v)]);
        for (int y = 0; y < height; ++y) {
            double py = (y - half_h) * pixel_size;
            for (int x = 0; x < width; ++x) {
                double px = (x - half_w) * pixel_size;
                double t = px * c + py * s;       // along center->source axis
                double e = -px * s + py * c;      // along detector axis
                double big_u = rsc - t;           // pixel distance from the source plane
                if (big_u <= 0.0) continue;
                double u = rsc * e / big_u;
                double f = (u - off) / tau + 0.5 * (nb - 1);
                auto i0 = static_cast<int>(std::floor(f));
                if (i0 < 0 || i0 >= nb - 1) continue;
                double w = f - i0;
                double q = (1.0 - w) * filt[static_cast<std::size_t>(i0)] +
                           w * filt[static_cast<std::size_t>(i0 + 1)];
                img.at(y, x) += scale * (rsc * rsc) / (big_u * big_u) * q;
            }
        }
    }
    return img;
}

// SIRT: x <- x + C.*A^T(R.*(b - A x)) with inverse row/column sum weights,
// starting from x = 0, optionally clamped nonnegative each iteration.
inline Image2D sirt(const Sinogram& sino, int width, int height, double pixel_size,
                    int iters, bool nonneg = true) {
    sino.validate();
    require(iters >= 1, "sirt: iters must be >= 1");
    const Geometry& g = sino.geometry;

    Image2D ones_img(width, height, pixel_size, 1.0);
    Sinogram row_sums = forward_project(ones_img, g, sino.num_bins);
    Sinogram ones_sino(g, sino.num_bins, 1.0);
    Image2D col_sums = back_project(ones_sino, g, width, height, pixel_size);

    std::vector<double> r_w(row_sums.data.size()), c_w(col_sums.data.size());
    for (std::size_t i = 0; i < r_w.size(); ++i)
        r_w[i] = row_sums.data[i] > 1e-12 ? 1.0 / row_sums.data[i] : 0.0;
    for (std::size_t i = 0; i < c_w.size(); ++i)
        c_w[i] = col_sums.data[i] > 1e-12 ? 1.0 / col_sums.data[i] : 0.0;

    Image2D x(width, height, pixel_size);
    for (int it = 0; it < iters; ++it) {
        Sinogram ax = forward_project(x, g, sino.num_bins);
        for (std::size_t i = 0; i < ax.data.size(); ++i)
            ax.data[i] = (sino.data[i] - ax.data[i]) * r_w[i];
        Image2D upd = back_project(ax, g, width, height, pixel_size);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            x.data[i] += c_w[i] * upd.data[i];
            if (nonneg && x.data[i] < 0.0) x.data[i] = 0.0;
        }
    }
    return x;
}

inline Sinogram subsample_views(const Sinogram& sino, int factor) {
    sino.validate();
    require(factor >= 1, "subsample_views: factor must be >= 1");
    require(factor <= sino.num_views, "subsample_views: factor exceeds num_views");
    Geometry g = sino.geometry;
    g.angles.clear();
    for (std::size_t v = 0; v < sino.geometry.angles.size(); v += factor)
        g.angles.push_back(sino.geometry.angles[v]);
    Sinogram out(g, sino.num_bins);
    for (int v = 0; v < out.num_views; ++v)
        for (int b = 0; b < out.num_bins; ++b)
            out.at(v, b) = sino.at(v * factor, b);
    return out;
}

} // namespace xct

#endif

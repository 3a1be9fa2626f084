#ifndef XCT_PROJECTOR_HPP
#define XCT_PROJECTOR_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "xct/core.hpp"

// Exact line integrals through the pixel grid via Amanatides-Woo traversal.
// forward_project and back_project drive the identical traversal, so the
// pair is a matched operator/adjoint: <Ax, y> == <x, A^T y> to rounding.

namespace xct {

namespace detail {

// Visits every pixel the ray segment [t_lo, t_hi] crosses, as
// visit(flat_index, intersection_length_mm). (ox,oy) + t*(dx,dy) with
// (dx,dy) a unit vector; the grid is centered on the origin.
template <class F>
void trace_ray(double ox, double oy, double dx, double dy, double t_lo, double t_hi,
               int width, int height, double px, F&& visit) {
    const double inf = std::numeric_limits<double>::infinity();
    const double xmin = -0.5 * width * px, xmax = 0.5 * width * px;
    const double ymin = -0.5 * height * px, ymax = 0.5 * height * px;

    double t0 = t_lo, t1 = t_hi;
    if (dx != 0.0) {
        double ta = (xmin - ox) / dx, tb = (xmax - ox) / dx;
        t0 = std::max(t0, std::min(ta, tb));
        t1 = std::min(t1, std::max(ta, tb));
    } else if (ox <= xmin || ox >= xmax) {
        return;
    }
    if (dy != 0.0) {
        double ta = (ymin - oy) / dy, tb = (ymax - oy) / dy;
        t0 = std::max(t0, std::min(ta, tb));
        t1 = std::min(t1, std::max(ta, tb));
    } else if (oy <= ymin || oy >= ymax) {
        return;
    }
    if (!(t0 < t1)) return;

    double sx = ox + t0 * dx, sy = oy + t0 * dy;
    int ix = std::clamp(static_cast<int>(std::floor((sx - xmin) / px)), 0, width - 1);
    int iy = std::clamp(static_cast<int>(std::floor((sy - ymin) / px)), 0, height - 1);

    int step_x = dx > 0.0 ? 1 : -1;
    int step_y = dy > 0.0 ? 1 : -1;
    double tmax_x = inf, tmax_y = inf, tdelta_x = inf, tdelta_y = inf;
    if (dx != 0.0) {
        double next = xmin + (ix + (dx > 0.0 ? 1 : 0)) * px;
        tmax_x = (next - ox) / dx;
        tdelta_x = px / std::abs(dx);
    }
    if (dy != 0.0) {
        double next = ymin + (iy + (dy > 0.0 ? 1 : 0)) * px;
        tmax_y = (next - oy) / dy;
        tdelta_y = px / std::abs(dy);
    }

    double t = t0;
    for (;;) {
        double tn = std::min({tmax_x, tmax_y, t1});
        double len = tn - t;
        if (len > 0.0) visit(static_cast<std::size_t>(iy) * width + ix, len);
        if (tn >= t1) break;
        if (tmax_x <= tmax_y) {
            ix += step_x;
            if (ix < 0 || ix >= width) break;
            tmax_x += tdelta_x;
        } else {
            iy += step_y;
            if (iy < 0 || iy >= height) break;
            tmax_y += tdelta_y;
        }
        t = tn;
    }
}

struct Ray {
    double ox, oy, dx, dy, t_lo, t_hi;
};

inline Ray make_ray(const Geometry& g, double angle, double bin_coord) {
    const double inf = std::numeric_limits<double>::infinity();
    double c = std::cos(angle), s = std::sin(angle);
    if (g.kind == GeometryKind::parallel) {
        // line { bin_coord*(c,s) + t*(-s,c) : t in R }
        return {bin_coord * c, bin_coord * s, -s, c, -inf, inf};
    }
    double src_x = g.source_to_center * c;
    double src_y = g.source_to_center * s;
    double det_x = (g.source_to_center - g.source_to_detector) * c - bin_coord * s;
    double det_y = (g.source_to_center - g.source_to_detector) * s + bin_coord * c;
    double dx = det_x - src_x, dy = det_y - src_y;
    double norm = std::hypot(dx, dy);
    return {src_x, src_y, dx / norm, dy / norm, 0.0, norm};
}

} // namespace detail

// One ray's pixel intersections, mainly for inspection and tests.
struct RayPath {
    double t_entry = 0.0;
    double t_exit = 0.0;
    std::vector<std::pair<std::size_t, double>> segments; // (flat pixel index, length mm)
};

inline RayPath ray_path(int width, int height, double pixel_size, const Geometry& g,
                        int view, double bin_coord) {
    g.validate();
    auto ray = detail::make_ray(g, g.angles.at(static_cast<std::size_t>(view)), bin_coord);
    RayPath path;
    bool first = true;
    double t_acc = 0.0;
    detail::trace_ray(ray.ox, ray.oy, ray.dx, ray.dy, ray.t_lo, ray.t_hi, width, height,
                      pixel_size, [&](std::size_t idx, double len) {
                          path.segments.emplace_back(idx, len);
                          if (first) { path.t_entry = t_acc; first = false; }
                          t_acc += len;
                      });
    path.t_exit = path.t_entry + t_acc;
    return path;
}

inline Sinogram forward_project(const Image2D& img, const Geometry& g, int num_bins) {
    img.validate();
    g.validate();
    require(num_bins > 0, "forward_project: num_bins must be > 0");
    Sinogram sino(g, num_bins);
    for (int v = 0; v < sino.num_views; ++v) {
        double angle = g.angles[static_cast<std::size_t>(v)];
        for (int b = 0; b < num_bins; ++b) {
            auto ray = detail::make_ray(g, angle, sino.bin_coord(b));
            double acc = 0.0;
            detail::trace_ray(ray.ox, ray.oy, ray.dx, ray.dy, ray.t_lo, ray.t_hi,
                              img.width, img.height, img.pixel_size,
                              [&](std::size_t idx, double len) { acc += img.data[idx] * len; });
            sino.at(v, b) = acc;
        }
    }
    return sino;
}

inline Image2D back_project(const Sinogram& sino, const Geometry& g, int width, int height,
                            double pixel_size) {
    sino.validate();
    require(g.num_views() == sino.geometry.num_views() &&
                g.kind == sino.geometry.kind &&
                g.detector_spacing == sino.geometry.detector_spacing,
            "back_project: geometry does not match sinogram");
    Image2D img(width, height, pixel_size);
    for (int v = 0; v < sino.num_views; ++v) {
        double angle = g.angles[static_cast<std::size_t>(v)];
        for (int b = 0; b < sino.num_bins; ++b) {
            double w = sino.at(v, b);
            if (w == 0.0) continue;
            auto ray = detail::make_ray(g, angle, sino.bin_coord(b));
            detail::trace_ray(ray.ox, ray.oy, ray.dx, ray.dy, ray.t_lo, ray.t_hi,
                              width, height, pixel_size,
                              [&](std::size_t idx, double len) { img.data[idx] += w * len; });
        }
    }
    return img;
}

} // namespace xct

#endif

#ifndef XCT_PHANTOM_HPP
#define XCT_PHANTOM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xct/core.hpp"
#include "xct/rng.hpp"

// Synthetic single-material phantoms: a disk base, optional boundary
// features (fins, rods, notches) and circular pores. Outputs are support
// maps in [0,1]; boundary pixels are anti-aliased by supersampling.

namespace xct {

struct PhantomSpec {
    int image_size = 256;
    double pixel_size = 0.1;   // mm
    double base_radius = 7.5;  // mm
    double mu_material = 1.0;  // mm^-1, label only; the image itself is a support map
    int num_pores = 0;
    double pore_radius_lo = 0.0; // mm
    double pore_radius_hi = 0.0; // mm
    bool fins = false;
    bool rods = false;
    bool notches = false;
    std::uint64_t seed = 0;

    void validate() const {
        require(image_size > 0, "PhantomSpec: image_size must be > 0");
        require(pixel_size > 0.0, "PhantomSpec: pixel_size must be > 0");
        require(base_radius >= 0.0, "PhantomSpec: base_radius must be >= 0");
        require(base_radius < image_size * pixel_size / 2.0,
                "PhantomSpec: base_radius must be < image_size*pixel_size/2");
        require(num_pores >= 0, "PhantomSpec: num_pores must be >= 0");
        if (num_pores > 0) {
            require(pore_radius_lo > 0.0 && pore_radius_hi >= pore_radius_lo,
                    "PhantomSpec: pore radius range must be positive and ordered");
            require(pore_radius_hi < base_radius / 4.0,
                    "PhantomSpec: pore radii must be < base_radius/4");
        }
    }
};

namespace detail {

// rectangle in polar-ish coordinates: axis at angle phi through the origin,
// covering radial extent [r0, r1] and tangential half-width hw
struct RadialRect {
    double cos_phi, sin_phi, r0, r1, hw;
    bool contains(double x, double y) const {
        double u = x * cos_phi + y * sin_phi;
        double v = -x * sin_phi + y * cos_phi;
        return u >= r0 && u <= r1 && std::abs(v) <= hw;
    }
};

struct Circle {
    double cx, cy, r;
    bool contains(double x, double y) const {
        double dx = x - cx, dy = y - cy;
        return dx * dx + dy * dy <= r * r;
    }
};

struct ShapeSet {
    double base_radius = 0.0;
    std::vector<RadialRect> add_rects;  // fins
    std::vector<Circle> add_circles;    // rods
    std::vector<RadialRect> cut_rects;  // notches
    std::vector<Circle> cut_circles;    // pores

    bool covered(double x, double y) const {
        bool in = x * x + y * y <= base_radius * base_radius;
        if (!in)
            for (const auto& r : add_rects)
                if (r.contains(x, y)) { in = true; break; }
        if (!in)
            for (const auto& c : add_circles)
                if (c.contains(x, y)) { in = true; break; }
        if (!in) return false;
        for (const auto& r : cut_rects)
            if (r.contains(x, y)) return false;
        for (const auto& c : cut_circles)
            if (c.contains(x, y)) return false;
        return true;
    }
};

inline Image2D rasterize(const ShapeSet& shapes, int size, double px) {
    constexpr int ss = 8; // supersampling factor per axis
    Image2D img(size, size, px);
    double half = 0.5 * (size - 1);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            int hits = 0;
            for (int sy = 0; sy < ss; ++sy) {
                double py = (y - half + (sy + 0.5) / ss - 0.5) * px;
                for (int sx = 0; sx < ss; ++sx) {
                    double pxx = (x - half + (sx + 0.5) / ss - 0.5) * px;
                    if (shapes.covered(pxx, py)) ++hits;
                }
            }
            img.at(y, x) = static_cast<double>(hits) / (ss * ss);
        }
    }
    return img;
}

} // namespace detail

inline Image2D gen_disk(const PhantomSpec& spec) {
    spec.validate();
    detail::ShapeSet shapes;
    shapes.base_radius = spec.base_radius;
    return detail::rasterize(shapes, spec.image_size, spec.pixel_size);
}

inline Image2D gen_component(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const double R = spec.base_radius;
    const double half_extent = spec.image_size * spec.pixel_size / 2.0;

    detail::ShapeSet shapes;
    shapes.base_radius = R;

    if (spec.fins) {
        for (int i = 0; i < 3; ++i) {
            double phi = rng.uniform(0.0, 6.283185307179586);
            double len = R * rng.uniform(0.15, 0.25);
            double outer = std::min(R + len, half_extent * 0.95);
            shapes.add_rects.push_back({std::cos(phi), std::sin(phi),
                                        R * 0.5, outer, R * rng.uniform(0.05, 0.08)});
        }
    }
    if (spec.rods) {
        for (int i = 0; i < 2; ++i) {
            double phi = rng.uniform(0.0, 6.283185307179586);
            double r = R * rng.uniform(0.08, 0.14);
            double cr = std::min(R + r * 0.5, half_extent * 0.95 - r);
            shapes.add_circles.push_back({cr * std::cos(phi), cr * std::sin(phi), r});
        }
    }
    if (spec.notches) {
        for (int i = 0; i < 2; ++i) {
            double phi = rng.uniform(0.0, 6.283185307179586);
            double depth = R * rng.uniform(0.12, 0.2);
            shapes.cut_rects.push_back({std::cos(phi), std::sin(phi),
                                        R - depth, R * 1.1, R * rng.uniform(0.04, 0.07)});
        }
    }

    if (spec.num_pores > 0) {
        const double margin = 2.0 * spec.pixel_size;
        const long budget = 100L * spec.num_pores;
        long attempts = 0;
        while (static_cast<int>(shapes.cut_circles.size()) < spec.num_pores) {
            if (attempts++ >= budget)
                throw Error("gen_component: pore placement failed after " +
                            std::to_string(budget) + " attempts (budget 100*num_pores)");
            double r = rng.uniform(spec.pore_radius_lo, spec.pore_radius_hi);
            double rad = rng.uniform(0.0, R - r - margin);
            double phi = rng.uniform(0.0, 6.283185307179586);
            double cx = rad * std::cos(phi), cy = rad * std::sin(phi);

            bool ok = true;
            for (const auto& p : shapes.cut_circles) {
                double dx = cx - p.cx, dy = cy - p.cy;
                double sep = r + p.r + margin;
                if (dx * dx + dy * dy < sep * sep) { ok = false; break; }
            }
            // keep pores clear of notch cuts so each stays a separate void
            for (const auto& n : shapes.cut_rects) {
                if (!ok) break;
                double u = cx * n.cos_phi + cy * n.sin_phi;
                double v = -cx * n.sin_phi + cy * n.cos_phi;
                double du = std::max({n.r0 - u, u - n.r1, 0.0});
                double dv = std::max(std::abs(v) - n.hw, 0.0);
                if (du * du + dv * dv < (r + margin) * (r + margin)) ok = false;
            }
            if (ok) shapes.cut_circles.push_back({cx, cy, r});
        }
    }

    return detail::rasterize(shapes, spec.image_size, spec.pixel_size);
}

} // namespace xct

#endif

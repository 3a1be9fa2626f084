#ifndef XCT_CORE_HPP
#define XCT_CORE_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace xct {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// 2D image on a square pixel grid. data is row-major, data[y*width + x].
// The grid is centered on the origin: pixel (x, y) has its center at
// ((x - (width-1)/2) * pixel_size, (y - (height-1)/2) * pixel_size) in mm.
struct Image2D {
    int width = 0;
    int height = 0;
    double pixel_size = 1.0; // mm
    std::vector<double> data;

    Image2D() = default;
    Image2D(int w, int h, double px, double fill = 0.0)
        : width(w), height(h), pixel_size(px),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }

    void validate() const {
        require(width > 0 && height > 0, "Image2D: nonpositive dimensions");
        require(pixel_size > 0.0, "Image2D: pixel_size must be > 0");
        require(data.size() == static_cast<std::size_t>(width) * height,
                "Image2D: data length != width*height");
        for (double v : data)
            require(std::isfinite(v), "Image2D: non-finite value");
    }
};

enum class GeometryKind { parallel, fan };

// Acquisition geometry. For parallel beams a view at angle t measures line
// integrals along direction (-sin t, cos t); detector coordinate s of a
// point (x, y) is x*cos t + y*sin t. For fan beams the source sits at
// source_to_center * (cos t, sin t) and a flat detector passes through the
// point diametrically opposite, at source distance source_to_detector,
// with its coordinate axis along (-sin t, cos t).
struct Geometry {
    GeometryKind kind = GeometryKind::parallel;
    std::vector<double> angles;   // radians, strictly increasing in [0, 2*pi)
    double detector_spacing = 1.0; // mm
    double detector_offset = 0.0;  // mm, shift of the detector center
    double source_to_center = 0.0; // mm, fan only
    double source_to_detector = 0.0; // mm, fan only

    std::size_t num_views() const { return angles.size(); }

    void validate() const {
        require(!angles.empty(), "Geometry: no view angles");
        require(detector_spacing > 0.0, "Geometry: detector_spacing must be > 0");
        const double two_pi = 6.283185307179586476925286766559;
        for (std::size_t i = 0; i < angles.size(); ++i) {
            require(angles[i] >= 0.0 && angles[i] < two_pi,
                    "Geometry: angle outside [0, 2*pi)");
            if (i > 0)
                require(angles[i] > angles[i - 1], "Geometry: angles not strictly increasing");
        }
        if (kind == GeometryKind::fan) {
            require(source_to_center > 0.0 && source_to_detector > source_to_center,
                    "Geometry: fan requires 0 < source_to_center < source_to_detector");
        }
    }
};

inline Geometry make_geometry(GeometryKind kind, int num_views, double span,
                              double detector_spacing, double detector_offset = 0.0,
                              double source_to_center = 0.0, double source_to_detector = 0.0) {
    Geometry g;
    g.kind = kind;
    g.angles.resize(num_views);
    for (int i = 0; i < num_views; ++i)
        g.angles[i] = span * i / num_views;
    g.detector_spacing = detector_spacing;
    g.detector_offset = detector_offset;
    g.source_to_center = source_to_center;
    g.source_to_detector = source_to_detector;
    g.validate();
    return g;
}

// Post-log projection data, row-major with views outer: data[view*num_bins + bin].
struct Sinogram {
    int num_views = 0;
    int num_bins = 0;
    Geometry geometry;
    std::vector<double> data;

    Sinogram() = default;
    Sinogram(const Geometry& g, int bins, double fill = 0.0)
        : num_views(static_cast<int>(g.num_views())), num_bins(bins), geometry(g),
          data(static_cast<std::size_t>(num_views) * bins, fill) {}

    double& at(int view, int bin) { return data[static_cast<std::size_t>(view) * num_bins + bin]; }
    double at(int view, int bin) const { return data[static_cast<std::size_t>(view) * num_bins + bin]; }
    std::size_t size() const { return data.size(); }

    // detector coordinate of a bin center, mm
    double bin_coord(int bin) const {
        return (bin - 0.5 * (num_bins - 1)) * geometry.detector_spacing + geometry.detector_offset;
    }

    void validate() const {
        geometry.validate();
        require(num_views == static_cast<int>(geometry.num_views()),
                "Sinogram: num_views != geometry angle count");
        require(num_bins > 0, "Sinogram: num_bins must be > 0");
        require(data.size() == static_cast<std::size_t>(num_views) * num_bins,
                "Sinogram: data length != num_views*num_bins");
        for (double v : data)
            require(std::isfinite(v), "Sinogram: non-finite value");
    }
};

} // namespace xct

#endif

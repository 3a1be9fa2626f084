#ifndef XCT_PHYSICS_HPP
#define XCT_PHYSICS_HPP

#include <cmath>
#include <cstdint>

#include "xct/core.hpp"
#include "xct/projector.hpp"
#include "xct/rng.hpp"

// Bimodal-energy beam hardening model. A beam with spectral weight alpha at
// a low energy (attenuation mu1) relative to a high energy (mu2) produces
// the post-log projection
//     p_bh(d) = mu2*d + ln((1+alpha) / (1 + alpha*exp(-(mu1-mu2)*d)))
// for material thickness d, while an ideal monochromatic acquisition sees
//     p_ideal(d) = (alpha*mu1 + mu2)/(1+alpha) * d.

namespace xct {

struct BhParams {
    double alpha = 0.0; // spectrum*detector weight ratio of the low-energy mode
    double mu1 = 0.0;   // mm^-1, low energy
    double mu2 = 0.0;   // mm^-1, high energy

    void validate() const {
        require(alpha >= 0.0, "BhParams: alpha must be >= 0");
        require(mu2 > 0.0, "BhParams: mu2 must be > 0");
        require(mu1 >= mu2, "BhParams: mu1 must be >= mu2");
    }
};

// preset used by the simulation examples and acceptance runs: strong,
// clearly visible cupping on a 15 mm disk
inline BhParams canonical_bh_params() { return {2.0, 0.35, 0.12}; }

inline double bh_projection(double d, const BhParams& p) {
    p.validate();
    require(d >= 0.0, "bh_projection: thickness must be >= 0");
    // log1p keeps the term stable for large alpha*d where exp() underflows
    return p.mu2 * d + std::log1p(p.alpha) - std::log1p(p.alpha * std::exp(-(p.mu1 - p.mu2) * d));
}

inline double ideal_projection(double d, const BhParams& p) {
    p.validate();
    require(d >= 0.0, "ideal_projection: thickness must be >= 0");
    return (p.alpha * p.mu1 + p.mu2) / (1.0 + p.alpha) * d;
}

struct NoiseSpec {
    double i0 = 0.0; // mean photon count at zero attenuation; <= 0 disables noise
    std::uint64_t seed = 0;
};

// Poisson transmission noise on pre-log intensities: per bin draw
// N ~ Poisson(i0*exp(-p)) and return -ln(max(N,1)/i0). Each bin gets its own
// counter-derived stream, so the result is independent of evaluation order.
inline Sinogram add_noise(const Sinogram& sino, double i0, std::uint64_t seed) {
    require(i0 > 0.0, "add_noise: i0 must be > 0");
    sino.validate();
    Sinogram out = sino;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        Rng rng = Rng::stream(seed, i);
        double lambda = i0 * std::exp(-sino.data[i]);
        auto n = rng.poisson(lambda);
        double counts = n < 1 ? 1.0 : static_cast<double>(n);
        out.data[i] = -std::log(counts / i0);
    }
    return out;
}

struct ScanResult {
    Sinogram bh;        // beam-hardened projections, plus noise if enabled
    Sinogram ideal;     // monochromatic-equivalent projections
    Sinogram thickness; // line integrals of the support, mm
};

inline ScanResult simulate_scan(const Image2D& support, const Geometry& g, int num_bins,
                                const BhParams& params, const NoiseSpec& noise) {
    params.validate();
    for (double v : support.data)
        require(v >= 0.0 && v <= 1.0, "simulate_scan: support values must lie in [0,1]");

    ScanResult r;
    r.thickness = forward_project(support, g, num_bins);
    r.ideal = r.thickness;
    r.bh = r.thickness;
    for (std::size_t i = 0; i < r.thickness.data.size(); ++i) {
        double d = r.thickness.data[i];
        r.ideal.data[i] = ideal_projection(d, params);
        r.bh.data[i] = bh_projection(d, params);
    }
    if (noise.i0 > 0.0) r.bh = add_noise(r.bh, noise.i0, noise.seed);
    return r;
}

} // namespace xct

#endif

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "xct/phantom.hpp"
#include "xct/physics.hpp"

using Catch::Approx;

TEST_CASE("BhParams validation") {
    xct::BhParams p{2.0, 0.35, 0.12};
    p.validate();
    REQUIRE_THROWS_AS((xct::BhParams{-0.1, 0.35, 0.12}.validate()), xct::Error);
    REQUIRE_THROWS_AS((xct::BhParams{1.0, 0.35, 0.0}.validate()), xct::Error);
    REQUIRE_THROWS_AS((xct::BhParams{1.0, 0.1, 0.2}.validate()), xct::Error);
    REQUIRE(xct::canonical_bh_params().alpha == 2.0);
    REQUIRE(xct::canonical_bh_params().mu1 == 0.35);
    REQUIRE(xct::canonical_bh_params().mu2 == 0.12);
}

TEST_CASE("projection values match the closed-form oracle") {
    xct::BhParams p{1.0, 0.2, 0.1};
    // 1 + ln(2/(1+e^-1)) evaluated independently at high precision
    REQUIRE(xct::bh_projection(10.0, p) == Approx(1.37988549304172247537).epsilon(1e-12));
    REQUIRE(xct::ideal_projection(10.0, p) == Approx(1.5).epsilon(1e-12));

    REQUIRE(xct::bh_projection(0.0, p) == 0.0);
    REQUIRE(xct::ideal_projection(0.0, p) == 0.0);

    // monochromatic: mu1 == mu2 collapses both models to mu*d
    xct::BhParams mono{3.0, 0.17, 0.17};
    REQUIRE(xct::bh_projection(10.0, mono) == Approx(1.7).epsilon(1e-12));
    REQUIRE(xct::ideal_projection(10.0, mono) == Approx(1.7).epsilon(1e-12));

    // alpha = 0 removes the hard component entirely
    xct::BhParams no_hard{0.0, 0.4, 0.25};
    REQUIRE(xct::bh_projection(12.0, no_hard) == Approx(0.25 * 12.0).epsilon(1e-12));
}

TEST_CASE("bh projection is strictly increasing and concave") {
    xct::BhParams p = xct::canonical_bh_params();
    const double step = 0.01;
    double prev = xct::bh_projection(0.0, p);
    double prev_diff = -1.0;
    for (int i = 1; i <= 4000; ++i) {
        double d = i * step;
        double cur = xct::bh_projection(d, p);
        REQUIRE(cur > prev);
        double diff = cur - prev;
        if (i > 1) REQUIRE(diff <= prev_diff + 1e-12);
        prev = cur;
        prev_diff = diff;
    }
}

TEST_CASE("hardened projection never exceeds the ideal one") {
    xct::BhParams p = xct::canonical_bh_params();
    for (int i = 0; i <= 400; ++i) {
        double d = 0.1 * i;
        double bh = xct::bh_projection(d, p);
        double ideal = xct::ideal_projection(d, p);
        REQUIRE(bh <= ideal + 1e-12);
        if (d > 0.0) REQUIRE(bh < ideal);
    }
}

TEST_CASE("slope at zero equals the ideal slope, slope at infinity approaches mu2") {
    xct::BhParams p = xct::canonical_bh_params();
    double ideal_slope = (p.alpha * p.mu1 + p.mu2) / (1.0 + p.alpha);

    const double h = 1e-5;
    double slope0 = xct::bh_projection(h, p) / h;
    REQUIRE(slope0 == Approx(ideal_slope).epsilon(1e-6));

    double far = 100.0 / (p.mu1 - p.mu2);
    double slope_far =
        (xct::bh_projection(far + 1.0, p) - xct::bh_projection(far - 1.0, p)) / 2.0;
    REQUIRE(slope_far == Approx(p.mu2).epsilon(1e-9));
}

TEST_CASE("photon noise is tiny at astronomical flux") {
    xct::Geometry g = xct::make_geometry(xct::GeometryKind::parallel, 4, 3.14159, 0.1);
    xct::Sinogram s(g, 256);
    for (std::size_t i = 0; i < s.data.size(); ++i)
        s.data[i] = 3.0 * static_cast<double>(i) / static_cast<double>(s.data.size());

    xct::Sinogram noisy = xct::add_noise(s, 1e12, 7);
    double max_dev = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i)
        max_dev = std::max(max_dev, std::abs(noisy.data[i] - s.data[i]));
    REQUIRE(max_dev < 1e-4);
}

TEST_CASE("noise is deterministic per seed and per bin") {
    xct::Geometry g = xct::make_geometry(xct::GeometryKind::parallel, 2, 3.14159, 0.1);
    xct::Sinogram s(g, 64, 1.2);

    xct::Sinogram a = xct::add_noise(s, 1e4, 5);
    xct::Sinogram b = xct::add_noise(s, 1e4, 5);
    REQUIRE(a.data == b.data);
    xct::Sinogram c = xct::add_noise(s, 1e4, 6);
    REQUIRE(a.data != c.data);

    // counter-based streams: a shared prefix of bins gets identical draws
    xct::Geometry g3 = xct::make_geometry(xct::GeometryKind::parallel, 3, 3.14159, 0.1);
    xct::Sinogram longer(g3, 64, 1.2);
    xct::Sinogram d = xct::add_noise(longer, 1e4, 5);
    for (std::size_t i = 0; i < a.data.size(); ++i) REQUIRE(d.data[i] == a.data[i]);
}

TEST_CASE("zero-attenuation bins stay unbiased") {
    xct::Geometry g = xct::make_geometry(xct::GeometryKind::parallel, 100, 3.14159, 0.1);
    xct::Sinogram s(g, 1000); // p = 0 everywhere
    xct::Sinogram noisy = xct::add_noise(s, 1e4, 11);
    double mean = 0.0;
    for (double v : noisy.data) mean += v;
    mean /= static_cast<double>(noisy.data.size());
    REQUIRE(std::abs(mean) < 3e-3);
}

TEST_CASE("opaque bins clamp to the single-count floor") {
    xct::Geometry g = xct::make_geometry(xct::GeometryKind::parallel, 1, 3.14159, 0.1);
    xct::Sinogram s(g, 8, 40.0); // lambda ~ 4e-14: every draw is 0 counts
    xct::Sinogram noisy = xct::add_noise(s, 1e4, 3);
    for (double v : noisy.data) REQUIRE(v == Approx(std::log(1e4)).epsilon(1e-12));
    REQUIRE_THROWS_AS(xct::add_noise(s, 0.0, 3), xct::Error);
}

TEST_CASE("simulate_scan ties the three sinograms together") {
    xct::PhantomSpec spec;
    spec.image_size = 64;
    spec.pixel_size = 0.2;
    spec.base_radius = 4.0;
    xct::Image2D disk = xct::gen_disk(spec);
    xct::Geometry g = xct::make_geometry(xct::GeometryKind::parallel, 12, 3.14159, 0.2);

    xct::BhParams mono{2.0, 0.3, 0.3};
    xct::ScanResult r = xct::simulate_scan(disk, g, 72, mono, {});
    for (std::size_t i = 0; i < r.bh.data.size(); ++i)
        REQUIRE(r.bh.data[i] == Approx(r.ideal.data[i]).margin(1e-12));
    for (std::size_t i = 0; i < r.ideal.data.size(); ++i)
        REQUIRE(r.ideal.data[i] == Approx(0.3 * r.thickness.data[i]).margin(1e-12));

    xct::BhParams hard = xct::canonical_bh_params();
    xct::ScanResult clean = xct::simulate_scan(disk, g, 72, hard, {});
    for (std::size_t i = 0; i < clean.bh.data.size(); ++i)
        REQUIRE(clean.bh.data[i] <= clean.ideal.data[i] + 1e-12);

    xct::NoiseSpec noise;
    noise.i0 = 1e5;
    noise.seed = 9;
    xct::ScanResult noisy = xct::simulate_scan(disk, g, 72, hard, noise);
    REQUIRE(noisy.ideal.data == clean.ideal.data);
    REQUIRE(noisy.thickness.data == clean.thickness.data);
    REQUIRE(noisy.bh.data != clean.bh.data);

    xct::Image2D bad(4, 4, 0.2, 1.5);
    REQUIRE_THROWS_AS(xct::simulate_scan(bad, g, 8, hard, {}), xct::Error);
}

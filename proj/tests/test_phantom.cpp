#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "xct/phantom.hpp"

using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

// 4-connected flood fill; counts zero-valued regions that do not touch the
// image border (pores are strictly interior, the background is not).
int interior_zero_regions(const xct::Image2D& img) {
    const int w = img.width, h = img.height;
    std::vector<int> label(static_cast<std::size_t>(w) * h, 0);
    auto is_zero = [&](int y, int x) { return img.at(y, x) < 0.5; };

    int regions = 0;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            if (!is_zero(y0, x0) || label[static_cast<std::size_t>(y0) * w + x0]) continue;
            bool touches_border = false;
            std::vector<std::pair<int, int>> stack{{y0, x0}};
            label[static_cast<std::size_t>(y0) * w + x0] = 1;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                if (y == 0 || x == 0 || y == h - 1 || x == w - 1) touches_border = true;
                const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    int ny = y + dy[k], nx = x + dx[k];
                    if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
                    auto idx = static_cast<std::size_t>(ny) * w + nx;
                    if (!label[idx] && is_zero(ny, nx)) {
                        label[idx] = 1;
                        stack.push_back({ny, nx});
                    }
                }
            }
            if (!touches_border) ++regions;
        }
    }
    return regions;
}

} // namespace

TEST_CASE("gen_disk area matches the analytic disk within 1%") {
    xct::PhantomSpec spec;
    spec.image_size = 256;
    spec.pixel_size = 0.1;
    spec.base_radius = 7.5;
    xct::Image2D img = xct::gen_disk(spec);

    double area = 0.0;
    for (double v : img.data) area += v;
    area *= spec.pixel_size * spec.pixel_size;
    double truth = 3.14159265358979323846 * spec.base_radius * spec.base_radius;
    REQUIRE(std::abs(area - truth) / truth < 0.01);
}

TEST_CASE("gen_disk degenerate and full-coverage pixels") {
    xct::PhantomSpec spec;
    spec.image_size = 64;
    spec.pixel_size = 0.1;
    spec.base_radius = 0.0;
    xct::Image2D empty = xct::gen_disk(spec);
    for (double v : empty.data) REQUIRE(v == 0.0);

    spec.base_radius = 2.0;
    xct::Image2D img = xct::gen_disk(spec);
    // image center lies between pixels 31 and 32; both are fully covered
    REQUIRE(img.at(32, 32) == 1.0);
    for (double v : img.data) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("invalid specs are rejected") {
    xct::PhantomSpec spec;
    spec.image_size = 64;
    spec.pixel_size = 0.1;
    spec.base_radius = 3.3; // extent/2 = 3.2
    REQUIRE_THROWS_WITH(xct::gen_disk(spec), ContainsSubstring("base_radius"));

    spec.base_radius = 2.0;
    spec.num_pores = 1;
    spec.pore_radius_lo = 0.4;
    spec.pore_radius_hi = 0.6; // >= base_radius/4
    REQUIRE_THROWS_AS(xct::gen_component(spec), xct::Error);
}

TEST_CASE("gen_component with empty feature set equals gen_disk") {
    xct::PhantomSpec spec;
    spec.image_size = 128;
    spec.pixel_size = 0.1;
    spec.base_radius = 5.0;
    spec.seed = 9;
    REQUIRE(xct::gen_component(spec).data == xct::gen_disk(spec).data);
}

TEST_CASE("gen_component is deterministic per seed") {
    xct::PhantomSpec spec;
    spec.image_size = 128;
    spec.pixel_size = 0.1;
    spec.base_radius = 5.0;
    spec.num_pores = 3;
    spec.pore_radius_lo = 0.3;
    spec.pore_radius_hi = 0.6;
    spec.fins = true;
    spec.rods = true;
    spec.notches = true;
    spec.seed = 21;

    xct::Image2D a = xct::gen_component(spec);
    xct::Image2D b = xct::gen_component(spec);
    REQUIRE(a.data == b.data);

    spec.seed = 22;
    REQUIRE(xct::gen_component(spec).data != a.data);

    for (double v : a.data) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("num_pores=5 yields exactly 5 interior voids") {
    xct::PhantomSpec spec;
    spec.image_size = 256;
    spec.pixel_size = 0.1;
    spec.base_radius = 7.5;
    spec.num_pores = 5;
    spec.pore_radius_lo = 0.3;
    spec.pore_radius_hi = 0.5;
    spec.seed = 4;
    xct::Image2D img = xct::gen_component(spec);
    REQUIRE(interior_zero_regions(img) == 5);
}

TEST_CASE("impossible pore placement fails with the retry budget named") {
    xct::PhantomSpec spec;
    spec.image_size = 128;
    spec.pixel_size = 0.1;
    spec.base_radius = 2.0;
    spec.num_pores = 50;
    spec.pore_radius_lo = 0.45;
    spec.pore_radius_hi = 0.49;
    spec.seed = 1;
    REQUIRE_THROWS_WITH(xct::gen_component(spec), ContainsSubstring("budget"));
}

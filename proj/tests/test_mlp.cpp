#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "xct/mlp.hpp"
#include "xct/optim.hpp"
#include "xct/rng.hpp"

using Catch::Approx;

TEST_CASE("make_mlp is deterministic and shaped correctly") {
    auto a = xct::make_mlp<float>({2, 8, 3}, 5);
    auto b = xct::make_mlp<float>({2, 8, 3}, 5);
    REQUIRE(a.params == b.params);
    REQUIRE(a.param_count() == 2 * 8 + 8 + 8 * 3 + 3);
    a.validate();

    auto c = xct::make_mlp<float>({2, 8, 3}, 6);
    REQUIRE(a.params != c.params);
}

TEST_CASE("analytic gradients match central finite differences") {
    auto mlp = xct::make_mlp<double>({2, 8, 8, 3}, 11);
    xct::Rng rng(12);
    const std::size_t batch = 3;
    std::vector<double> x(batch * 2), t(batch * 3);
    for (auto& v : x) v = rng.normal();
    for (auto& v : t) v = rng.normal();

    std::vector<double> grads;
    xct::mlp_loss_grad(mlp, x, t, batch, &grads);
    REQUIRE(grads.size() == mlp.params.size());

    const double h = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < mlp.params.size(); ++i) {
        auto probe = mlp;
        probe.params[i] += h;
        double up = xct::mlp_loss_grad(probe, x, t, batch,
                                       static_cast<std::vector<double>*>(nullptr));
        probe.params[i] -= 2.0 * h;
        double down = xct::mlp_loss_grad(probe, x, t, batch,
                                         static_cast<std::vector<double>*>(nullptr));
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(grads[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - grads[i]) / denom);
    }
    REQUIRE(worst <= 1e-4);
}

TEST_CASE("adam memorizes a tiny dataset") {
    auto mlp = xct::make_mlp<double>({2, 16, 3}, 3);
    std::vector<double> x = {0.3, -0.7, 1.1, 0.2, -0.5, 0.9};
    std::vector<double> t = {0.1, 0.4, -0.2, 0.8, -0.6, 0.3, 0.0, 0.5, -0.1};

    std::vector<double> grads;
    double loss = 1e300;
    // coarse stage, then a fine stage so the iterates stop orbiting the minimum
    for (double lr : {1e-2, 1e-3}) {
        xct::Adam<double> opt(mlp.params.size(), lr);
        for (int step = 0; step < 3000; ++step) {
            loss = xct::mlp_loss_grad(mlp, x, t, 3, &grads);
            opt.step(mlp.params, grads);
        }
    }
    REQUIRE(loss < 1e-6);
}

TEST_CASE("forward and predict honor the z-score metadata") {
    xct::Mlp<double> mlp;
    mlp.sizes = {1, 1};
    mlp.params = {2.0, 0.5}; // W = 2, b = 0.5
    mlp.in_shift = {1.0};
    mlp.in_scale = {2.0};
    mlp.out_shift = {10.0};
    mlp.out_scale = {4.0};
    mlp.validate();

    double xn = 1.0, yn = 0.0;
    mlp.forward(&xn, &yn);
    REQUIRE(yn == Approx(2.5)); // linear output layer, no ReLU

    double x_raw = 3.0, y_raw = 0.0;
    mlp.predict(&x_raw, &y_raw);
    REQUIRE(y_raw == Approx(10.0 + 4.0 * 2.5));
}

TEST_CASE("model JSON round-trips parameters and normalization") {
    auto mlp = xct::make_mlp<float>({2, 6, 3}, 7);
    mlp.in_shift = {0.5, 1.5};
    mlp.in_scale = {2.0, 3.0};
    mlp.out_shift = {1.0, 2.0, 3.0};
    mlp.out_scale = {4.0, 5.0, 6.0};

    auto j = xct::mlp_to_json(mlp);
    auto back = xct::mlp_from_json<float>(j);
    REQUIRE(back.sizes == mlp.sizes);
    REQUIRE(back.params == mlp.params);
    REQUIRE(back.in_shift == mlp.in_shift);
    REQUIRE(back.out_scale == mlp.out_scale);

    float x[2] = {0.3f, -0.2f}, y1[3], y2[3];
    mlp.forward(x, y1);
    back.forward(x, y2);
    REQUIRE(y1[0] == y2[0]);
    REQUIRE(y1[1] == y2[1]);
    REQUIRE(y1[2] == y2[2]);

    auto bad = j;
    bad["weights"][0] = std::vector<double>{1.0, 2.0, 3.0};
    REQUIRE_THROWS_WITH(xct::mlp_from_json<float>(bad),
                        Catch::Matchers::ContainsSubstring("layer"));
}

TEST_CASE("loss matches a hand computation on a linear net") {
    xct::Mlp<double> mlp;
    mlp.sizes = {1, 1};
    mlp.params = {3.0, -1.0};
    mlp.in_shift = {0.0};
    mlp.in_scale = {1.0};
    mlp.out_shift = {0.0};
    mlp.out_scale = {1.0};

    // predictions: 3x - 1 for x in {1, 2}; targets 0 -> loss = (2^2 + 5^2)/2
    std::vector<double> x = {1.0, 2.0}, t = {0.0, 0.0};
    double loss =
        xct::mlp_loss_grad(mlp, x, t, 2, static_cast<std::vector<double>*>(nullptr));
    REQUIRE(loss == Approx((4.0 + 25.0) / 2.0).epsilon(1e-12));
}

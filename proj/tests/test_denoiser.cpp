#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "xct/denoiser.hpp"
#include "xct/rng.hpp"

using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

xct::Image2D random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    xct::Image2D img(w, h, 0.1);
    xct::Rng rng(seed);
    for (auto& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

} // namespace

TEST_CASE("extract_patch_pairs produces the expected grid counts") {
    auto in = random_image(64, 64, 1);
    auto tg = random_image(64, 64, 2);

    auto plain = xct::extract_patch_pairs<float>(in, tg, 32, 32, 5, false);
    REQUIRE(plain.size() == 4);
    REQUIRE(plain.patch == 32);
    plain.validate();

    auto aug = xct::extract_patch_pairs<float>(in, tg, 32, 32, 5, true);
    REQUIRE(aug.size() == 8);
    aug.validate();

    auto whole = xct::extract_patch_pairs<float>(in, tg, 64, 64, 5, false);
    REQUIRE(whole.size() == 1);

    // stride smaller than patch gives overlapping windows
    auto dense = xct::extract_patch_pairs<float>(in, tg, 32, 16, 5, false);
    REQUIRE(dense.size() == 9);
}

TEST_CASE("grid patches copy the underlying windows") {
    auto in = random_image(48, 48, 3);
    auto tg = random_image(48, 48, 4);
    auto ds = xct::extract_patch_pairs<float>(in, tg, 16, 16, 7, false);
    REQUIRE(ds.size() == 9);

    // patch k covers rows/cols of window (k / 3, k % 3)
    for (std::size_t k = 0; k < ds.size(); ++k) {
        int oy = static_cast<int>(k) / 3 * 16;
        int ox = static_cast<int>(k) % 3 * 16;
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                std::size_t di = static_cast<std::size_t>(y) * 16 + x;
                REQUIRE(ds.inputs[k][di] == static_cast<float>(in.at(oy + y, ox + x)));
                REQUIRE(ds.targets[k][di] == static_cast<float>(tg.at(oy + y, ox + x)));
            }
        }
    }
}

TEST_CASE("augmented pairs apply the same dihedral op to input and target") {
    auto in = random_image(32, 32, 8);
    auto tg = random_image(32, 32, 9);
    auto ds = xct::extract_patch_pairs<float>(in, tg, 16, 16, 11, true);
    REQUIRE(ds.size() == 8);

    for (std::size_t i = 0; i < 4; ++i) {
        std::size_t a = 4 + i;
        int found = -1;
        for (int op = 1; op <= 7; ++op) {
            if (xct::denoiser_detail::apply_dihedral(ds.inputs[i], 16, op) == ds.inputs[a]) {
                REQUIRE(found == -1); // random patches make the op unique
                found = op;
            }
        }
        REQUIRE(found != -1);
        REQUIRE(xct::denoiser_detail::apply_dihedral(ds.targets[i], 16, found) == ds.targets[a]);
    }
}

TEST_CASE("extract_patch_pairs is deterministic and validates shapes") {
    auto in = random_image(32, 32, 12);
    auto tg = random_image(32, 32, 13);

    auto a = xct::extract_patch_pairs<float>(in, tg, 16, 16, 20, true);
    auto b = xct::extract_patch_pairs<float>(in, tg, 16, 16, 20, true);
    REQUIRE(a.inputs == b.inputs);
    REQUIRE(a.targets == b.targets);

    auto c = xct::extract_patch_pairs<float>(in, tg, 16, 16, 21, true);
    bool same = true;
    for (std::size_t i = 4; i < 8 && same; ++i) same = a.inputs[i] == c.inputs[i];
    REQUIRE_FALSE(same);

    auto small = random_image(16, 32, 14);
    REQUIRE_THROWS_WITH(xct::extract_patch_pairs<float>(in, small, 16, 16, 0, false),
                        ContainsSubstring("sizes differ"));
    REQUIRE_THROWS_WITH(xct::extract_patch_pairs<float>(in, tg, 64, 16, 0, false),
                        ContainsSubstring("larger than image"));
    REQUIRE_THROWS_AS(xct::extract_patch_pairs<float>(in, tg, 16, 0, 0, false), xct::Error);
}

TEST_CASE("train_denoiser fits the identity task") {
    // smooth low-frequency patches: an identity a conv net can actually learn
    xct::Image2D in(64, 64, 0.1);
    xct::Rng rng(30);
    for (int k = 0; k < 6; ++k) {
        double amp = rng.uniform(0.2, 0.5);
        double fx = rng.uniform(0.02, 0.12), fy = rng.uniform(0.02, 0.12);
        double ph = rng.uniform(0.0, 6.28);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                in.at(y, x) += amp * std::sin(6.283185307179586 * (fx * x + fy * y) + ph);
    }
    auto ds = xct::extract_patch_pairs<float>(in, in, 16, 16, 31, false);
    REQUIRE(ds.size() == 16);

    xct::DenoiserTrainConfig cfg;
    cfg.scales = 2;
    cfg.base_channels = 8;
    cfg.epochs = 60;
    cfg.batch_size = 8;
    cfg.learning_rate = 2e-3;
    cfg.seed = 32;
    auto r = xct::train_denoiser(ds, cfg);

    REQUIRE(r.epoch_loss.size() <= 60);
    REQUIRE_FALSE(r.epoch_loss.empty());
    for (std::size_t e = 1; e < r.epoch_loss.size(); ++e)
        REQUIRE(r.epoch_loss[e] <= r.epoch_loss[e - 1] + 1e-12);
    REQUIRE(r.final_loss == r.epoch_loss.back());

    double initial = xct::cnn_dataset_loss(xct::make_cnn<float>(2, 8, cfg.seed), ds);
    REQUIRE(r.final_loss < initial / 10.0);

    // variance-matched floor: what a mean predictor would leave behind
    double mean = 0.0, var = 0.0;
    for (const auto& p : ds.targets)
        for (float v : p) mean += v;
    mean /= static_cast<double>(ds.size() * 256);
    for (const auto& p : ds.targets)
        for (float v : p) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ds.size() * 256);
    REQUIRE(r.final_loss < var);
}

TEST_CASE("train_denoiser rejects bad configurations") {
    auto in = random_image(60, 60, 40);
    auto ds = xct::extract_patch_pairs<float>(in, in, 30, 30, 41, false);

    xct::DenoiserTrainConfig cfg;
    cfg.scales = 3;
    cfg.epochs = 1;
    REQUIRE_THROWS_WITH(xct::train_denoiser(ds, cfg), ContainsSubstring("divisible"));

    xct::PatchDataset<float> empty;
    empty.patch = 16;
    cfg.scales = 2;
    REQUIRE_THROWS_WITH(xct::train_denoiser(empty, cfg), ContainsSubstring("empty"));

    cfg.epochs = 0;
    REQUIRE_THROWS_AS(xct::train_denoiser(ds, cfg), xct::Error);
}

TEST_CASE("denoise pads, crops, and preserves image metadata") {
    auto net = xct::make_cnn<float>(2, 4, 50);
    auto img = random_image(50, 50, 51);
    img.pixel_size = 0.25;

    auto out = xct::denoise(net, img);
    REQUIRE(out.width == 50);
    REQUIRE(out.height == 50);
    REQUIRE(out.pixel_size == 0.25);
    out.validate();

    auto again = xct::denoise(net, img);
    REQUIRE(out.data == again.data);
}

TEST_CASE("denoise maps zero to zero and is positively homogeneous") {
    auto net = xct::make_cnn<float>(2, 4, 52);

    xct::Image2D zero(50, 50, 0.1, 0.0);
    auto z = xct::denoise(net, zero);
    for (double v : z.data) REQUIRE(v == 0.0);

    auto img = random_image(50, 50, 53, -0.5, 1.0);
    auto base = xct::denoise(net, img);
    for (double a : {0.5, 2.0, 10.0}) {
        auto scaled_in = img;
        for (auto& v : scaled_in.data) v *= a;
        auto scaled = xct::denoise(net, scaled_in);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < base.size(); ++i) {
            double want = a * base.data[i];
            num += (scaled.data[i] - want) * (scaled.data[i] - want);
            den += want * want;
        }
        REQUIRE(std::sqrt(num) / std::sqrt(den) < 1e-5);
    }
}

TEST_CASE("denoise rejects images smaller than the padding") {
    auto net = xct::make_cnn<float>(2, 2, 54);
    xct::Image2D tiny(2, 2, 0.1, 1.0);
    REQUIRE_THROWS_WITH(xct::denoise(net, tiny), ContainsSubstring("too small"));
}

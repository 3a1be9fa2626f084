#ifndef XCT_DENOISER_HPP
#define XCT_DENOISER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xct/cnn.hpp"
#include "xct/core.hpp"
#include "xct/optim.hpp"
#include "xct/rng.hpp"

namespace xct {

template <class T>
struct PatchDataset {
    int patch = 0;
    std::vector<std::vector<T>> inputs;   // each patch*patch, row-major
    std::vector<std::vector<T>> targets;

    std::size_t size() const { return inputs.size(); }

    void validate() const {
        require(patch > 0, "PatchDataset: patch size must be positive");
        require(inputs.size() == targets.size(), "PatchDataset: input/target count mismatch");
        std::size_t n = static_cast<std::size_t>(patch) * patch;
        for (const auto& p : inputs)
            require(p.size() == n, "PatchDataset: input patch has wrong length");
        for (const auto& p : targets)
            require(p.size() == n, "PatchDataset: target patch has wrong length");
    }
};

namespace denoiser_detail {

// ops 1..7: the non-identity elements of the dihedral group of the square
template <class T>
std::vector<T> apply_dihedral(const std::vector<T>& src, int n, int op) {
    std::vector<T> dst(src.size());
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            int sy = y, sx = x;
            switch (op) {
                case 1: sy = x; sx = n - 1 - y; break;          // rot90
                case 2: sy = n - 1 - y; sx = n - 1 - x; break;  // rot180
                case 3: sy = n - 1 - x; sx = y; break;          // rot270
                case 4: sy = y; sx = n - 1 - x; break;          // flip x
                case 5: sy = n - 1 - y; sx = x; break;          // flip y
                case 6: sy = x; sx = y; break;                  // transpose
                case 7: sy = n - 1 - x; sx = n - 1 - y; break;  // anti-transpose
                default: break;
            }
            dst[static_cast<std::size_t>(y) * n + x] =
                src[static_cast<std::size_t>(sy) * n + sx];
        }
    }
    return dst;
}

} // namespace denoiser_detail

// Cuts aligned patches from (input, target) on a regular grid, then appends
// one randomly flipped/rotated copy of each grid patch when augment is set.
template <class T = float>
PatchDataset<T> extract_patch_pairs(const Image2D& input, const Image2D& target, int patch,
                                    int stride, std::uint64_t seed, bool augment = true) {
    input.validate();
    target.validate();
    require(input.width == target.width && input.height == target.height,
            "extract_patch_pairs: input and target sizes differ");
    require(patch > 0 && stride > 0, "extract_patch_pairs: patch and stride must be positive");
    require(patch <= input.width && patch <= input.height,
            "extract_patch_pairs: patch larger than image");

    PatchDataset<T> ds;
    ds.patch = patch;
    for (int y = 0; y + patch <= input.height; y += stride) {
        for (int x = 0; x + patch <= input.width; x += stride) {
            std::vector<T> pin(static_cast<std::size_t>(patch) * patch);
            std::vector<T> ptg(pin.size());
            for (int py = 0; py < patch; ++py) {
                for (int px = 0; px < patch; ++px) {
                    std::size_t di = static_cast<std::size_t>(py) * patch + px;
                    pin[di] = static_cast<T>(input.at(y + py, x + px));
                    ptg[di] = static_cast<T>(target.at(y + py, x + px));
                }
            }
            ds.inputs.push_back(std::move(pin));
            ds.targets.push_back(std::move(ptg));
        }
    }

    if (augment) {
        Rng rng(seed);
        std::size_t base = ds.inputs.size();
        for (std::size_t i = 0; i < base; ++i) {
            int op = 1 + static_cast<int>(rng.below(7));
            ds.inputs.push_back(denoiser_detail::apply_dihedral(ds.inputs[i], patch, op));
            ds.targets.push_back(denoiser_detail::apply_dihedral(ds.targets[i], patch, op));
        }
    }
    return ds;
}

// Mean-squared-error loss over one batch of patch indices; accumulates
// parameter gradients into grads (zeroed here).
template <class T>
double cnn_loss_grad(const Cnn<T>& net, const PatchDataset<T>& ds,
                     const std::vector<std::size_t>& batch, std::vector<T>* grads) {
    require(!batch.empty(), "cnn_loss_grad: empty batch");
    if (grads) {
        grads->assign(net.params.size(), T(0));
    }
    std::size_t npx = static_cast<std::size_t>(ds.patch) * ds.patch;
    double denom = static_cast<double>(batch.size()) * static_cast<double>(npx);
    double loss = 0.0;
    CnnTape<T> tape;
    for (std::size_t idx : batch) {
        require(idx < ds.size(), "cnn_loss_grad: batch index out of range");
        Tensor3<T> in(1, ds.patch, ds.patch);
        in.v = ds.inputs[idx];
        cnn_forward(net, in, tape);
        Tensor3<T> dout(1, ds.patch, ds.patch);
        const std::vector<T>& tgt = ds.targets[idx];
        for (std::size_t i = 0; i < npx; ++i) {
            double r = static_cast<double>(tape.output.v[i]) - static_cast<double>(tgt[i]);
            loss += r * r;
            dout.v[i] = static_cast<T>(2.0 * r / denom);
        }
        if (grads) cnn_backward(net, tape, std::move(dout), *grads);
    }
    return loss / denom;
}

template <class T>
double cnn_dataset_loss(const Cnn<T>& net, const PatchDataset<T>& ds) {
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::size_t npx = static_cast<std::size_t>(ds.patch) * ds.patch;
    double loss = 0.0;
    CnnTape<T> tape;
    for (std::size_t idx : all) {
        Tensor3<T> in(1, ds.patch, ds.patch);
        in.v = ds.inputs[idx];
        cnn_forward(net, in, tape);
        for (std::size_t i = 0; i < npx; ++i) {
            double r = static_cast<double>(tape.output.v[i]) -
                       static_cast<double>(ds.targets[idx][i]);
            loss += r * r;
        }
    }
    return loss / (static_cast<double>(ds.size()) * static_cast<double>(npx));
}

struct DenoiserTrainConfig {
    int scales = 2;
    int base_channels = 16;
    int epochs = 30;
    int batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
};

template <class T>
struct DenoiserTrainResult {
    Cnn<T> net;
    std::vector<double> epoch_loss;  // full-dataset loss after each epoch
    double final_loss = 0.0;
};

// Adam on patch MSE. After each epoch the full-dataset loss is evaluated;
// if it got worse the step is rolled back to the best parameters and the
// learning rate halved, so the recorded trace is non-increasing.
template <class T>
DenoiserTrainResult<T> train_denoiser(const PatchDataset<T>& ds, const DenoiserTrainConfig& cfg) {
    ds.validate();
    require(ds.size() > 0, "train_denoiser: empty dataset");
    require(cfg.epochs > 0, "train_denoiser: epochs must be positive");
    require(cfg.batch_size > 0, "train_denoiser: batch_size must be positive");
    require(cfg.learning_rate > 0.0, "train_denoiser: learning_rate must be positive");
    int div = 1 << (cfg.scales - 1);
    require(ds.patch % div == 0, "train_denoiser: patch size must be divisible by the pooling factor");

    DenoiserTrainResult<T> res;
    res.net = make_cnn<T>(cfg.scales, cfg.base_channels, cfg.seed);
    Adam<T> opt(res.net.params.size(), cfg.learning_rate);
    Rng shuffle_rng(cfg.seed ^ 0x5eedf00dull);

    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<T> grads(res.net.params.size());

    std::vector<T> best_params = res.net.params;
    double best_loss = cnn_dataset_loss(res.net, ds);
    double lr = cfg.learning_rate;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            double loss = cnn_loss_grad(res.net, ds, batch, &grads);
            require(std::isfinite(loss),
                    "train_denoiser: non-finite loss at epoch " + std::to_string(epoch));
            opt.step(res.net.params, grads);
        }
        double epoch_loss = cnn_dataset_loss(res.net, ds);
        require(std::isfinite(epoch_loss),
                "train_denoiser: non-finite loss at epoch " + std::to_string(epoch));
        if (epoch_loss <= best_loss) {
            best_loss = epoch_loss;
            best_params = res.net.params;
        } else {
            res.net.params = best_params;
            lr *= 0.5;
            opt = Adam<T>(res.net.params.size(), lr);
            if (lr < 1e-8) {
                res.epoch_loss.push_back(best_loss);
                break;
            }
        }
        res.epoch_loss.push_back(best_loss);
    }
    res.net.params = best_params;
    res.final_loss = best_loss;
    return res;
}

// Runs the network over a full image, reflect-padding the bottom/right edges
// so the spatial size divides the pooling factor, then cropping back.
template <class T>
Image2D denoise(const Cnn<T>& net, const Image2D& img) {
    net.validate();
    img.validate();
    int div = 1 << net.scales;
    int ph = (div - img.height % div) % div;
    int pw = (div - img.width % div) % div;
    require(ph < img.height && pw < img.width, "denoise: image too small to pad");

    Tensor3<T> in(1, img.height + ph, img.width + pw);
    for (int y = 0; y < in.h; ++y) {
        int sy = y < img.height ? y : 2 * img.height - 1 - y;
        for (int x = 0; x < in.w; ++x) {
            int sx = x < img.width ? x : 2 * img.width - 1 - x;
            in.v[static_cast<std::size_t>(y) * in.w + x] = static_cast<T>(img.at(sy, sx));
        }
    }
    Tensor3<T> out = cnn_forward(net, in);
    Image2D res;
    res.width = img.width;
    res.height = img.height;
    res.pixel_size = img.pixel_size;
    res.data.resize(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            res.data[static_cast<std::size_t>(y) * img.width + x] =
                static_cast<double>(out.v[static_cast<std::size_t>(y) * out.w + x]);
    return res;
}

} // namespace xct

#endif

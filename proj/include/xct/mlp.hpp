#ifndef XCT_MLP_HPP
#define XCT_MLP_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "xct/core.hpp"
#include "xct/rng.hpp"

// Fully connected network with ReLU hidden layers and a linear output,
// operating on z-scored inputs and targets. Weights live in one flat
// parameter vector (layer by layer, W then b) so the optimizer and the
// finite-difference tests can treat the network as a plain vector function.

namespace xct {

template <class T>
struct Mlp {
    std::vector<int> sizes;      // e.g. {2, 64, 64, 64, 3}
    std::vector<T> params;       // per layer: W (out x in, row-major), then b (out)
    std::vector<double> in_shift, in_scale;   // feature z-score stats
    std::vector<double> out_shift, out_scale; // target z-score stats

    int input_dim() const { return sizes.front(); }
    int output_dim() const { return sizes.back(); }
    int num_layers() const { return static_cast<int>(sizes.size()) - 1; }

    std::size_t layer_offset(int layer) const {
        std::size_t off = 0;
        for (int l = 0; l < layer; ++l)
            off += static_cast<std::size_t>(sizes[l + 1]) * sizes[l] + sizes[l + 1];
        return off;
    }
    std::size_t param_count() const { return layer_offset(num_layers()); }

    const T* weight(int layer) const { return params.data() + layer_offset(layer); }
    T* weight(int layer) { return params.data() + layer_offset(layer); }
    const T* bias(int layer) const {
        return weight(layer) + static_cast<std::size_t>(sizes[layer + 1]) * sizes[layer];
    }
    T* bias(int layer) {
        return weight(layer) + static_cast<std::size_t>(sizes[layer + 1]) * sizes[layer];
    }

    void validate() const {
        require(sizes.size() >= 2, "Mlp: need at least input and output layer");
        for (int s : sizes)
            require(s > 0, "Mlp: nonpositive layer size");
        require(params.size() == param_count(), "Mlp: parameter vector length mismatch");
        require(in_shift.size() == static_cast<std::size_t>(input_dim()) &&
                    in_scale.size() == in_shift.size() &&
                    out_shift.size() == static_cast<std::size_t>(output_dim()) &&
                    out_scale.size() == out_shift.size(),
                "Mlp: normalization vector length mismatch");
        for (double s : in_scale)
            require(s > 0.0, "Mlp: in_scale must be > 0");
        for (double s : out_scale)
            require(s > 0.0, "Mlp: out_scale must be > 0");
    }

    // forward pass in normalized space, single sample
    void forward(const T* x, T* y) const {
        std::vector<T> cur(x, x + input_dim()), next;
        for (int l = 0; l < num_layers(); ++l) {
            int in = sizes[l], out = sizes[l + 1];
            next.assign(static_cast<std::size_t>(out), T(0));
            const T* w = weight(l);
            const T* b = bias(l);
            for (int o = 0; o < out; ++o) {
                T acc = b[o];
                const T* wr = w + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    acc += wr[i] * cur[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(o)] =
                    (l + 1 < num_layers() && acc < T(0)) ? T(0) : acc;
            }
            cur.swap(next);
        }
        for (int o = 0; o < output_dim(); ++o)
            y[o] = cur[static_cast<std::size_t>(o)];
    }

    // physical-units forward pass: z-score inputs, run, un-z-score outputs
    void predict(const double* x_raw, double* y_raw) const {
        std::vector<T> x(static_cast<std::size_t>(input_dim()));
        std::vector<T> y(static_cast<std::size_t>(output_dim()));
        for (int i = 0; i < input_dim(); ++i)
            x[static_cast<std::size_t>(i)] =
                static_cast<T>((x_raw[i] - in_shift[static_cast<std::size_t>(i)]) /
                               in_scale[static_cast<std::size_t>(i)]);
        forward(x.data(), y.data());
        for (int o = 0; o < output_dim(); ++o)
            y_raw[o] = static_cast<double>(y[static_cast<std::size_t>(o)]) *
                           out_scale[static_cast<std::size_t>(o)] +
                       out_shift[static_cast<std::size_t>(o)];
    }
};

template <class T>
Mlp<T> make_mlp(const std::vector<int>& sizes, std::uint64_t seed) {
    Mlp<T> mlp;
    mlp.sizes = sizes;
    mlp.in_shift.assign(static_cast<std::size_t>(sizes.front()), 0.0);
    mlp.in_scale.assign(static_cast<std::size_t>(sizes.front()), 1.0);
    mlp.out_shift.assign(static_cast<std::size_t>(sizes.back()), 0.0);
    mlp.out_scale.assign(static_cast<std::size_t>(sizes.back()), 1.0);
    mlp.params.assign(mlp.param_count(), T(0));
    Rng rng(seed);
    for (int l = 0; l < mlp.num_layers(); ++l) {
        int in = sizes[static_cast<std::size_t>(l)];
        int out = sizes[static_cast<std::size_t>(l) + 1];
        double std_dev = std::sqrt(2.0 / in); // He initialization
        T* w = mlp.weight(l);
        for (int i = 0; i < out * in; ++i)
            w[i] = static_cast<T>(rng.normal() * std_dev);
        // biases stay zero
    }
    return mlp;
}

// Mean squared error over a batch (normalized space) and, optionally, its
// gradient with respect to every parameter (same layout as params).
// features: batch x input_dim row-major, targets: batch x output_dim.
template <class T>
double mlp_loss_grad(const Mlp<T>& mlp, const std::vector<T>& features,
                     const std::vector<T>& targets, std::size_t batch,
                     std::vector<T>* grads_out) {
    int n_layers = mlp.num_layers();
    int out_dim = mlp.output_dim();

    // activations[l]: batch x sizes[l]
    std::vector<std::vector<T>> acts(static_cast<std::size_t>(n_layers) + 1);
    acts[0] = features;
    for (int l = 0; l < n_layers; ++l) {
        int in = mlp.sizes[static_cast<std::size_t>(l)];
        int out = mlp.sizes[static_cast<std::size_t>(l) + 1];
        auto& a = acts[static_cast<std::size_t>(l)];
        auto& z = acts[static_cast<std::size_t>(l) + 1];
        z.assign(batch * static_cast<std::size_t>(out), T(0));
        const T* w = mlp.weight(l);
        const T* bv = mlp.bias(l);
        bool hidden = l + 1 < n_layers;
        for (std::size_t s = 0; s < batch; ++s) {
            const T* ar = a.data() + s * static_cast<std::size_t>(in);
            T* zr = z.data() + s * static_cast<std::size_t>(out);
            for (int o = 0; o < out; ++o) {
                T acc = bv[o];
                const T* wr = w + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    acc += wr[i] * ar[i];
                zr[o] = (hidden && acc < T(0)) ? T(0) : acc;
            }
        }
    }

    double loss = 0.0;
    const auto& y = acts[static_cast<std::size_t>(n_layers)];
    for (std::size_t i = 0; i < batch * static_cast<std::size_t>(out_dim); ++i) {
        double d = static_cast<double>(y[i]) - static_cast<double>(targets[i]);
        loss += d * d;
    }
    double denom = static_cast<double>(batch) * out_dim;
    loss /= denom;
    if (!grads_out) return loss;

    grads_out->assign(mlp.params.size(), T(0));
    // delta at the output layer
    std::vector<T> delta(batch * static_cast<std::size_t>(out_dim));
    for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] = T(2) * (y[i] - targets[i]) / static_cast<T>(denom);

    for (int l = n_layers - 1; l >= 0; --l) {
        int in = mlp.sizes[static_cast<std::size_t>(l)];
        int out = mlp.sizes[static_cast<std::size_t>(l) + 1];
        const auto& a = acts[static_cast<std::size_t>(l)];
        T* gw = grads_out->data() + mlp.layer_offset(l);
        T* gb = gw + static_cast<std::size_t>(out) * in;
        for (std::size_t s = 0; s < batch; ++s) {
            const T* ar = a.data() + s * static_cast<std::size_t>(in);
            const T* dr = delta.data() + s * static_cast<std::size_t>(out);
            for (int o = 0; o < out; ++o) {
                T d = dr[o];
                if (d == T(0)) continue;
                T* gwr = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    gwr[i] += d * ar[i];
                gb[o] += d;
            }
        }
        if (l == 0) break;
        // propagate: delta_prev = (delta . W) masked by ReLU activity
        std::vector<T> prev(batch * static_cast<std::size_t>(in), T(0));
        const T* w = mlp.weight(l);
        for (std::size_t s = 0; s < batch; ++s) {
            const T* dr = delta.data() + s * static_cast<std::size_t>(out);
            const T* ar = a.data() + s * static_cast<std::size_t>(in);
            T* pr = prev.data() + s * static_cast<std::size_t>(in);
            for (int o = 0; o < out; ++o) {
                T d = dr[o];
                if (d == T(0)) continue;
                const T* wr = w + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    pr[i] += d * wr[i];
            }
            for (int i = 0; i < in; ++i)
                if (ar[i] <= T(0)) pr[i] = T(0); // ReLU mask (a == 0 means inactive)
        }
        delta.swap(prev);
    }
    return loss;
}

template <class T>
nlohmann::json mlp_to_json(const Mlp<T>& mlp) {
    mlp.validate();
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "mlp";
    j["layer_sizes"] = mlp.sizes;
    j["activation"] = "relu";
    std::vector<nlohmann::json> weights, biases;
    for (int l = 0; l < mlp.num_layers(); ++l) {
        int in = mlp.sizes[static_cast<std::size_t>(l)];
        int out = mlp.sizes[static_cast<std::size_t>(l) + 1];
        weights.emplace_back(std::vector<double>(mlp.weight(l), mlp.weight(l) + out * in));
        biases.emplace_back(std::vector<double>(mlp.bias(l), mlp.bias(l) + out));
    }
    j["weights"] = weights;
    j["biases"] = biases;
    j["normalization"] = {{"in_shift", mlp.in_shift},
                          {"in_scale", mlp.in_scale},
                          {"out_shift", mlp.out_shift},
                          {"out_scale", mlp.out_scale}};
    return j;
}

template <class T>
Mlp<T> mlp_from_json(const nlohmann::json& j) {
    require(j.value("type", "") == "mlp", "mlp_from_json: not an mlp model file");
    require(j.value("format_version", 0) == 1, "mlp_from_json: unsupported format_version");
    require(j.value("activation", "") == "relu", "mlp_from_json: unsupported activation");
    Mlp<T> mlp;
    mlp.sizes = j.at("layer_sizes").get<std::vector<int>>();
    mlp.params.assign(mlp.param_count(), T(0));
    auto weights = j.at("weights");
    auto biases = j.at("biases");
    require(static_cast<int>(weights.size()) == mlp.num_layers() &&
                static_cast<int>(biases.size()) == mlp.num_layers(),
            "mlp_from_json: layer count mismatch");
    for (int l = 0; l < mlp.num_layers(); ++l) {
        auto w = weights[static_cast<std::size_t>(l)].get<std::vector<double>>();
        auto b = biases[static_cast<std::size_t>(l)].get<std::vector<double>>();
        int in = mlp.sizes[static_cast<std::size_t>(l)];
        int out = mlp.sizes[static_cast<std::size_t>(l) + 1];
        require(static_cast<int>(w.size()) == out * in && static_cast<int>(b.size()) == out,
                "mlp_from_json: tensor shape mismatch at layer " + std::to_string(l));
        for (int i = 0; i < out * in; ++i)
            mlp.weight(l)[i] = static_cast<T>(w[static_cast<std::size_t>(i)]);
        for (int o = 0; o < out; ++o)
            mlp.bias(l)[o] = static_cast<T>(b[static_cast<std::size_t>(o)]);
    }
    const auto& n = j.at("normalization");
    mlp.in_shift = n.at("in_shift").get<std::vector<double>>();
    mlp.in_scale = n.at("in_scale").get<std::vector<double>>();
    mlp.out_shift = n.at("out_shift").get<std::vector<double>>();
    mlp.out_scale = n.at("out_scale").get<std::vector<double>>();
    mlp.validate();
    return mlp;
}

} // namespace xct

#endif

#ifndef XCT_CNN_HPP
#define XCT_CNN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xct/core.hpp"
#include "xct/rng.hpp"

// Bias-free U-Net: double 3x3 conv blocks, 2x2 max pooling, 2x2 transposed
// convolution upsampling, skip concatenation, final 1x1 conv. No layer adds
// a constant, so the network is positively homogeneous: f(a*x) = a*f(x) for
// a > 0. Normalization layers are omitted for the same reason.

namespace xct {

template <class T>
struct Tensor3 {
    int c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor3() = default;
    Tensor3(int c_, int h_, int w_, T fill = T(0))
        : c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

    T* plane(int ci) { return v.data() + static_cast<std::size_t>(ci) * h * w; }
    const T* plane(int ci) const { return v.data() + static_cast<std::size_t>(ci) * h * w; }
    std::size_t size() const { return v.size(); }
};

namespace cnn_detail {

// out += conv(in, w) with 3x3 kernels and zero padding; w is
// (cout, cin, 3, 3) row-major at wp
template <class T>
void conv3_fwd(const Tensor3<T>& in, const T* wp, Tensor3<T>& out) {
    int hh = in.h, ww = in.w;
    for (int co = 0; co < out.c; ++co) {
        T* op = out.plane(co);
        for (int ci = 0; ci < in.c; ++ci) {
            const T* ip = in.plane(ci);
            const T* wk = wp + (static_cast<std::size_t>(co) * in.c + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    T wv = wk[ky * 3 + kx];
                    int dy = ky - 1, dx = kx - 1;
                    int y0 = std::max(0, -dy), y1 = hh - std::max(0, dy);
                    int x0 = std::max(0, -dx), x1 = ww - std::max(0, dx);
                    for (int y = y0; y < y1; ++y) {
                        T* orow = op + static_cast<std::size_t>(y) * ww;
                        const T* irow = ip + static_cast<std::size_t>(y + dy) * ww + dx;
                        for (int x = x0; x < x1; ++x)
                            orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

template <class T>
void conv3_bwd_input(const Tensor3<T>& dout, const T* wp, Tensor3<T>& din) {
    int hh = din.h, ww = din.w;
    for (int co = 0; co < dout.c; ++co) {
        const T* dp = dout.plane(co);
        for (int ci = 0; ci < din.c; ++ci) {
            T* gp = din.plane(ci);
            const T* wk = wp + (static_cast<std::size_t>(co) * din.c + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    T wv = wk[ky * 3 + kx];
                    int dy = ky - 1, dx = kx - 1;
                    int y0 = std::max(0, -dy), y1 = hh - std::max(0, dy);
                    int x0 = std::max(0, -dx), x1 = ww - std::max(0, dx);
                    for (int y = y0; y < y1; ++y) {
                        const T* drow = dp + static_cast<std::size_t>(y) * ww;
                        T* grow = gp + static_cast<std::size_t>(y + dy) * ww + dx;
                        for (int x = x0; x < x1; ++x)
                            grow[x] += wv * drow[x];
                    }
                }
            }
        }
    }
}

template <class T>
void conv3_bwd_weight(const Tensor3<T>& in, const Tensor3<T>& dout, T* dwp) {
    int hh = in.h, ww = in.w;
    for (int co = 0; co < dout.c; ++co) {
        const T* dp = dout.plane(co);
        for (int ci = 0; ci < in.c; ++ci) {
            const T* ip = in.plane(ci);
            T* dwk = dwp + (static_cast<std::size_t>(co) * in.c + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    int dy = ky - 1, dx = kx - 1;
                    int y0 = std::max(0, -dy), y1 = hh - std::max(0, dy);
                    int x0 = std::max(0, -dx), x1 = ww - std::max(0, dx);
                    T acc = T(0);
                    for (int y = y0; y < y1; ++y) {
                        const T* drow = dp + static_cast<std::size_t>(y) * ww;
                        const T* irow = ip + static_cast<std::size_t>(y + dy) * ww + dx;
                        for (int x = x0; x < x1; ++x)
                            acc += drow[x] * irow[x];
                    }
                    dwk[ky * 3 + kx] += acc;
                }
            }
        }
    }
}

// 1x1 convolution, w is (cout, cin)
template <class T>
void conv1_fwd(const Tensor3<T>& in, const T* wp, Tensor3<T>& out) {
    std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
    for (int co = 0; co < out.c; ++co) {
        T* op = out.plane(co);
        for (int ci = 0; ci < in.c; ++ci) {
            T wv = wp[static_cast<std::size_t>(co) * in.c + ci];
            const T* ip = in.plane(ci);
            for (std::size_t i = 0; i < plane; ++i)
                op[i] += wv * ip[i];
        }
    }
}

template <class T>
void conv1_bwd(const Tensor3<T>& in, const Tensor3<T>& dout, const T* wp, Tensor3<T>& din,
               T* dwp) {
    std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
    for (int co = 0; co < dout.c; ++co) {
        const T* dp = dout.plane(co);
        for (int ci = 0; ci < in.c; ++ci) {
            const T* ip = in.plane(ci);
            T* gp = din.plane(ci);
            T wv = wp[static_cast<std::size_t>(co) * in.c + ci];
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) {
                gp[i] += wv * dp[i];
                acc += dp[i] * ip[i];
            }
            dwp[static_cast<std::size_t>(co) * in.c + ci] += acc;
        }
    }
}

template <class T>
void relu_inplace(Tensor3<T>& t) {
    for (T& x : t.v)
        if (x < T(0)) x = T(0);
}

// ReLU backward using the stored post-activation tensor
template <class T>
void relu_mask(const Tensor3<T>& post, Tensor3<T>& grad) {
    for (std::size_t i = 0; i < post.v.size(); ++i)
        if (post.v[i] <= T(0)) grad.v[i] = T(0);
}

template <class T>
void maxpool_fwd(const Tensor3<T>& in, Tensor3<T>& out, std::vector<std::int32_t>& idx) {
    out = Tensor3<T>(in.c, in.h / 2, in.w / 2);
    idx.assign(out.size(), 0);
    std::size_t n = 0;
    for (int ci = 0; ci < in.c; ++ci) {
        const T* ip = in.plane(ci);
        T* op = out.plane(ci);
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                int base = (2 * y) * in.w + 2 * x;
                int cand[4] = {base, base + 1, base + in.w, base + in.w + 1};
                int best = cand[0];
                for (int k = 1; k < 4; ++k)
                    if (ip[cand[k]] > ip[best]) best = cand[k];
                op[static_cast<std::size_t>(y) * out.w + x] = ip[best];
                idx[n++] = best;
            }
        }
    }
}

template <class T>
void maxpool_bwd(const Tensor3<T>& dout, const std::vector<std::int32_t>& idx,
                 Tensor3<T>& din) {
    std::size_t n = 0;
    std::size_t plane = static_cast<std::size_t>(dout.h) * dout.w;
    for (int ci = 0; ci < dout.c; ++ci) {
        const T* dp = dout.plane(ci);
        T* gp = din.plane(ci);
        for (std::size_t i = 0; i < plane; ++i)
            gp[idx[n++]] += dp[i];
    }
}

// transposed 2x2 stride-2 convolution, w is (cin, cout, 2, 2)
template <class T>
void tconv_fwd(const Tensor3<T>& in, const T* wp, Tensor3<T>& out) {
    for (int ci = 0; ci < in.c; ++ci) {
        const T* ip = in.plane(ci);
        for (int co = 0; co < out.c; ++co) {
            T* op = out.plane(co);
            const T* wk = wp + (static_cast<std::size_t>(ci) * out.c + co) * 4;
            for (int y = 0; y < in.h; ++y) {
                const T* irow = ip + static_cast<std::size_t>(y) * in.w;
                T* orow0 = op + static_cast<std::size_t>(2 * y) * out.w;
                T* orow1 = orow0 + out.w;
                for (int x = 0; x < in.w; ++x) {
                    T v = irow[x];
                    orow0[2 * x] += wk[0] * v;
                    orow0[2 * x + 1] += wk[1] * v;
                    orow1[2 * x] += wk[2] * v;
                    orow1[2 * x + 1] += wk[3] * v;
                }
            }
        }
    }
}

template <class T>
void tconv_bwd(const Tensor3<T>& in, const Tensor3<T>& dout, const T* wp, Tensor3<T>& din,
               T* dwp) {
    for (int ci = 0; ci < in.c; ++ci) {
        const T* ip = in.plane(ci);
        T* gp = din.plane(ci);
        for (int co = 0; co < dout.c; ++co) {
            const T* dp = dout.plane(co);
            const T* wk = wp + (static_cast<std::size_t>(ci) * dout.c + co) * 4;
            T* dwk = dwp + (static_cast<std::size_t>(ci) * dout.c + co) * 4;
            T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
            for (int y = 0; y < in.h; ++y) {
                const T* irow = ip + static_cast<std::size_t>(y) * in.w;
                T* grow = gp + static_cast<std::size_t>(y) * in.w;
                const T* drow0 = dp + static_cast<std::size_t>(2 * y) * dout.w;
                const T* drow1 = drow0 + dout.w;
                for (int x = 0; x < in.w; ++x) {
                    T d0 = drow0[2 * x], d1 = drow0[2 * x + 1];
                    T d2 = drow1[2 * x], d3 = drow1[2 * x + 1];
                    grow[x] += wk[0] * d0 + wk[1] * d1 + wk[2] * d2 + wk[3] * d3;
                    T vv = irow[x];
                    acc0 += vv * d0;
                    acc1 += vv * d1;
                    acc2 += vv * d2;
                    acc3 += vv * d3;
                }
            }
            dwk[0] += acc0;
            dwk[1] += acc1;
            dwk[2] += acc2;
            dwk[3] += acc3;
        }
    }
}

} // namespace cnn_detail

template <class T>
struct Cnn {
    int scales = 2;
    int base_channels = 16;
    std::vector<T> params;

    struct WeightDesc {
        enum Kind { conv3, conv1, tconv } kind;
        int cout, cin;
        std::size_t offset, count;
    };

    int channels_at(int s) const { return base_channels << s; }

    // weight tensors in forward order: encoder double convs per scale,
    // then per decoder scale a tconv + double conv, then the final 1x1
    std::vector<WeightDesc> layout() const {
        std::vector<WeightDesc> ws;
        std::size_t off = 0;
        auto add = [&](typename WeightDesc::Kind k, int cout, int cin, int kernel) {
            std::size_t cnt = static_cast<std::size_t>(cout) * cin * kernel * kernel;
            ws.push_back({k, cout, cin, off, cnt});
            off += cnt;
        };
        for (int s = 0; s < scales; ++s) {
            int cin = s == 0 ? 1 : channels_at(s - 1);
            add(WeightDesc::conv3, channels_at(s), cin, 3);
            add(WeightDesc::conv3, channels_at(s), channels_at(s), 3);
        }
        for (int s = scales - 2; s >= 0; --s) {
            add(WeightDesc::tconv, channels_at(s), channels_at(s + 1), 2);
            add(WeightDesc::conv3, channels_at(s), 2 * channels_at(s), 3);
            add(WeightDesc::conv3, channels_at(s), channels_at(s), 3);
        }
        add(WeightDesc::conv1, 1, base_channels, 1);
        return ws;
    }

    std::size_t param_count() const {
        auto ws = layout();
        return ws.back().offset + ws.back().count;
    }

    void validate() const {
        require(scales >= 2, "Cnn: need at least 2 scales");
        require(base_channels >= 1, "Cnn: base_channels must be >= 1");
        require(params.size() == param_count(), "Cnn: parameter vector length mismatch");
        for (T p : params)
            require(std::isfinite(static_cast<double>(p)), "Cnn: non-finite parameter");
    }
};

template <class T>
Cnn<T> make_cnn(int scales, int base_channels, std::uint64_t seed) {
    Cnn<T> net;
    net.scales = scales;
    net.base_channels = base_channels;
    require(scales >= 2, "make_cnn: need at least 2 scales");
    require(base_channels >= 1, "make_cnn: base_channels must be >= 1");
    net.params.assign(net.param_count(), T(0));
    Rng rng(seed);
    for (const auto& w : net.layout()) {
        int kernel = w.kind == Cnn<T>::WeightDesc::conv3   ? 3
                     : w.kind == Cnn<T>::WeightDesc::tconv ? 2
                                                           : 1;
        double fan_in = static_cast<double>(w.cin) * kernel * kernel;
        double std_dev = std::sqrt(2.0 / fan_in);
        for (std::size_t i = 0; i < w.count; ++i)
            net.params[w.offset + i] = static_cast<T>(rng.normal() * std_dev);
    }
    return net;
}

// forward-pass intermediates kept for backpropagation
template <class T>
struct CnnTape {
    std::vector<Tensor3<T>> enc_in;   // input of each encoder block
    std::vector<Tensor3<T>> enc_mid;  // after first conv+relu
    std::vector<Tensor3<T>> enc_out;  // after second conv+relu
    std::vector<std::vector<std::int32_t>> pool_idx;
    std::vector<Tensor3<T>> cat_out;  // concat(skip, upsampled) per decoder scale
    std::vector<Tensor3<T>> dec_mid;
    std::vector<Tensor3<T>> dec_out;
    Tensor3<T> output;
};

template <class T>
void cnn_forward(const Cnn<T>& net, const Tensor3<T>& input, CnnTape<T>& tape) {
    require(input.c == 1, "cnn_forward: expected a single input channel");
    int div = 1 << (net.scales - 1);
    require(input.h % div == 0 && input.w % div == 0,
            "cnn_forward: spatial size must be divisible by the pooling factor");
    auto ws = net.layout();
    const T* pp = net.params.data();

    std::size_t n_enc = static_cast<std::size_t>(net.scales);
    std::size_t n_dec = n_enc - 1;
    tape.enc_in.assign(n_enc, {});
    tape.enc_mid.assign(n_enc, {});
    tape.enc_out.assign(n_enc, {});
    tape.pool_idx.assign(n_dec, {});
    tape.cat_out.assign(n_dec, {});
    tape.dec_mid.assign(n_dec, {});
    tape.dec_out.assign(n_dec, {});

    std::size_t wi = 0;
    tape.enc_in[0] = input;
    for (std::size_t s = 0; s < n_enc; ++s) {
        const Tensor3<T>& x = tape.enc_in[s];
        Tensor3<T> mid(ws[wi].cout, x.h, x.w);
        cnn_detail::conv3_fwd(x, pp + ws[wi].offset, mid);
        cnn_detail::relu_inplace(mid);
        ++wi;
        tape.enc_mid[s] = std::move(mid);
        Tensor3<T> out(ws[wi].cout, x.h, x.w);
        cnn_detail::conv3_fwd(tape.enc_mid[s], pp + ws[wi].offset, out);
        cnn_detail::relu_inplace(out);
        ++wi;
        tape.enc_out[s] = std::move(out);
        if (s + 1 < n_enc) {
            Tensor3<T> pooled;
            cnn_detail::maxpool_fwd(tape.enc_out[s], pooled, tape.pool_idx[s]);
            tape.enc_in[s + 1] = std::move(pooled);
        }
    }

    const Tensor3<T>* below = &tape.enc_out[n_enc - 1];
    for (std::size_t si = n_dec; si-- > 0;) {
        Tensor3<T> up(ws[wi].cout, below->h * 2, below->w * 2);
        cnn_detail::tconv_fwd(*below, pp + ws[wi].offset, up);
        ++wi;
        const Tensor3<T>& skip = tape.enc_out[si];
        Tensor3<T> cat(skip.c + up.c, up.h, up.w);
        std::copy(skip.v.begin(), skip.v.end(), cat.v.begin());
        std::copy(up.v.begin(), up.v.end(),
                  cat.v.begin() + static_cast<std::ptrdiff_t>(skip.size()));
        tape.cat_out[si] = std::move(cat);
        const Tensor3<T>& catr = tape.cat_out[si];
        Tensor3<T> mid(ws[wi].cout, catr.h, catr.w);
        cnn_detail::conv3_fwd(catr, pp + ws[wi].offset, mid);
        cnn_detail::relu_inplace(mid);
        ++wi;
        tape.dec_mid[si] = std::move(mid);
        Tensor3<T> out(ws[wi].cout, catr.h, catr.w);
        cnn_detail::conv3_fwd(tape.dec_mid[si], pp + ws[wi].offset, out);
        cnn_detail::relu_inplace(out);
        ++wi;
        tape.dec_out[si] = std::move(out);
        below = &tape.dec_out[si];
    }

    Tensor3<T> y(1, below->h, below->w);
    cnn_detail::conv1_fwd(*below, pp + ws[wi].offset, y);
    tape.output = std::move(y);
}

template <class T>
Tensor3<T> cnn_forward(const Cnn<T>& net, const Tensor3<T>& input) {
    CnnTape<T> tape;
    cnn_forward(net, input, tape);
    return std::move(tape.output);
}

// Backpropagates dLoss/doutput through the taped forward pass, accumulating
// parameter gradients into grads (same layout as params).
template <class T>
void cnn_backward(const Cnn<T>& net, const CnnTape<T>& tape, Tensor3<T> dout,
                  std::vector<T>& grads) {
    auto ws = net.layout();
    const T* pp = net.params.data();
    require(grads.size() == net.params.size(), "cnn_backward: grads size mismatch");
    require(dout.c == tape.output.c && dout.h == tape.output.h && dout.w == tape.output.w,
            "cnn_backward: output gradient shape mismatch");

    std::size_t n_enc = static_cast<std::size_t>(net.scales);
    std::size_t n_dec = n_enc - 1;
    std::size_t wi = ws.size() - 1;

    // final 1x1
    const Tensor3<T>& last = tape.dec_out[0];
    Tensor3<T> dx(last.c, last.h, last.w);
    cnn_detail::conv1_bwd(last, dout, pp + ws[wi].offset, dx, grads.data() + ws[wi].offset);
    --wi;

    // decoder scales in reverse forward order (full resolution first);
    // dskips[s] holds each skip connection's gradient for the encoder sweep
    std::vector<Tensor3<T>> dskips(n_dec);
    for (std::size_t s = 0; s < n_dec; ++s) {
        const Tensor3<T>& mid = tape.dec_mid[s];
        const Tensor3<T>& cat = tape.cat_out[s];
        cnn_detail::relu_mask(tape.dec_out[s], dx);
        Tensor3<T> dmid(mid.c, mid.h, mid.w);
        cnn_detail::conv3_bwd_input(dx, pp + ws[wi].offset, dmid);
        cnn_detail::conv3_bwd_weight(mid, dx, grads.data() + ws[wi].offset);
        --wi;
        cnn_detail::relu_mask(mid, dmid);
        Tensor3<T> dcat(cat.c, cat.h, cat.w);
        cnn_detail::conv3_bwd_input(dmid, pp + ws[wi].offset, dcat);
        cnn_detail::conv3_bwd_weight(cat, dmid, grads.data() + ws[wi].offset);
        --wi;

        const Tensor3<T>& skip = tape.enc_out[s];
        Tensor3<T> dskip(skip.c, skip.h, skip.w);
        std::copy(dcat.v.begin(), dcat.v.begin() + static_cast<std::ptrdiff_t>(skip.size()),
                  dskip.v.begin());
        dskips[s] = std::move(dskip);
        Tensor3<T> dup(cat.c - skip.c, cat.h, cat.w);
        std::copy(dcat.v.begin() + static_cast<std::ptrdiff_t>(skip.size()), dcat.v.end(),
                  dup.v.begin());

        const Tensor3<T>& below = s + 1 == n_dec ? tape.enc_out[s + 1] : tape.dec_out[s + 1];
        Tensor3<T> dbelow(below.c, below.h, below.w);
        cnn_detail::tconv_bwd(below, dup, pp + ws[wi].offset, dbelow,
                              grads.data() + ws[wi].offset);
        --wi;
        dx = std::move(dbelow);
    }

    // encoder, bottom to top; dx enters as the bottom block's output gradient
    for (std::size_t s = n_enc; s-- > 0;) {
        Tensor3<T> dout_s;
        if (s + 1 == n_enc) {
            dout_s = std::move(dx);
        } else {
            const Tensor3<T>& out = tape.enc_out[s];
            dout_s = Tensor3<T>(out.c, out.h, out.w);
            cnn_detail::maxpool_bwd(dx, tape.pool_idx[s], dout_s);
            const Tensor3<T>& dskip = dskips[s];
            for (std::size_t i = 0; i < dout_s.v.size(); ++i)
                dout_s.v[i] += dskip.v[i];
        }
        const Tensor3<T>& mid = tape.enc_mid[s];
        const Tensor3<T>& in = tape.enc_in[s];
        cnn_detail::relu_mask(tape.enc_out[s], dout_s);
        Tensor3<T> dmid(mid.c, mid.h, mid.w);
        cnn_detail::conv3_bwd_input(dout_s, pp + ws[wi].offset, dmid);
        cnn_detail::conv3_bwd_weight(mid, dout_s, grads.data() + ws[wi].offset);
        --wi;
        cnn_detail::relu_mask(mid, dmid);
        cnn_detail::conv3_bwd_weight(in, dmid, grads.data() + ws[wi].offset);
        if (s > 0) {
            Tensor3<T> din(in.c, in.h, in.w);
            cnn_detail::conv3_bwd_input(dmid, pp + ws[wi].offset, din);
            dx = std::move(din);
            --wi;
        }
    }
}

template <class T>
nlohmann::json cnn_to_json(const Cnn<T>& net) {
    net.validate();
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "cnn";
    j["scales"] = net.scales;
    j["base_channels"] = net.base_channels;
    std::vector<double> p(net.params.begin(), net.params.end());
    j["params"] = p;
    return j;
}

template <class T>
Cnn<T> cnn_from_json(const nlohmann::json& j) {
    require(j.is_object(), "cnn_from_json: expected an object");
    require(j.value("type", "") == "cnn", "cnn_from_json: type must be \"cnn\"");
    require(j.value("format_version", 0) == 1, "cnn_from_json: unsupported format_version");
    Cnn<T> net;
    net.scales = j.at("scales").get<int>();
    net.base_channels = j.at("base_channels").get<int>();
    require(net.scales >= 2 && net.base_channels >= 1, "cnn_from_json: invalid topology");
    auto p = j.at("params").get<std::vector<double>>();
    require(p.size() == net.param_count(), "cnn_from_json: params length does not match topology");
    net.params.assign(p.begin(), p.end());
    net.validate();
    return net;
}

} // namespace xct

#endif

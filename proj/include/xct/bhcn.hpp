#ifndef XCT_BHCN_HPP
#define XCT_BHCN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "xct/core.hpp"
#include "xct/mlp.hpp"
#include "xct/optim.hpp"
#include "xct/physics.hpp"
#include "xct/projector.hpp"
#include "xct/recon.hpp"
#include "xct/segment.hpp"

// Beam hardening correction network: learn (p, d) -> (alpha, mu1, mu2) on
// synthetic draws of the BH model, estimate one parameter set per scan by
// averaging per-bin predictions, then fit a linearization polynomial
// p_bh -> p_ideal and apply it in the projection domain.

namespace xct {

struct ParamRanges {
    double d_lo = 0.0, d_hi = 40.0;        // mm
    double alpha_lo = 0.1, alpha_hi = 10.0;
    double mu2_lo = 0.01, mu2_hi = 1.0;    // mm^-1
    double ratio_lo = 1.0, ratio_hi = 5.0; // mu1/mu2, sampled in (ratio_lo, ratio_hi]

    void validate() const {
        require(d_lo >= 0.0 && d_hi > d_lo, "ParamRanges: bad d interval");
        require(alpha_lo >= 0.0 && alpha_hi > alpha_lo, "ParamRanges: bad alpha interval");
        require(mu2_lo > 0.0 && mu2_hi > mu2_lo, "ParamRanges: bad mu2 interval");
        require(ratio_lo >= 1.0 && ratio_hi > ratio_lo, "ParamRanges: bad mu1/mu2 interval");
    }

    BhParams sample(Rng& rng) const {
        BhParams p;
        p.alpha = rng.uniform(alpha_lo, alpha_hi);
        p.mu2 = rng.uniform(mu2_lo, mu2_hi);
        // half-open from above so mu1 > mu2 strictly
        double ratio = ratio_hi - (ratio_hi - ratio_lo) * rng.u01();
        p.mu1 = ratio * p.mu2;
        return p;
    }
};

// z-scored (p, d) features against (alpha, mu1, mu2) targets
struct BhcnDataset {
    std::size_t n = 0;
    std::vector<float> features; // n x 2
    std::vector<float> targets;  // n x 3
    std::vector<double> f_shift, f_scale; // size 2
    std::vector<double> t_shift, t_scale; // size 3

    double raw_feature(std::size_t i, int k) const {
        return features[i * 2 + static_cast<std::size_t>(k)] * f_scale[static_cast<std::size_t>(k)] +
               f_shift[static_cast<std::size_t>(k)];
    }
    double raw_target(std::size_t i, int k) const {
        return targets[i * 3 + static_cast<std::size_t>(k)] * t_scale[static_cast<std::size_t>(k)] +
               t_shift[static_cast<std::size_t>(k)];
    }
};

inline BhcnDataset synth_training_set(const ParamRanges& ranges, std::size_t n,
                                      std::uint64_t seed) {
    ranges.validate();
    require(n >= 1, "synth_training_set: need at least one sample");
    Rng rng(seed);
    std::vector<double> raw_f(n * 2), raw_t(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        double d = rng.uniform(ranges.d_lo, ranges.d_hi);
        BhParams p = ranges.sample(rng);
        raw_f[i * 2 + 0] = bh_projection(d, p);
        raw_f[i * 2 + 1] = d;
        raw_t[i * 3 + 0] = p.alpha;
        raw_t[i * 3 + 1] = p.mu1;
        raw_t[i * 3 + 2] = p.mu2;
    }

    auto stats = [n](const std::vector<double>& v, int dim, std::vector<double>& shift,
                     std::vector<double>& scale) {
        shift.assign(static_cast<std::size_t>(dim), 0.0);
        scale.assign(static_cast<std::size_t>(dim), 1.0);
        for (int k = 0; k < dim; ++k) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                mean += v[i * dim + static_cast<std::size_t>(k)];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = v[i * dim + static_cast<std::size_t>(k)] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n);
            shift[static_cast<std::size_t>(k)] = mean;
            scale[static_cast<std::size_t>(k)] = var > 0.0 ? std::sqrt(var) : 1.0;
        }
    };

    BhcnDataset ds;
    ds.n = n;
    stats(raw_f, 2, ds.f_shift, ds.f_scale);
    stats(raw_t, 3, ds.t_shift, ds.t_scale);
    ds.features.resize(n * 2);
    ds.targets.resize(n * 3);
    for (std::size_t i = 0; i < n * 2; ++i)
        ds.features[i] = static_cast<float>((raw_f[i] - ds.f_shift[i % 2]) / ds.f_scale[i % 2]);
    for (std::size_t i = 0; i < n * 3; ++i)
        ds.targets[i] = static_cast<float>((raw_t[i] - ds.t_shift[i % 3]) / ds.t_scale[i % 3]);
    return ds;
}

struct BhcnTrainConfig {
    std::vector<int> hidden = {64, 64, 64};
    int epochs = 12;
    int batch = 512;
    double lr = 1e-3;
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
};

struct BhcnTrainResult {
    Mlp<float> mlp;
    std::vector<double> epoch_loss; // full training-set loss after each epoch
    double final_train_loss = 0.0;
    double final_val_loss = 0.0; // normalized MSE on the held-out split
};

// Mini-batch Adam on the z-scored MSE. After each epoch the full-train loss
// is evaluated; if it rose, the epoch is rolled back and the learning rate
// halved, so the recorded loss curve is non-increasing by construction.
inline BhcnTrainResult train_bhcn(const BhcnDataset& ds, const BhcnTrainConfig& cfg) {
    require(ds.n >= 1, "train_bhcn: empty dataset");
    require(cfg.epochs >= 1 && cfg.batch >= 1 && cfg.lr > 0.0, "train_bhcn: bad config");

    auto n_val = static_cast<std::size_t>(static_cast<double>(ds.n) * cfg.val_fraction);
    std::size_t n_train = ds.n - n_val;
    require(n_train >= 1, "train_bhcn: no training samples after validation split");

    std::vector<int> sizes;
    sizes.push_back(2);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(3);

    BhcnTrainResult res;
    res.mlp = make_mlp<float>(sizes, cfg.seed);
    res.mlp.in_shift = ds.f_shift;
    res.mlp.in_scale = ds.f_scale;
    res.mlp.out_shift = ds.t_shift;
    res.mlp.out_scale = ds.t_scale;

    auto subset_loss = [&](std::size_t lo, std::size_t hi) {
        double total = 0.0;
        std::size_t chunk = 8192;
        for (std::size_t s = lo; s < hi; s += chunk) {
            std::size_t b = std::min(chunk, hi - s);
            std::vector<float> x(ds.features.begin() + static_cast<std::ptrdiff_t>(s * 2),
                                 ds.features.begin() + static_cast<std::ptrdiff_t>((s + b) * 2));
            std::vector<float> t(ds.targets.begin() + static_cast<std::ptrdiff_t>(s * 3),
                                 ds.targets.begin() + static_cast<std::ptrdiff_t>((s + b) * 3));
            total += mlp_loss_grad(res.mlp, x, t, b, static_cast<std::vector<float>*>(nullptr)) * static_cast<double>(b);
        }
        return total / static_cast<double>(hi - lo);
    };

    Adam<float> opt(res.mlp.params.size(), static_cast<float>(cfg.lr));
    Rng shuffle_rng(cfg.seed ^ 0x5eedf00dULL);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});

    auto batch_size = static_cast<std::size_t>(cfg.batch);
    std::vector<float> bx(batch_size * 2), bt(batch_size * 3), grads;
    std::vector<float> best_params = res.mlp.params;
    double best_loss = subset_loss(0, n_train);
    double lr = cfg.lr;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        for (std::size_t s = 0; s < n_train; s += batch_size) {
            std::size_t b = std::min(batch_size, n_train - s);
            for (std::size_t i = 0; i < b; ++i) {
                std::size_t src = order[s + i];
                bx[i * 2] = ds.features[src * 2];
                bx[i * 2 + 1] = ds.features[src * 2 + 1];
                bt[i * 3] = ds.targets[src * 3];
                bt[i * 3 + 1] = ds.targets[src * 3 + 1];
                bt[i * 3 + 2] = ds.targets[src * 3 + 2];
            }
            double loss = mlp_loss_grad(res.mlp, bx, bt, b, &grads);
            require(std::isfinite(loss),
                    "train_bhcn: non-finite loss at epoch " + std::to_string(epoch));
            opt.step(res.mlp.params, grads);
        }
        double epoch_train = subset_loss(0, n_train);
        if (epoch_train > best_loss) {
            res.mlp.params = best_params; // roll back the epoch, halve the rate
            lr *= 0.5;
            opt.set_lr(static_cast<float>(lr));
            epoch_train = best_loss;
        } else {
            best_loss = epoch_train;
            best_params = res.mlp.params;
        }
        res.epoch_loss.push_back(epoch_train);
        if (lr < 1e-8) break;
    }
    res.mlp.params = best_params;
    res.final_train_loss = best_loss;
    res.final_val_loss = n_val > 0 ? subset_loss(n_train, ds.n) : best_loss;
    return res;
}

// per-measurement prediction with physical-validity clamping
inline BhParams mlp_forward(const Mlp<float>& mlp, double p, double d) {
    double x[2] = {p, d};
    double y[3];
    mlp.predict(x, y);
    BhParams out;
    out.alpha = std::max(0.0, y[0]);
    double m1 = y[1], m2 = y[2];
    if (m1 < m2) std::swap(m1, m2);
    out.mu2 = std::max(m2, 1e-9);
    out.mu1 = std::max(m1, out.mu2);
    return out;
}

// FBP -> Otsu -> forward projection of the binary mask: per-bin estimate of
// the material thickness each measurement traversed.
inline Sinogram estimate_thickness(const Sinogram& sino, int recon_size, double pixel_size,
                                   FilterWindow window = FilterWindow::hann) {
    Image2D recon = fbp(sino, recon_size, recon_size, pixel_size, window);
    double thr = otsu_threshold(recon);
    Image2D mask = binarize(recon, thr);
    return forward_project(mask, sino.geometry, sino.num_bins);
}

struct EstimateResult {
    BhParams params;
    std::size_t bins_used = 0;
};

inline EstimateResult estimate_params(const Mlp<float>& mlp, const Sinogram& sino,
                                      const Sinogram& thickness, double d_min = 0.5) {
    require(sino.num_views == thickness.num_views && sino.num_bins == thickness.num_bins,
            "estimate_params: sinogram and thickness shapes differ");
    double sa = 0.0, s1 = 0.0, s2 = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < sino.data.size(); ++i) {
        double d = thickness.data[i];
        if (d <= d_min) continue;
        BhParams p = mlp_forward(mlp, sino.data[i], d);
        sa += p.alpha;
        s1 += p.mu1;
        s2 += p.mu2;
        ++used;
    }
    require(used > 0, "estimate_params: no bin exceeds d_min");
    EstimateResult r;
    r.params = {sa / static_cast<double>(used), s1 / static_cast<double>(used),
                s2 / static_cast<double>(used)};
    r.bins_used = used;
    return r;
}

struct LinearizationPoly {
    std::vector<double> coeffs; // c1..cK, p_corrected = sum_k c_k * p^k
    double p_max = 0.0;         // upper end of the fitted domain
    double max_residual = 0.0;  // max |fit - ideal| on the fitting grid

    double eval(double p) const {
        double acc = 0.0;
        for (std::size_t k = coeffs.size(); k > 0; --k)
            acc = (acc + coeffs[k - 1]) * p;
        return acc;
    }
};

namespace detail {

// solve SPD system via Cholesky; throws if not positive definite
inline std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b, int n) {
    for (int j = 0; j < n; ++j) {
        double diag = a[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            double v = a[static_cast<std::size_t>(j) * n + k];
            diag -= v * v;
        }
        if (diag <= 0.0)
            throw Error("fit_linearization: normal equations not positive definite; "
                        "try a lower degree");
        double dj = std::sqrt(diag);
        a[static_cast<std::size_t>(j) * n + j] = dj;
        for (int i = j + 1; i < n; ++i) {
            double v = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                v -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            a[static_cast<std::size_t>(i) * n + j] = v / dj;
        }
    }
    for (int i = 0; i < n; ++i) {
        double v = b[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k)
            v -= a[static_cast<std::size_t>(i) * n + k] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = v / a[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double v = b[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k)
            v -= a[static_cast<std::size_t>(k) * n + i] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = v / a[static_cast<std::size_t>(i) * n + i];
    }
    return b;
}

} // namespace detail

// Least-squares fit of p_ideal against powers p_bh^1..p_bh^degree on a
// 1000-point thickness grid. Fitted in the scaled variable p/p_max to keep
// the normal equations well conditioned, then rescaled.
inline LinearizationPoly fit_linearization(const BhParams& params, double d_max, int degree = 5) {
    params.validate();
    require(degree >= 1, "fit_linearization: degree must be >= 1");
    require(d_max > 0.0, "fit_linearization: d_max must be > 0");

    constexpr int grid_n = 1000;
    std::vector<double> p(grid_n), y(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        double d = d_max * i / (grid_n - 1);
        p[static_cast<std::size_t>(i)] = bh_projection(d, params);
        y[static_cast<std::size_t>(i)] = ideal_projection(d, params);
    }
    double p_max = p.back(); // bh_projection is increasing in d
    require(p_max > 0.0, "fit_linearization: degenerate projection range");

    int k = degree;
    std::vector<double> gram(static_cast<std::size_t>(k) * k, 0.0), rhs(static_cast<std::size_t>(k), 0.0);
    std::vector<double> pow_z(static_cast<std::size_t>(k));
    for (int i = 0; i < grid_n; ++i) {
        double z = p[static_cast<std::size_t>(i)] / p_max;
        double zp = z;
        for (int a = 0; a < k; ++a) {
            pow_z[static_cast<std::size_t>(a)] = zp;
            zp *= z;
        }
        for (int a = 0; a < k; ++a) {
            for (int b = a; b < k; ++b)
                gram[static_cast<std::size_t>(a) * k + b] +=
                    pow_z[static_cast<std::size_t>(a)] * pow_z[static_cast<std::size_t>(b)];
            rhs[static_cast<std::size_t>(a)] +=
                pow_z[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(i)];
        }
    }
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < a; ++b)
            gram[static_cast<std::size_t>(a) * k + b] = gram[static_cast<std::size_t>(b) * k + a];

    std::vector<double> c_z = detail::cholesky_solve(gram, rhs, k);

    LinearizationPoly poly;
    poly.p_max = p_max;
    poly.coeffs.resize(static_cast<std::size_t>(k));
    double scale = 1.0;
    for (int a = 0; a < k; ++a) {
        scale /= p_max;
        poly.coeffs[static_cast<std::size_t>(a)] = c_z[static_cast<std::size_t>(a)] * scale;
    }

    for (int i = 0; i < grid_n; ++i) {
        double r = std::abs(poly.eval(p[static_cast<std::size_t>(i)]) - y[static_cast<std::size_t>(i)]);
        poly.max_residual = std::max(poly.max_residual, r);
    }

    // contract: the correction must preserve the ordering of projections
    double prev = poly.eval(0.0);
    for (int i = 1; i <= 2000; ++i) {
        double v = poly.eval(p_max * i / 2000.0);
        require(v > prev, "fit_linearization: polynomial not strictly increasing on [0, p_max]");
        prev = v;
    }
    return poly;
}

struct CorrectionResult {
    Sinogram sino;
    std::size_t extrapolated_bins = 0; // inputs above the fitted domain
};

inline CorrectionResult apply_correction(const Sinogram& sino, const LinearizationPoly& poly) {
    CorrectionResult r;
    r.sino = sino;
    for (double& v : r.sino.data) {
        if (v > poly.p_max) ++r.extrapolated_bins;
        v = poly.eval(v);
    }
    return r;
}

} // namespace xct

#endif

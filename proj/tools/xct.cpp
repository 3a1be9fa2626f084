// xct: command-line driver for the simulation, correction, reconstruction
// and denoising stages. Every subcommand reads a JSON config, writes its
// artifacts under --out, and reports diagnostics on stderr. Exit code 0
// means all outputs were written.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xct/xct.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw xct::Error("config: cannot open '" + path + "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw xct::Error("config: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw xct::Error("config: top level must be an object");
    if (!j.contains("version"))
        throw xct::Error("config: missing field 'version'");
    if (!j["version"].is_number_integer() || j["version"].get<int>() != 1)
        throw xct::Error("config: unsupported 'version' (expected 1)");
    return j;
}

const json* find_path(const json& j, const std::string& path) {
    const json* cur = &j;
    std::size_t pos = 0;
    while (pos < path.size()) {
        std::size_t dot = path.find('.', pos);
        std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &(*cur)[key];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    return cur;
}

template <class T>
T field(const json& j, const std::string& path) {
    const json* v = find_path(j, path);
    if (!v) throw xct::Error("config: missing field '" + path + "'");
    try {
        return v->get<T>();
    } catch (const json::exception&) {
        throw xct::Error("config: field '" + path + "' has the wrong type");
    }
}

template <class T>
T field_or(const json& j, const std::string& path, T def) {
    const json* v = find_path(j, path);
    if (!v) return def;
    try {
        return v->get<T>();
    } catch (const json::exception&) {
        throw xct::Error("config: field '" + path + "' has the wrong type");
    }
}

bool has_field(const json& j, const std::string& path) { return find_path(j, path) != nullptr; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw xct::Error("cannot create output directory '" + dir + "': " + ec.message());
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f.good()) throw xct::Error("cannot open '" + path + "' for writing");
    f << j.dump(2) << "\n";
    if (!f.good()) throw xct::Error("failed writing '" + path + "'");
}

void export_preview(const xct::Image2D& img, const std::string& path) {
    double lo = img.data[0], hi = img.data[0];
    for (double v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(lo < hi)) { lo = 0.0; hi = 1.0; }
    xct::export_pgm(img, path, lo, hi);
}

// geometry block: kind, num_views, span ("half"|"full"|radians), num_bins,
// detector_spacing_mm, detector_offset_mm, source_to_center_mm,
// source_to_detector_mm
std::pair<xct::Geometry, int> parse_geometry(const json& cfg, const std::string& prefix) {
    std::string kind_s = field_or<std::string>(cfg, prefix + ".kind", "parallel");
    xct::GeometryKind kind;
    if (kind_s == "parallel") kind = xct::GeometryKind::parallel;
    else if (kind_s == "fan") kind = xct::GeometryKind::fan;
    else throw xct::Error("config: field '" + prefix + ".kind' must be 'parallel' or 'fan'");

    int num_views = field<int>(cfg, prefix + ".num_views");
    int num_bins = field<int>(cfg, prefix + ".num_bins");
    double spacing = field<double>(cfg, prefix + ".detector_spacing_mm");
    double offset = field_or<double>(cfg, prefix + ".detector_offset_mm", 0.0);

    const double pi = 3.14159265358979323846;
    double span = kind == xct::GeometryKind::parallel ? pi : 2.0 * pi;
    if (has_field(cfg, prefix + ".span")) {
        const json* v = find_path(cfg, prefix + ".span");
        if (v->is_string()) {
            std::string s = v->get<std::string>();
            if (s == "half") span = pi;
            else if (s == "full") span = 2.0 * pi;
            else throw xct::Error("config: field '" + prefix + ".span' must be 'half', 'full' or radians");
        } else if (v->is_number()) {
            span = v->get<double>();
        } else {
            throw xct::Error("config: field '" + prefix + ".span' has the wrong type");
        }
    }

    double rsc = field_or<double>(cfg, prefix + ".source_to_center_mm", 0.0);
    double rsd = field_or<double>(cfg, prefix + ".source_to_detector_mm", 0.0);
    if (kind == xct::GeometryKind::fan && (rsc <= 0.0 || rsd <= rsc))
        throw xct::Error("config: fan geometry needs 0 < '" + prefix + ".source_to_center_mm' < '" +
                         prefix + ".source_to_detector_mm'");

    return {xct::make_geometry(kind, num_views, span, spacing, offset, rsc, rsd), num_bins};
}

xct::PhantomSpec parse_phantom(const json& cfg, const std::string& prefix,
                               std::optional<std::uint64_t> seed_override) {
    xct::PhantomSpec spec;
    spec.image_size = field_or<int>(cfg, prefix + ".image_size", 256);
    spec.pixel_size = field_or<double>(cfg, prefix + ".pixel_size_mm", 0.1);
    spec.base_radius = field<double>(cfg, prefix + ".base_radius_mm");
    spec.num_pores = field_or<int>(cfg, prefix + ".num_pores", 0);
    spec.pore_radius_lo = field_or<double>(cfg, prefix + ".pore_radius_lo_mm", 0.0);
    spec.pore_radius_hi = field_or<double>(cfg, prefix + ".pore_radius_hi_mm", 0.0);
    spec.fins = field_or<bool>(cfg, prefix + ".fins", false);
    spec.rods = field_or<bool>(cfg, prefix + ".rods", false);
    spec.notches = field_or<bool>(cfg, prefix + ".notches", false);
    spec.seed = seed_override.value_or(field_or<std::uint64_t>(cfg, prefix + ".seed", 0));
    return spec;
}

xct::Image2D make_phantom(const json& cfg, const std::string& prefix,
                          std::optional<std::uint64_t> seed_override) {
    std::string kind = field<std::string>(cfg, prefix + ".kind");
    xct::PhantomSpec spec = parse_phantom(cfg, prefix, seed_override);
    if (kind == "disk") return xct::gen_disk(spec);
    if (kind == "component") return xct::gen_component(spec);
    throw xct::Error("config: field '" + prefix + ".kind' must be 'disk' or 'component'");
}

xct::BhParams parse_bh(const json& cfg, const std::string& prefix) {
    xct::BhParams p;
    p.alpha = field<double>(cfg, prefix + ".alpha");
    p.mu1 = field<double>(cfg, prefix + ".mu1");
    p.mu2 = field<double>(cfg, prefix + ".mu2");
    p.validate();
    return p;
}

xct::FilterWindow parse_window(const json& cfg, const std::string& path,
                               xct::FilterWindow def) {
    std::string w = field_or<std::string>(cfg, path,
                                          def == xct::FilterWindow::ramlak ? "ramlak" : "hann");
    if (w == "ramlak") return xct::FilterWindow::ramlak;
    if (w == "hann") return xct::FilterWindow::hann;
    throw xct::Error("config: field '" + path + "' must be 'ramlak' or 'hann'");
}

xct::ParamRanges parse_ranges(const json& cfg, const std::string& prefix) {
    xct::ParamRanges r;
    auto pair = [&](const std::string& key, double& lo, double& hi) {
        if (!has_field(cfg, prefix + "." + key)) return;
        auto v = field<std::vector<double>>(cfg, prefix + "." + key);
        if (v.size() != 2)
            throw xct::Error("config: field '" + prefix + "." + key + "' must be [lo, hi]");
        lo = v[0];
        hi = v[1];
    };
    pair("d_mm", r.d_lo, r.d_hi);
    pair("alpha", r.alpha_lo, r.alpha_hi);
    pair("mu2_mm_inv", r.mu2_lo, r.mu2_hi);
    pair("mu1_over_mu2", r.ratio_lo, r.ratio_hi);
    r.validate();
    return r;
}

json poly_to_json(const xct::LinearizationPoly& poly) {
    return {{"coeffs", poly.coeffs}, {"p_max", poly.p_max}, {"max_residual", poly.max_residual}};
}

xct::LinearizationPoly poly_from_json(const json& j) {
    xct::LinearizationPoly p;
    p.coeffs = j.at("coeffs").get<std::vector<double>>();
    p.p_max = j.at("p_max").get<double>();
    p.max_residual = j.value("max_residual", 0.0);
    if (p.coeffs.empty() || p.p_max <= 0.0)
        throw xct::Error("fit file: invalid linearization polynomial");
    return p;
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw xct::Error("cannot open '" + path + "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw xct::Error("'" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

double finite_or_string_psnr(double v, json& out) {
    if (std::isfinite(v)) {
        out = v;
    } else {
        out = "inf";
    }
    return v;
}

// ---------------------------------------------------------------- phantom

void cmd_phantom(const json& cfg, const std::string& out,
                 std::optional<std::uint64_t> seed) {
    xct::Image2D img = make_phantom(cfg, "phantom", seed);
    ensure_dir(out);
    xct::write_image(out + "/phantom", img);
    xct::export_pgm(img, out + "/phantom.pgm", 0.0, 1.0);
    std::cerr << "phantom: wrote " << out << "/phantom.{json,raw,pgm}\n";
}

// ------------------------------------------------------------------- scan

void cmd_scan(const json& cfg, const std::string& out, std::optional<std::uint64_t> seed) {
    xct::Image2D support = xct::read_image(field<std::string>(cfg, "phantom"));
    auto [geom, num_bins] = parse_geometry(cfg, "geometry");
    xct::BhParams bh = parse_bh(cfg, "bh");

    xct::NoiseSpec noise;
    if (has_field(cfg, "noise")) {
        noise.i0 = field<double>(cfg, "noise.i0");
        noise.seed = seed.value_or(field_or<std::uint64_t>(cfg, "noise.seed", 0));
    }

    xct::ScanResult r = xct::simulate_scan(support, geom, num_bins, bh, noise);
    ensure_dir(out);
    xct::write_sinogram(out + "/sino_bh", r.bh);
    xct::write_sinogram(out + "/sino_ideal", r.ideal);
    xct::write_sinogram(out + "/thickness", r.thickness);
    std::cerr << "scan: wrote " << out << "/{sino_bh,sino_ideal,thickness}.{json,raw}\n";
}

// -------------------------------------------------------------- bhc-train

void cmd_bhc_train(const json& cfg, const std::string& out,
                   std::optional<std::uint64_t> seed) {
    xct::ParamRanges ranges = parse_ranges(cfg, "ranges");
    auto n = field<std::uint64_t>(cfg, "num_samples");

    xct::BhcnTrainConfig tc;
    tc.hidden = field_or<std::vector<int>>(cfg, "hidden", {64, 64, 64});
    tc.epochs = field_or<int>(cfg, "epochs", 12);
    tc.batch = field_or<int>(cfg, "batch", 512);
    tc.lr = field_or<double>(cfg, "learning_rate", 1e-3);
    tc.val_fraction = field_or<double>(cfg, "val_fraction", 0.1);
    tc.seed = seed.value_or(field_or<std::uint64_t>(cfg, "seed", 1));

    std::cerr << "bhc-train: synthesizing " << n << " samples\n";
    xct::BhcnDataset ds = xct::synth_training_set(ranges, n, tc.seed);
    std::cerr << "bhc-train: training for " << tc.epochs << " epochs\n";
    xct::BhcnTrainResult r = xct::train_bhcn(ds, tc);

    ensure_dir(out);
    write_json_file(out + "/bhcn.json", xct::mlp_to_json(r.mlp));
    json t;
    t["epoch_loss"] = r.epoch_loss;
    t["final_train_loss"] = r.final_train_loss;
    t["final_val_loss"] = r.final_val_loss;
    t["num_samples"] = n;
    t["seed"] = tc.seed;
    write_json_file(out + "/training.json", t);
    std::cerr << "bhc-train: final val loss " << r.final_val_loss << ", wrote " << out
              << "/{bhcn,training}.json\n";
}

// ---------------------------------------------------------------- bhc-fit

void cmd_bhc_fit(const json& cfg, const std::string& out) {
    auto mlp = xct::mlp_from_json<float>(read_json_file(field<std::string>(cfg, "model")));
    xct::Sinogram sino = xct::read_sinogram(field<std::string>(cfg, "sinogram"));

    int recon_size = field_or<int>(cfg, "recon_size", 256);
    double px = field_or<double>(cfg, "pixel_size_mm", sino.geometry.detector_spacing);
    xct::FilterWindow window = parse_window(cfg, "window", xct::FilterWindow::hann);
    double d_min = field_or<double>(cfg, "d_min_mm", 0.5);
    int degree = field_or<int>(cfg, "degree", 5);
    double d_max_scale = field_or<double>(cfg, "d_max_scale", 1.05);

    xct::Sinogram thickness = xct::estimate_thickness(sino, recon_size, px, window);
    xct::EstimateResult est = xct::estimate_params(mlp, sino, thickness, d_min);
    double d_max = 0.0;
    for (double d : thickness.data) d_max = std::max(d_max, d);
    d_max *= d_max_scale;
    xct::LinearizationPoly poly = xct::fit_linearization(est.params, d_max, degree);

    ensure_dir(out);
    xct::write_sinogram(out + "/thickness_est", thickness);
    json fit;
    fit["alpha"] = est.params.alpha;
    fit["mu1"] = est.params.mu1;
    fit["mu2"] = est.params.mu2;
    fit["bins_used"] = est.bins_used;
    fit["d_max_mm"] = d_max;
    fit["degree"] = degree;
    fit["poly"] = poly_to_json(poly);
    write_json_file(out + "/fit.json", fit);
    std::cerr << "bhc-fit: alpha " << est.params.alpha << ", mu1 " << est.params.mu1
              << ", mu2 " << est.params.mu2 << ", poly residual " << poly.max_residual
              << ", wrote " << out << "/fit.json\n";
}

// -------------------------------------------------------------- bhc-apply

void cmd_bhc_apply(const json& cfg, const std::string& out) {
    xct::Sinogram sino = xct::read_sinogram(field<std::string>(cfg, "sinogram"));
    json fit = read_json_file(field<std::string>(cfg, "fit"));
    xct::LinearizationPoly poly = poly_from_json(fit.at("poly"));

    xct::CorrectionResult r = xct::apply_correction(sino, poly);
    ensure_dir(out);
    xct::write_sinogram(out + "/sino_corr", r.sino);
    json a;
    a["extrapolated_bins"] = r.extrapolated_bins;
    write_json_file(out + "/apply.json", a);
    std::cerr << "bhc-apply: " << r.extrapolated_bins << " bins above the fitted domain, wrote "
              << out << "/sino_corr.{json,raw}\n";
}

// ------------------------------------------------------------------ recon

void cmd_recon(const json& cfg, const std::string& out) {
    xct::Sinogram sino = xct::read_sinogram(field<std::string>(cfg, "sinogram"));
    int subsample = field_or<int>(cfg, "subsample", 1);
    if (subsample > 1) sino = xct::subsample_views(sino, subsample);

    int size = field_or<int>(cfg, "image_size", 256);
    double px = field_or<double>(cfg, "pixel_size_mm", sino.geometry.detector_spacing);
    std::string method = field_or<std::string>(cfg, "method", "fbp");

    xct::Image2D img;
    if (method == "fbp") {
        img = xct::fbp(sino, size, size, px, parse_window(cfg, "window", xct::FilterWindow::ramlak));
    } else if (method == "sirt") {
        int iters = field_or<int>(cfg, "iterations", 200);
        bool nonneg = field_or<bool>(cfg, "nonneg", true);
        img = xct::sirt(sino, size, size, px, iters, nonneg);
    } else {
        throw xct::Error("config: field 'method' must be 'fbp' or 'sirt'");
    }

    ensure_dir(out);
    xct::write_image(out + "/recon", img);
    export_preview(img, out + "/recon.pgm");
    std::cerr << "recon: " << method << " on " << sino.num_views << " views, wrote " << out
              << "/recon.{json,raw,pgm}\n";
}

// --------------------------------------------------------------- dn-train

void cmd_dn_train(const json& cfg, const std::string& out,
                  std::optional<std::uint64_t> seed) {
    if (!has_field(cfg, "pairs")) throw xct::Error("config: missing field 'pairs'");
    const json& pairs = *find_path(cfg, "pairs");
    if (!pairs.is_array() || pairs.empty())
        throw xct::Error("config: field 'pairs' must be a nonempty array");

    int patch = field_or<int>(cfg, "patch", 64);
    int stride = field_or<int>(cfg, "stride", 32);
    bool augment = field_or<bool>(cfg, "augment", true);

    xct::DenoiserTrainConfig tc;
    tc.scales = field_or<int>(cfg, "scales", 2);
    tc.base_channels = field_or<int>(cfg, "base_channels", 16);
    tc.epochs = field_or<int>(cfg, "epochs", 30);
    tc.batch_size = field_or<int>(cfg, "batch", 8);
    tc.learning_rate = field_or<double>(cfg, "learning_rate", 1e-3);
    tc.seed = seed.value_or(field_or<std::uint64_t>(cfg, "seed", 1));

    xct::PatchDataset<float> ds;
    ds.patch = patch;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!pairs[i].is_object() || !pairs[i].contains("input") || !pairs[i].contains("target"))
            throw xct::Error("config: field 'pairs[" + std::to_string(i) +
                             "]' needs 'input' and 'target'");
        std::string in_path = pairs[i]["input"].get<std::string>();
        std::string tg_path = pairs[i]["target"].get<std::string>();
        xct::Image2D in = xct::read_image(in_path);
        xct::Image2D tg = xct::read_image(tg_path);
        if (in.width != tg.width || in.height != tg.height)
            throw xct::Error("dn-train: pair '" + in_path + "' / '" + tg_path +
                             "' has mismatched shapes");
        auto part = xct::extract_patch_pairs<float>(in, tg, patch, stride, tc.seed + i, augment);
        for (auto& p : part.inputs) ds.inputs.push_back(std::move(p));
        for (auto& p : part.targets) ds.targets.push_back(std::move(p));
    }
    std::cerr << "dn-train: " << ds.size() << " patch pairs, training for " << tc.epochs
              << " epochs\n";
    auto r = xct::train_denoiser(ds, tc);

    ensure_dir(out);
    write_json_file(out + "/denoiser.json", xct::cnn_to_json(r.net));
    json t;
    t["epoch_loss"] = r.epoch_loss;
    t["final_loss"] = r.final_loss;
    t["num_patches"] = ds.size();
    t["seed"] = tc.seed;
    write_json_file(out + "/training.json", t);
    {
        std::ofstream csv(out + "/loss.csv", std::ios::binary);
        csv << "epoch,loss\n" << std::setprecision(17);
        for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
            csv << e << "," << r.epoch_loss[e] << "\n";
    }
    std::cerr << "dn-train: final loss " << r.final_loss << ", wrote " << out
              << "/{denoiser,training}.json\n";
}

// --------------------------------------------------------------- dn-apply

void cmd_dn_apply(const json& cfg, const std::string& out) {
    auto net = xct::cnn_from_json<float>(read_json_file(field<std::string>(cfg, "model")));
    xct::Image2D img = xct::read_image(field<std::string>(cfg, "image"));
    xct::Image2D res = xct::denoise(net, img);
    ensure_dir(out);
    xct::write_image(out + "/denoised", res);
    export_preview(res, out + "/denoised.pgm");
    std::cerr << "dn-apply: wrote " << out << "/denoised.{json,raw,pgm}\n";
}

// ------------------------------------------------------------------- eval

json eval_images(const xct::Image2D& img, const xct::Image2D& ref,
                 std::optional<double> data_range, int ssim_window,
                 const xct::Image2D* mask) {
    double dr;
    if (data_range) {
        dr = *data_range;
    } else {
        double lo = ref.data[0], hi = ref.data[0];
        for (double v : ref.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        dr = hi - lo;
    }
    if (dr <= 0.0) throw xct::Error("eval: data range is not positive");

    json m;
    finite_or_string_psnr(xct::psnr(img, ref, dr), m["psnr_db"]);
    xct::SsimParams sp;
    sp.window = ssim_window;
    sp.data_range = dr;
    m["ssim"] = xct::ssim(img, ref, sp);
    double mse = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double d = img.data[i] - ref.data[i];
        mse += d * d;
    }
    m["rmse"] = std::sqrt(mse / static_cast<double>(img.data.size()));
    m["data_range"] = dr;
    if (mask) m["cupping_index"] = xct::cupping_index(img, *mask);
    return m;
}

void cmd_eval(const json& cfg, const std::string& out) {
    std::string img_path = field<std::string>(cfg, "image");
    std::string ref_path = field<std::string>(cfg, "reference");
    xct::Image2D img = xct::read_image(img_path);
    xct::Image2D ref = xct::read_image(ref_path);
    if (img.width != ref.width || img.height != ref.height)
        throw xct::Error("eval: image and reference sizes differ");

    std::optional<double> dr;
    if (has_field(cfg, "data_range")) dr = field<double>(cfg, "data_range");
    int win = field_or<int>(cfg, "ssim_window", 7);

    std::optional<xct::Image2D> mask;
    if (has_field(cfg, "mask")) {
        std::string m = field<std::string>(cfg, "mask");
        if (m == "otsu") {
            mask = xct::binarize(ref, xct::otsu_threshold(ref));
        } else {
            mask = xct::read_image(m);
        }
    }

    json report = eval_images(img, ref, dr, win, mask ? &*mask : nullptr);
    report["image"] = img_path;
    report["reference"] = ref_path;
    ensure_dir(out);
    write_json_file(out + "/report.json", report);
    if (has_field(cfg, "profile_row")) {
        int row = field<int>(cfg, "profile_row");
        xct::write_profile_csv(out + "/profile.csv", xct::line_profile(img, row));
    }
    std::cerr << "eval: wrote " << out << "/report.json\n";
}

// --------------------------------------------------------------- pipeline

void cmd_pipeline(const json& cfg, const std::string& out,
                  std::optional<std::uint64_t> seed) {
    const std::string p = "pipeline";
    if (!has_field(cfg, p)) throw xct::Error("config: missing field 'pipeline'");

    std::optional<std::uint64_t> phantom_seed, noise_seed;
    if (seed) {
        phantom_seed = *seed;
        noise_seed = *seed + 1;
    }

    ensure_dir(out);
    ensure_dir(out + "/inputs");
    ensure_dir(out + "/stages/phantom");
    ensure_dir(out + "/stages/scan");
    ensure_dir(out + "/stages/bhc");
    ensure_dir(out + "/stages/recon");

    write_json_file(out + "/inputs/config.json", cfg);

    json report;
    report["version"] = 1;

    // phantom
    xct::Image2D support = make_phantom(cfg, p + ".phantom", phantom_seed);
    xct::write_image(out + "/stages/phantom/phantom", support);
    xct::export_pgm(support, out + "/stages/phantom/phantom.pgm", 0.0, 1.0);
    report["stages"]["phantom"] = "stages/phantom/phantom";

    // scan
    auto [geom, num_bins] = parse_geometry(cfg, p + ".scan.geometry");
    xct::BhParams bh = parse_bh(cfg, p + ".scan.bh");
    xct::NoiseSpec noise;
    if (has_field(cfg, p + ".scan.noise")) {
        noise.i0 = field<double>(cfg, p + ".scan.noise.i0");
        noise.seed = noise_seed.value_or(field_or<std::uint64_t>(cfg, p + ".scan.noise.seed", 0));
    }
    xct::ScanResult scan = xct::simulate_scan(support, geom, num_bins, bh, noise);
    xct::write_sinogram(out + "/stages/scan/sino_bh", scan.bh);
    xct::write_sinogram(out + "/stages/scan/sino_ideal", scan.ideal);
    xct::write_sinogram(out + "/stages/scan/thickness", scan.thickness);
    report["stages"]["scan"] = "stages/scan";

    // recon settings shared by every reconstruction below
    int size = field_or<int>(cfg, p + ".recon.image_size", 256);
    double px = field_or<double>(cfg, p + ".recon.pixel_size_mm", geom.detector_spacing);
    xct::FilterWindow window = parse_window(cfg, p + ".recon.window", xct::FilterWindow::hann);
    int subsample = field_or<int>(cfg, p + ".recon.subsample", 1);

    // beam hardening fit + correction
    std::string model_path = field<std::string>(cfg, p + ".bhc.model");
    fs::copy_file(model_path, out + "/inputs/bhcn.json", fs::copy_options::overwrite_existing);
    auto mlp = xct::mlp_from_json<float>(read_json_file(model_path));
    double d_min = field_or<double>(cfg, p + ".bhc.d_min_mm", 0.5);
    int degree = field_or<int>(cfg, p + ".bhc.degree", 5);
    double d_max_scale = field_or<double>(cfg, p + ".bhc.d_max_scale", 1.05);

    xct::Sinogram thickness_est = xct::estimate_thickness(scan.bh, size, px, window);
    xct::EstimateResult est = xct::estimate_params(mlp, scan.bh, thickness_est, d_min);
    double d_max = 0.0;
    for (double d : thickness_est.data) d_max = std::max(d_max, d);
    d_max *= d_max_scale;
    xct::LinearizationPoly poly = xct::fit_linearization(est.params, d_max, degree);
    xct::CorrectionResult corr = xct::apply_correction(scan.bh, poly);

    xct::write_sinogram(out + "/stages/bhc/thickness_est", thickness_est);
    xct::write_sinogram(out + "/stages/bhc/sino_corr", corr.sino);
    json fit;
    fit["alpha"] = est.params.alpha;
    fit["mu1"] = est.params.mu1;
    fit["mu2"] = est.params.mu2;
    fit["bins_used"] = est.bins_used;
    fit["d_max_mm"] = d_max;
    fit["degree"] = degree;
    fit["poly"] = poly_to_json(poly);
    fit["extrapolated_bins"] = corr.extrapolated_bins;
    write_json_file(out + "/stages/bhc/fit.json", fit);
    report["stages"]["bhc"] = "stages/bhc";
    report["fit"] = fit;

    // reconstructions: uncorrected, corrected, and the monochromatic reference
    auto reconstruct = [&](const xct::Sinogram& s) {
        xct::Sinogram use = subsample > 1 ? xct::subsample_views(s, subsample) : s;
        return xct::fbp(use, size, size, px, window);
    };
    xct::Image2D recon_unc = reconstruct(scan.bh);
    xct::Image2D recon_corr = reconstruct(corr.sino);
    xct::Image2D recon_ideal = reconstruct(scan.ideal);
    xct::write_image(out + "/stages/recon/recon_uncorrected", recon_unc);
    xct::write_image(out + "/stages/recon/recon_corrected", recon_corr);
    xct::write_image(out + "/stages/recon/recon_ideal", recon_ideal);
    export_preview(recon_corr, out + "/stages/recon/recon_corrected.pgm");
    report["stages"]["recon"] = "stages/recon";

    // optional denoiser on the corrected reconstruction
    std::optional<xct::Image2D> denoised;
    if (has_field(cfg, p + ".denoiser.model")) {
        std::string dn_path = field<std::string>(cfg, p + ".denoiser.model");
        fs::copy_file(dn_path, out + "/inputs/denoiser.json",
                      fs::copy_options::overwrite_existing);
        auto net = xct::cnn_from_json<float>(read_json_file(dn_path));
        ensure_dir(out + "/stages/denoise");
        denoised = xct::denoise(net, recon_corr);
        xct::write_image(out + "/stages/denoise/denoised", *denoised);
        export_preview(*denoised, out + "/stages/denoise/denoised.pgm");
        report["stages"]["denoise"] = "stages/denoise";
    }

    // metrics against the monochromatic reference
    std::optional<double> dr;
    if (has_field(cfg, p + ".eval.data_range")) dr = field<double>(cfg, p + ".eval.data_range");
    int win = field_or<int>(cfg, p + ".eval.ssim_window", 7);
    xct::Image2D mask = xct::binarize(recon_ideal, xct::otsu_threshold(recon_ideal));

    report["metrics"]["uncorrected"] = eval_images(recon_unc, recon_ideal, dr, win, &mask);
    report["metrics"]["corrected"] = eval_images(recon_corr, recon_ideal, dr, win, &mask);
    if (denoised)
        report["metrics"]["denoised"] = eval_images(*denoised, recon_ideal, dr, win, &mask);

    int profile_row = field_or<int>(cfg, p + ".eval.profile_row", size / 2);
    ensure_dir(out + "/profiles");
    xct::write_profile_csv(out + "/profiles/uncorrected.csv",
                           xct::line_profile(recon_unc, profile_row));
    xct::write_profile_csv(out + "/profiles/corrected.csv",
                           xct::line_profile(recon_corr, profile_row));
    xct::write_profile_csv(out + "/profiles/ideal.csv",
                           xct::line_profile(recon_ideal, profile_row));
    if (denoised)
        xct::write_profile_csv(out + "/profiles/denoised.csv",
                               xct::line_profile(*denoised, profile_row));

    double cup_unc = report["metrics"]["uncorrected"]["cupping_index"].get<double>();
    double cup_corr = report["metrics"]["corrected"]["cupping_index"].get<double>();
    if (std::abs(cup_unc - 1.0) > 0.0)
        report["metrics"]["cupping_deviation_ratio"] =
            std::abs(cup_corr - 1.0) / std::abs(cup_unc - 1.0);

    write_json_file(out + "/report.json", report);
    std::cerr << "pipeline: wrote " << out << "/report.json\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale CT simulation, beam hardening correction and denoising"};
    app.require_subcommand(1);

    struct SubArgs {
        std::string config;
        std::string out;
        std::optional<std::uint64_t> seed;
    };

    std::vector<std::pair<std::string, std::string>> subs = {
        {"phantom", "generate a synthetic support phantom"},
        {"scan", "simulate a beam-hardened scan of a phantom"},
        {"bhc-train", "train the correction network on synthetic draws"},
        {"bhc-fit", "estimate parameters and fit the linearization polynomial"},
        {"bhc-apply", "apply a fitted linearization to a sinogram"},
        {"recon", "reconstruct a sinogram (fbp or sirt)"},
        {"dn-train", "train the residual denoiser on image pairs"},
        {"dn-apply", "run the denoiser over an image"},
        {"pipeline", "run phantom -> scan -> correction -> recon -> denoise -> eval"},
        {"eval", "compare an image against a reference"},
    };

    std::map<std::string, SubArgs> args;
    for (const auto& [name, desc] : subs) {
        CLI::App* sub = app.add_subcommand(name, desc);
        SubArgs& a = args[name];
        sub->add_option("--config", a.config, "JSON config path")->required();
        sub->add_option("--out", a.out, "output directory")->required();
        sub->add_option("--seed", [&a](const std::vector<std::string>& v) {
            a.seed = std::stoull(v[0]);
            return true;
        }, "override every seed the config supplies");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& [name, desc] : subs) {
            if (!app.get_subcommand(name)->parsed()) continue;
            const SubArgs& a = args[name];
            json cfg = load_config(a.config);
            if (name == "phantom") cmd_phantom(cfg, a.out, a.seed);
            else if (name == "scan") cmd_scan(cfg, a.out, a.seed);
            else if (name == "bhc-train") cmd_bhc_train(cfg, a.out, a.seed);
            else if (name == "bhc-fit") cmd_bhc_fit(cfg, a.out);
            else if (name == "bhc-apply") cmd_bhc_apply(cfg, a.out);
            else if (name == "recon") cmd_recon(cfg, a.out);
            else if (name == "dn-train") cmd_dn_train(cfg, a.out, a.seed);
            else if (name == "dn-apply") cmd_dn_apply(cfg, a.out);
            else if (name == "pipeline") cmd_pipeline(cfg, a.out, a.seed);
            else if (name == "eval") cmd_eval(cfg, a.out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

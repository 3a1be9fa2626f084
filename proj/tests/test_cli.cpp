#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "xct/cnn.hpp"
#include "xct/io.hpp"

using Catch::Matchers::ContainsSubstring;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "xct_test_cli";

fs::path fresh_dir(const std::string& name) {
    fs::path p = kRoot / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    std::string cmd = std::string(XCT_BIN) + " " + args + " > " + log.string() + " 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    f << s;
    REQUIRE(f.good());
}

fs::path write_config(const fs::path& dir, json cfg) {
    if (!cfg.contains("version")) cfg["version"] = 1;
    fs::path p = dir / "config.json";
    write_text(p, cfg.dump(2) + "\n");
    return p;
}

json component_cfg(std::uint64_t seed) {
    return {{"phantom",
             {{"kind", "component"},
              {"image_size", 64},
              {"pixel_size_mm", 0.2},
              {"base_radius_mm", 5.0},
              {"num_pores", 2},
              {"pore_radius_lo_mm", 0.4},
              {"pore_radius_hi_mm", 0.8},
              {"seed", seed}}}};
}

// shared across test cases: a phantom and a clean monochromatic scan of it
fs::path make_disk_phantom() {
    static fs::path dir;
    if (!dir.empty()) return dir;
    dir = fresh_dir("disk");
    json cfg = {{"phantom",
                 {{"kind", "disk"},
                  {"image_size", 64},
                  {"pixel_size_mm", 0.2},
                  {"base_radius_mm", 5.0}}}};
    auto cp = write_config(dir, cfg);
    REQUIRE(run("phantom --config " + cp.string() + " --out " + dir.string(),
                dir / "log.txt") == 0);
    return dir;
}

fs::path make_mono_scan() {
    static fs::path dir;
    if (!dir.empty()) return dir;
    fs::path ph = make_disk_phantom();
    dir = fresh_dir("mono_scan");
    json cfg = {{"phantom", (ph / "phantom").string()},
                {"geometry",
                 {{"kind", "parallel"},
                  {"num_views", 30},
                  {"num_bins", 96},
                  {"detector_spacing_mm", 0.2}}},
                {"bh", {{"alpha", 1.5}, {"mu1", 0.3}, {"mu2", 0.3}}}};
    auto cp = write_config(dir, cfg);
    REQUIRE(run("scan --config " + cp.string() + " --out " + dir.string(),
                dir / "log.txt") == 0);
    return dir;
}

} // namespace

TEST_CASE("phantom writes deterministic outputs and honours --seed") {
    auto d1 = fresh_dir("ph1");
    auto d2 = fresh_dir("ph2");
    auto d3 = fresh_dir("ph3");
    auto d4 = fresh_dir("ph4");

    auto c7 = write_config(d1, component_cfg(7));
    REQUIRE(run("phantom --config " + c7.string() + " --out " + d1.string(), d1 / "log.txt") == 0);
    REQUIRE(fs::exists(d1 / "phantom.json"));
    REQUIRE(fs::exists(d1 / "phantom.raw"));
    REQUIRE(fs::exists(d1 / "phantom.pgm"));

    write_config(d2, component_cfg(7));
    REQUIRE(run("phantom --config " + (d2 / "config.json").string() + " --out " + d2.string(),
                d2 / "log.txt") == 0);
    REQUIRE(slurp(d1 / "phantom.raw") == slurp(d2 / "phantom.raw"));

    // config seed 0 with --seed 7 matches config seed 7
    write_config(d3, component_cfg(0));
    REQUIRE(run("phantom --config " + (d3 / "config.json").string() + " --out " + d3.string() +
                    " --seed 7",
                d3 / "log.txt") == 0);
    REQUIRE(slurp(d1 / "phantom.raw") == slurp(d3 / "phantom.raw"));

    write_config(d4, component_cfg(0));
    REQUIRE(run("phantom --config " + (d4 / "config.json").string() + " --out " + d4.string() +
                    " --seed 8",
                d4 / "log.txt") == 0);
    REQUIRE(slurp(d1 / "phantom.raw") != slurp(d4 / "phantom.raw"));
}

TEST_CASE("phantom rejects an oversized base radius with a named field") {
    auto dir = fresh_dir("ph_bad");
    json cfg = component_cfg(1);
    cfg["phantom"]["base_radius_mm"] = 7.0; // exceeds half the 12.8 mm extent
    auto cp = write_config(dir, cfg);
    REQUIRE(run("phantom --config " + cp.string() + " --out " + dir.string(), dir / "log.txt") != 0);
    REQUIRE_THAT(slurp(dir / "log.txt"), ContainsSubstring("base_radius"));
}

TEST_CASE("monochromatic clean scan leaves no beam hardening gap") {
    fs::path dir = make_mono_scan();
    REQUIRE(fs::exists(dir / "sino_bh.raw"));
    REQUIRE(fs::exists(dir / "sino_ideal.raw"));
    REQUIRE(fs::exists(dir / "thickness.raw"));
    REQUIRE(slurp(dir / "sino_bh.raw") == slurp(dir / "sino_ideal.raw"));
}

TEST_CASE("noisy scans reproduce under --seed and change with it") {
    fs::path ph = make_disk_phantom();
    json cfg = {{"phantom", (ph / "phantom").string()},
                {"geometry",
                 {{"kind", "parallel"},
                  {"num_views", 20},
                  {"num_bins", 64},
                  {"detector_spacing_mm", 0.2}}},
                {"bh", {{"alpha", 2.0}, {"mu1", 0.35}, {"mu2", 0.12}}},
                {"noise", {{"i0", 1e5}}}};

    auto d1 = fresh_dir("scan_n1");
    auto d2 = fresh_dir("scan_n2");
    auto d3 = fresh_dir("scan_n3");
    for (auto* d : {&d1, &d2, &d3}) write_config(*d, cfg);

    REQUIRE(run("scan --config " + (d1 / "config.json").string() + " --out " + d1.string() +
                    " --seed 5",
                d1 / "log.txt") == 0);
    REQUIRE(run("scan --config " + (d2 / "config.json").string() + " --out " + d2.string() +
                    " --seed 5",
                d2 / "log.txt") == 0);
    REQUIRE(run("scan --config " + (d3 / "config.json").string() + " --out " + d3.string() +
                    " --seed 6",
                d3 / "log.txt") == 0);

    REQUIRE(slurp(d1 / "sino_bh.raw") == slurp(d2 / "sino_bh.raw"));
    REQUIRE(slurp(d1 / "sino_bh.raw") != slurp(d3 / "sino_bh.raw"));
    // noise never touches the ideal line integrals
    REQUIRE(slurp(d1 / "sino_ideal.raw") == slurp(d3 / "sino_ideal.raw"));
}

TEST_CASE("recon rejects a misspelled method naming the valid ones") {
    fs::path scan = make_mono_scan();
    auto dir = fresh_dir("recon_bad");
    json cfg = {{"sinogram", (scan / "sino_ideal").string()},
                {"image_size", 64},
                {"pixel_size_mm", 0.2},
                {"method", "fpb"}};
    auto cp = write_config(dir, cfg);
    REQUIRE(run("recon --config " + cp.string() + " --out " + dir.string(), dir / "log.txt") != 0);
    auto log = slurp(dir / "log.txt");
    REQUIRE_THAT(log, ContainsSubstring("fbp"));
    REQUIRE_THAT(log, ContainsSubstring("sirt"));
}

TEST_CASE("recon produces a finite image from a clean scan") {
    fs::path scan = make_mono_scan();
    auto dir = fresh_dir("recon_ok");
    json cfg = {{"sinogram", (scan / "sino_ideal").string()},
                {"image_size", 64},
                {"pixel_size_mm", 0.2},
                {"method", "fbp"}};
    auto cp = write_config(dir, cfg);
    REQUIRE(run("recon --config " + cp.string() + " --out " + dir.string(), dir / "log.txt") == 0);

    xct::Image2D img = xct::read_image((dir / "recon").string());
    REQUIRE(img.width == 64);
    REQUIRE(img.height == 64);
    img.validate();
    double peak = 0.0;
    for (double v : img.data) peak = std::max(peak, v);
    REQUIRE(peak > 0.1);
}

TEST_CASE("bhc-apply with an identity polynomial copies the sinogram") {
    fs::path scan = make_mono_scan();
    auto dir = fresh_dir("bhc_identity");
    write_text(dir / "fit.json",
               R"({"poly": {"coeffs": [1.0], "p_max": 100.0, "max_residual": 0.0}})");
    json cfg = {{"sinogram", (scan / "sino_bh").string()}, {"fit", (dir / "fit.json").string()}};
    auto cp = write_config(dir, cfg);
    REQUIRE(run("bhc-apply --config " + cp.string() + " --out " + dir.string(), dir / "log.txt") == 0);
    REQUIRE(slurp(dir / "sino_corr.raw") == slurp(scan / "sino_bh.raw"));

    json apply = json::parse(slurp(dir / "apply.json"));
    REQUIRE(apply["extrapolated_bins"] == 0);
}

TEST_CASE("eval of an image against itself reports perfect scores") {
    fs::path ph = make_disk_phantom();
    auto dir = fresh_dir("eval_self");
    std::string p = (ph / "phantom").string();
    json cfg = {{"image", p}, {"reference", p}};
    auto cp = write_config(dir, cfg);
    REQUIRE(run("eval --config " + cp.string() + " --out " + dir.string(), dir / "log.txt") == 0);

    json report = json::parse(slurp(dir / "report.json"));
    REQUIRE(report["psnr_db"] == "inf");
    REQUIRE(report["ssim"].get<double>() == 1.0);
    REQUIRE(report["rmse"].get<double>() == 0.0);
    REQUIRE(report["image"] == p);
    REQUIRE(report["reference"] == p);
    REQUIRE(report["data_range"].get<double>() == 1.0);
}

TEST_CASE("dn-apply with a bias-free model maps a zero image to zero") {
    auto dir = fresh_dir("dn_zero");
    write_text(dir / "model.json", xct::cnn_to_json(xct::make_cnn<float>(2, 2, 3)).dump());
    xct::Image2D zero(32, 32, 0.2, 0.0);
    xct::write_image((dir / "zero").string(), zero);

    json cfg = {{"model", (dir / "model.json").string()}, {"image", (dir / "zero").string()}};
    auto cp = write_config(dir, cfg);
    REQUIRE(run("dn-apply --config " + cp.string() + " --out " + dir.string(), dir / "log.txt") == 0);

    xct::Image2D res = xct::read_image((dir / "denoised").string());
    REQUIRE(res.width == 32);
    REQUIRE(res.height == 32);
    for (double v : res.data) REQUIRE(v == 0.0);
}

TEST_CASE("bad invocations fail with a nonzero exit") {
    auto dir = fresh_dir("bad_invoke");

    REQUIRE(run("phantom --config " + (dir / "missing.json").string() + " --out " + dir.string(),
                dir / "log1.txt") != 0);

    write_text(dir / "broken.json", "{ nope");
    REQUIRE(run("phantom --config " + (dir / "broken.json").string() + " --out " + dir.string(),
                dir / "log2.txt") != 0);
    REQUIRE_THAT(slurp(dir / "log2.txt"), ContainsSubstring("not valid JSON"));

    REQUIRE(run("frobnicate --config x --out y", dir / "log3.txt") != 0);

    // --config is required
    REQUIRE(run("phantom --out " + dir.string(), dir / "log4.txt") != 0);
}

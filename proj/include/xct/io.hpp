#ifndef XCT_IO_HPP
#define XCT_IO_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xct/core.hpp"

// On-disk format: a JSON sidecar `<path>.json` describing the array plus a
// raw little-endian float32 payload `<path>.raw`, row-major. Values are kept
// as double in memory and narrowed to float on write.

namespace xct {

static_assert(std::endian::native == std::endian::little,
              "raw files are little-endian; big-endian hosts are unsupported");

struct ArrayHeader {
    std::string kind;            // "image" or "sinogram"
    std::vector<std::int64_t> shape;
    std::optional<double> pixel_size_mm;
    std::optional<Geometry> geometry;
};

inline nlohmann::json geometry_to_json(const Geometry& g) {
    nlohmann::json j;
    j["kind"] = g.kind == GeometryKind::parallel ? "parallel" : "fan";
    j["angles"] = g.angles;
    j["detector_spacing_mm"] = g.detector_spacing;
    j["detector_offset_mm"] = g.detector_offset;
    if (g.kind == GeometryKind::fan) {
        j["source_to_center_mm"] = g.source_to_center;
        j["source_to_detector_mm"] = g.source_to_detector;
    }
    return j;
}

inline Geometry geometry_from_json(const nlohmann::json& j) {
    Geometry g;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "parallel") g.kind = GeometryKind::parallel;
    else if (kind == "fan") g.kind = GeometryKind::fan;
    else throw Error("geometry: unknown kind '" + kind + "'");
    g.angles = j.at("angles").get<std::vector<double>>();
    g.detector_spacing = j.at("detector_spacing_mm").get<double>();
    g.detector_offset = j.value("detector_offset_mm", 0.0);
    g.source_to_center = j.value("source_to_center_mm", 0.0);
    g.source_to_detector = j.value("source_to_detector_mm", 0.0);
    g.validate();
    return g;
}

inline void write_array(const std::string& path, const ArrayHeader& header,
                        const std::vector<double>& data) {
    std::size_t n = 1;
    for (auto s : header.shape) {
        require(s > 0, "write_array: nonpositive shape entry");
        n *= static_cast<std::size_t>(s);
    }
    require(n == data.size(), "write_array: shape product != data length");

    nlohmann::json j;
    j["kind"] = header.kind;
    j["shape"] = header.shape;
    j["dtype"] = "float32";
    if (header.pixel_size_mm) j["pixel_size_mm"] = *header.pixel_size_mm;
    if (header.geometry) j["geometry"] = geometry_to_json(*header.geometry);
    std::ofstream jf(path + ".json");
    require(jf.good(), "write_array: cannot open " + path + ".json");
    jf << j.dump(2) << "\n";
    require(jf.good(), "write_array: failed writing " + path + ".json");

    std::vector<float> buf(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        buf[i] = static_cast<float>(data[i]);
    std::ofstream rf(path + ".raw", std::ios::binary);
    require(rf.good(), "write_array: cannot open " + path + ".raw");
    rf.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    require(rf.good(), "write_array: failed writing " + path + ".raw");
}

inline std::pair<ArrayHeader, std::vector<double>> read_array(const std::string& path) {
    std::ifstream jf(path + ".json");
    require(jf.good(), "read_array: missing " + path + ".json");
    nlohmann::json j;
    jf >> j;

    ArrayHeader h;
    h.kind = j.at("kind").get<std::string>();
    h.shape = j.at("shape").get<std::vector<std::int64_t>>();
    if (j.contains("pixel_size_mm")) h.pixel_size_mm = j["pixel_size_mm"].get<double>();
    if (j.contains("geometry")) h.geometry = geometry_from_json(j["geometry"]);

    std::size_t n = 1;
    for (auto s : h.shape) {
        require(s > 0, "read_array: nonpositive shape entry in " + path + ".json");
        n *= static_cast<std::size_t>(s);
    }

    std::ifstream rf(path + ".raw", std::ios::binary | std::ios::ate);
    require(rf.good(), "read_array: missing " + path + ".raw");
    auto bytes = static_cast<std::size_t>(rf.tellg());
    require(bytes == n * sizeof(float),
            "read_array: " + path + ".raw holds " + std::to_string(bytes) +
                " bytes, header shape needs " + std::to_string(n * sizeof(float)));
    rf.seekg(0);
    std::vector<float> buf(n);
    rf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    require(rf.good(), "read_array: failed reading " + path + ".raw");

    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(buf[i]), "read_array: non-finite value in " + path + ".raw");
        data[i] = static_cast<double>(buf[i]);
    }
    return {std::move(h), std::move(data)};
}

inline void write_image(const std::string& path, const Image2D& img) {
    img.validate();
    ArrayHeader h;
    h.kind = "image";
    h.shape = {img.height, img.width};
    h.pixel_size_mm = img.pixel_size;
    write_array(path, h, img.data);
}

inline Image2D read_image(const std::string& path) {
    auto [h, data] = read_array(path);
    require(h.kind == "image", "read_image: '" + path + "' holds kind '" + h.kind + "'");
    require(h.shape.size() == 2, "read_image: expected 2D shape");
    Image2D img;
    img.height = static_cast<int>(h.shape[0]);
    img.width = static_cast<int>(h.shape[1]);
    img.pixel_size = h.pixel_size_mm.value_or(1.0);
    img.data = std::move(data);
    img.validate();
    return img;
}

inline void write_sinogram(const std::string& path, const Sinogram& sino) {
    sino.validate();
    ArrayHeader h;
    h.kind = "sinogram";
    h.shape = {sino.num_views, sino.num_bins};
    h.geometry = sino.geometry;
    write_array(path, h, sino.data);
}

inline Sinogram read_sinogram(const std::string& path) {
    auto [h, data] = read_array(path);
    require(h.kind == "sinogram", "read_sinogram: '" + path + "' holds kind '" + h.kind + "'");
    require(h.shape.size() == 2, "read_sinogram: expected 2D shape");
    require(h.geometry.has_value(), "read_sinogram: header lacks geometry");
    Sinogram s;
    s.num_views = static_cast<int>(h.shape[0]);
    s.num_bins = static_cast<int>(h.shape[1]);
    s.geometry = *h.geometry;
    s.data = std::move(data);
    s.validate();
    return s;
}

// 8-bit binary PGM with linear windowing; midpoints round half away from zero.
inline void export_pgm(const Image2D& img, const std::string& path, double lo, double hi) {
    require(lo < hi, "export_pgm: window lo must be < hi");
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "export_pgm: cannot open " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v = (img.at(y, x) - lo) / (hi - lo) * 255.0;
            v = std::min(255.0, std::max(0.0, v));
            row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::round(v));
        }
        f.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    require(f.good(), "export_pgm: failed writing " + path);
}

} // namespace xct

#endif

#ifndef XCT_SEGMENT_HPP
#define XCT_SEGMENT_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

#include "xct/core.hpp"

namespace xct {

// Otsu's threshold over a num_bins histogram spanning [min, max]. Candidate
// split edges sit between histogram bins; the returned threshold is the
// edge value maximizing the inter-class variance w0*w1*(m0-m1)^2, ties
// broken toward the lower edge.
inline double otsu_threshold(const Image2D& img, int num_bins = 256) {
    img.validate();
    require(num_bins >= 2, "otsu_threshold: num_bins must be >= 2");
    auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
    double mn = *mn_it, mx = *mx_it;
    require(mx > mn, "otsu_threshold: constant image has no threshold");

    std::vector<double> hist(static_cast<std::size_t>(num_bins), 0.0);
    double scale = num_bins / (mx - mn);
    for (double v : img.data) {
        auto b = static_cast<int>((v - mn) * scale);
        b = std::clamp(b, 0, num_bins - 1);
        hist[static_cast<std::size_t>(b)] += 1.0;
    }

    double total = static_cast<double>(img.data.size());
    double sum_all = 0.0;
    for (int b = 0; b < num_bins; ++b)
        sum_all += b * hist[static_cast<std::size_t>(b)];

    int best_edge = 1;
    double best_score = -1.0;
    double w0 = 0.0, sum0 = 0.0;
    for (int edge = 1; edge < num_bins; ++edge) {
        w0 += hist[static_cast<std::size_t>(edge - 1)];
        sum0 += (edge - 1) * hist[static_cast<std::size_t>(edge - 1)];
        double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        double score = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (score > best_score) {
            best_score = score;
            best_edge = edge;
        }
    }
    require(best_score >= 0.0, "otsu_threshold: no valid split");
    return mn + best_edge * (mx - mn) / num_bins;
}

inline Image2D binarize(const Image2D& img, double threshold) {
    Image2D out = img;
    for (double& v : out.data) v = v > threshold ? 1.0 : 0.0;
    return out;
}

} // namespace xct

#endif

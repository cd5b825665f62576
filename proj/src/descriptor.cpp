#include "dpcn/descriptor.hpp"

#include <array>
#include <bit>
#include <cmath>

namespace dpcn {

namespace {

// 256-entry lookup: uniform patterns (at most 2 circular 0/1 transitions)
// get 0..57 in ascending numeric order, everything else maps to bin 58.
std::array<int, 256> build_uniform_table() {
    std::array<int, 256> table{};
    int next = 0;
    for (int p = 0; p < 256; ++p) {
        const unsigned rot = static_cast<unsigned char>((p << 1) | (p >> 7));
        const int transitions = std::popcount(static_cast<unsigned>(p) ^ rot);
        table[p] = (transitions <= 2) ? next++ : -1;
    }
    for (int p = 0; p < 256; ++p)
        if (table[p] < 0) table[p] = kLbpBins - 1;
    return table;
}

// circular neighborhood, radius 1, clockwise from the top-left corner
constexpr int kOffY[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
constexpr int kOffX[8] = {-1, 0, 1, 1, 1, 0, -1, -1};

} // namespace

DescriptorVector compute_descriptor(const LabeledImage& img) {
    static const std::array<int, 256> uniform_table = build_uniform_table();
    const Tensor& px = img.pixels;
    if (px.h < 3 || px.w < 3) throw DpcnError("compute_descriptor: image too small");
    const int ch = (px.c == 3) ? 1 : 0;

    DescriptorVector d;
    d.values.assign(kDescriptorDim, 0.0);
    d.source_id = img.id;

    long long lbp_total = 0;
    for (int y = 1; y < px.h - 1; ++y) {
        for (int x = 1; x < px.w - 1; ++x) {
            const double center = px.at(0, y, x, ch);
            int code = 0;
            for (int p = 0; p < 8; ++p)
                if (px.at(0, y + kOffY[p], x + kOffX[p], ch) > center) code |= 1 << p;
            d.values[uniform_table[code]] += 1.0;
            ++lbp_total;
        }
    }
    for (int b = 0; b < kLbpBins; ++b) d.values[b] /= static_cast<double>(lbp_total);

    double mag_total = 0.0;
    for (int y = 1; y < px.h - 1; ++y) {
        for (int x = 1; x < px.w - 1; ++x) {
            const double gx = (px.at(0, y, x + 1, ch) - px.at(0, y, x - 1, ch)) * 0.5;
            const double gy = (px.at(0, y + 1, x, ch) - px.at(0, y - 1, x, ch)) * 0.5;
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double deg = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
            if (deg < 0.0) deg += 180.0;
            if (deg >= 180.0) deg -= 180.0;
            int bin = static_cast<int>(deg / (180.0 / kGradBins));
            if (bin >= kGradBins) bin = kGradBins - 1;
            d.values[kLbpBins + bin] += mag;
            mag_total += mag;
        }
    }
    if (mag_total > 0.0) {
        for (int b = 0; b < kGradBins; ++b) d.values[kLbpBins + b] /= mag_total;
    } else {
        // no gradient anywhere: the orientation histogram is uniform by convention
        for (int b = 0; b < kGradBins; ++b) d.values[kLbpBins + b] = 1.0 / kGradBins;
    }
    return d;
}

} // namespace dpcn

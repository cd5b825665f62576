#include "dpcn/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace dpcn {

std::vector<int> LabeledImageSet::class_counts() const {
    std::vector<int> counts(num_classes, 0);
    for (const auto& it : items) counts.at(it.grade)++;
    return counts;
}

void validate_image(const LabeledImage& img, int num_classes) {
    const Tensor& t = img.pixels;
    if (t.n != 1) throw DpcnError("image '" + img.id + "': pixel tensor must be rank 3");
    if (t.h < 16 || t.w < 16)
        throw DpcnError("image '" + img.id + "': height and width must be >= 16");
    if (t.c != 1 && t.c != 3)
        throw DpcnError("image '" + img.id + "': channels must be 1 or 3");
    for (double x : t.v) {
        if (!std::isfinite(x) || x < 0.0 || x > 1.0)
            throw DpcnError("image '" + img.id + "': pixel values must be finite in [0,1]");
    }
    if (img.grade < 0 || img.grade >= num_classes)
        throw DpcnError("image '" + img.id + "': grade " + std::to_string(img.grade) +
                        " out of range for " + std::to_string(num_classes) + " classes");
}

namespace {

// Skips whitespace and '#' comment lines, then reads one unsigned integer.
int read_pnm_int(std::istream& in, const std::string& path) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF) throw DpcnError("truncated PNM header in '" + path + "'");
    int value = 0;
    bool any = false;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        any = true;
        ch = in.get();
    }
    if (!any) throw DpcnError("malformed PNM header in '" + path + "'");
    return value;
}

} // namespace

Tensor read_pnm(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0)
        throw DpcnError("PNG support not enabled in this build: '" + path + "'");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DpcnError("cannot open image '" + path + "'");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw DpcnError("unsupported image format in '" + path + "' (need binary PGM/PPM)");
    const int channels = (m1 == '6') ? 3 : 1;
    const int w = read_pnm_int(in, path);
    const int h = read_pnm_int(in, path);
    const int maxval = read_pnm_int(in, path);
    if (w <= 0 || h <= 0) throw DpcnError("bad dimensions in '" + path + "'");
    if (maxval != 255) throw DpcnError("unsupported maxval " + std::to_string(maxval) +
                                       " in '" + path + "' (need 255)");
    // header ends with exactly one whitespace byte, already consumed by the
    // integer reader's terminating character
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw DpcnError("truncated pixel data in '" + path + "'");
    Tensor t = Tensor::image(h, w, channels);
    for (std::size_t i = 0; i < raw.size(); ++i) t.v[i] = raw[i] / 255.0;
    return t;
}

void write_pnm(const std::string& path, const Tensor& img) {
    if (img.n != 1 || (img.c != 1 && img.c != 3))
        throw DpcnError("write_pnm: tensor must be a single image with 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DpcnError("cannot write image '" + path + "'");
    out << (img.c == 3 ? "P6" : "P5") << "\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> raw(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        double x = std::clamp(img.v[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(x * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DpcnError("failed writing image '" + path + "'");
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
    if (img.n != 1) throw DpcnError("resize_bilinear: expected a single image");
    if (out_h <= 0 || out_w <= 0) throw DpcnError("resize_bilinear: bad target size");
    Tensor out = Tensor::image(out_h, out_w, img.c);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const double wx = fx - x0;
            for (int k = 0; k < img.c; ++k) {
                const double top = img.at(0, y0, x0, k) * (1.0 - wx) + img.at(0, y0, x1, k) * wx;
                const double bot = img.at(0, y1, x0, k) * (1.0 - wx) + img.at(0, y1, x1, k) * wx;
                out.at(0, y, x, k) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Tensor rotate_bilinear(const Tensor& img, double degrees) {
    if (img.n != 1) throw DpcnError("rotate_bilinear: expected a single image");
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double ct = std::cos(rad), st = std::sin(rad);
    const double cy = (img.h - 1) * 0.5, cx = (img.w - 1) * 0.5;
    Tensor out = Tensor::image(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            // inverse map: rotate the output coordinate back into the source
            const double dy = y - cy, dx = x - cx;
            const double sx = cx + ct * dx + st * dy;
            const double sy = cy - st * dx + ct * dy;
            if (sx < 0.0 || sy < 0.0 || sx > img.w - 1 || sy > img.h - 1) continue; // zero fill
            const int x0 = static_cast<int>(sx);
            const int y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const int y1 = std::min(y0 + 1, img.h - 1);
            const double wx = sx - x0, wy = sy - y0;
            for (int k = 0; k < img.c; ++k) {
                const double top = img.at(0, y0, x0, k) * (1.0 - wx) + img.at(0, y0, x1, k) * wx;
                const double bot = img.at(0, y1, x0, k) * (1.0 - wx) + img.at(0, y1, x1, k) * wx;
                out.at(0, y, x, k) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

double luminance(const Tensor& img, int y, int x) {
    if (img.c == 1) return img.at(0, y, x, 0);
    return 0.299 * img.at(0, y, x, 0) + 0.587 * img.at(0, y, x, 1) + 0.114 * img.at(0, y, x, 2);
}

} // namespace dpcn

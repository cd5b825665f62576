#pragma once

#include <string>
#include <vector>

#include "dpcn/tensor.hpp"

namespace dpcn {

// One preprocessed sample: pixel tensor (1 x H x W x C, values in [0,1]),
// integer grade and an opaque identifier.
struct LabeledImage {
    Tensor pixels;      // n == 1, c in {1,3}
    int grade = 0;
    std::string id;
};

struct LabeledImageSet {
    std::vector<LabeledImage> items;
    int num_classes = 0;

    std::vector<int> class_counts() const;
};

// Validates the LabeledImage invariants (dims, channels, range, finiteness,
// grade < num_classes); throws DpcnError with the image id on violation.
void validate_image(const LabeledImage& img, int num_classes);

// Binary PGM (P5) / PPM (P6) with maxval 255. PNG is not compiled into this
// build; encountering a .png file is a hard error.
Tensor read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Tensor& img);

// Bilinear resize with pixel-center sampling and edge clamping. Resizing to
// the source size reproduces the input exactly.
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

// Rotation by `degrees` around the image center, bilinear resample, zero
// fill outside the source support. degrees == 0 reproduces the input.
Tensor rotate_bilinear(const Tensor& img, double degrees);

// Luminance (Rec.601 for RGB, identity for grayscale) of one pixel.
double luminance(const Tensor& img, int y, int x);

} // namespace dpcn

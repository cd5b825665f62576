#pragma once

#include "dpcn/model.hpp"

namespace dpcn {

struct Heatmap {
    Tensor values;  // 1 x H x W x 1, non-negative, max-normalized when nonzero
};

// Grad-CAM: per-channel weights are the spatial means of the target-class
// logit's gradient at the last conv activation; the weighted channel sum is
// rectified, upsampled to the input size, and max-normalized (an all-zero
// map stays all-zero).
Heatmap grad_cam(const ModelState& model, const LabeledImage& img, int target_class);

// Blends the heatmap as a red overlay onto the (grayscale or color) image.
Tensor heatmap_overlay(const Tensor& img, const Heatmap& heat);

} // namespace dpcn

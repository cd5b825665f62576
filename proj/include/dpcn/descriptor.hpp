#pragma once

#include <string>
#include <vector>

#include "dpcn/image.hpp"

namespace dpcn {

inline constexpr int kLbpBins = 59;       // 58 uniform patterns + 1 catch-all
inline constexpr int kGradBins = 16;      // orientation over [0,180)
inline constexpr int kDescriptorDim = kLbpBins + kGradBins;

// Cheap texture signature used for clustering: an L1-normalized uniform-LBP
// histogram (8 neighbors, radius 1) concatenated with an L1-normalized
// gradient-orientation histogram (central differences), both on the green
// (or sole) channel.
struct DescriptorVector {
    std::vector<double> values; // size kDescriptorDim
    std::string source_id;
};

DescriptorVector compute_descriptor(const LabeledImage& img);

} // namespace dpcn

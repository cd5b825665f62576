#pragma once

#include <map>

#include "dpcn/clustering.hpp"
#include "dpcn/descriptor.hpp"
#include "dpcn/image.hpp"

namespace dpcn {

// The cluster-center images that drive architecture construction. Every
// entry is an exact member of the source training set.
struct RepresentativeSet {
    std::vector<LabeledImage> images;       // ordered by class, then medoid index
    std::map<int, int> per_class_counts;
    int num_classes = 0;
};

// Per class: descriptors -> gap statistic (K_max = min(10, count-1), B = 10)
// -> PAM medoids. Singleton classes contribute their only sample directly.
// Classes are processed with independent child streams, so results do not
// depend on the number of worker threads.
RepresentativeSet select_representatives(const LabeledImageSet& train, Rng& rng,
                                         int threads = 1);

// Writes manifest.json ([{"class":k,"ids":[...]}, ...]) plus copies of the
// chosen images under <dir>/images/.
void write_representatives(const std::string& dir, const RepresentativeSet& reps);

} // namespace dpcn

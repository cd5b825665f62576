#pragma once

#include <string>
#include <tuple>

#include "dpcn/image.hpp"
#include "dpcn/rng.hpp"

namespace dpcn {

struct PreprocessConfig {
    int target_side = 64;          // 512 at full scale, 64 for desk runs
    double crop_threshold = 0.1;   // luminance level separating foreground
    double augment_cap = 10.0;     // oversampling bound per class

    void validate() const;
};

enum class Scenario { SC1, SC2, SC3 };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);

// Reads `<root>/labels.csv` (header `filename,grade`) and `<root>/images/*`.
// Items are ordered by filename; every referenced file must decode.
LabeledImageSet load_dataset(const std::string& root_path, int num_classes);

// Writes the same layout load_dataset reads (PGM for 1 channel, PPM for 3).
void save_dataset(const std::string& root_path, const LabeledImageSet& set);

// Crops to the bounding box of {luminance > crop_threshold} and resizes to
// target_side x target_side. All-dark input is a hard error.
LabeledImage preprocess_image(const LabeledImage& img, const PreprocessConfig& cfg);

// Oversamples minority classes with randomly rotated copies until each class
// count reaches min(majority count, augment_cap * original count). Originals
// are kept untouched; copies get derived ids.
LabeledImageSet augment_balance(const LabeledImageSet& set, Rng& rng,
                                const PreprocessConfig& cfg);

// SC1 keeps labels as-is; SC2 maps {0}->0, {1..4}->1; SC3 maps {0,1}->0,
// {2..4}->1. SC2/SC3 require a 5-class input set.
LabeledImageSet remap_scenario(const LabeledImageSet& set, Scenario s);

// Stratified split; per-class counts stay within one item of the exact
// ratios. Classes too small to stratify put their extras in train (warns).
std::tuple<LabeledImageSet, LabeledImageSet, LabeledImageSet>
split_dataset(const LabeledImageSet& set, double train_ratio, double val_ratio,
              double test_ratio, Rng& rng);

// Procedural texture classes: class k is a sinusoidal grating oriented at
// k*180/C degrees with per-image random phase and frequency jitter plus 5%
// Gaussian pixel noise, clamped to [0,1].
LabeledImageSet generate_toy_dataset(int n_per_class, int num_classes, int side, Rng& rng);

} // namespace dpcn

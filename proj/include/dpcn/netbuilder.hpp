#pragma once

#include "dpcn/model.hpp"
#include "dpcn/pca.hpp"
#include "dpcn/representatives.hpp"
#include "dpcn/scatter.hpp"

namespace dpcn {

struct GrowOptions {
    double epsilon = 0.99;       // eigenvalue-mass threshold per layer
    int depth_cap = 32;          // guard against non-terminating growth
    int min_spatial = 3;         // stop before blocks can no longer tile
    std::string activation = "relu";
};

// Grows the convolutional body: derive a kernel bank from activation
// patches, append the block (7x7 first, 3x3 after; maxpool after blocks 1
// and 2), re-run the representatives, and keep going while the trace ratio
// of their activations does not decrease. A block that lowers the ratio is
// removed again, so the returned depth sits at the ratio's maximum. The
// returned model carries the PCA kernels and construction-time BN
// statistics; arch.trace_history records every probe including a rejected
// one.
ModelState grow_architecture(const RepresentativeSet& reps, const GrowOptions& opts);

inline ModelState grow_architecture(const RepresentativeSet& reps, double epsilon) {
    GrowOptions opts;
    opts.epsilon = epsilon;
    return grow_architecture(reps, opts);
}

// Appends gap || gmp -> concat -> dropout -> softmax. Values of dropout_p
// outside the tuned range [0.25, 0.5] warn but are accepted.
ArchSpec finalize_head(const ArchSpec& body, int num_classes, double dropout_p);

// Same, materializing the dense layer with seeded Glorot-uniform weights.
void finalize_head(ModelState& model, int num_classes, double dropout_p, Rng& rng);

struct ComplexityRow {
    std::string name;
    long long params = 0;
    long long flops = 0;
};

struct ComplexityReport {
    long long learnable_parameters = 0;
    long long flops = 0;  // one forward pass at the arch input shape
    std::vector<ComplexityRow> rows;
};

// Counting conventions: conv k*k*c_in*c_out weights (no bias) and
// 2*k*k*c_in*c_out*H*W flops (multiply-add = 2); BN 2*c_in learnable
// parameters (running stats not counted) and 2 ops per element;
// activations and pools 1 op per input element; dense in*out + out
// parameters and 2*in*out + out flops.
ComplexityReport count_complexity(const ArchSpec& arch);

std::string complexity_json(const ComplexityReport& report);

} // namespace dpcn

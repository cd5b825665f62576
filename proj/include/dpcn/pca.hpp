#pragma once

#include <string>
#include <vector>

#include "dpcn/tensor.hpp"

namespace dpcn {

// Flattened activation blocks: M columns of dimension D = w*h*d, stored
// column-major. Column order is image-major, then row-major tile order;
// within a column the layout is (y, x, channel).
struct PatchMatrix {
    int block_w = 0, block_h = 0, block_d = 0;
    int source_count = 0;               // K images
    std::size_t cols = 0;               // M = K * B
    std::vector<double> data;           // D * M, column-major

    std::size_t dim() const { return static_cast<std::size_t>(block_w) * block_h * block_d; }
    const double* column(std::size_t i) const { return data.data() + i * dim(); }
    double* column(std::size_t i) { return data.data() + i * dim(); }
};

// Non-overlapping tiling with stride (h, w); remainder rows/columns are
// discarded. All maps must share one shape with H >= h and W >= w.
PatchMatrix extract_blocks(const std::vector<Tensor>& maps, int w, int h);

struct EigenSpectrum {
    // All computed eigenvalues of A*A^T, clamped at zero, non-increasing.
    std::vector<double> eigenvalues;
    // Orthonormal eigenvectors for the numerically nonzero eigenvalues only
    // (the Gram route cannot produce nullspace vectors); eigenvectors[j] has
    // length D and pairs with eigenvalues[j].
    std::vector<std::vector<double>> eigenvectors;
    std::vector<double> cumulative_energy;  // partial sums / total mass
};

struct KernelBank {
    std::vector<Tensor> kernels;        // L selected + optional remainder, each (h, w, d)
    int selected_count = 0;             // L
    std::vector<double> mean_vector;    // centering mean, length D
    double energy_threshold = 0.0;
};

// Centers the columns, eigendecomposes C = A*A^T (via the M x M Gram matrix
// when M < D), selects the minimal L whose cumulative eigenvalue mass
// reaches epsilon, and appends the normalized sum of the remaining nonzero
// eigenvectors as one extra kernel. Eigenvectors are sign-canonicalized so
// the output is deterministic.
KernelBank derive_kernel_bank(const PatchMatrix& patches, double epsilon);

// Full spectrum and cumulative-energy curve for threshold analysis.
EigenSpectrum energy_profile(const PatchMatrix& patches);

// CSV rows `component,eigenvalue,cumulative_energy`, 1-indexed.
void export_energy_csv(const EigenSpectrum& spectrum, const std::string& path);

} // namespace dpcn

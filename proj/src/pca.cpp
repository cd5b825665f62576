#include "dpcn/pca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

namespace dpcn {

namespace {

constexpr double kZeroEigenRel = 1e-10; // relative cutoff for nonzero eigenvalues

struct Decomposition {
    std::vector<double> eigenvalues;                // clamped, descending
    std::vector<std::vector<double>> eigenvectors;  // for nonzero eigenvalues
    std::vector<double> mean;
    double total_mass = 0.0;
};

void canonicalize_sign(std::vector<double>& u) {
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (std::abs(u[i]) > best) {
            best = std::abs(u[i]);
            arg = i;
        }
    }
    if (u[arg] < 0.0)
        for (double& x : u) x = -x;
}

Decomposition decompose(const PatchMatrix& patches) {
    const std::size_t D = patches.dim();
    const std::size_t M = patches.cols;
    if (M < 2) throw DpcnError("derive_kernel_bank: need at least 2 patches");

    Eigen::MatrixXd A(D, M);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t r = 0; r < D; ++r) A(r, i) = patches.column(i)[r];

    Decomposition out;
    out.mean.resize(D);
    const Eigen::VectorXd mean = A.rowwise().mean();
    for (std::size_t r = 0; r < D; ++r) out.mean[r] = mean(r);
    A.colwise() -= mean;

    const double total_variance = A.squaredNorm(); // trace of A*A^T
    if (total_variance <= 1e-12) throw DpcnError("degenerate patches: total variance ~ 0");

    // The covariance is left unnormalized, so eigenvalue ratios are the
    // energy fractions directly.
    std::vector<std::pair<double, Eigen::VectorXd>> pairs;
    if (M >= D) {
        const Eigen::MatrixXd C = A * A.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C);
        if (solver.info() != Eigen::Success)
            throw DpcnError("eigendecomposition failed");
        for (Eigen::Index j = static_cast<Eigen::Index>(D) - 1; j >= 0; --j)
            pairs.emplace_back(std::max(0.0, solver.eigenvalues()(j)),
                               solver.eigenvectors().col(j));
    } else {
        // Gram route: the nonzero spectrum of A*A^T equals that of A^T*A,
        // and u = A v / sqrt(lambda) maps Gram eigenvectors back up.
        const Eigen::MatrixXd G = A.transpose() * A;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(G);
        if (solver.info() != Eigen::Success)
            throw DpcnError("eigendecomposition failed");
        const double lead = std::max(0.0, solver.eigenvalues()(static_cast<Eigen::Index>(M) - 1));
        for (Eigen::Index j = static_cast<Eigen::Index>(M) - 1; j >= 0; --j) {
            const double lambda = std::max(0.0, solver.eigenvalues()(j));
            if (lambda > kZeroEigenRel * lead) {
                pairs.emplace_back(lambda, (A * solver.eigenvectors().col(j)) / std::sqrt(lambda));
            } else {
                pairs.emplace_back(lambda, Eigen::VectorXd());
            }
        }
    }

    out.total_mass = 0.0;
    const double lead = pairs.empty() ? 0.0 : pairs.front().first;
    for (auto& [lambda, vec] : pairs) {
        out.total_mass += lambda;
        out.eigenvalues.push_back(lambda);
        if (vec.size() > 0 && lambda > kZeroEigenRel * lead) {
            std::vector<double> u(D);
            for (std::size_t r = 0; r < D; ++r) u[r] = vec(r);
            canonicalize_sign(u);
            out.eigenvectors.push_back(std::move(u));
        }
    }
    return out;
}

} // namespace

PatchMatrix extract_blocks(const std::vector<Tensor>& maps, int w, int h) {
    if (maps.empty()) throw DpcnError("extract_blocks: no activation maps");
    const int H = maps[0].h, W = maps[0].w, d = maps[0].c;
    for (const Tensor& m : maps)
        if (m.n != 1 || m.h != H || m.w != W || m.c != d)
            throw DpcnError("extract_blocks: maps must share one shape");
    if (H < h || W < w)
        throw DpcnError("extract_blocks: map " + std::to_string(H) + "x" + std::to_string(W) +
                        " smaller than block " + std::to_string(h) + "x" + std::to_string(w));

    const int tiles_y = H / h, tiles_x = W / w;
    PatchMatrix out;
    out.block_w = w;
    out.block_h = h;
    out.block_d = d;
    out.source_count = static_cast<int>(maps.size());
    out.cols = static_cast<std::size_t>(maps.size()) * tiles_y * tiles_x;
    out.data.resize(out.cols * out.dim());

    std::size_t col = 0;
    for (const Tensor& m : maps) {
        for (int ty = 0; ty < tiles_y; ++ty) {
            for (int tx = 0; tx < tiles_x; ++tx) {
                double* dst = out.column(col++);
                std::size_t r = 0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        for (int c = 0; c < d; ++c)
                            dst[r++] = m.at(0, ty * h + y, tx * w + x, c);
            }
        }
    }
    return out;
}

KernelBank derive_kernel_bank(const PatchMatrix& patches, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw DpcnError("derive_kernel_bank: epsilon must lie in (0,1]");
    const Decomposition dec = decompose(patches);
    const std::size_t significant = dec.eigenvectors.size();

    std::size_t L = significant;
    double cum = 0.0;
    for (std::size_t j = 0; j < significant; ++j) {
        cum += dec.eigenvalues[j];
        if (cum / dec.total_mass >= epsilon) {
            L = j + 1;
            break;
        }
    }

    KernelBank bank;
    bank.selected_count = static_cast<int>(L);
    bank.mean_vector = dec.mean;
    bank.energy_threshold = epsilon;

    const int w = patches.block_w, h = patches.block_h, d = patches.block_d;
    const auto reshape = [&](const std::vector<double>& u) {
        Tensor k = Tensor::image(h, w, d);
        std::size_t r = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < d; ++c) k.at(0, y, x, c) = u[r++];
        return k;
    };
    for (std::size_t j = 0; j < L; ++j) bank.kernels.push_back(reshape(dec.eigenvectors[j]));

    // Remaining nonzero eigenvectors collapse into one extra kernel; with
    // nothing left over the bank stays at L kernels.
    std::vector<double> rem(patches.dim(), 0.0);
    for (std::size_t j = L; j < significant; ++j)
        for (std::size_t r = 0; r < rem.size(); ++r) rem[r] += dec.eigenvectors[j][r];
    double norm = 0.0;
    for (double x : rem) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 1e-12) {
        for (double& x : rem) x /= norm;
        bank.kernels.push_back(reshape(rem));
    }
    return bank;
}

EigenSpectrum energy_profile(const PatchMatrix& patches) {
    const Decomposition dec = decompose(patches);
    EigenSpectrum spec;
    spec.eigenvalues = dec.eigenvalues;
    spec.eigenvectors = dec.eigenvectors;
    spec.cumulative_energy.reserve(dec.eigenvalues.size());
    double cum = 0.0;
    for (double lambda : dec.eigenvalues) {
        cum += lambda;
        spec.cumulative_energy.push_back(cum / dec.total_mass);
    }
    return spec;
}

void export_energy_csv(const EigenSpectrum& spectrum, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DpcnError("cannot write energy CSV '" + path + "'");
    out << "component,eigenvalue,cumulative_energy\n";
    out.precision(17);
    for (std::size_t j = 0; j < spectrum.eigenvalues.size(); ++j)
        out << (j + 1) << "," << spectrum.eigenvalues[j] << ","
            << spectrum.cumulative_energy[j] << "\n";
}

} // namespace dpcn

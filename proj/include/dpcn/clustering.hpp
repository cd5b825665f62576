#pragma once

#include <cstddef>
#include <vector>

#include "dpcn/common.hpp"
#include "dpcn/rng.hpp"

namespace dpcn {

struct MedoidAssignment {
    std::vector<std::size_t> medoid_indices;  // K distinct point indices, ascending
    std::vector<std::size_t> assignment;      // per point: index of its medoid point
    double total_cost = 0.0;                  // sum of Euclidean distances to medoids
};

// PAM: greedy BUILD then best-improvement SWAP passes until no single
// (medoid, non-medoid) exchange lowers the cost. Ties break to the lowest
// index, so the result is deterministic.
MedoidAssignment k_medoids(const std::vector<std::vector<double>>& points,
                           std::size_t K, Rng& rng);

struct GapReport {
    struct Entry {
        std::size_t k = 0;
        double log_w_data = 0.0;
        double mean_log_w_ref = 0.0;
        double gap = 0.0;
        double s_k = 0.0;
    };
    std::vector<Entry> entries;
    std::size_t chosen_k = 1;
};

// Compares within-cluster dispersion against B uniform reference sets drawn
// over the data's per-dimension bounding box; chooses the smallest K with
// Gap(K) >= Gap(K+1) - s_{K+1}, falling back to K_max.
GapReport gap_statistic(const std::vector<std::vector<double>>& points,
                        std::size_t k_max, std::size_t B, Rng& rng);

} // namespace dpcn

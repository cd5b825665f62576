#include "dpcn/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpcn {

namespace {

std::vector<double> distance_matrix(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < pts[i].size(); ++k) {
                const double diff = pts[i][k] - pts[j][k];
                s += diff * diff;
            }
            d[i * n + j] = d[j * n + i] = std::sqrt(s);
        }
    }
    return d;
}

double cost_of(const std::vector<double>& dist, std::size_t n,
               const std::vector<std::size_t>& medoids) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : medoids) best = std::min(best, dist[j * n + m]);
        total += best;
    }
    return total;
}

} // namespace

MedoidAssignment k_medoids(const std::vector<std::vector<double>>& points,
                           std::size_t K, [[maybe_unused]] Rng& rng) {
    const std::size_t n = points.size();
    if (K < 1 || K > n) throw DpcnError("k_medoids: K must satisfy 1 <= K <= |points|");
    for (const auto& p : points)
        if (p.size() != points[0].size())
            throw DpcnError("k_medoids: points must share one dimension");

    const std::vector<double> dist = distance_matrix(points);

    // BUILD: first the 1-medoid optimum, then greedily the point whose
    // addition removes the most cost. Ties go to the lowest index.
    std::vector<std::size_t> medoids;
    std::vector<char> is_medoid(n, 0);
    {
        std::size_t best = 0;
        double best_sum = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += dist[i * n + j];
            if (s < best_sum - 1e-12) {
                best_sum = s;
                best = i;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
    }
    std::vector<double> nearest(n);
    for (std::size_t j = 0; j < n; ++j) nearest[j] = dist[j * n + medoids[0]];
    while (medoids.size() < K) {
        std::size_t best = n;
        double best_gain = -1.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double gain = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                gain += std::max(0.0, nearest[j] - dist[j * n + c]);
            if (gain > best_gain + 1e-12) {
                best_gain = gain;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        for (std::size_t j = 0; j < n; ++j)
            nearest[j] = std::min(nearest[j], dist[j * n + best]);
    }

    // SWAP: apply the best single exchange while one still lowers the cost.
    double current = cost_of(dist, n, medoids);
    for (;;) {
        double best_cost = current;
        std::size_t best_out = n, best_in = n;
        for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
            for (std::size_t c = 0; c < n; ++c) {
                if (is_medoid[c]) continue;
                std::vector<std::size_t> trial = medoids;
                trial[mi] = c;
                const double cost = cost_of(dist, n, trial);
                if (cost < best_cost - 1e-12) {
                    best_cost = cost;
                    best_out = mi;
                    best_in = c;
                }
            }
        }
        if (best_out == n) break;
        is_medoid[medoids[best_out]] = 0;
        is_medoid[best_in] = 1;
        medoids[best_out] = best_in;
        current = best_cost;
    }

    std::sort(medoids.begin(), medoids.end());
    MedoidAssignment out;
    out.medoid_indices = medoids;
    out.assignment.resize(n);
    out.total_cost = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t best_m = medoids[0];
        double best_d = dist[j * n + medoids[0]];
        for (std::size_t m : medoids) {
            const double dj = dist[j * n + m];
            if (dj < best_d - 1e-15) {
                best_d = dj;
                best_m = m;
            }
        }
        if (is_medoid[j]) {
            best_m = j; // a medoid belongs to itself at distance 0
            best_d = 0.0;
        }
        out.assignment[j] = best_m;
        out.total_cost += best_d;
    }
    return out;
}

GapReport gap_statistic(const std::vector<std::vector<double>>& points,
                        std::size_t k_max, std::size_t B, Rng& rng) {
    const std::size_t n = points.size();
    if (n < 2) throw DpcnError("gap_statistic: need at least 2 points");
    if (k_max < 1 || k_max >= n) throw DpcnError("gap_statistic: need 1 <= K_max < |points|");
    if (B < 1) throw DpcnError("gap_statistic: need B >= 1");
    const std::size_t dim = points[0].size();

    std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
    for (const auto& p : points) {
        if (p.size() != dim) throw DpcnError("gap_statistic: points must share one dimension");
        for (std::size_t d = 0; d < dim; ++d) {
            lo[d] = std::min(lo[d], p[d]);
            hi[d] = std::max(hi[d], p[d]);
        }
    }
    double spread = 0.0;
    for (std::size_t d = 0; d < dim; ++d) spread = std::max(spread, hi[d] - lo[d]);
    GapReport report;
    if (spread == 0.0) {
        log::warn("gap_statistic: all points identical, choosing K=1");
        report.chosen_k = 1;
        return report;
    }

    // B reference sets drawn once over the bounding box, reused for every K
    std::vector<std::vector<std::vector<double>>> refs(B);
    for (std::size_t b = 0; b < B; ++b) {
        refs[b].resize(n, std::vector<double>(dim));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < dim; ++d)
                refs[b][i][d] = rng.uniform(lo[d], hi[d]);
    }

    const auto log_w = [](double w) { return std::log(std::max(w, 1e-300)); };
    report.entries.resize(k_max);
    for (std::size_t k = 1; k <= k_max; ++k) {
        Rng data_rng = rng.child(k);
        GapReport::Entry& e = report.entries[k - 1];
        e.k = k;
        e.log_w_data = log_w(k_medoids(points, k, data_rng).total_cost);
        std::vector<double> ref_logs(B);
        double mean = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            Rng ref_rng = rng.child(k * 1000 + b);
            ref_logs[b] = log_w(k_medoids(refs[b], k, ref_rng).total_cost);
            mean += ref_logs[b];
        }
        mean /= static_cast<double>(B);
        double var = 0.0; // two-pass population variance: exact zero for B = 1
        for (double lw : ref_logs) var += (lw - mean) * (lw - mean);
        var /= static_cast<double>(B);
        e.mean_log_w_ref = mean;
        e.gap = mean - e.log_w_data;
        e.s_k = std::sqrt(var) * std::sqrt(1.0 + 1.0 / static_cast<double>(B));
    }

    report.chosen_k = k_max;
    for (std::size_t k = 1; k + 1 <= k_max; ++k) {
        if (report.entries[k - 1].gap >= report.entries[k].gap - report.entries[k].s_k) {
            report.chosen_k = k;
            break;
        }
    }
    return report;
}

} // namespace dpcn

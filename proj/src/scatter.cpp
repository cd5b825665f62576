#include "dpcn/scatter.hpp"

#include <algorithm>
#include <map>

namespace dpcn {

ScatterSummary trace_ratio(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels) {
    if (features.size() != labels.size())
        throw DpcnError("trace_ratio: features and labels differ in length");
    if (features.size() < 2) throw DpcnError("trace_ratio: need at least 2 samples");
    const std::size_t dim = features[0].size();
    for (const auto& f : features)
        if (f.size() != dim) throw DpcnError("trace_ratio: features must share one dimension");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (by_class.size() < 2)
        throw DpcnError("trace_ratio: between-class scatter undefined for a single class");

    std::vector<double> global_mean(dim, 0.0);
    for (const auto& f : features)
        for (std::size_t d = 0; d < dim; ++d) global_mean[d] += f[d];
    for (double& v : global_mean) v /= static_cast<double>(features.size());

    ScatterSummary out;
    std::vector<double> mu(dim);
    for (const auto& [cls, members] : by_class) {
        std::fill(mu.begin(), mu.end(), 0.0);
        for (std::size_t i : members)
            for (std::size_t d = 0; d < dim; ++d) mu[d] += features[i][d];
        for (double& v : mu) v /= static_cast<double>(members.size());

        for (std::size_t i : members) {
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = features[i][d] - mu[d];
                out.trace_sw += diff * diff;
            }
        }
        double dist = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = mu[d] - global_mean[d];
            dist += diff * diff;
        }
        out.trace_sb += static_cast<double>(members.size()) * dist;
    }
    out.tr = out.trace_sb / std::max(out.trace_sw, 1e-12);
    return out;
}

} // namespace dpcn

#pragma once

#include <vector>

#include "dpcn/common.hpp"

namespace dpcn {

struct ScatterSummary {
    double trace_sw = 0.0;  // within-class scatter
    double trace_sb = 0.0;  // between-class scatter
    double tr = 0.0;        // trace_sb / max(trace_sw, 1e-12)
};

// Traces of the within/between-class scatter matrices, computed from norms
// directly so the D x D matrices are never formed.
ScatterSummary trace_ratio(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels);

} // namespace dpcn

#include "dpcn/tensor.hpp"

#include <cmath>

namespace dpcn {

void check_finite(const Tensor& t, const char* what) {
    for (double x : t.v) {
        if (!std::isfinite(x)) {
            throw DpcnError(std::string(what) + " produced a non-finite value");
        }
    }
}

} // namespace dpcn

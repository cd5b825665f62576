#pragma once

#include <cstddef>
#include <vector>

#include "dpcn/common.hpp"

namespace dpcn {

// Dense rank-4 tensor in NHWC layout. Rank-3 data (a single image) is a
// tensor with n == 1; rank-1/2 data uses h == w == 1.
struct Tensor {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int h_, int w_, int c_)
        : n(n_), h(h_), w(w_), c(c_),
          v(static_cast<std::size_t>(n_) * h_ * w_ * c_, 0.0) {}

    static Tensor image(int h, int w, int c) { return Tensor(1, h, w, c); }
    static Tensor matrix(int rows, int cols) { return Tensor(rows, 1, 1, cols); }

    std::size_t size() const { return v.size(); }
    std::size_t per_image() const { return static_cast<std::size_t>(h) * w * c; }

    std::size_t index(int i, int y, int x, int k) const {
        return ((static_cast<std::size_t>(i) * h + y) * w + x) * c + k;
    }
    double& at(int i, int y, int x, int k) { return v[index(i, y, x, k)]; }
    double at(int i, int y, int x, int k) const { return v[index(i, y, x, k)]; }

    bool same_shape(const Tensor& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }
};

// Throws if any element is NaN or infinite; `what` names the producer.
void check_finite(const Tensor& t, const char* what);

} // namespace dpcn

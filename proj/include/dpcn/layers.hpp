#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dpcn/rng.hpp"
#include "dpcn/tensor.hpp"

namespace dpcn {

enum class Activation { relu, lrelu, sigmoid };

Activation parse_activation(const std::string& name);
const char* activation_name(Activation a);

inline constexpr double kLReluSlope = 0.01;
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;

// Stride-1 "same" cross-correlation weights, no bias (the next block's BN
// supplies the shift). Layout w[((ky*k + kx)*in_c + ic)*out_c + oc] keeps
// the output-channel loop contiguous.
struct ConvParams {
    int k = 0, in_c = 0, out_c = 0;
    std::vector<double> w;

    void init(int k_, int in_c_, int out_c_) {
        k = k_;
        in_c = in_c_;
        out_c = out_c_;
        w.assign(static_cast<std::size_t>(k) * k * in_c * out_c, 0.0);
    }
    std::size_t windex(int ky, int kx, int ic, int oc) const {
        return ((static_cast<std::size_t>(ky) * k + kx) * in_c + ic) * out_c + oc;
    }
};

struct BnParams {
    std::vector<double> gamma, beta, running_mean, running_var;

    void init(int channels) {
        gamma.assign(channels, 1.0);
        beta.assign(channels, 0.0);
        running_mean.assign(channels, 0.0);
        running_var.assign(channels, 1.0);
    }
    int channels() const { return static_cast<int>(gamma.size()); }
};

struct DenseParams {
    int in = 0, out = 0;
    std::vector<double> w;  // w[i*out + o]
    std::vector<double> b;

    void init(int in_, int out_) {
        in = in_;
        out = out_;
        w.assign(static_cast<std::size_t>(in) * out, 0.0);
        b.assign(out, 0.0);
    }
};

// ---- forward kernels -------------------------------------------------

Tensor conv_forward(const Tensor& x, const ConvParams& p);

struct BnCache {
    Tensor xhat;                    // normalized input, pre gamma/beta
    std::vector<double> mean, var;  // statistics used by this pass
    bool batch_stats = false;
};
Tensor bn_forward(const Tensor& x, const BnParams& p, bool use_batch_stats, BnCache* cache);
// Momentum update of the running statistics from one batch pass.
void bn_update_running(BnParams& p, const BnCache& cache);

Tensor activation_forward(const Tensor& z, Activation a);

struct PoolCache {
    std::vector<std::size_t> argmax;  // input flat index per output element
    int in_h = 0, in_w = 0;
};
Tensor maxpool_forward(const Tensor& x, PoolCache* cache);

Tensor gap_forward(const Tensor& x);
Tensor gmp_forward(const Tensor& x, PoolCache* cache);

Tensor dropout_forward(const Tensor& x, double p, bool active, Rng* rng,
                       std::vector<double>* mask);

Tensor dense_forward(const Tensor& x, const DenseParams& p);
Tensor softmax_rows(const Tensor& logits);

// ---- backward kernels (exact analytic gradients) ---------------------

void conv_backward(const Tensor& x, const ConvParams& p, const Tensor& dy,
                   Tensor* dx, ConvParams* dp);

void bn_backward(const Tensor& dy, const BnParams& p, const BnCache& cache,
                 Tensor* dx, std::vector<double>* dgamma, std::vector<double>* dbeta);

Tensor activation_backward(const Tensor& dy, const Tensor& z, Activation a);

Tensor maxpool_backward(const Tensor& dy, const PoolCache& cache, int channels);

Tensor gap_backward(const Tensor& dy, int in_h, int in_w);
Tensor gmp_backward(const Tensor& dy, const PoolCache& cache, int channels);

Tensor dropout_backward(const Tensor& dy, const std::vector<double>& mask);

void dense_backward(const Tensor& x, const DenseParams& p, const Tensor& dy,
                    Tensor* dx, DenseParams* dp);

} // namespace dpcn

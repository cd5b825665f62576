#include "dpcn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpcn {

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "lrelu") return Activation::lrelu;
    if (name == "sigmoid") return Activation::sigmoid;
    throw DpcnError("unknown activation '" + name + "'");
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::lrelu: return "lrelu";
        default: return "sigmoid";
    }
}

Tensor conv_forward(const Tensor& x, const ConvParams& p) {
    if (x.c != p.in_c) throw DpcnError("conv: input channel mismatch");
    const int pad = (p.k - 1) / 2;
    Tensor y(x.n, x.h, x.w, p.out_c);
    for (int n = 0; n < x.n; ++n) {
        for (int yy = 0; yy < x.h; ++yy) {
            for (int ky = 0; ky < p.k; ++ky) {
                const int iy = yy + ky - pad;
                if (iy < 0 || iy >= x.h) continue;
                for (int xx = 0; xx < x.w; ++xx) {
                    double* out = &y.v[y.index(n, yy, xx, 0)];
                    for (int kx = 0; kx < p.k; ++kx) {
                        const int ix = xx + kx - pad;
                        if (ix < 0 || ix >= x.w) continue;
                        const double* in = &x.v[x.index(n, iy, ix, 0)];
                        const double* wp = &p.w[p.windex(ky, kx, 0, 0)];
                        for (int ic = 0; ic < p.in_c; ++ic) {
                            const double v = in[ic];
                            const double* wrow = wp + static_cast<std::size_t>(ic) * p.out_c;
                            for (int oc = 0; oc < p.out_c; ++oc) out[oc] += v * wrow[oc];
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv_backward(const Tensor& x, const ConvParams& p, const Tensor& dy,
                   Tensor* dx, ConvParams* dp) {
    const int pad = (p.k - 1) / 2;
    if (dx) *dx = Tensor(x.n, x.h, x.w, x.c);
    if (dp && dp->w.size() != p.w.size()) dp->init(p.k, p.in_c, p.out_c);
    for (int n = 0; n < x.n; ++n) {
        for (int yy = 0; yy < x.h; ++yy) {
            for (int ky = 0; ky < p.k; ++ky) {
                const int iy = yy + ky - pad;
                if (iy < 0 || iy >= x.h) continue;
                for (int xx = 0; xx < x.w; ++xx) {
                    const double* dout = &dy.v[dy.index(n, yy, xx, 0)];
                    for (int kx = 0; kx < p.k; ++kx) {
                        const int ix = xx + kx - pad;
                        if (ix < 0 || ix >= x.w) continue;
                        const double* in = &x.v[x.index(n, iy, ix, 0)];
                        double* din = dx ? &dx->v[dx->index(n, iy, ix, 0)] : nullptr;
                        for (int ic = 0; ic < p.in_c; ++ic) {
                            const std::size_t wbase = p.windex(ky, kx, ic, 0);
                            if (dp) {
                                double* dwrow = &dp->w[wbase];
                                const double v = in[ic];
                                for (int oc = 0; oc < p.out_c; ++oc) dwrow[oc] += v * dout[oc];
                            }
                            if (din) {
                                const double* wrow = &p.w[wbase];
                                double s = 0.0;
                                for (int oc = 0; oc < p.out_c; ++oc) s += wrow[oc] * dout[oc];
                                din[ic] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

Tensor bn_forward(const Tensor& x, const BnParams& p, bool use_batch_stats, BnCache* cache) {
    const int C = p.channels();
    if (x.c != C) throw DpcnError("batchnorm: channel mismatch");
    const std::size_t m = x.size() / C; // elements per channel

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (use_batch_stats) {
        for (std::size_t i = 0; i < x.size(); ++i) mean[i % C] += x.v[i];
        for (int c = 0; c < C; ++c) mean[c] /= static_cast<double>(m);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x.v[i] - mean[i % C];
            var[i % C] += d * d;
        }
        for (int c = 0; c < C; ++c) var[c] /= static_cast<double>(m); // biased
    } else {
        mean = p.running_mean;
        var = p.running_var;
    }

    Tensor y(x.n, x.h, x.w, x.c);
    Tensor xhat(x.n, x.h, x.w, x.c);
    std::vector<double> inv_std(C);
    for (int c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + kBnEps);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const int c = static_cast<int>(i % C);
        const double h = (x.v[i] - mean[c]) * inv_std[c];
        xhat.v[i] = h;
        y.v[i] = p.gamma[c] * h + p.beta[c];
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->mean = std::move(mean);
        cache->var = std::move(var);
        cache->batch_stats = use_batch_stats;
    }
    return y;
}

void bn_update_running(BnParams& p, const BnCache& cache) {
    for (int c = 0; c < p.channels(); ++c) {
        p.running_mean[c] = kBnMomentum * p.running_mean[c] + (1.0 - kBnMomentum) * cache.mean[c];
        p.running_var[c] = kBnMomentum * p.running_var[c] + (1.0 - kBnMomentum) * cache.var[c];
    }
}

void bn_backward(const Tensor& dy, const BnParams& p, const BnCache& cache,
                 Tensor* dx, std::vector<double>* dgamma, std::vector<double>* dbeta) {
    const int C = p.channels();
    const std::size_t m = dy.size() / C;
    std::vector<double> dg(C, 0.0), db(C, 0.0);
    for (std::size_t i = 0; i < dy.size(); ++i) {
        const int c = static_cast<int>(i % C);
        dg[c] += dy.v[i] * cache.xhat.v[i];
        db[c] += dy.v[i];
    }
    if (dgamma) *dgamma = dg;
    if (dbeta) *dbeta = db;
    if (!dx) return;

    *dx = Tensor(dy.n, dy.h, dy.w, dy.c);
    std::vector<double> inv_std(C);
    for (int c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(cache.var[c] + kBnEps);
    if (!cache.batch_stats) {
        // statistics are constants in eval mode
        for (std::size_t i = 0; i < dy.size(); ++i) {
            const int c = static_cast<int>(i % C);
            dx->v[i] = dy.v[i] * p.gamma[c] * inv_std[c];
        }
        return;
    }
    // batch statistics contribute through the mean and variance terms:
    // dx = gamma*inv_std/m * (m*dy - sum(dy) - xhat * sum(dy*xhat))
    for (std::size_t i = 0; i < dy.size(); ++i) {
        const int c = static_cast<int>(i % C);
        dx->v[i] = p.gamma[c] * inv_std[c] / static_cast<double>(m) *
                   (static_cast<double>(m) * dy.v[i] - db[c] - cache.xhat.v[i] * dg[c]);
    }
}

Tensor activation_forward(const Tensor& z, Activation a) {
    Tensor y(z.n, z.h, z.w, z.c);
    switch (a) {
        case Activation::relu:
            for (std::size_t i = 0; i < z.size(); ++i) y.v[i] = z.v[i] > 0.0 ? z.v[i] : 0.0;
            break;
        case Activation::lrelu:
            for (std::size_t i = 0; i < z.size(); ++i)
                y.v[i] = z.v[i] > 0.0 ? z.v[i] : kLReluSlope * z.v[i];
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i) y.v[i] = 1.0 / (1.0 + std::exp(-z.v[i]));
            break;
    }
    return y;
}

Tensor activation_backward(const Tensor& dy, const Tensor& z, Activation a) {
    Tensor dx(dy.n, dy.h, dy.w, dy.c);
    switch (a) {
        case Activation::relu:
            for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = z.v[i] > 0.0 ? dy.v[i] : 0.0;
            break;
        case Activation::lrelu:
            for (std::size_t i = 0; i < dy.size(); ++i)
                dx.v[i] = z.v[i] > 0.0 ? dy.v[i] : kLReluSlope * dy.v[i];
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-z.v[i]));
                dx.v[i] = dy.v[i] * s * (1.0 - s);
            }
            break;
    }
    return dx;
}

Tensor maxpool_forward(const Tensor& x, PoolCache* cache) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw DpcnError("maxpool: spatial dimensions must be even");
    Tensor y(x.n, x.h / 2, x.w / 2, x.c);
    if (cache) {
        cache->argmax.assign(y.size(), 0);
        cache->in_h = x.h;
        cache->in_w = x.w;
    }
    for (int n = 0; n < x.n; ++n) {
        for (int yy = 0; yy < y.h; ++yy) {
            for (int xx = 0; xx < y.w; ++xx) {
                for (int c = 0; c < x.c; ++c) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t idx = x.index(n, 2 * yy + dy, 2 * xx + dx, c);
                            if (x.v[idx] > best) { // strict: ties keep the first
                                best = x.v[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const std::size_t oi = y.index(n, yy, xx, c);
                    y.v[oi] = best;
                    if (cache) cache->argmax[oi] = best_idx;
                }
            }
        }
    }
    return y;
}

Tensor maxpool_backward(const Tensor& dy, const PoolCache& cache, int channels) {
    Tensor dx(dy.n, cache.in_h, cache.in_w, channels);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[cache.argmax[i]] += dy.v[i];
    return dx;
}

Tensor gap_forward(const Tensor& x) {
    Tensor y(x.n, 1, 1, x.c);
    const double scale = 1.0 / (static_cast<double>(x.h) * x.w);
    for (int n = 0; n < x.n; ++n)
        for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx)
                for (int c = 0; c < x.c; ++c) y.at(n, 0, 0, c) += x.at(n, yy, xx, c) * scale;
    return y;
}

Tensor gap_backward(const Tensor& dy, int in_h, int in_w) {
    Tensor dx(dy.n, in_h, in_w, dy.c);
    const double scale = 1.0 / (static_cast<double>(in_h) * in_w);
    for (int n = 0; n < dy.n; ++n)
        for (int yy = 0; yy < in_h; ++yy)
            for (int xx = 0; xx < in_w; ++xx)
                for (int c = 0; c < dy.c; ++c) dx.at(n, yy, xx, c) = dy.at(n, 0, 0, c) * scale;
    return dx;
}

Tensor gmp_forward(const Tensor& x, PoolCache* cache) {
    Tensor y(x.n, 1, 1, x.c);
    if (cache) {
        cache->argmax.assign(y.size(), 0);
        cache->in_h = x.h;
        cache->in_w = x.w;
    }
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_idx = 0;
            for (int yy = 0; yy < x.h; ++yy) {
                for (int xx = 0; xx < x.w; ++xx) {
                    const std::size_t idx = x.index(n, yy, xx, c);
                    if (x.v[idx] > best) { // first position wins ties
                        best = x.v[idx];
                        best_idx = idx;
                    }
                }
            }
            const std::size_t oi = y.index(n, 0, 0, c);
            y.v[oi] = best;
            if (cache) cache->argmax[oi] = best_idx;
        }
    }
    return y;
}

Tensor gmp_backward(const Tensor& dy, const PoolCache& cache, int channels) {
    Tensor dx(dy.n, cache.in_h, cache.in_w, channels);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[cache.argmax[i]] += dy.v[i];
    return dx;
}

Tensor dropout_forward(const Tensor& x, double p, bool active, Rng* rng,
                       std::vector<double>* mask) {
    if (!active || p <= 0.0) {
        if (mask) mask->clear();
        return x;
    }
    if (!rng) throw DpcnError("dropout: active mode needs a random source");
    const double keep_scale = 1.0 / (1.0 - p);
    Tensor y(x.n, x.h, x.w, x.c);
    if (mask) mask->assign(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = (rng->uniform() < p) ? 0.0 : keep_scale; // inverted dropout
        y.v[i] = x.v[i] * m;
        if (mask) (*mask)[i] = m;
    }
    return y;
}

Tensor dropout_backward(const Tensor& dy, const std::vector<double>& mask) {
    if (mask.empty()) return dy;
    Tensor dx(dy.n, dy.h, dy.w, dy.c);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = dy.v[i] * mask[i];
    return dx;
}

Tensor dense_forward(const Tensor& x, const DenseParams& p) {
    if (static_cast<int>(x.per_image()) != p.in)
        throw DpcnError("dense: input dimension mismatch");
    Tensor y(x.n, 1, 1, p.out);
    for (int n = 0; n < x.n; ++n) {
        double* out = &y.v[y.index(n, 0, 0, 0)];
        for (int o = 0; o < p.out; ++o) out[o] = p.b[o];
        const double* in = &x.v[static_cast<std::size_t>(n) * p.in];
        for (int i = 0; i < p.in; ++i) {
            const double v = in[i];
            const double* wrow = &p.w[static_cast<std::size_t>(i) * p.out];
            for (int o = 0; o < p.out; ++o) out[o] += v * wrow[o];
        }
    }
    return y;
}

void dense_backward(const Tensor& x, const DenseParams& p, const Tensor& dy,
                    Tensor* dx, DenseParams* dp) {
    if (dp && dp->w.size() != p.w.size()) dp->init(p.in, p.out);
    if (dx) *dx = Tensor(x.n, x.h, x.w, x.c);
    for (int n = 0; n < x.n; ++n) {
        const double* in = &x.v[static_cast<std::size_t>(n) * p.in];
        const double* dout = &dy.v[static_cast<std::size_t>(n) * p.out];
        if (dp)
            for (int o = 0; o < p.out; ++o) dp->b[o] += dout[o];
        for (int i = 0; i < p.in; ++i) {
            const double* wrow = &p.w[static_cast<std::size_t>(i) * p.out];
            double s = 0.0;
            for (int o = 0; o < p.out; ++o) {
                if (dp) dp->w[static_cast<std::size_t>(i) * p.out + o] += in[i] * dout[o];
                s += wrow[o] * dout[o];
            }
            if (dx) dx->v[static_cast<std::size_t>(n) * p.in + i] = s;
        }
    }
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor y(logits.n, 1, 1, logits.c);
    for (int n = 0; n < logits.n; ++n) {
        const double* in = &logits.v[static_cast<std::size_t>(n) * logits.c];
        double* out = &y.v[static_cast<std::size_t>(n) * logits.c];
        double mx = in[0];
        for (int c = 1; c < logits.c; ++c) mx = std::max(mx, in[c]);
        double sum = 0.0;
        for (int c = 0; c < logits.c; ++c) {
            out[c] = std::exp(in[c] - mx);
            sum += out[c];
        }
        for (int c = 0; c < logits.c; ++c) out[c] /= sum;
    }
    return y;
}

} // namespace dpcn

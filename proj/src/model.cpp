#include "dpcn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dpcn {

namespace {

struct ShapeWalk {
    int h = 0, w = 0, c = 0;
};

// Input channel count and spatial size seen by each layer.
std::vector<ShapeWalk> walk_shapes(const ArchSpec& arch) {
    std::vector<ShapeWalk> in(arch.layers.size());
    ShapeWalk cur{arch.side, arch.side, arch.channels};
    int gap_channels = 0;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        in[i] = cur;
        const LayerSpec& l = arch.layers[i];
        switch (l.kind) {
            case LayerSpec::Kind::conv_block:
                cur.c = l.out_channels;
                break;
            case LayerSpec::Kind::maxpool:
                cur.h /= 2;
                cur.w /= 2;
                break;
            case LayerSpec::Kind::gap:
                gap_channels = cur.c;
                cur = {1, 1, cur.c};
                break;
            case LayerSpec::Kind::gmp:
                cur = {1, 1, gap_channels};
                break;
            case LayerSpec::Kind::concat:
                cur = {1, 1, 2 * gap_channels};
                break;
            case LayerSpec::Kind::dropout:
                break;
            case LayerSpec::Kind::softmax:
                cur = {1, 1, arch.num_classes};
                break;
        }
    }
    return in;
}

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v;
    return h * 0x100000001b3ULL;
}

} // namespace

void ModelState::validate_shapes() const {
    arch.validate();
    if (params.size() != arch.layers.size())
        throw DpcnError("model: parameter slots do not match arch layers");
    const auto shapes = walk_shapes(arch);
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        const LayerParams& p = params[i];
        if (l.kind == LayerSpec::Kind::conv_block) {
            if (p.bn.channels() != shapes[i].c)
                throw DpcnError("model: BN width mismatch at layer " + std::to_string(i));
            if (p.conv.k != l.kernel_size || p.conv.in_c != shapes[i].c ||
                p.conv.out_c != l.out_channels ||
                p.conv.w.size() != static_cast<std::size_t>(l.kernel_size) * l.kernel_size *
                                       shapes[i].c * l.out_channels)
                throw DpcnError("model: conv shape mismatch at layer " + std::to_string(i));
        } else if (l.kind == LayerSpec::Kind::softmax) {
            if (p.dense.in != shapes[i].c || p.dense.out != arch.num_classes)
                throw DpcnError("model: dense shape mismatch at layer " + std::to_string(i));
        }
    }
}

ModelState init_model(const ArchSpec& arch, Rng& rng) {
    arch.validate();
    ModelState model;
    model.arch = arch;
    model.params.resize(arch.layers.size());
    const auto shapes = walk_shapes(arch);
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const LayerSpec& l = arch.layers[i];
        LayerParams& p = model.params[i];
        if (l.kind == LayerSpec::Kind::conv_block) {
            p.bn.init(shapes[i].c);
            p.conv.init(l.kernel_size, shapes[i].c, l.out_channels);
            const double stddev =
                std::sqrt(2.0 / (static_cast<double>(l.kernel_size) * l.kernel_size * shapes[i].c));
            for (double& w : p.conv.w) w = rng.normal(0.0, stddev);
        } else if (l.kind == LayerSpec::Kind::softmax) {
            p.dense.init(shapes[i].c, arch.num_classes);
            const double a = std::sqrt(6.0 / (p.dense.in + p.dense.out));
            for (double& w : p.dense.w) w = rng.uniform(-a, a);
        }
    }
    return model;
}

void apply_overrides(ModelState& model, const std::string& activation, double dropout_p) {
    for (auto& l : model.arch.layers) {
        if (l.kind == LayerSpec::Kind::conv_block && !activation.empty()) l.activation = activation;
        if (l.kind == LayerSpec::Kind::dropout && dropout_p >= 0.0) l.p = dropout_p;
    }
}

Tensor model_forward(const ModelState& model, const Tensor& batch, Mode mode,
                     Rng* rng, ForwardCache* cache) {
    if (batch.h != model.arch.side || batch.w != model.arch.side || batch.c != model.arch.channels)
        throw DpcnError("model_forward: batch shape does not match the architecture input");
    const bool batch_stats = (mode != Mode::eval);
    const bool dropout_active = (mode == Mode::train);

    ForwardCache local;
    ForwardCache& fc = cache ? *cache : local;
    fc.layers.assign(model.arch.layers.size(), LayerCache{});

    Tensor cur = batch;
    const auto& layers = model.arch.layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        LayerCache& lc = fc.layers[i];
        switch (l.kind) {
            case LayerSpec::Kind::conv_block: {
                lc.input = cur;
                Tensor bn_out = bn_forward(cur, model.params[i].bn, batch_stats, &lc.bn);
                lc.act_input = std::move(bn_out);
                Tensor act_out = activation_forward(lc.act_input, parse_activation(l.activation));
                lc.conv_input = std::move(act_out);
                cur = conv_forward(lc.conv_input, model.params[i].conv);
                break;
            }
            case LayerSpec::Kind::maxpool:
                cur = maxpool_forward(cur, &lc.pool);
                break;
            case LayerSpec::Kind::gap: {
                fc.pre_head = cur;
                lc.pool.in_h = cur.h;
                lc.pool.in_w = cur.w;
                lc.gap_out = gap_forward(cur);
                cur = lc.gap_out;
                break;
            }
            case LayerSpec::Kind::gmp: {
                lc.gmp_out = gmp_forward(fc.pre_head, &lc.pool);
                cur = lc.gmp_out;
                break;
            }
            case LayerSpec::Kind::concat: {
                const Tensor& g = fc.layers[i - 2].gap_out;
                const Tensor& m = fc.layers[i - 1].gmp_out;
                Tensor cat(g.n, 1, 1, g.c + m.c);
                for (int n = 0; n < g.n; ++n) {
                    for (int c = 0; c < g.c; ++c) cat.at(n, 0, 0, c) = g.at(n, 0, 0, c);
                    for (int c = 0; c < m.c; ++c) cat.at(n, 0, 0, g.c + c) = m.at(n, 0, 0, c);
                }
                cur = std::move(cat);
                break;
            }
            case LayerSpec::Kind::dropout:
                cur = dropout_forward(cur, l.p, dropout_active, rng, &lc.dropout_mask);
                break;
            case LayerSpec::Kind::softmax: {
                lc.input = cur;
                fc.logits = dense_forward(cur, model.params[i].dense);
                cur = softmax_rows(fc.logits);
                fc.probs = cur;
                break;
            }
        }
        if (mode == Mode::eval) check_finite(cur, layer_kind_name(l.kind));
    }
    return cur;
}

void update_bn_running(ModelState& model, const ForwardCache& cache) {
    for (std::size_t i = 0; i < model.arch.layers.size(); ++i)
        if (model.arch.layers[i].kind == LayerSpec::Kind::conv_block &&
            cache.layers[i].bn.batch_stats)
            bn_update_running(model.params[i].bn, cache.layers[i].bn);
}

void model_backward(const ModelState& model, const ForwardCache& cache, const Tensor& dlogits,
                    Gradients* grads, Tensor* dpre_head, bool head_only) {
    const auto& layers = model.arch.layers;
    if (grads && grads->layers.size() != layers.size()) grads->layers.resize(layers.size());

    Tensor d = dlogits;
    for (std::size_t ri = layers.size(); ri-- > 0;) {
        const LayerSpec& l = layers[ri];
        const LayerCache& lc = cache.layers[ri];
        switch (l.kind) {
            case LayerSpec::Kind::softmax: {
                Tensor dx;
                dense_backward(lc.input, model.params[ri].dense, d,
                               &dx, grads ? &grads->layers[ri].dense : nullptr);
                d = std::move(dx);
                break;
            }
            case LayerSpec::Kind::dropout:
                d = dropout_backward(d, lc.dropout_mask);
                break;
            case LayerSpec::Kind::concat: {
                // split the gradient between gap (first half) and gmp, then
                // merge both pooling paths back to the pre-head activation
                const LayerCache& gap_lc = cache.layers[ri - 2];
                const LayerCache& gmp_lc = cache.layers[ri - 1];
                const int C = cache.pre_head.c;
                Tensor dgap(d.n, 1, 1, C), dgmp(d.n, 1, 1, C);
                for (int n = 0; n < d.n; ++n) {
                    for (int c = 0; c < C; ++c) {
                        dgap.at(n, 0, 0, c) = d.at(n, 0, 0, c);
                        dgmp.at(n, 0, 0, c) = d.at(n, 0, 0, C + c);
                    }
                }
                Tensor dpre = gap_backward(dgap, gap_lc.pool.in_h, gap_lc.pool.in_w);
                const Tensor dpre2 = gmp_backward(dgmp, gmp_lc.pool, C);
                for (std::size_t e = 0; e < dpre.size(); ++e) dpre.v[e] += dpre2.v[e];
                if (dpre_head) *dpre_head = dpre;
                if (head_only) return;
                d = std::move(dpre);
                ri -= 2; // gap and gmp handled here
                break;
            }
            case LayerSpec::Kind::gap:
            case LayerSpec::Kind::gmp:
                throw DpcnError("model_backward: malformed head");
            case LayerSpec::Kind::maxpool:
                d = maxpool_backward(d, lc.pool, d.c);
                break;
            case LayerSpec::Kind::conv_block: {
                Tensor d_conv_in;
                conv_backward(lc.conv_input, model.params[ri].conv, d, &d_conv_in,
                              grads ? &grads->layers[ri].conv : nullptr);
                Tensor d_act_in = activation_backward(d_conv_in, lc.act_input,
                                                      parse_activation(l.activation));
                Tensor dx;
                const bool need_dx = ri > 0;
                bn_backward(d_act_in, model.params[ri].bn, lc.bn, need_dx ? &dx : nullptr,
                            grads ? &grads->layers[ri].bn.gamma : nullptr,
                            grads ? &grads->layers[ri].bn.beta : nullptr);
                d = std::move(dx);
                break;
            }
        }
    }
}

double loss_and_grad(const ModelState& model, const Tensor& batch,
                     const std::vector<int>& labels, Mode mode, Rng* rng,
                     Gradients* grads, ForwardCache* cache) {
    ForwardCache local;
    ForwardCache& fc = cache ? *cache : local;
    const Tensor probs = model_forward(model, batch, mode, rng, &fc);
    const int C = probs.c;
    const int N = probs.n;
    if (static_cast<int>(labels.size()) != N)
        throw DpcnError("loss_and_grad: labels do not match batch size");

    double loss = 0.0;
    Tensor dlogits(N, 1, 1, C);
    for (int n = 0; n < N; ++n) {
        const int y = labels[n];
        if (y < 0 || y >= C) throw DpcnError("loss_and_grad: label out of range");
        loss -= std::log(std::max(probs.at(n, 0, 0, y), 1e-300));
        for (int c = 0; c < C; ++c)
            dlogits.at(n, 0, 0, c) = (probs.at(n, 0, 0, c) - (c == y ? 1.0 : 0.0)) / N;
    }
    loss /= N;
    if (grads) model_backward(model, fc, dlogits, grads);
    return loss;
}

double loss_only(const ModelState& model, const Tensor& batch,
                 const std::vector<int>& labels, Mode mode,
                 std::uint64_t* smoothness_token) {
    ForwardCache fc;
    const Tensor probs = model_forward(model, batch, mode, nullptr, &fc);
    if (static_cast<int>(labels.size()) != probs.n)
        throw DpcnError("loss_only: labels do not match batch size");
    double loss = 0.0;
    for (int n = 0; n < probs.n; ++n) {
        if (labels[n] < 0 || labels[n] >= probs.c) throw DpcnError("loss_only: label out of range");
        loss -= std::log(std::max(probs.at(n, 0, 0, labels[n]), 1e-300));
    }
    loss /= probs.n;

    if (smoothness_token) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::size_t i = 0; i < model.arch.layers.size(); ++i) {
            const LayerSpec& l = model.arch.layers[i];
            const LayerCache& lc = fc.layers[i];
            if (l.kind == LayerSpec::Kind::conv_block && l.activation != "sigmoid") {
                for (std::size_t e = 0; e < lc.act_input.size(); ++e)
                    h = fnv_mix(h, lc.act_input.v[e] > 0.0 ? 1u : 0u);
            } else if (l.kind == LayerSpec::Kind::maxpool || l.kind == LayerSpec::Kind::gmp) {
                for (std::size_t a : lc.pool.argmax) h = fnv_mix(h, a);
            }
        }
        *smoothness_token = h;
    }
    return loss;
}

// ---- checkpoint --------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'P', 'C', 'N'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& s, double d) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& s;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > s.size()) throw DpcnError("checkpoint truncated");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(s[pos]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(s[pos + i])) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
};

template <typename Params, typename Fn>
void visit_parameter_blobs(const ArchSpec& arch, Params& params, Fn&& fn) {
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        switch (arch.layers[i].kind) {
            case LayerSpec::Kind::conv_block:
                fn(params[i].bn.gamma);
                fn(params[i].bn.beta);
                fn(params[i].bn.running_mean);
                fn(params[i].bn.running_var);
                fn(params[i].conv.w);
                break;
            case LayerSpec::Kind::softmax:
                fn(params[i].dense.w);
                fn(params[i].dense.b);
                break;
            default:
                break;
        }
    }
}

} // namespace

std::string checkpoint_save(const ModelState& model) {
    model.validate_shapes();
    const std::string arch_json = save_arch(model.arch);
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(arch_json.size()));
    out += arch_json;
    visit_parameter_blobs(model.arch, model.params, [&](const std::vector<double>& blob) {
        for (double d : blob) put_f64(out, d);
    });
    return out;
}

ModelState checkpoint_load(const std::string& bytes) {
    Reader r{bytes};
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DpcnError("not a DPCN checkpoint");
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw DpcnError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t json_len = r.u32();
    r.need(json_len);
    const std::string arch_json = bytes.substr(r.pos, json_len);
    r.pos += json_len;

    ModelState model;
    model.arch = load_arch(arch_json);
    model.params.resize(model.arch.layers.size());
    const auto shapes = walk_shapes(model.arch);
    for (std::size_t i = 0; i < model.arch.layers.size(); ++i) {
        const LayerSpec& l = model.arch.layers[i];
        if (l.kind == LayerSpec::Kind::conv_block) {
            model.params[i].bn.init(shapes[i].c);
            model.params[i].conv.init(l.kernel_size, shapes[i].c, l.out_channels);
        } else if (l.kind == LayerSpec::Kind::softmax) {
            model.params[i].dense.init(shapes[i].c, model.arch.num_classes);
        }
    }
    visit_parameter_blobs(model.arch, model.params, [&](std::vector<double>& blob) {
        for (double& d : blob) d = r.f64();
    });
    if (r.pos != bytes.size()) throw DpcnError("checkpoint length mismatch");
    model.validate_shapes();
    return model;
}

void checkpoint_save_file(const ModelState& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DpcnError("cannot write checkpoint '" + path + "'");
    const std::string bytes = checkpoint_save(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DpcnError("failed writing checkpoint '" + path + "'");
}

ModelState checkpoint_load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DpcnError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_load(ss.str());
}

Tensor make_batch(const LabeledImageSet& set, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw DpcnError("make_batch: empty index list");
    const Tensor& first = set.items[indices[0]].pixels;
    Tensor batch(static_cast<int>(indices.size()), first.h, first.w, first.c);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const Tensor& px = set.items[indices[b]].pixels;
        if (px.h != first.h || px.w != first.w || px.c != first.c)
            throw DpcnError("make_batch: images must share one shape");
        std::copy(px.v.begin(), px.v.end(), batch.v.begin() + b * px.size());
    }
    return batch;
}

std::vector<int> batch_labels(const LabeledImageSet& set, const std::vector<std::size_t>& indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back(set.items[i].grade);
    return labels;
}

} // namespace dpcn

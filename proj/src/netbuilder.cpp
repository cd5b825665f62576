#include "dpcn/netbuilder.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace dpcn {

namespace {

// Per-channel batch statistics over all representatives and positions.
void batch_stats(const Tensor& batch, std::vector<double>& mean, std::vector<double>& var) {
    const int C = batch.c;
    mean.assign(C, 0.0);
    var.assign(C, 0.0);
    const double m = static_cast<double>(batch.size() / C);
    for (std::size_t i = 0; i < batch.size(); ++i) mean[i % C] += batch.v[i];
    for (int c = 0; c < C; ++c) mean[c] /= m;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double d = batch.v[i] - mean[i % C];
        var[i % C] += d * d;
    }
    for (int c = 0; c < C; ++c) var[c] /= m;
}

std::vector<std::vector<double>> flatten_per_image(const Tensor& batch) {
    std::vector<std::vector<double>> out(batch.n);
    const std::size_t per = batch.per_image();
    for (int n = 0; n < batch.n; ++n)
        out[n].assign(batch.v.begin() + n * per, batch.v.begin() + (n + 1) * per);
    return out;
}

} // namespace

ModelState grow_architecture(const RepresentativeSet& reps, const GrowOptions& opts) {
    if (!(opts.epsilon > 0.0 && opts.epsilon <= 1.0))
        throw DpcnError("grow_architecture: epsilon out of range (0,1]");
    if (reps.images.empty()) throw DpcnError("grow_architecture: no representatives");
    {
        int classes_present = 0;
        for (const auto& [cls, count] : reps.per_class_counts)
            if (count > 0) ++classes_present;
        if (classes_present < 2)
            throw DpcnError("grow_architecture: representatives must span at least 2 classes");
    }
    const Tensor& first = reps.images[0].pixels;
    if (first.h != first.w || first.h % 4 != 0)
        throw DpcnError("grow_architecture: images must be square with side a multiple of 4");
    for (const auto& img : reps.images)
        if (!img.pixels.same_shape(first))
            throw DpcnError("grow_architecture: representatives must share one shape");

    std::vector<std::size_t> all(reps.images.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    LabeledImageSet as_set;
    as_set.items = reps.images;
    as_set.num_classes = reps.num_classes;
    Tensor acts = make_batch(as_set, all);
    std::vector<int> labels;
    for (const auto& img : reps.images) labels.push_back(img.grade);

    ModelState model;
    model.arch.side = first.h;
    model.arch.channels = first.c;
    model.arch.num_classes = reps.num_classes;

    double previous_tr = 0.0;
    int kernel = 7;
    int depth = 0;
    for (;;) {
        if (depth >= opts.depth_cap) {
            log::warn("grow_architecture: depth cap ", opts.depth_cap, " reached");
            break;
        }
        if (depth > 0 && (acts.h < opts.min_spatial || acts.h < kernel)) {
            log::warn("grow_architecture: spatial size ", acts.h,
                      " too small for further blocks, stopping at depth ", depth);
            break;
        }

        std::vector<Tensor> maps(acts.n);
        for (int n = 0; n < acts.n; ++n) {
            maps[n] = Tensor::image(acts.h, acts.w, acts.c);
            std::copy(acts.v.begin() + n * acts.per_image(),
                      acts.v.begin() + (n + 1) * acts.per_image(), maps[n].v.begin());
        }
        KernelBank bank;
        try {
            bank = derive_kernel_bank(extract_blocks(maps, kernel, kernel), opts.epsilon);
        } catch (const DpcnError& e) {
            if (depth == 0) throw; // nothing usable in the raw inputs
            log::warn("grow_architecture: ", e.what(), "; stopping at depth ", depth);
            break;
        }
        const int out_channels = static_cast<int>(bank.kernels.size());

        LayerSpec block;
        block.kind = LayerSpec::Kind::conv_block;
        block.kernel_size = kernel;
        block.out_channels = out_channels;
        block.activation = opts.activation;

        LayerParams params;
        params.bn.init(acts.c);
        batch_stats(acts, params.bn.running_mean, params.bn.running_var);
        params.conv.init(kernel, acts.c, out_channels);
        for (int oc = 0; oc < out_channels; ++oc)
            for (int ky = 0; ky < kernel; ++ky)
                for (int kx = 0; kx < kernel; ++kx)
                    for (int ic = 0; ic < acts.c; ++ic)
                        params.conv.w[params.conv.windex(ky, kx, ic, oc)] =
                            bank.kernels[oc].at(0, ky, kx, ic);

        model.arch.layers.push_back(block);
        model.params.push_back(std::move(params));
        ++depth;
        const bool pooled = depth <= 2;
        if (pooled) {
            LayerSpec pool;
            pool.kind = LayerSpec::Kind::maxpool;
            model.arch.layers.push_back(pool);
            model.params.emplace_back();
        }

        // activations of the representatives through the new block (running
        // stats are the construction batch stats, so eval mode matches)
        const std::size_t bn_index = model.params.size() - (pooled ? 2 : 1);
        Tensor z = bn_forward(acts, model.params[bn_index].bn, false, nullptr);
        z = activation_forward(z, parse_activation(opts.activation));
        z = conv_forward(z, model.params[bn_index].conv);
        if (pooled) z = maxpool_forward(z, nullptr);

        const double tr = trace_ratio(flatten_per_image(z), labels).tr;
        model.arch.trace_history.emplace_back(depth, tr);
        log::info("grow_architecture: layer ", depth, " width ", out_channels, " TR ", tr);

        // the ratio is scale-free, so anything this small is summation noise
        // on coincident class means; such classes stay indistinguishable
        if (tr < 1e-15) {
            log::warn("grow_architecture: trace ratio is zero, stopping at depth ", depth);
            break;
        }
        if (previous_tr <= tr) { // equality keeps growing; only a decrease stops
            previous_tr = tr;
            acts = std::move(z);
            kernel = 3;
        } else {
            model.arch.layers.pop_back();
            model.params.pop_back();
            if (pooled) {
                model.arch.layers.pop_back();
                model.params.pop_back();
            }
            --depth;
            log::info("grow_architecture: layer ", depth + 1,
                      " rejected (TR decreased), final depth ", depth);
            break;
        }
    }

    model.validate_shapes();
    return model;
}

ArchSpec finalize_head(const ArchSpec& body, int num_classes, double dropout_p) {
    if (body.layers.empty()) throw DpcnError("finalize_head: empty body");
    if (body.has_head()) throw DpcnError("finalize_head: body already has a head");
    if (num_classes < 2) throw DpcnError("finalize_head: need at least 2 classes");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw DpcnError("finalize_head: dropout probability out of range");
    if (dropout_p < 0.25 || dropout_p > 0.5)
        log::warn("finalize_head: dropout ", dropout_p, " outside the tuned range [0.25, 0.5]");

    ArchSpec arch = body;
    arch.num_classes = num_classes;
    LayerSpec l;
    l.kind = LayerSpec::Kind::gap;
    arch.layers.push_back(l);
    l.kind = LayerSpec::Kind::gmp;
    arch.layers.push_back(l);
    l.kind = LayerSpec::Kind::concat;
    arch.layers.push_back(l);
    l.kind = LayerSpec::Kind::dropout;
    l.p = dropout_p;
    arch.layers.push_back(l);
    l = LayerSpec{};
    l.kind = LayerSpec::Kind::softmax;
    arch.layers.push_back(l);
    arch.validate();
    return arch;
}

void finalize_head(ModelState& model, int num_classes, double dropout_p, Rng& rng) {
    int last_channels = 0;
    for (const auto& layer : model.arch.layers)
        if (layer.kind == LayerSpec::Kind::conv_block) last_channels = layer.out_channels;
    model.arch = finalize_head(model.arch, num_classes, dropout_p);
    model.params.resize(model.arch.layers.size());

    LayerParams& dense_slot = model.params.back();
    dense_slot.dense.init(2 * last_channels, num_classes);
    const double a = std::sqrt(6.0 / (dense_slot.dense.in + dense_slot.dense.out));
    for (double& w : dense_slot.dense.w) w = rng.uniform(-a, a);
    model.validate_shapes();
}

ComplexityReport count_complexity(const ArchSpec& arch) {
    arch.validate();
    if (!arch.has_head()) throw DpcnError("count_complexity: architecture has no head");

    ComplexityReport report;
    int h = arch.side, w = arch.side, c = arch.channels;
    int conv_no = 0, pool_no = 0;
    int head_channels = 0;
    const auto add = [&](const std::string& name, long long params, long long flops) {
        report.rows.push_back({name, params, flops});
        report.learnable_parameters += params;
        report.flops += flops;
    };
    for (const auto& l : arch.layers) {
        const long long spatial = static_cast<long long>(h) * w;
        switch (l.kind) {
            case LayerSpec::Kind::conv_block: {
                ++conv_no;
                const std::string tag = std::to_string(conv_no);
                add("bn" + tag, 2LL * c, 2LL * spatial * c);
                add("act" + tag, 0, spatial * c);
                const long long k2 = static_cast<long long>(l.kernel_size) * l.kernel_size;
                add("conv" + tag, k2 * c * l.out_channels,
                    2LL * k2 * c * l.out_channels * spatial);
                c = l.out_channels;
                break;
            }
            case LayerSpec::Kind::maxpool:
                ++pool_no;
                add("pool" + std::to_string(pool_no), 0, spatial * c);
                h /= 2;
                w /= 2;
                break;
            case LayerSpec::Kind::gap:
                head_channels = c;
                add("gap", 0, spatial * c);
                break;
            case LayerSpec::Kind::gmp:
                add("gmp", 0, static_cast<long long>(h) * w * head_channels);
                break;
            case LayerSpec::Kind::concat:
                add("concat", 0, 0);
                h = w = 1;
                c = 2 * head_channels;
                break;
            case LayerSpec::Kind::dropout:
                add("dropout", 0, 0);
                break;
            case LayerSpec::Kind::softmax: {
                const long long in = c, out = arch.num_classes;
                add("dense", in * out + out, 2LL * in * out + out);
                add("softmax", 0, out);
                c = arch.num_classes;
                break;
            }
        }
    }
    return report;
}

std::string complexity_json(const ComplexityReport& report) {
    nlohmann::json j;
    j["learnable_parameters"] = report.learnable_parameters;
    j["flops"] = report.flops;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row;
        row["name"] = r.name;
        row["params"] = r.params;
        row["flops"] = r.flops;
        rows.push_back(std::move(row));
    }
    j["layers"] = std::move(rows);
    return j.dump(2) + "\n";
}

} // namespace dpcn

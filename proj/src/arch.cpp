#include "dpcn/arch.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dpcn {

using nlohmann::json;

const char* layer_kind_name(LayerSpec::Kind kind) {
    switch (kind) {
        case LayerSpec::Kind::conv_block: return "conv_block";
        case LayerSpec::Kind::maxpool: return "maxpool";
        case LayerSpec::Kind::gap: return "gap";
        case LayerSpec::Kind::gmp: return "gmp";
        case LayerSpec::Kind::concat: return "concat";
        case LayerSpec::Kind::dropout: return "dropout";
        case LayerSpec::Kind::softmax: return "softmax";
    }
    return "?";
}

static LayerSpec::Kind parse_kind(const std::string& s) {
    if (s == "conv_block") return LayerSpec::Kind::conv_block;
    if (s == "maxpool") return LayerSpec::Kind::maxpool;
    if (s == "gap") return LayerSpec::Kind::gap;
    if (s == "gmp") return LayerSpec::Kind::gmp;
    if (s == "concat") return LayerSpec::Kind::concat;
    if (s == "dropout") return LayerSpec::Kind::dropout;
    if (s == "softmax") return LayerSpec::Kind::softmax;
    throw DpcnError("arch: unknown layer kind '" + s + "'");
}

int ArchSpec::depth() const {
    int d = 0;
    for (const auto& l : layers)
        if (l.kind == LayerSpec::Kind::conv_block) ++d;
    return d;
}

bool ArchSpec::has_head() const {
    for (const auto& l : layers)
        if (l.kind == LayerSpec::Kind::softmax) return true;
    return false;
}

void ArchSpec::validate() const {
    if (side < 4 || side % 4 != 0)
        throw DpcnError("arch: input side must be a positive multiple of 4");
    if (channels != 1 && channels != 3) throw DpcnError("arch: channels must be 1 or 3");
    if (num_classes < 2) throw DpcnError("arch: need at least 2 classes");
    if (layers.empty() || layers[0].kind != LayerSpec::Kind::conv_block)
        throw DpcnError("arch: must start with a conv block");

    int conv_seen = 0;
    std::size_t i = 0;
    for (; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        if (l.kind == LayerSpec::Kind::conv_block) {
            ++conv_seen;
            const int expect = (conv_seen == 1) ? 7 : 3;
            if (l.kernel_size != expect)
                throw DpcnError("arch: conv block " + std::to_string(conv_seen) +
                                " must use kernel size " + std::to_string(expect));
            if (l.out_channels < 1) throw DpcnError("arch: conv block needs out_channels >= 1");
            if (l.activation != "relu" && l.activation != "lrelu" && l.activation != "sigmoid")
                throw DpcnError("arch: unknown activation '" + l.activation + "'");
        } else if (l.kind == LayerSpec::Kind::maxpool) {
            const bool after_early_block =
                i > 0 && layers[i - 1].kind == LayerSpec::Kind::conv_block && conv_seen <= 2;
            if (!after_early_block)
                throw DpcnError("arch: maxpool allowed only directly after conv blocks 1 and 2");
        } else {
            break; // head begins
        }
    }
    if (conv_seen == 0) throw DpcnError("arch: no conv blocks");
    // pools must be present after blocks 1 and 2 when those blocks exist
    int pools = 0;
    for (const auto& l : layers)
        if (l.kind == LayerSpec::Kind::maxpool) ++pools;
    const int expected_pools = std::min(conv_seen, 2);
    if (pools != expected_pools)
        throw DpcnError("arch: expected " + std::to_string(expected_pools) + " maxpool layers, got " +
                        std::to_string(pools));

    if (i < layers.size()) {
        static const LayerSpec::Kind head_order[5] = {
            LayerSpec::Kind::gap, LayerSpec::Kind::gmp, LayerSpec::Kind::concat,
            LayerSpec::Kind::dropout, LayerSpec::Kind::softmax};
        if (layers.size() - i != 5)
            throw DpcnError("arch: head must be gap, gmp, concat, dropout, softmax");
        for (int h = 0; h < 5; ++h)
            if (layers[i + h].kind != head_order[h])
                throw DpcnError("arch: head must be gap, gmp, concat, dropout, softmax");
        const double p = layers[i + 3].p;
        if (!(p >= 0.0 && p < 1.0)) throw DpcnError("arch: dropout probability out of range");
    }

    if (!trace_history.empty()) {
        const int d = depth();
        if (static_cast<int>(trace_history.size()) < d)
            throw DpcnError("arch: trace history shorter than depth");
        for (int m = 0; m < static_cast<int>(trace_history.size()); ++m)
            if (trace_history[m].first != m + 1)
                throw DpcnError("arch: trace history indices must be 1..len");
        for (int m = 1; m < d; ++m)
            if (trace_history[m].second < trace_history[m - 1].second)
                throw DpcnError("arch: trace history must be non-decreasing over retained layers");
        if (static_cast<int>(trace_history.size()) > d + 1)
            throw DpcnError("arch: at most one rejected probe may follow the retained layers");
        if (static_cast<int>(trace_history.size()) == d + 1 &&
            trace_history[d].second >= trace_history[d - 1].second)
            throw DpcnError("arch: rejected probe must be below the final retained trace ratio");
    }
}

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed, const char* what) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw DpcnError(std::string("arch: unknown field '") + it.key() + "' in " + what);
    for (const auto& key : allowed)
        if (!obj.contains(key))
            throw DpcnError(std::string("arch: missing field '") + key + "' in " + what);
}

} // namespace

std::string save_arch(const ArchSpec& arch) {
    json j;
    j["input"] = {arch.side, arch.side, arch.channels};
    j["num_classes"] = arch.num_classes;
    json layers = json::array();
    for (const auto& l : arch.layers) {
        json jl;
        jl["kind"] = layer_kind_name(l.kind);
        if (l.kind == LayerSpec::Kind::conv_block) {
            jl["kernel_size"] = l.kernel_size;
            jl["out_channels"] = l.out_channels;
            jl["activation"] = l.activation;
        } else if (l.kind == LayerSpec::Kind::dropout) {
            jl["p"] = l.p;
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    json hist = json::array();
    for (const auto& [m, tr] : arch.trace_history) hist.push_back({m, tr});
    j["trace_history"] = std::move(hist);
    return j.dump(2) + "\n";
}

ArchSpec load_arch(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw DpcnError(std::string("arch: ") + e.what());
    }
    if (!j.is_object()) throw DpcnError("arch: top level must be an object");
    require_keys(j, {"input", "num_classes", "layers", "trace_history"}, "arch");

    ArchSpec arch;
    const auto& input = j.at("input");
    if (!input.is_array() || input.size() != 3)
        throw DpcnError("arch: 'input' must be [side, side, channels]");
    arch.side = input.at(0).get<int>();
    if (input.at(1).get<int>() != arch.side) throw DpcnError("arch: input must be square");
    arch.channels = input.at(2).get<int>();
    arch.num_classes = j.at("num_classes").get<int>();

    for (const auto& jl : j.at("layers")) {
        if (!jl.is_object()) throw DpcnError("arch: layer entries must be objects");
        LayerSpec l;
        l.kind = parse_kind(jl.at("kind").get<std::string>());
        switch (l.kind) {
            case LayerSpec::Kind::conv_block:
                require_keys(jl, {"kind", "kernel_size", "out_channels", "activation"}, "conv_block");
                l.kernel_size = jl.at("kernel_size").get<int>();
                l.out_channels = jl.at("out_channels").get<int>();
                l.activation = jl.at("activation").get<std::string>();
                break;
            case LayerSpec::Kind::dropout:
                require_keys(jl, {"kind", "p"}, "dropout");
                l.p = jl.at("p").get<double>();
                break;
            default:
                require_keys(jl, {"kind"}, "layer");
                break;
        }
        arch.layers.push_back(std::move(l));
    }
    for (const auto& jh : j.at("trace_history")) {
        if (!jh.is_array() || jh.size() != 2)
            throw DpcnError("arch: trace_history entries must be [layer, tr]");
        arch.trace_history.emplace_back(jh.at(0).get<int>(), jh.at(1).get<double>());
    }
    arch.validate();
    return arch;
}

void save_arch_file(const ArchSpec& arch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DpcnError("cannot write arch file '" + path + "'");
    out << save_arch(arch);
}

ArchSpec load_arch_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DpcnError("cannot open arch file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_arch(ss.str());
}

} // namespace dpcn

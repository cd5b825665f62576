#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dpcn/common.hpp"

namespace dpcn {

struct LayerSpec {
    enum class Kind { conv_block, maxpool, gap, gmp, concat, dropout, softmax };
    Kind kind = Kind::conv_block;

    // conv_block: BN(input channels) -> activation -> conv, stride-1 "same"
    int kernel_size = 0;   // 7 for the first block, 3 afterwards
    int out_channels = 0;
    std::string activation; // relu | lrelu | sigmoid

    // dropout
    double p = 0.0;
};

const char* layer_kind_name(LayerSpec::Kind kind);

struct ArchSpec {
    int side = 0;          // square input
    int channels = 0;      // 1 or 3
    int num_classes = 0;
    std::vector<LayerSpec> layers;
    // (layer index m, trace ratio) for every probed depth, including a
    // rejected final probe when the growth loop stopped on a decrease.
    std::vector<std::pair<int, double>> trace_history;

    int depth() const;     // number of conv blocks
    bool has_head() const;
    // Structural invariants: kernel sizes, pools after blocks 1 and 2,
    // head order gap|gmp -> concat -> dropout -> softmax.
    void validate() const;
};

// Canonical JSON round-trip: save(load(save(x))) is byte-identical and
// unknown fields are rejected.
std::string save_arch(const ArchSpec& arch);
ArchSpec load_arch(const std::string& bytes);

void save_arch_file(const ArchSpec& arch, const std::string& path);
ArchSpec load_arch_file(const std::string& path);

} // namespace dpcn

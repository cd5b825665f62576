#pragma once

#include <string>
#include <vector>

#include "dpcn/arch.hpp"
#include "dpcn/image.hpp"
#include "dpcn/layers.hpp"

namespace dpcn {

// Execution modes: train uses batch BN statistics and active dropout;
// eval uses running statistics and no dropout; grad_check uses batch
// statistics with dropout off (the smooth function the finite-difference
// verifier probes).
enum class Mode { train, eval, grad_check };

// Per-layer parameter slot; only the fields matching the layer kind are
// populated (conv_block: bn + conv; softmax: dense).
struct LayerParams {
    BnParams bn;
    ConvParams conv;
    DenseParams dense;
};

struct ModelState {
    ArchSpec arch;
    std::vector<LayerParams> params;  // aligned with arch.layers
    bool train_mode = false;          // transient; not serialized

    void validate_shapes() const;
};

// Fresh model with seeded random parameters (Glorot-uniform dense, scaled
// normal conv, identity BN). The builder's PCA initialization lives in
// netbuilder; this one backs tests and generic tooling.
ModelState init_model(const ArchSpec& arch, Rng& rng);

// Replaces every conv block's activation and the head dropout probability
// (used by hyperparameter trials; empty / negative values keep the arch).
void apply_overrides(ModelState& model, const std::string& activation, double dropout_p);

struct LayerCache {
    Tensor input;          // layer input
    BnCache bn;
    Tensor act_input;      // BN output = activation input
    Tensor conv_input;     // activation output = conv input
    PoolCache pool;
    std::vector<double> dropout_mask;
    Tensor gap_out, gmp_out;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Tensor pre_head;       // last conv block output (input to gap/gmp)
    Tensor logits;
    Tensor probs;
};

// Runs the network. `rng` is required only for train-mode dropout. Row sums
// of the returned probabilities are 1; the pre-head activation is exposed
// through the cache for the builder and for grad_cam.
Tensor model_forward(const ModelState& model, const Tensor& batch, Mode mode,
                     Rng* rng = nullptr, ForwardCache* cache = nullptr);

// Applies the cached batch statistics to every BN layer's running stats.
void update_bn_running(ModelState& model, const ForwardCache& cache);

struct Gradients {
    std::vector<LayerParams> layers;  // same shapes as ModelState::params
};

// Backpropagates d(loss)/d(logits) through the network. When `dpre_head`
// is non-null the gradient w.r.t. the last conv activation is stored
// there; when `grads` is null only activations are propagated (grad_cam
// uses head_only with both options).
void model_backward(const ModelState& model, const ForwardCache& cache, const Tensor& dlogits,
                    Gradients* grads, Tensor* dpre_head = nullptr, bool head_only = false);

// Mean softmax cross-entropy over the batch plus gradients for all
// parameters.
double loss_and_grad(const ModelState& model, const Tensor& batch,
                     const std::vector<int>& labels, Mode mode, Rng* rng,
                     Gradients* grads, ForwardCache* cache = nullptr);

// Forward-only loss. `smoothness_token`, when given, receives a hash of the
// relu sign pattern and pool argmax choices; finite differencing skips
// samples whose two perturbed passes disagree (a kink sits between them).
double loss_only(const ModelState& model, const Tensor& batch,
                 const std::vector<int>& labels, Mode mode,
                 std::uint64_t* smoothness_token = nullptr);

// ---- checkpoint (DPCN binary format) ----------------------------------
// magic "DPCN", version u16 LE, u32 LE arch-JSON length, arch JSON bytes,
// then 64-bit little-endian parameter doubles in declared layer order
// (conv blocks: bn gamma, beta, running mean, running var, conv weights;
// softmax: dense weights then bias).
std::string checkpoint_save(const ModelState& model);
ModelState checkpoint_load(const std::string& bytes);
void checkpoint_save_file(const ModelState& model, const std::string& path);
ModelState checkpoint_load_file(const std::string& path);

// Batch assembly from a dataset.
Tensor make_batch(const LabeledImageSet& set, const std::vector<std::size_t>& indices);
std::vector<int> batch_labels(const LabeledImageSet& set, const std::vector<std::size_t>& indices);

} // namespace dpcn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mflag/losses.hpp"
#include "mflag/numerics.hpp"

namespace mflag {

// ============================================================
// Two-tower model: a trainable vision MLP, a single linear
// projector taking the vision latent to the text embedding
// dimension, and a layered text tower whose last layer is a
// pooled linear head (reports are single fixed-length vectors,
// so the token pool is the identity). The text tower is frozen
// by default; FreezePolicy can unfreeze whole layers counted
// from the output end.
// ============================================================

enum class Activation { none, tanh_fn, relu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::none;
    bool trainable = true;
};

struct Layer {
    LayerSpec spec;
    Matrix weight;  // in_dim x out_dim
    Matrix bias;    // 1 x out_dim
};

struct ModelConfig {
    std::vector<std::size_t> vision_dims{32, 64, 16};  // input, hidden..., latent N
    std::size_t projector_out = 8;                     // M; must equal text_dims.back()
    std::vector<std::size_t> text_dims{32, 16, 8};     // input, hidden..., embedding M
    Activation hidden_activation = Activation::tanh_fn;
};

struct ModelParams {
    std::vector<Layer> vision_layers;
    Layer projector;
    std::vector<Layer> text_layers;  // last entry is the pooled head
    // Bumped on every in-place parameter update; forward caches stamp it
    // so backward can reject a cache taken against older parameters.
    std::uint64_t version = 0;
};

struct FreezePolicy {
    std::size_t unfreeze_last_n = 0;  // 0 = whole text tower frozen
};

// Flat view over every parameter tensor, in a fixed canonical order:
// vision layers (weight, bias), projector (weight, bias), text layers
// (weight, bias). Gradients and optimizer buffers share this order.
struct ParamRef {
    Matrix* value = nullptr;
    bool trainable = false;
    std::string name;
};
struct ConstParamRef {
    const Matrix* value = nullptr;
    bool trainable = false;
    std::string name;
};

std::vector<ParamRef> param_refs(ModelParams& params);
std::vector<ConstParamRef> param_refs(const ModelParams& params);

struct ParamGrads {
    std::vector<Matrix> tensors;  // aligned with param_refs order
    std::uint64_t version = 0;
};

struct ForwardCache {
    // Per tower: the input each layer consumed and the output it produced.
    std::vector<Matrix> vision_inputs, vision_outputs;
    Matrix projector_input;
    std::vector<Matrix> text_inputs, text_outputs;
    std::uint64_t version = 0;
};

struct ForwardResult {
    Matrix z_v;  // B x N, pre-normalization vision latent
    Matrix z_a;  // B x M, projected vision embedding
    Matrix z_t;  // B x M, text embedding
    ForwardCache cache;
};

struct ParamCounts {
    std::size_t trainable = 0;
    std::size_t frozen = 0;
    double reduction_pct = 0.0;  // frozen / (frozen + trainable) * 100
};

/// Builds the model with scaled-normal weights (std 1/sqrt(in_dim)),
/// zero biases. Text tower starts fully frozen. Throws BadDimChain on
/// an invalid chain, including projector_out != text_dims.back().
ModelParams init_model(const ModelConfig& config, Rng& rng);

/// Sets text-layer trainable flags: the last unfreeze_last_n layers
/// (head first) become trainable, the rest frozen.
void apply_freeze_policy(ModelParams& params, const FreezePolicy& policy);

ForwardResult forward(const ModelParams& params, const Matrix& x_v, const Matrix& x_t);

/// Chain rule back through the projector and vision tower; through the
/// trainable suffix of the text tower only when d_zt is given and some
/// text layer is unfrozen. Either tensor in loss_grads may be empty
/// when its loss term is disabled. Frozen parameters get exactly-zero
/// gradient tensors. Throws StaleCache if params changed since the
/// forward.
ParamGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const LossGrads& loss_grads, const Matrix* d_zt = nullptr);

ParamCounts count_params(const ModelParams& params);
/// Counts as if the policy were applied (the stored flags are not touched).
ParamCounts count_params(const ModelParams& params, const FreezePolicy& policy);

}  // namespace mflag

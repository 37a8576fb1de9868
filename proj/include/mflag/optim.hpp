#pragma once

#include <string>
#include <vector>

#include "mflag/models.hpp"
#include "mflag/numerics.hpp"

namespace mflag {

// ============================================================
// Update rules: plain SGD with momentum, and LARS. LARS scales
// each parameter tensor's step by the trust ratio
//     base_lr * ||w|| / (||g|| + weight_decay*||w|| + trust_eps)
// and pushes the scaled step through the momentum buffer.
// Tensors with ||w|| < trust_eps (zero-initialized biases) fall
// back to local lr = base_lr so they are not stuck forever.
// ============================================================

enum class OptimMode { sgd, lars };

const char* optim_mode_name(OptimMode m);
OptimMode optim_mode_from_name(const std::string& name);

struct OptimConfig {
    double base_lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double trust_eps = 1e-9;
    OptimMode mode = OptimMode::lars;
};

struct OptimState {
    OptimConfig config;
    // One buffer per parameter tensor, param_refs order, zero-initialized
    // on first use. Single-owner: step is not reentrant for one state.
    std::vector<Matrix> momentum;

    explicit OptimState(OptimConfig cfg = {}) : config(cfg) {}
};

/// One update over every trainable parameter. Frozen parameters and
/// their buffers are untouched, bit-exact. SGD with momentum 0 reduces
/// to w <- w - base_lr * (g + weight_decay * w).
void optim_step(ModelParams& params, const ParamGrads& grads, OptimState& state);

}  // namespace mflag

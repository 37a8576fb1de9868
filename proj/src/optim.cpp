#include "mflag/optim.hpp"

#include <cmath>

namespace mflag {

const char* optim_mode_name(OptimMode m) {
    return m == OptimMode::sgd ? "sgd" : "lars";
}

OptimMode optim_mode_from_name(const std::string& name) {
    if (name == "sgd") return OptimMode::sgd;
    if (name == "lars") return OptimMode::lars;
    throw ConfigError("unknown optimizer mode: " + name);
}

void optim_step(ModelParams& params, const ParamGrads& grads, OptimState& state) {
    auto refs = param_refs(params);
    if (grads.tensors.size() != refs.size())
        throw ShapeMismatch("optim_step: gradient tensor count mismatch");
    if (state.momentum.empty()) {
        state.momentum.reserve(refs.size());
        for (const auto& ref : refs)
            state.momentum.emplace_back(ref.value->rows, ref.value->cols);
    }
    if (state.momentum.size() != refs.size())
        throw ShapeMismatch("optim_step: state does not match model");

    const OptimConfig& cfg = state.config;
    for (std::size_t t = 0; t < refs.size(); ++t) {
        if (!refs[t].trainable) continue;
        Matrix& w = *refs[t].value;
        const Matrix& g = grads.tensors[t];
        if (!w.same_shape(g))
            throw ShapeMismatch("optim_step: gradient shape mismatch for " + refs[t].name);
        Matrix& buf = state.momentum[t];

        if (cfg.mode == OptimMode::sgd) {
            for (std::size_t i = 0; i < w.data.size(); ++i) {
                const double u = g.data[i] + cfg.weight_decay * w.data[i];
                buf.data[i] = cfg.momentum * buf.data[i] + u;
                w.data[i] -= cfg.base_lr * buf.data[i];
            }
        } else {
            const double wn = frobenius_norm(w);
            const double gn = frobenius_norm(g);
            const double local_lr =
                wn < cfg.trust_eps
                    ? cfg.base_lr
                    : cfg.base_lr * wn / (gn + cfg.weight_decay * wn + cfg.trust_eps);
            for (std::size_t i = 0; i < w.data.size(); ++i) {
                const double u = local_lr * (g.data[i] + cfg.weight_decay * w.data[i]);
                buf.data[i] = cfg.momentum * buf.data[i] + u;
                w.data[i] -= buf.data[i];
            }
        }
    }
    ++params.version;
}

}  // namespace mflag

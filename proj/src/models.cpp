#include "mflag/models.hpp"

#include <cmath>
#include <string>

namespace mflag {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::tanh_fn: return "tanh";
        case Activation::relu: return "relu";
    }
    return "none";
}

Activation activation_from_name(const std::string& name) {
    if (name == "none") return Activation::none;
    if (name == "tanh") return Activation::tanh_fn;
    if (name == "relu") return Activation::relu;
    throw ConfigError("unknown activation: " + name);
}

namespace {

void apply_activation(Matrix& m, Activation a) {
    switch (a) {
        case Activation::none:
            return;
        case Activation::tanh_fn:
            for (double& v : m.data) v = std::tanh(v);
            return;
        case Activation::relu:
            for (double& v : m.data) v = v > 0.0 ? v : 0.0;
            return;
    }
}

// dPre = dOut (.) act'(out), derivative taken from the layer output.
Matrix activation_backward(const Matrix& d_out, const Matrix& out, Activation a) {
    Matrix d = d_out;
    switch (a) {
        case Activation::none:
            break;
        case Activation::tanh_fn:
            for (std::size_t i = 0; i < d.data.size(); ++i)
                d.data[i] *= 1.0 - out.data[i] * out.data[i];
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < d.data.size(); ++i)
                if (out.data[i] <= 0.0) d.data[i] = 0.0;
            break;
    }
    return d;
}

// out = act(in * W + b), bias broadcast across rows.
Matrix layer_forward(const Layer& layer, const Matrix& in) {
    Matrix pre = matmul(in, layer.weight);
    for (std::size_t i = 0; i < pre.rows; ++i)
        for (std::size_t j = 0; j < pre.cols; ++j) pre(i, j) += layer.bias(0, j);
    apply_activation(pre, layer.spec.activation);
    return pre;
}

Matrix colsum(const Matrix& m) {
    Matrix s(1, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) s(0, j) += m(i, j);
    return s;
}

Layer make_layer(std::size_t in_dim, std::size_t out_dim, Activation act, bool trainable,
                 Rng& rng) {
    Layer layer;
    layer.spec = LayerSpec{in_dim, out_dim, act, trainable};
    layer.weight = scale(rng_normal(rng, in_dim, out_dim), 1.0 / std::sqrt(double(in_dim)));
    layer.bias = Matrix(1, out_dim);
    return layer;
}

void check_chain(const std::vector<std::size_t>& dims, const char* tower) {
    if (dims.size() < 2) throw BadDimChain(std::string(tower) + ": needs at least input and output dims");
    for (std::size_t d : dims)
        if (d == 0) throw BadDimChain(std::string(tower) + ": zero dimension");
}

}  // namespace

ModelParams init_model(const ModelConfig& config, Rng& rng) {
    check_chain(config.vision_dims, "vision_dims");
    check_chain(config.text_dims, "text_dims");
    if (config.projector_out == 0) throw BadDimChain("projector_out must be positive");
    if (config.projector_out != config.text_dims.back()) {
        throw BadDimChain("projector_out (" + std::to_string(config.projector_out) +
                          ") must equal text embedding dim (" +
                          std::to_string(config.text_dims.back()) + ")");
    }

    ModelParams p;
    // Hidden layers carry the activation; each tower ends linear.
    for (std::size_t i = 0; i + 1 < config.vision_dims.size(); ++i) {
        const bool last = (i + 2 == config.vision_dims.size());
        p.vision_layers.push_back(make_layer(config.vision_dims[i], config.vision_dims[i + 1],
                                             last ? Activation::none : config.hidden_activation,
                                             true, rng));
    }
    p.projector =
        make_layer(config.vision_dims.back(), config.projector_out, Activation::none, true, rng);
    for (std::size_t i = 0; i + 1 < config.text_dims.size(); ++i) {
        const bool last = (i + 2 == config.text_dims.size());
        p.text_layers.push_back(make_layer(config.text_dims[i], config.text_dims[i + 1],
                                           last ? Activation::none : config.hidden_activation,
                                           false, rng));
    }
    return p;
}

void apply_freeze_policy(ModelParams& params, const FreezePolicy& policy) {
    const std::size_t n_text = params.text_layers.size();
    const std::size_t unfrozen = std::min(policy.unfreeze_last_n, n_text);
    for (std::size_t i = 0; i < n_text; ++i) {
        const bool trainable = i >= n_text - unfrozen;
        params.text_layers[i].spec.trainable = trainable;
    }
    ++params.version;
}

namespace {

template <typename Params, typename Ref>
std::vector<Ref> refs_impl(Params& params) {
    std::vector<Ref> refs;
    auto push = [&refs](auto& layer, const std::string& name) {
        refs.push_back(Ref{&layer.weight, layer.spec.trainable, name + ".weight"});
        refs.push_back(Ref{&layer.bias, layer.spec.trainable, name + ".bias"});
    };
    for (std::size_t i = 0; i < params.vision_layers.size(); ++i)
        push(params.vision_layers[i], "vision[" + std::to_string(i) + "]");
    push(params.projector, "projector");
    for (std::size_t i = 0; i < params.text_layers.size(); ++i)
        push(params.text_layers[i], "text[" + std::to_string(i) + "]");
    return refs;
}

}  // namespace

std::vector<ParamRef> param_refs(ModelParams& params) {
    return refs_impl<ModelParams, ParamRef>(params);
}

std::vector<ConstParamRef> param_refs(const ModelParams& params) {
    return refs_impl<const ModelParams, ConstParamRef>(params);
}

ForwardResult forward(const ModelParams& params, const Matrix& x_v, const Matrix& x_t) {
    if (x_v.rows != x_t.rows)
        throw ShapeMismatch("forward: x_v and x_t batch sizes differ");
    if (x_v.cols != params.vision_layers.front().spec.in_dim)
        throw ShapeMismatch("forward: x_v feature dim " + std::to_string(x_v.cols) +
                            " != vision input dim " +
                            std::to_string(params.vision_layers.front().spec.in_dim));
    if (x_t.cols != params.text_layers.front().spec.in_dim)
        throw ShapeMismatch("forward: x_t feature dim " + std::to_string(x_t.cols) +
                            " != text input dim " +
                            std::to_string(params.text_layers.front().spec.in_dim));

    ForwardResult r;
    r.cache.version = params.version;

    Matrix h = x_v;
    for (const Layer& layer : params.vision_layers) {
        r.cache.vision_inputs.push_back(h);
        h = layer_forward(layer, h);
        r.cache.vision_outputs.push_back(h);
    }
    r.z_v = h;

    r.cache.projector_input = r.z_v;
    r.z_a = layer_forward(params.projector, r.z_v);

    // Token pool ahead of the head is the identity: one report, one token.
    Matrix t = x_t;
    for (const Layer& layer : params.text_layers) {
        r.cache.text_inputs.push_back(t);
        t = layer_forward(layer, t);
        r.cache.text_outputs.push_back(t);
    }
    r.z_t = t;
    return r;
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const LossGrads& loss_grads, const Matrix* d_zt) {
    if (cache.version != params.version)
        throw StaleCache("backward: cache was taken against different parameters");

    const auto refs = param_refs(params);
    ParamGrads grads;
    grads.version = params.version;
    grads.tensors.reserve(refs.size());
    for (const auto& ref : refs) grads.tensors.emplace_back(ref.value->rows, ref.value->cols);

    const std::size_t n_vision = params.vision_layers.size();
    auto slot = [&](std::size_t layer_index) -> std::size_t { return 2 * layer_index; };

    const std::size_t batch = cache.projector_input.rows;
    const std::size_t latent_n = cache.projector_input.cols;

    // Total gradient reaching z_v: the orthogonality part arrives
    // directly, the alignment part routes back through the projector.
    // Either upstream tensor may be empty when its term is disabled.
    Matrix d(batch, latent_n);
    const Matrix& d_za = loss_grads.d_za;
    if (!d_za.empty()) {
        if (d_za.rows != batch || d_za.cols != params.projector.spec.out_dim)
            throw ShapeMismatch("backward: d_za shape mismatch");
        grads.tensors[slot(n_vision)] = matmul(transpose(cache.projector_input), d_za);
        grads.tensors[slot(n_vision) + 1] = colsum(d_za);
        d = matmul(d_za, transpose(params.projector.weight));
    }
    if (!loss_grads.d_zv.empty()) {
        if (!loss_grads.d_zv.same_shape(d)) throw ShapeMismatch("backward: d_zv shape mismatch");
        d = add(d, loss_grads.d_zv);
    }

    for (std::size_t i = n_vision; i-- > 0;) {
        const Layer& layer = params.vision_layers[i];
        const Matrix d_pre = activation_backward(d, cache.vision_outputs[i], layer.spec.activation);
        grads.tensors[slot(i)] = matmul(transpose(cache.vision_inputs[i]), d_pre);
        grads.tensors[slot(i) + 1] = colsum(d_pre);
        if (i > 0) d = matmul(d_pre, transpose(layer.weight));
    }

    // Text tower: only when a trainable suffix exists and an upstream
    // gradient was supplied. Frozen layers keep their exact zeros.
    const std::size_t n_text = params.text_layers.size();
    bool any_text_trainable = false;
    for (const Layer& layer : params.text_layers) any_text_trainable |= layer.spec.trainable;
    if (d_zt != nullptr && any_text_trainable) {
        Matrix dt = *d_zt;
        for (std::size_t i = n_text; i-- > 0;) {
            const Layer& layer = params.text_layers[i];
            const Matrix d_pre =
                activation_backward(dt, cache.text_outputs[i], layer.spec.activation);
            if (layer.spec.trainable) {
                const std::size_t base = slot(n_vision + 1 + i);
                grads.tensors[base] = matmul(transpose(cache.text_inputs[i]), d_pre);
                grads.tensors[base + 1] = colsum(d_pre);
            } else {
                break;  // everything below the trainable suffix stays frozen
            }
            if (i > 0) dt = matmul(d_pre, transpose(layer.weight));
        }
    }
    return grads;
}

ParamCounts count_params(const ModelParams& params) {
    ParamCounts c;
    for (const auto& ref : param_refs(params)) {
        const std::size_t n = ref.value->data.size();
        if (ref.trainable)
            c.trainable += n;
        else
            c.frozen += n;
    }
    const std::size_t total = c.trainable + c.frozen;
    c.reduction_pct = total == 0 ? 0.0 : 100.0 * double(c.frozen) / double(total);
    return c;
}

ParamCounts count_params(const ModelParams& params, const FreezePolicy& policy) {
    ModelParams copy = params;
    apply_freeze_policy(copy, policy);
    return count_params(copy);
}

}  // namespace mflag

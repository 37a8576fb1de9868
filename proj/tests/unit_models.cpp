#include <doctest.h>

#include <cmath>
#include <cstring>
#include <utility>

#include "mflag/errors.hpp"
#include "mflag/losses.hpp"
#include "mflag/models.hpp"
#include "mflag/numerics.hpp"
#include "test_support.hpp"

using mflag::Matrix;

TEST_CASE("activation names round-trip and reject unknowns") {
    CHECK(mflag::activation_from_name("tanh") == mflag::Activation::tanh_fn);
    CHECK(mflag::activation_from_name("relu") == mflag::Activation::relu);
    CHECK(mflag::activation_from_name("none") == mflag::Activation::none);
    CHECK(mflag::activation_name(mflag::Activation::tanh_fn) ==
          std::string("tanh"));
    CHECK_THROWS_AS(mflag::activation_from_name("sigmoid"),
                    mflag::ConfigError);
}

TEST_CASE("parameter counts for the default architecture") {
    mflag::Rng rng(1);
    const mflag::ModelParams params = mflag::init_model(mflag::ModelConfig{}, rng);
    const mflag::ParamCounts c = mflag::count_params(params);
    // vision 32->64->16 plus projector 16->8 plus text 32->16->8,
    // counting weights and biases; text tower frozen at init.
    CHECK(c.trainable + c.frozen == 3952);
    CHECK(c.trainable == 3288);
    CHECK(c.frozen == 664);
    CHECK(c.reduction_pct ==
          doctest::Approx(100.0 * 664.0 / 3952.0).epsilon(1e-12));
}

TEST_CASE("parameter counts for a hand-sized architecture") {
    mflag::ModelConfig cfg;
    cfg.vision_dims = {178, 16};
    cfg.projector_out = 8;
    cfg.text_dims = {124, 8};
    mflag::Rng rng(2);
    const mflag::ModelParams params = mflag::init_model(cfg, rng);
    const mflag::ParamCounts c = mflag::count_params(params);
    CHECK(c.trainable == 3000);
    CHECK(c.frozen == 1000);
    CHECK(c.reduction_pct == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("trainable count grows monotonically as layers unfreeze") {
    mflag::ModelConfig cfg;
    cfg.vision_dims = {10, 8, 6};
    cfg.projector_out = 4;
    cfg.text_dims = {12, 9, 7, 4};
    mflag::Rng rng(3);
    const mflag::ModelParams params = mflag::init_model(cfg, rng);
    std::size_t prev = 0;
    for (std::size_t n = 0; n <= 3; ++n) {
        const mflag::ParamCounts c =
            mflag::count_params(params, mflag::FreezePolicy{n});
        if (n == 0) {
            prev = c.trainable;
        } else {
            CHECK(c.trainable > prev);
            prev = c.trainable;
        }
        CHECK(c.trainable + c.frozen == 10u * 8 + 8 + 8 * 6 + 6 + 6 * 4 + 4 +
                                            12 * 9 + 9 + 9 * 7 + 7 + 7 * 4 + 4);
    }
    // Unfreezing every text layer leaves nothing frozen.
    const mflag::ParamCounts full =
        mflag::count_params(params, mflag::FreezePolicy{3});
    CHECK(full.frozen == 0);
}

TEST_CASE("init rejects broken dimension chains") {
    mflag::Rng rng(4);
    mflag::ModelConfig cfg;
    cfg.vision_dims = {32};
    CHECK_THROWS_AS(mflag::init_model(cfg, rng), mflag::BadDimChain);

    cfg = mflag::ModelConfig{};
    cfg.text_dims = {32, 16, 9};  // does not match projector_out 8
    CHECK_THROWS_AS(mflag::init_model(cfg, rng), mflag::BadDimChain);

    cfg = mflag::ModelConfig{};
    cfg.vision_dims = {32, 0, 16};
    CHECK_THROWS_AS(mflag::init_model(cfg, rng), mflag::BadDimChain);
}

TEST_CASE("init is seed-deterministic and freezes the text tower") {
    mflag::Rng r1(9), r2(9);
    const mflag::ModelParams a = mflag::init_model(mflag::ModelConfig{}, r1);
    const mflag::ModelParams b = mflag::init_model(mflag::ModelConfig{}, r2);
    for (std::size_t i = 0; i < a.vision_layers.size(); ++i) {
        CHECK(a.vision_layers[i].weight.data ==
              b.vision_layers[i].weight.data);
        CHECK(mflag::max_abs(a.vision_layers[i].bias) == 0.0);
        CHECK(a.vision_layers[i].spec.trainable);
    }
    CHECK(a.projector.spec.trainable);
    for (const mflag::Layer& l : a.text_layers) CHECK_FALSE(l.spec.trainable);
}

TEST_CASE("zero input through tanh towers yields zero latents") {
    mflag::Rng rng(5);
    const mflag::ModelParams params = mflag::init_model(mflag::ModelConfig{}, rng);
    const Matrix xv(3, 32, 0.0), xt(3, 32, 0.0);
    const mflag::ForwardResult fr = mflag::forward(params, xv, xt);
    CHECK(mflag::max_abs(fr.z_v) == 0.0);
    CHECK(mflag::max_abs(fr.z_a) == 0.0);
    CHECK(mflag::max_abs(fr.z_t) == 0.0);
    CHECK(fr.z_v.cols == 16);
    CHECK(fr.z_a.cols == 8);
    CHECK(fr.z_t.cols == 8);
}

TEST_CASE("identity towers pass the input straight through") {
    mflag::ModelConfig cfg;
    cfg.vision_dims = {4, 4};
    cfg.projector_out = 4;
    cfg.text_dims = {4, 4};
    mflag::Rng rng(6);
    mflag::ModelParams params = mflag::init_model(cfg, rng);
    params.vision_layers[0].weight = Matrix::identity(4);
    params.vision_layers[0].bias = Matrix(1, 4);
    params.projector.weight = Matrix::identity(4);
    params.projector.bias = Matrix(1, 4);

    const Matrix xv = mflag::rng_normal(rng, 5, 4);
    const Matrix xt = mflag::rng_normal(rng, 5, 4);
    const mflag::ForwardResult fr = mflag::forward(params, xv, xt);
    CHECK(mflag::max_abs(mflag::sub(fr.z_v, xv)) == 0.0);
    CHECK(mflag::max_abs(mflag::sub(fr.z_a, xv)) == 0.0);
}

TEST_CASE("backward leaves frozen tensors with exactly zero gradient") {
    mflag::Rng rng(7);
    mflag::ModelParams params = mflag::init_model(mflag::ModelConfig{}, rng);
    mflag::Rng data_rng(8);
    const Matrix xv = mflag::rng_normal(data_rng, 6, 32);
    const Matrix xt = mflag::rng_normal(data_rng, 6, 32);
    const mflag::ForwardResult fr = mflag::forward(params, xv, xt);
    const auto [lb, lg] = mflag::total_loss_grad(fr.z_a, fr.z_t, fr.z_v);
    CHECK(lb.total > 0.0);
    const Matrix d_zt = mflag::align_loss_grad_text(fr.z_a, fr.z_t);
    const mflag::ParamGrads grads =
        mflag::backward(params, fr.cache, lg, &d_zt);

    const auto refs = mflag::param_refs(params);
    CHECK(grads.tensors.size() == refs.size());
    bool saw_frozen = false, saw_live = false;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].trainable) {
            saw_live = saw_live || mflag::max_abs(grads.tensors[i]) > 0.0;
        } else {
            CHECK(mflag::max_abs(grads.tensors[i]) == 0.0);
            saw_frozen = true;
        }
    }
    CHECK(saw_frozen);
    CHECK(saw_live);
}

TEST_CASE("backward rejects a cache taken against older parameters") {
    mflag::Rng rng(10);
    mflag::ModelParams params = mflag::init_model(mflag::ModelConfig{}, rng);
    mflag::Rng data_rng(11);
    const Matrix xv = mflag::rng_normal(data_rng, 4, 32);
    const Matrix xt = mflag::rng_normal(data_rng, 4, 32);
    const mflag::ForwardResult fr = mflag::forward(params, xv, xt);
    const auto [lb, lg] = mflag::total_loss_grad(fr.z_a, fr.z_t, fr.z_v);
    (void)lb;
    mflag::apply_freeze_policy(params, mflag::FreezePolicy{1});
    CHECK_THROWS_AS(mflag::backward(params, fr.cache, lg, nullptr),
                    mflag::StaleCache);
}

TEST_CASE("model gradients match finite differences") {
    mflag::ModelConfig cfg;
    cfg.vision_dims = {6, 10, 7};
    cfg.projector_out = 5;
    cfg.text_dims = {8, 6, 5};
    mflag::Rng rng(12);
    mflag::ModelParams params = mflag::init_model(cfg, rng);
    mflag::apply_freeze_policy(params, mflag::FreezePolicy{2});

    mflag::Rng data_rng(13);
    const Matrix xv = mflag::rng_normal(data_rng, 7, 6);
    const Matrix xt = mflag::rng_normal(data_rng, 7, 8);

    const mflag::ForwardResult fr = mflag::forward(params, xv, xt);
    const auto [lb, lg] = mflag::total_loss_grad(fr.z_a, fr.z_t, fr.z_v);
    (void)lb;
    const Matrix d_zt = mflag::align_loss_grad_text(fr.z_a, fr.z_t);
    const mflag::ParamGrads grads =
        mflag::backward(params, fr.cache, lg, &d_zt);

    const auto eval = [&params, &xv, &xt] {
        const mflag::ForwardResult f = mflag::forward(params, xv, xt);
        return mflag::total_loss(f.z_a, f.z_t, f.z_v).total;
    };
    auto refs = mflag::param_refs(params);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (!refs[i].trainable) continue;
        const Matrix fd = testsup::fd_grad(*refs[i].value, eval, 1e-5);
        CHECK_MESSAGE(testsup::rel_err_inf(grads.tensors[i], fd) < 1e-4,
                      refs[i].name);
    }
}

TEST_CASE("backward with a disabled term produces zero for that path") {
    // Empty d_za disables the alignment path; only the vision tower below the
    // projector input sees gradient from d_zv, so the projector must be zero.
    mflag::Rng rng(14);
    mflag::ModelParams params = mflag::init_model(mflag::ModelConfig{}, rng);
    mflag::Rng data_rng(15);
    const Matrix xv = mflag::rng_normal(data_rng, 5, 32);
    const Matrix xt = mflag::rng_normal(data_rng, 5, 32);
    const mflag::ForwardResult fr = mflag::forward(params, xv, xt);

    const auto [orth, d_zv] = mflag::orth_loss_grad(fr.z_v);
    CHECK(orth.offdiag > 0.0);
    mflag::LossGrads lg;
    lg.d_zv = d_zv;
    const mflag::ParamGrads grads =
        mflag::backward(params, fr.cache, lg, nullptr);

    const auto refs = mflag::param_refs(params);
    bool vision_live = false;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].name.rfind("projector", 0) == 0)
            CHECK(mflag::max_abs(grads.tensors[i]) == 0.0);
        if (refs[i].name.rfind("vision", 0) == 0)
            vision_live = vision_live || mflag::max_abs(grads.tensors[i]) > 0.0;
    }
    CHECK(vision_live);
}

#include "mflag/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mflag/errors.hpp"

namespace mflag {

namespace {

constexpr std::uint64_t kSynthSalt = 0x73796e7468646174ull;

void check_config(const SynthConfig& cfg) {
    if (cfg.n_samples == 0 || cfg.latent_dim == 0 || cfg.vision_dim == 0 ||
        cfg.text_dim == 0)
        throw ConfigError("synth config: all dimensions must be positive");
    if (cfg.vision_dim < cfg.latent_dim || cfg.text_dim < cfg.latent_dim)
        throw ConfigError("synth config: view dims must be >= latent_dim");
    if (!(cfg.noise_std >= 0.0) || !std::isfinite(cfg.noise_std))
        throw ConfigError("synth config: noise_std must be finite and >= 0");
}

Batch generate_from(const SynthConfig& cfg, const Matrix& mix_v,
                    const Matrix& mix_t, Rng& rng) {
    if (mix_v.rows != cfg.latent_dim || mix_v.cols != cfg.vision_dim ||
        mix_t.rows != cfg.latent_dim || mix_t.cols != cfg.text_dim)
        throw ShapeMismatch("generate: mixing matrices do not match config dims");

    Batch b;
    b.h = rng_normal(rng, cfg.n_samples, cfg.latent_dim);
    b.x_v = matmul(b.h, mix_v);
    for (double& v : b.x_v.data) v = std::tanh(v);
    b.x_t = matmul(b.h, mix_t);
    if (cfg.noise_std > 0.0) {
        const Matrix eps_v = rng_normal(rng, cfg.n_samples, cfg.vision_dim);
        const Matrix eps_t = rng_normal(rng, cfg.n_samples, cfg.text_dim);
        for (std::size_t i = 0; i < b.x_v.data.size(); ++i)
            b.x_v.data[i] += cfg.noise_std * eps_v.data[i];
        for (std::size_t i = 0; i < b.x_t.data.size(); ++i)
            b.x_t.data[i] += cfg.noise_std * eps_t.data[i];
    }
    b.labels.resize(cfg.n_samples);
    for (std::size_t i = 0; i < cfg.n_samples; ++i)
        b.labels[i] = b.h(i, 0) > 0.0 ? 1 : 0;
    return b;
}

}  // namespace

Batch generate(const SynthConfig& cfg) {
    check_config(cfg);
    Rng rng(mix_seed(cfg.seed, kSynthSalt));
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
    Matrix mix_v = rng_normal(rng, cfg.latent_dim, cfg.vision_dim);
    for (double& v : mix_v.data) v *= scale;
    Matrix mix_t = rng_normal(rng, cfg.latent_dim, cfg.text_dim);
    for (double& v : mix_t.data) v *= scale;
    return generate_from(cfg, mix_v, mix_t, rng);
}

Batch generate(const SynthConfig& cfg, const Matrix& mix_v, const Matrix& mix_t) {
    check_config(cfg);
    Rng rng(mix_seed(cfg.seed, kSynthSalt));
    return generate_from(cfg, mix_v, mix_t, rng);
}

Batch take_rows(const Batch& ds, const std::vector<std::size_t>& rows) {
    Batch out;
    out.x_v = Matrix(rows.size(), ds.x_v.cols);
    out.x_t = Matrix(rows.size(), ds.x_t.cols);
    out.h = Matrix(rows.size(), ds.h.cols);
    out.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t s = rows[r];
        if (s >= ds.size()) throw ShapeMismatch("take_rows: index out of range");
        for (std::size_t j = 0; j < ds.x_v.cols; ++j) out.x_v(r, j) = ds.x_v(s, j);
        for (std::size_t j = 0; j < ds.x_t.cols; ++j) out.x_t(r, j) = ds.x_t(s, j);
        for (std::size_t j = 0; j < ds.h.cols; ++j) out.h(r, j) = ds.h(s, j);
        out.labels[r] = ds.labels[s];
    }
    return out;
}

Batch slice_rows(const Batch& ds, std::size_t begin, std::size_t end) {
    if (begin > end || end > ds.size())
        throw ShapeMismatch("slice_rows: bad range");
    std::vector<std::size_t> rows(end - begin);
    for (std::size_t i = begin; i < end; ++i) rows[i - begin] = i;
    return take_rows(ds, rows);
}

SplitResult split(const Batch& ds, double train_frac, double valid_frac,
                  std::uint64_t seed) {
    if (!(train_frac >= 0.0) || !(valid_frac >= 0.0) ||
        train_frac + valid_frac > 1.0 + 1e-12)
        throw BadFractions("split: fractions must be >= 0 and sum to <= 1");
    const std::size_t n = ds.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(mix_seed(seed, 0x73706c6974ull));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(perm[i - 1], perm[j]);
    }
    auto count = [n](double f) {
        return static_cast<std::size_t>(
            std::llround(f * static_cast<double>(n)));
    };
    std::size_t n_train = std::min(count(train_frac), n);
    std::size_t n_valid = std::min(count(valid_frac), n - n_train);

    SplitResult out;
    out.train = take_rows(ds, {perm.begin(), perm.begin() + n_train});
    out.valid = take_rows(
        ds, {perm.begin() + n_train, perm.begin() + n_train + n_valid});
    out.test = take_rows(ds, {perm.begin() + n_train + n_valid, perm.end()});
    return out;
}

}  // namespace mflag

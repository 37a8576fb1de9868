// Deterministic synthetic paired data with known latent structure.
//
// Every sample pair (x_v, x_t) is generated from one shared factor row h:
//   x_v = tanh(h * A) + noise_std * eps_v      (nonlinear view)
//   x_t =      h * C  + noise_std * eps_t      (linear view)
// with fixed random mixing matrices A (k x vision_dim) and C (k x text_dim).
// The binary label of sample i is 1 iff h(i, 0) > 0, so a linear probe on
// learned vision features measures whether that single factor survives
// pre-training.

#pragma once

#include <cstdint>
#include <vector>

#include "mflag/numerics.hpp"

namespace mflag {

struct SynthConfig {
    std::size_t n_samples = 4096;
    std::size_t latent_dim = 8;
    std::size_t vision_dim = 32;
    std::size_t text_dim = 32;
    double noise_std = 0.05;
    std::uint64_t seed = 1;
};

// A contiguous block of paired samples. `h` holds the ground-truth factors
// and exists for evaluation only; models never see it.
struct Batch {
    Matrix x_v;               // B x vision_dim
    Matrix x_t;               // B x text_dim
    Matrix h;                 // B x latent_dim
    std::vector<int> labels;  // B entries in {0, 1}

    std::size_t size() const { return labels.size(); }
};

struct SplitResult {
    Batch train;
    Batch valid;
    Batch test;
};

// Draws mixing matrices and samples in a fixed documented order
// (A, C, h, eps_v, eps_t) from a single stream salted off cfg.seed,
// so a given config is bit-reproducible. Mixing entries are scaled by
// 1/sqrt(latent_dim) to keep pre-activation variance near 1.
Batch generate(const SynthConfig& cfg);

// Same, but with caller-supplied mixing matrices (latent_dim x vision_dim and
// latent_dim x text_dim). Used by tests that pin the mixing exactly.
Batch generate(const SynthConfig& cfg, const Matrix& mix_v, const Matrix& mix_t);

// Gathers the given sample rows (in order) into a new batch.
Batch take_rows(const Batch& ds, const std::vector<std::size_t>& rows);

// Rows [begin, end) as a new batch.
Batch slice_rows(const Batch& ds, std::size_t begin, std::size_t end);

// Seeded Fisher-Yates shuffle followed by a contiguous three-way split.
// Sizes are round-half-up of fraction * n; the test split takes the rest.
// Throws BadFractions for negative fractions or train + valid > 1.
SplitResult split(const Batch& ds, double train_frac, double valid_frac,
                  std::uint64_t seed);

}  // namespace mflag

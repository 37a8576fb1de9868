// Experiment orchestration: config parsing, the pre-training loop, the loss
// and unfreezing ablations, linear-probe evaluation, gradient checking, and
// plot/CSV emission. Everything here is deterministic per seed; independent
// RNG streams are derived from the master seed with fixed salts.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mflag/diagnostics.hpp"
#include "mflag/losses.hpp"
#include "mflag/models.hpp"
#include "mflag/optim.hpp"
#include "mflag/synthdata.hpp"

namespace mflag {

enum class LossMode { both, align_only, orth_only };

const char* loss_mode_name(LossMode m);
LossMode loss_mode_from_name(const std::string& name);

struct RunConfig {
    ModelConfig model;
    SynthConfig synth;
    OptimConfig optimizer;
    std::size_t epochs = 500;
    std::size_t batch_size = 128;
    LossMode loss_mode = LossMode::both;
    std::size_t unfreeze_last_n = 0;
    std::size_t eval_every = 25;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
};

// Strict JSON: keys must exactly match RunConfig field names (nested objects
// `model`, `synth`, `optimizer`); any unknown key is a ConfigError. Every key
// is optional and falls back to the desk default.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Cross-field checks (synth view dims must match tower input dims, positive
// batch/eval cadence, unfreeze depth within the text tower).
void validate_config(const RunConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown train_loss;  // averaged over the epoch's mini-batches
    double eval_alignment = 0.0;
    double eval_effective_rank = 0.0;
    // Same statistic on the row-normalized latent (scale-free view).
    double eval_effective_rank_normalized = 0.0;
    double eval_uniformity = 0.0;
    double eval_explained_top3 = 0.0;
    std::size_t trainable_params = 0;
    std::size_t frozen_params = 0;
    double wall_ms = 0.0;  // reported on stderr; excluded from metrics.csv
};

struct PretrainResult {
    ModelParams params;          // state after the final epoch
    ModelParams initial_params;  // state before any update
    std::vector<EpochRecord> records;
    GeometryReport final_geometry;  // held-out batch, final params
    Matrix zv_final;                // held-out batch encoder outputs, B x N
};

// Mini-batch training per cfg.loss_mode. Geometry is evaluated on a fixed
// held-out tail of the dataset (min(256, n/2) samples) that never enters a
// training batch. Records are kept at epoch 0 (pre-training), epoch 1, every
// eval_every-th epoch, and the final epoch. Throws NonFiniteLoss (with the
// offending epoch in the message) if the total loss leaves the finite range.
// `progress`, when given, receives one log line per record.
PretrainResult pretrain(const RunConfig& cfg, std::ostream* progress = nullptr);

// pretrain + artifacts in cfg.output_dir: metrics.csv, checkpoint.mflg,
// zv_final.mfem, pca3.csv, curves.csv, plots.svg.
PretrainResult pretrain_to_dir(const RunConfig& cfg,
                               std::ostream* progress = nullptr);

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRecord>& records);

struct AblationRow {
    std::uint64_t seed = 0;
    std::size_t unfreeze_last_n = 0;
    LossMode loss_mode = LossMode::both;
    double probe_accuracy = 0.0;
    double effective_rank = 0.0;
    double uniformity = 0.0;
    std::size_t trainable_params = 0;
};

// Full grid {unfreeze 0..L} x {both, align_only, orth_only} per seed, where L
// is the text tower depth. Each seed reuses one initialization across its
// cells so comparisons isolate the loss and the freeze depth. Rows arrive in
// deterministic seed-major order, 3*(L+1) rows per seed.
std::vector<AblationRow> ablate(const RunConfig& base,
                                const std::vector<std::uint64_t>& seeds,
                                std::ostream* progress = nullptr);

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRow>& rows);

// Logistic-regression head on frozen encoder features z_v: deterministic
// half/half split of the dataset, head trained by full-batch gradient
// descent (1000 iterations, lr 0.1, zero init) on `fraction` of the training
// half, accuracy reported on the test half. Throws TooFewSamples when the
// fraction yields fewer than 10 training rows.
double probe(const ModelParams& params, const Batch& dataset, double fraction,
             std::uint64_t seed);

struct GradcheckLine {
    std::string name;
    double rel_err = 0.0;
};

struct GradcheckReport {
    std::vector<GradcheckLine> lines;  // one per checked tensor
    double max_loss_err = 0.0;
    double max_model_err = 0.0;
    bool pass = false;
};

// Central finite differences against the analytic gradients, first at the
// loss level (d z_a, d z_t, d z_v) and then through the full model for every
// trainable tensor. `corrupt` deliberately damages one analytic entry so the
// failure path can be exercised. Pass thresholds: 1e-5 at the loss level,
// 1e-4 through the model.
GradcheckReport gradcheck(std::uint64_t seed, bool corrupt);

struct VariantSeries {
    std::string variant;
    std::vector<EpochRecord> records;
    Matrix pca3;  // held-out batch coords, B x 3
};

// Writes pca3.csv (sample_id, pc1, pc2, pc3, variant), curves.csv, and a
// deterministic plots.svg into out_dir. A call with no records is a warning
// no-op, not an error. Re-running on identical inputs is byte-identical.
void emit_plots(const std::vector<VariantSeries>& series,
                const std::string& out_dir);

}  // namespace mflag

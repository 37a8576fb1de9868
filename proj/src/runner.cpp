#include "mflag/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "mflag/errors.hpp"
#include "mflag/io.hpp"

namespace mflag {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kInitSalt = 0x696e6974ull;
constexpr std::uint64_t kShuffleSalt = 0x73687566ull;
constexpr std::uint64_t kProbeSalt = 0x70726f6265ull;
constexpr std::uint64_t kGradSalt = 0x67726164ull;

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(
               clock::now().time_since_epoch())
        .count();
}

}  // namespace

const char* loss_mode_name(LossMode m) {
    switch (m) {
        case LossMode::both: return "both";
        case LossMode::align_only: return "align_only";
        case LossMode::orth_only: return "orth_only";
    }
    return "?";
}

LossMode loss_mode_from_name(const std::string& name) {
    if (name == "both") return LossMode::both;
    if (name == "align_only") return LossMode::align_only;
    if (name == "orth_only") return LossMode::orth_only;
    throw ConfigError("unknown loss_mode: " + name);
}

// ---------------------------------------------------------------- config --

namespace {

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known)
            throw ConfigError("unknown config key '" + item.key() + "' in " +
                              where);
    }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    require_keys(j,
                 {"model", "synth", "optimizer", "epochs", "batch_size",
                  "loss_mode", "unfreeze_last_n", "eval_every", "output_dir",
                  "seed"},
                 "config root");

    RunConfig cfg;
    try {
        if (j.contains("model")) {
            const json& m = j.at("model");
            require_keys(m,
                         {"vision_dims", "projector_out", "text_dims",
                          "hidden_activation"},
                         "model");
            read_key(m, "vision_dims", cfg.model.vision_dims);
            read_key(m, "projector_out", cfg.model.projector_out);
            read_key(m, "text_dims", cfg.model.text_dims);
            if (m.contains("hidden_activation"))
                cfg.model.hidden_activation = activation_from_name(
                    m.at("hidden_activation").get<std::string>());
        }
        if (j.contains("synth")) {
            const json& s = j.at("synth");
            require_keys(s,
                         {"n_samples", "latent_dim", "vision_dim", "text_dim",
                          "noise_std", "seed"},
                         "synth");
            read_key(s, "n_samples", cfg.synth.n_samples);
            read_key(s, "latent_dim", cfg.synth.latent_dim);
            read_key(s, "vision_dim", cfg.synth.vision_dim);
            read_key(s, "text_dim", cfg.synth.text_dim);
            read_key(s, "noise_std", cfg.synth.noise_std);
            read_key(s, "seed", cfg.synth.seed);
        }
        if (j.contains("optimizer")) {
            const json& o = j.at("optimizer");
            require_keys(
                o, {"mode", "base_lr", "momentum", "weight_decay", "trust_eps"},
                "optimizer");
            if (o.contains("mode"))
                cfg.optimizer.mode =
                    optim_mode_from_name(o.at("mode").get<std::string>());
            read_key(o, "base_lr", cfg.optimizer.base_lr);
            read_key(o, "momentum", cfg.optimizer.momentum);
            read_key(o, "weight_decay", cfg.optimizer.weight_decay);
            read_key(o, "trust_eps", cfg.optimizer.trust_eps);
        }
        read_key(j, "epochs", cfg.epochs);
        read_key(j, "batch_size", cfg.batch_size);
        if (j.contains("loss_mode"))
            cfg.loss_mode =
                loss_mode_from_name(j.at("loss_mode").get<std::string>());
        read_key(j, "unfreeze_last_n", cfg.unfreeze_last_n);
        read_key(j, "eval_every", cfg.eval_every);
        read_key(j, "output_dir", cfg.output_dir);
        read_key(j, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

void validate_config(const RunConfig& cfg) {
    if (cfg.model.vision_dims.size() < 2 || cfg.model.text_dims.size() < 2)
        throw ConfigError("model towers need at least input and output dims");
    if (cfg.model.vision_dims.front() != cfg.synth.vision_dim)
        throw ConfigError("synth.vision_dim must equal model.vision_dims[0]");
    if (cfg.model.text_dims.front() != cfg.synth.text_dim)
        throw ConfigError("synth.text_dim must equal model.text_dims[0]");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (cfg.eval_every == 0) throw ConfigError("eval_every must be positive");
    if (cfg.unfreeze_last_n > cfg.model.text_dims.size() - 1)
        throw ConfigError("unfreeze_last_n exceeds text tower depth");
    if (cfg.synth.n_samples < 8)
        throw ConfigError(
            "need at least 8 samples so the held-out batch supports geometry");
}

// -------------------------------------------------------------- training --

namespace {

LossBreakdown loss_value_for_mode(const ForwardResult& fr, LossMode mode) {
    LossBreakdown l;
    switch (mode) {
        case LossMode::both:
            l = total_loss(fr.z_a, fr.z_t, fr.z_v);
            break;
        case LossMode::align_only:
            l.align = align_loss(fr.z_a, fr.z_t);
            l.total = l.align;
            break;
        case LossMode::orth_only: {
            const OrthResult o = orth_loss(fr.z_v);
            l.orth_diag = o.diag;
            l.orth_offdiag = o.offdiag;
            l.total = o.diag + o.offdiag;
            break;
        }
    }
    return l;
}

// Chunk [0, n) into batches of batch_size. A trailing chunk of a single row
// is folded into its predecessor: the orthogonality term normalizes columns
// across the batch, which needs at least two rows.
std::vector<std::pair<std::size_t, std::size_t>> batch_bounds(
    std::size_t n, std::size_t batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> bounds;
    for (std::size_t start = 0; start < n; start += batch_size)
        bounds.emplace_back(start, std::min(n, start + batch_size));
    if (bounds.size() >= 2 && bounds.back().second - bounds.back().first == 1) {
        bounds[bounds.size() - 2].second = bounds.back().second;
        bounds.pop_back();
    }
    return bounds;
}

// Average loss over a dataset without touching parameters.
LossBreakdown dataset_loss(const ModelParams& params, const Batch& data,
                           std::size_t batch_size, LossMode mode) {
    LossBreakdown acc;
    double weight = 0.0;
    for (const auto& [start, end] : batch_bounds(data.size(), batch_size)) {
        const Batch mb = slice_rows(data, start, end);
        const ForwardResult fr = forward(params, mb.x_v, mb.x_t);
        const LossBreakdown l = loss_value_for_mode(fr, mode);
        const double w = static_cast<double>(end - start);
        acc.align += l.align * w;
        acc.orth_diag += l.orth_diag * w;
        acc.orth_offdiag += l.orth_offdiag * w;
        acc.total += l.total * w;
        weight += w;
    }
    acc.align /= weight;
    acc.orth_diag /= weight;
    acc.orth_offdiag /= weight;
    acc.total /= weight;
    return acc;
}

void log_record(std::ostream* progress, const EpochRecord& r,
                std::size_t epochs) {
    if (!progress) return;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "[pretrain] epoch %zu/%zu  train_total=%.6f  "
                  "eval_align=%.4f  erank=%.3f  unif=%.3f  (%.1f ms)",
                  r.epoch, epochs, r.train_loss.total, r.eval_alignment,
                  r.eval_effective_rank, r.eval_uniformity, r.wall_ms);
    *progress << buf << '\n' << std::flush;
}

}  // namespace

PretrainResult pretrain(const RunConfig& cfg, std::ostream* progress) {
    validate_config(cfg);

    const Batch ds = generate(cfg.synth);
    const std::size_t n = ds.size();
    const std::size_t n_eval = std::min<std::size_t>(256, n / 2);
    const std::size_t n_train = n - n_eval;
    const Batch train_set = slice_rows(ds, 0, n_train);
    const Batch eval_set = slice_rows(ds, n_train, n);

    Rng init_rng(mix_seed(cfg.seed, kInitSalt));
    ModelParams params = init_model(cfg.model, init_rng);
    apply_freeze_policy(params, FreezePolicy{cfg.unfreeze_last_n});
    const ParamCounts counts = count_params(params);

    PretrainResult out;
    out.initial_params = params;

    OptimState opt(cfg.optimizer);
    const bool text_live =
        cfg.unfreeze_last_n > 0 && cfg.loss_mode != LossMode::orth_only;

    double last_mark = now_ms();
    auto record_eval = [&](std::size_t epoch, const LossBreakdown& train_loss) {
        ForwardResult fr = forward(params, eval_set.x_v, eval_set.x_t);
        GeometryReport g = geometry_report(fr.z_v, fr.z_a, fr.z_t);
        EpochRecord r;
        r.epoch = epoch;
        r.train_loss = train_loss;
        r.eval_alignment = g.alignment_metric.value();
        r.eval_effective_rank = g.effective_rank;
        r.eval_effective_rank_normalized =
            effective_rank(row_normalize(fr.z_v));
        r.eval_uniformity = g.uniformity;
        r.eval_explained_top3 = g.explained_variance_top3;
        r.trainable_params = counts.trainable;
        r.frozen_params = counts.frozen;
        const double t = now_ms();
        r.wall_ms = t - last_mark;
        last_mark = t;
        log_record(progress, r, cfg.epochs);
        out.records.push_back(r);
        out.final_geometry = std::move(g);
        out.zv_final = std::move(fr.z_v);
    };

    record_eval(0, dataset_loss(params, train_set, cfg.batch_size,
                                cfg.loss_mode));

    std::vector<std::size_t> perm(n_train);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(cfg.seed, kShuffleSalt));

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(perm[i - 1], perm[shuffle_rng.next_below(i)]);

        LossBreakdown acc;
        double weight = 0.0;
        for (const auto& [start, end] : batch_bounds(n_train, cfg.batch_size)) {
            const std::vector<std::size_t> rows(perm.begin() + start,
                                                perm.begin() + end);
            const Batch mb = take_rows(train_set, rows);
            const ForwardResult fr = forward(params, mb.x_v, mb.x_t);

            LossBreakdown l;
            LossGrads lg;
            Matrix d_zt;
            switch (cfg.loss_mode) {
                case LossMode::both: {
                    auto [bd, g] = total_loss_grad(fr.z_a, fr.z_t, fr.z_v);
                    l = bd;
                    lg = std::move(g);
                    break;
                }
                case LossMode::align_only: {
                    auto [v, d_za] = align_loss_grad(fr.z_a, fr.z_t);
                    l.align = v;
                    l.total = v;
                    lg.d_za = std::move(d_za);
                    break;
                }
                case LossMode::orth_only: {
                    auto [o, d_zv] = orth_loss_grad(fr.z_v);
                    l.orth_diag = o.diag;
                    l.orth_offdiag = o.offdiag;
                    l.total = o.diag + o.offdiag;
                    lg.d_zv = std::move(d_zv);
                    break;
                }
            }
            if (!std::isfinite(l.total))
                throw NonFiniteLoss("total loss is not finite at epoch " +
                                    std::to_string(epoch));
            if (text_live) d_zt = align_loss_grad_text(fr.z_a, fr.z_t);

            const ParamGrads grads =
                backward(params, fr.cache, lg, text_live ? &d_zt : nullptr);
            optim_step(params, grads, opt);

            const double w = static_cast<double>(end - start);
            acc.align += l.align * w;
            acc.orth_diag += l.orth_diag * w;
            acc.orth_offdiag += l.orth_offdiag * w;
            acc.total += l.total * w;
            weight += w;
        }
        acc.align /= weight;
        acc.orth_diag /= weight;
        acc.orth_offdiag /= weight;
        acc.total /= weight;

        if (epoch == 1 || epoch % cfg.eval_every == 0 || epoch == cfg.epochs)
            record_eval(epoch, acc);
    }

    out.params = std::move(params);
    return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRecord>& records) {
    std::string buf =
        "epoch,train_align,train_orth_diag,train_orth_offdiag,train_total,"
        "eval_alignment,eval_effective_rank,eval_effective_rank_normalized,"
        "eval_uniformity,eval_explained_top3,trainable_params,frozen_params\n";
    for (const EpochRecord& r : records) {
        buf += std::to_string(r.epoch);
        buf += ',';
        buf += format_g12(r.train_loss.align);
        buf += ',';
        buf += format_g12(r.train_loss.orth_diag);
        buf += ',';
        buf += format_g12(r.train_loss.orth_offdiag);
        buf += ',';
        buf += format_g12(r.train_loss.total);
        buf += ',';
        buf += format_g12(r.eval_alignment);
        buf += ',';
        buf += format_g12(r.eval_effective_rank);
        buf += ',';
        buf += format_g12(r.eval_effective_rank_normalized);
        buf += ',';
        buf += format_g12(r.eval_uniformity);
        buf += ',';
        buf += format_g12(r.eval_explained_top3);
        buf += ',';
        buf += std::to_string(r.trainable_params);
        buf += ',';
        buf += std::to_string(r.frozen_params);
        buf += '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << buf;
    out.flush();
    if (!out.good()) throw IoError("write failed on " + path);
}

PretrainResult pretrain_to_dir(const RunConfig& cfg, std::ostream* progress) {
    PretrainResult res = pretrain(cfg, progress);
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    write_metrics_csv((dir / "metrics.csv").string(), res.records);
    save_checkpoint((dir / "checkpoint.mflg").string(), res.params);
    write_embedding_mfem((dir / "zv_final.mfem").string(), res.zv_final);
    emit_plots({VariantSeries{loss_mode_name(cfg.loss_mode), res.records,
                              res.final_geometry.pca3}},
               cfg.output_dir);
    return res;
}

// -------------------------------------------------------------- ablation --

std::vector<AblationRow> ablate(const RunConfig& base,
                                const std::vector<std::uint64_t>& seeds,
                                std::ostream* progress) {
    validate_config(base);
    const std::size_t depth = base.model.text_dims.size() - 1;
    const LossMode modes[] = {LossMode::both, LossMode::align_only,
                              LossMode::orth_only};

    std::vector<AblationRow> rows;
    rows.reserve(seeds.size() * 3 * (depth + 1));
    for (std::uint64_t seed : seeds) {
        RunConfig per_seed = base;
        per_seed.seed = seed;
        per_seed.synth.seed = seed;
        const Batch probe_ds = generate(per_seed.synth);
        for (std::size_t unfreeze = 0; unfreeze <= depth; ++unfreeze) {
            for (LossMode mode : modes) {
                RunConfig cell = per_seed;
                cell.unfreeze_last_n = unfreeze;
                cell.loss_mode = mode;
                if (progress)
                    *progress << "[ablate] seed " << seed << "  unfreeze "
                              << unfreeze << "  mode " << loss_mode_name(mode)
                              << '\n'
                              << std::flush;
                const PretrainResult r = pretrain(cell);
                AblationRow row;
                row.seed = seed;
                row.unfreeze_last_n = unfreeze;
                row.loss_mode = mode;
                row.probe_accuracy = probe(r.params, probe_ds, 1.0, seed);
                row.effective_rank = r.final_geometry.effective_rank;
                row.uniformity = r.final_geometry.uniformity;
                row.trainable_params = r.records.back().trainable_params;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRow>& rows) {
    std::string buf =
        "seed,unfreeze_last_n,loss_mode,probe_accuracy,effective_rank,"
        "uniformity,trainable_params\n";
    for (const AblationRow& r : rows) {
        buf += std::to_string(r.seed);
        buf += ',';
        buf += std::to_string(r.unfreeze_last_n);
        buf += ',';
        buf += loss_mode_name(r.loss_mode);
        buf += ',';
        buf += format_g12(r.probe_accuracy);
        buf += ',';
        buf += format_g12(r.effective_rank);
        buf += ',';
        buf += format_g12(r.uniformity);
        buf += ',';
        buf += std::to_string(r.trainable_params);
        buf += '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << buf;
    out.flush();
    if (!out.good()) throw IoError("write failed on " + path);
}

// ----------------------------------------------------------------- probe --

double probe(const ModelParams& params, const Batch& dataset, double fraction,
             std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("probe fraction must lie in (0, 1]");

    const SplitResult sp = split(dataset, 0.5, 0.0, mix_seed(seed, kProbeSalt));
    const std::size_t pool = sp.train.size();
    const std::size_t n_train = std::min<std::size_t>(
        pool, static_cast<std::size_t>(
                  std::llround(fraction * static_cast<double>(pool))));
    if (n_train < 10)
        throw TooFewSamples("probe: fraction yields fewer than 10 train rows");

    const Batch train = slice_rows(sp.train, 0, n_train);
    const Matrix z_train = forward(params, train.x_v, train.x_t).z_v;
    const Matrix z_test = forward(params, sp.test.x_v, sp.test.x_t).z_v;

    const std::size_t dim = z_train.cols;
    std::vector<double> w(dim + 1, 0.0);  // trailing entry is the bias
    const double lr = 0.1;
    const double inv_b = 1.0 / static_cast<double>(n_train);
    std::vector<double> grad(dim + 1);
    for (int iter = 0; iter < 1000; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t b = 0; b < n_train; ++b) {
            double s = w[dim];
            for (std::size_t j = 0; j < dim; ++j) s += w[j] * z_train(b, j);
            const double p = 1.0 / (1.0 + std::exp(-s));
            const double g = (p - static_cast<double>(train.labels[b])) * inv_b;
            for (std::size_t j = 0; j < dim; ++j) grad[j] += g * z_train(b, j);
            grad[dim] += g;
        }
        for (std::size_t j = 0; j <= dim; ++j) w[j] -= lr * grad[j];
    }

    std::size_t correct = 0;
    for (std::size_t b = 0; b < z_test.rows; ++b) {
        double s = w[dim];
        for (std::size_t j = 0; j < dim; ++j) s += w[j] * z_test(b, j);
        const int pred = s > 0.0 ? 1 : 0;
        if (pred == sp.test.labels[b]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(z_test.rows);
}

// ------------------------------------------------------------- gradcheck --

namespace {

double tensor_rel_err(const Matrix& analytic, const Matrix& fd) {
    const Matrix diff = sub(analytic, fd);
    const double denom =
        std::max({max_abs(analytic), max_abs(fd), 1e-12});
    return max_abs(diff) / denom;
}

}  // namespace

GradcheckReport gradcheck(std::uint64_t seed, bool corrupt) {
    GradcheckReport report;
    Rng rng(mix_seed(seed, kGradSalt));

    // Loss level: d z_a and d z_v from total_loss_grad, d z_t from the
    // text-side alignment gradient.
    Matrix z_a = rng_normal(rng, 6, 5);
    Matrix z_t = rng_normal(rng, 6, 5);
    Matrix z_v = rng_normal(rng, 6, 7);

    auto [breakdown, lg] = total_loss_grad(z_a, z_t, z_v);
    (void)breakdown;
    Matrix d_zt = align_loss_grad_text(z_a, z_t);
    if (corrupt) lg.d_zv(0, 0) += 1e-2;

    const double fd_eps = 1e-6;
    auto fd_matrix = [fd_eps](Matrix& target, auto eval) {
        Matrix fd(target.rows, target.cols);
        for (std::size_t i = 0; i < target.data.size(); ++i) {
            const double keep = target.data[i];
            target.data[i] = keep + fd_eps;
            const double up = eval();
            target.data[i] = keep - fd_eps;
            const double dn = eval();
            target.data[i] = keep;
            fd.data[i] = (up - dn) / (2.0 * fd_eps);
        }
        return fd;
    };

    auto total_eval = [&] { return total_loss(z_a, z_t, z_v).total; };
    auto align_eval = [&] { return align_loss(z_a, z_t); };

    report.lines.push_back(
        {"loss.d_za", tensor_rel_err(lg.d_za, fd_matrix(z_a, total_eval))});
    report.lines.push_back(
        {"loss.d_zt", tensor_rel_err(d_zt, fd_matrix(z_t, align_eval))});
    report.lines.push_back(
        {"loss.d_zv", tensor_rel_err(lg.d_zv, fd_matrix(z_v, total_eval))});
    for (const auto& line : report.lines)
        report.max_loss_err = std::max(report.max_loss_err, line.rel_err);

    // Model level: every trainable tensor of a small two-tower model with
    // the full text tower unfrozen, so the text path is exercised too.
    ModelConfig mc;
    mc.vision_dims = {6, 12, 7};
    mc.projector_out = 5;
    mc.text_dims = {9, 8, 5};
    Rng init_rng(mix_seed(seed, kGradSalt + 1));
    ModelParams params = init_model(mc, init_rng);
    apply_freeze_policy(params, FreezePolicy{mc.text_dims.size() - 1});

    const Matrix x_v = rng_normal(rng, 8, 6);
    const Matrix x_t = rng_normal(rng, 8, 9);

    const ForwardResult fr = forward(params, x_v, x_t);
    auto [bd2, lg2] = total_loss_grad(fr.z_a, fr.z_t, fr.z_v);
    (void)bd2;
    const Matrix d_zt2 = align_loss_grad_text(fr.z_a, fr.z_t);
    const ParamGrads grads = backward(params, fr.cache, lg2, &d_zt2);

    const auto refs = param_refs(params);
    const double model_eps = 1e-5;
    ModelParams scratch = params;
    auto scratch_refs = param_refs(scratch);
    auto model_eval = [&] {
        const ForwardResult f = forward(scratch, x_v, x_t);
        return total_loss(f.z_a, f.z_t, f.z_v).total;
    };
    for (std::size_t t = 0; t < refs.size(); ++t) {
        if (!refs[t].trainable) continue;
        Matrix& target = *scratch_refs[t].value;
        Matrix fd(target.rows, target.cols);
        for (std::size_t i = 0; i < target.data.size(); ++i) {
            const double keep = target.data[i];
            target.data[i] = keep + model_eps;
            const double up = model_eval();
            target.data[i] = keep - model_eps;
            const double dn = model_eval();
            target.data[i] = keep;
            fd.data[i] = (up - dn) / (2.0 * model_eps);
        }
        const double err = tensor_rel_err(grads.tensors[t], fd);
        report.lines.push_back({"model." + refs[t].name, err});
        report.max_model_err = std::max(report.max_model_err, err);
    }

    report.pass = report.max_loss_err <= 1e-4 && report.max_model_err <= 1e-4;
    return report;
}

// ----------------------------------------------------------------- plots --

namespace {

std::string fmt2(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt4g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const char* kPalette[] = {"#1b6ca8", "#d1495b", "#2e933c",
                          "#8a4fff", "#e08e29", "#444444"};

struct AxisMap {
    double lo = 0.0, hi = 1.0;
    double px0 = 0.0, px1 = 1.0;

    void widen(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(hi > lo)) {
            lo -= 1.0;
            hi += 1.0;
        }
    }
    double operator()(double v) const {
        return px0 + (v - lo) / (hi - lo) * (px1 - px0);
    }
};

void svg_panel_frame(std::string& svg, double x, double y, double w, double h,
                     const std::string& title) {
    svg += "<rect x='" + fmt2(x) + "' y='" + fmt2(y) + "' width='" + fmt2(w) +
           "' height='" + fmt2(h) +
           "' fill='none' stroke='#888' stroke-width='1'/>\n";
    svg += "<text x='" + fmt2(x + w / 2) + "' y='" + fmt2(y - 8) +
           "' text-anchor='middle' font-family='sans-serif' font-size='13'>" +
           title + "</text>\n";
}

}  // namespace

void emit_plots(const std::vector<VariantSeries>& series,
                const std::string& out_dir) {
    bool any_records = false;
    for (const VariantSeries& s : series)
        if (!s.records.empty()) any_records = true;
    if (!any_records) {
        std::cerr << "emit_plots: no records to plot; skipping\n";
        return;
    }

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    // pca3.csv: one row per held-out sample per variant.
    {
        std::string buf = "sample_id,pc1,pc2,pc3,variant\n";
        for (const VariantSeries& s : series) {
            for (std::size_t i = 0; i < s.pca3.rows; ++i) {
                buf += std::to_string(i);
                buf += ',';
                buf += format_g12(s.pca3(i, 0));
                buf += ',';
                buf += format_g12(s.pca3(i, 1));
                buf += ',';
                buf += format_g12(s.pca3(i, 2));
                buf += ',';
                buf += s.variant;
                buf += '\n';
            }
        }
        std::ofstream out(dir / "pca3.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open pca3.csv for writing");
        out << buf;
        if (!out.good()) throw IoError("write failed on pca3.csv");
    }

    // curves.csv: per-variant metric trajectories.
    {
        std::string buf =
            "variant,epoch,train_align,train_orth_diag,train_orth_offdiag,"
            "train_total,eval_alignment,eval_effective_rank,eval_uniformity\n";
        for (const VariantSeries& s : series) {
            for (const EpochRecord& r : s.records) {
                buf += s.variant;
                buf += ',';
                buf += std::to_string(r.epoch);
                buf += ',';
                buf += format_g12(r.train_loss.align);
                buf += ',';
                buf += format_g12(r.train_loss.orth_diag);
                buf += ',';
                buf += format_g12(r.train_loss.orth_offdiag);
                buf += ',';
                buf += format_g12(r.train_loss.total);
                buf += ',';
                buf += format_g12(r.eval_alignment);
                buf += ',';
                buf += format_g12(r.eval_effective_rank);
                buf += ',';
                buf += format_g12(r.eval_uniformity);
                buf += '\n';
            }
        }
        std::ofstream out(dir / "curves.csv",
                          std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open curves.csv for writing");
        out << buf;
        if (!out.good()) throw IoError("write failed on curves.csv");
    }

    // plots.svg: three panels — total loss, effective rank, pca scatter.
    {
        const double W = 1020, H = 360;
        const double panel_w = 300, panel_h = 280, top = 40;
        const double xs[3] = {30, 370, 710};

        std::string svg =
            "<svg xmlns='http://www.w3.org/2000/svg' width='" + fmt2(W) +
            "' height='" + fmt2(H) + "' viewBox='0 0 " + fmt2(W) + " " +
            fmt2(H) + "'>\n<rect width='100%' height='100%' fill='white'/>\n";

        AxisMap ex, ly, ry;  // epoch, loss, rank
        bool first = true;
        for (const VariantSeries& s : series) {
            for (const EpochRecord& r : s.records) {
                if (first) {
                    ex.lo = ex.hi = static_cast<double>(r.epoch);
                    ly.lo = ly.hi = r.train_loss.total;
                    ry.lo = ry.hi = r.eval_effective_rank;
                    first = false;
                } else {
                    ex.widen(static_cast<double>(r.epoch));
                    ly.widen(r.train_loss.total);
                    ry.widen(r.eval_effective_rank);
                }
            }
        }
        ex.finish();
        ly.finish();
        ry.finish();

        auto draw_curve_panel = [&](double x0, AxisMap& ymap,
                                    const std::string& title, auto metric) {
            svg_panel_frame(svg, x0, top, panel_w, panel_h, title);
            AxisMap px = ex;
            px.px0 = x0 + 8;
            px.px1 = x0 + panel_w - 8;
            AxisMap py = ymap;
            py.px0 = top + panel_h - 10;
            py.px1 = top + 10;
            std::size_t ci = 0;
            for (const VariantSeries& s : series) {
                if (s.records.empty()) { ++ci; continue; }
                std::string pts;
                for (const EpochRecord& r : s.records) {
                    pts += fmt2(px(static_cast<double>(r.epoch)));
                    pts += ',';
                    pts += fmt2(py(metric(r)));
                    pts += ' ';
                }
                svg += "<polyline fill='none' stroke='" +
                       std::string(kPalette[ci % 6]) +
                       "' stroke-width='1.5' points='" + pts + "'/>\n";
                ++ci;
            }
            svg += "<text x='" + fmt2(x0) + "' y='" +
                   fmt2(top + panel_h + 16) +
                   "' font-family='sans-serif' font-size='11'>epoch " +
                   fmt4g(ex.lo) + ".." + fmt4g(ex.hi) + ", y " +
                   fmt4g(ymap.lo) + ".." + fmt4g(ymap.hi) + "</text>\n";
        };

        draw_curve_panel(xs[0], ly, "train total loss",
                         [](const EpochRecord& r) { return r.train_loss.total; });
        draw_curve_panel(xs[1], ry, "effective rank (held-out)",
                         [](const EpochRecord& r) {
                             return r.eval_effective_rank;
                         });

        svg_panel_frame(svg, xs[2], top, panel_w, panel_h,
                        "held-out pca (pc1 vs pc2)");
        AxisMap sx, sy;
        bool sfirst = true;
        for (const VariantSeries& s : series) {
            for (std::size_t i = 0; i < s.pca3.rows; ++i) {
                if (sfirst) {
                    sx.lo = sx.hi = s.pca3(i, 0);
                    sy.lo = sy.hi = s.pca3(i, 1);
                    sfirst = false;
                } else {
                    sx.widen(s.pca3(i, 0));
                    sy.widen(s.pca3(i, 1));
                }
            }
        }
        sx.finish();
        sy.finish();
        sx.px0 = xs[2] + 8;
        sx.px1 = xs[2] + panel_w - 8;
        sy.px0 = top + panel_h - 10;
        sy.px1 = top + 10;
        {
            std::size_t ci = 0;
            for (const VariantSeries& s : series) {
                for (std::size_t i = 0; i < s.pca3.rows; ++i) {
                    svg += "<circle cx='" + fmt2(sx(s.pca3(i, 0))) + "' cy='" +
                           fmt2(sy(s.pca3(i, 1))) + "' r='1.6' fill='" +
                           kPalette[ci % 6] + "' fill-opacity='0.6'/>\n";
                }
                ++ci;
            }
        }

        // Legend.
        {
            std::size_t ci = 0;
            double lx = 30;
            for (const VariantSeries& s : series) {
                svg += "<rect x='" + fmt2(lx) + "' y='" + fmt2(H - 22) +
                       "' width='12' height='12' fill='" + kPalette[ci % 6] +
                       "'/>\n<text x='" + fmt2(lx + 16) + "' y='" +
                       fmt2(H - 11) +
                       "' font-family='sans-serif' font-size='12'>" +
                       s.variant + "</text>\n";
                lx += 24 + 8.0 * static_cast<double>(s.variant.size());
                ++ci;
            }
        }
        svg += "</svg>\n";

        std::ofstream out(dir / "plots.svg", std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open plots.svg for writing");
        out << svg;
        if (!out.good()) throw IoError("write failed on plots.svg");
    }
}

}  // namespace mflag

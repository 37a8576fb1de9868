// Command-line front end. Subcommands:
//   pretrain   train one configuration and write artifacts
//   ablate     loss-mode x unfreeze-depth grid over one or more seeds
//   probe      logistic-regression probe on a saved checkpoint
//   gradcheck  finite-difference audit of the analytic gradients
//   diagnose   geometry report for an embedding file (.mfem or .csv)
//   plots      re-render plot files from saved metrics/embeddings

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mflag/errors.hpp"
#include "mflag/io.hpp"
#include "mflag/runner.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path,
                    "JSON run configuration (defaults apply when omitted)");
    sub->add_option("--seed", flags.seed,
                    "master seed; overrides both the run seed and the "
                    "data seed from the config");
    sub->add_option("--out", flags.out_dir, "output directory");
}

mflag::RunConfig make_config(const CommonFlags& flags) {
    mflag::RunConfig cfg = flags.config_path.empty()
                               ? mflag::RunConfig{}
                               : mflag::load_run_config(flags.config_path);
    if (flags.seed) {
        cfg.seed = *flags.seed;
        cfg.synth.seed = *flags.seed;
    }
    if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
    return cfg;
}

void print_geometry(const mflag::GeometryReport& g) {
    std::cout << "effective_rank " << mflag::format_g12(g.effective_rank)
              << "\nexplained_variance_top3 "
              << mflag::format_g12(g.explained_variance_top3) << "\nuniformity "
              << mflag::format_g12(g.uniformity) << '\n';
    if (g.alignment_metric)
        std::cout << "alignment " << mflag::format_g12(*g.alignment_metric)
                  << '\n';
    std::cout << "singular_values";
    for (double s : g.singular_values) std::cout << ' ' << mflag::format_g12(s);
    std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Desk-scale two-tower pre-training laboratory: alignment to a frozen "
        "text tower plus latent orthogonality, with collapse diagnostics"};
    app.require_subcommand(1);
    int exit_code = 0;

    // pretrain ------------------------------------------------------------
    auto* pre = app.add_subcommand("pretrain", "train one configuration");
    CommonFlags pre_flags;
    add_common(pre, pre_flags);
    pre->callback([&] {
        const mflag::RunConfig cfg = make_config(pre_flags);
        const mflag::PretrainResult res = mflag::pretrain_to_dir(cfg, &std::cerr);
        const mflag::EpochRecord& last = res.records.back();
        std::cout << "pretrain done: epochs " << cfg.epochs << ", final total "
                  << mflag::format_g12(last.train_loss.total)
                  << ", held-out effective rank "
                  << mflag::format_g12(last.eval_effective_rank)
                  << "\nartifacts in " << cfg.output_dir << '\n';
    });

    // ablate ----------------------------------------------------------------
    auto* abl = app.add_subcommand(
        "ablate", "loss-mode x unfreeze-depth grid over seeds");
    CommonFlags abl_flags;
    add_common(abl, abl_flags);
    std::vector<std::uint64_t> abl_seeds{1, 2, 3};
    abl->add_option("--seeds", abl_seeds,
                    "comma-separated seed list (default 1,2,3)")
        ->delimiter(',');
    abl->callback([&] {
        mflag::RunConfig cfg = make_config(abl_flags);
        std::vector<std::uint64_t> seeds = abl_seeds;
        if (abl_flags.seed && !abl->count("--seeds")) seeds = {*abl_flags.seed};
        const auto rows = mflag::ablate(cfg, seeds, &std::cerr);
        std::filesystem::create_directories(cfg.output_dir);
        const std::string path = cfg.output_dir + "/ablation.csv";
        mflag::write_ablation_csv(path, rows);
        std::cout << "ablate done: " << rows.size() << " rows in " << path
                  << '\n';
    });

    // probe -----------------------------------------------------------------
    auto* prb = app.add_subcommand(
        "probe", "linear probe on a checkpoint's frozen encoder features");
    CommonFlags prb_flags;
    add_common(prb, prb_flags);
    std::string prb_checkpoint;
    double prb_fraction = 1.0;
    prb->add_option("--checkpoint", prb_checkpoint, "checkpoint file (.mflg)")
        ->required();
    prb->add_option("--fraction", prb_fraction,
                    "fraction of the training half used to fit the probe");
    prb->callback([&] {
        const mflag::RunConfig cfg = make_config(prb_flags);
        const mflag::ModelParams params =
            mflag::load_checkpoint(prb_checkpoint);
        const mflag::Batch ds = mflag::generate(cfg.synth);
        const double acc = mflag::probe(params, ds, prb_fraction, cfg.seed);
        std::cout << "probe accuracy " << mflag::format_g12(acc) << '\n';
    });

    // gradcheck ---------------------------------------------------------------
    auto* grd = app.add_subcommand(
        "gradcheck", "finite-difference audit of analytic gradients");
    CommonFlags grd_flags;
    add_common(grd, grd_flags);
    bool grd_corrupt = false;
    grd->add_flag("--corrupt", grd_corrupt,
                  "deliberately damage one analytic entry (failure-path test)");
    grd->callback([&] {
        const std::uint64_t seed = grd_flags.seed.value_or(1);
        const mflag::GradcheckReport report = mflag::gradcheck(seed, grd_corrupt);
        for (const auto& line : report.lines)
            std::cout << line.name << " rel_err "
                      << mflag::format_g12(line.rel_err) << '\n';
        std::cout << "max loss-level rel_err "
                  << mflag::format_g12(report.max_loss_err)
                  << "\nmax model-level rel_err "
                  << mflag::format_g12(report.max_model_err) << '\n'
                  << (report.pass ? "gradcheck PASS" : "gradcheck FAIL")
                  << '\n';
        if (!report.pass) exit_code = 1;
    });

    // diagnose ----------------------------------------------------------------
    auto* dia = app.add_subcommand(
        "diagnose", "geometry report for an embedding file");
    std::string dia_input;
    dia->add_option("--input", dia_input, "embedding file (.mfem or .csv)")
        ->required();
    dia->callback([&] {
        const mflag::Matrix z = mflag::looks_like_mfem(dia_input)
                                    ? mflag::read_embedding_mfem(dia_input)
                                    : mflag::read_matrix_csv(dia_input);
        std::cout << "rows " << z.rows << " cols " << z.cols << '\n';
        print_geometry(mflag::geometry_report(z));
    });

    // plots -------------------------------------------------------------------
    auto* plt = app.add_subcommand(
        "plots", "re-render pca3.csv/curves.csv/plots.svg from saved outputs");
    std::string plt_metrics, plt_embedding, plt_variant = "run";
    std::string plt_out = "out";
    plt->add_option("--metrics", plt_metrics, "metrics.csv from pretrain")
        ->required();
    plt->add_option("--embedding", plt_embedding,
                    "embedding file for the scatter (.mfem or .csv)");
    plt->add_option("--variant", plt_variant, "variant label for the legend");
    plt->add_option("--out", plt_out, "output directory");
    plt->callback([&] {
        const mflag::Matrix m = mflag::read_matrix_csv(plt_metrics);
        if (m.cols != 12)
            throw mflag::IoError(plt_metrics +
                                 ": expected the 12-column metrics layout");
        std::vector<mflag::EpochRecord> records(m.rows);
        for (std::size_t i = 0; i < m.rows; ++i) {
            mflag::EpochRecord& r = records[i];
            r.epoch = static_cast<std::size_t>(m(i, 0));
            r.train_loss.align = m(i, 1);
            r.train_loss.orth_diag = m(i, 2);
            r.train_loss.orth_offdiag = m(i, 3);
            r.train_loss.total = m(i, 4);
            r.eval_alignment = m(i, 5);
            r.eval_effective_rank = m(i, 6);
            r.eval_effective_rank_normalized = m(i, 7);
            r.eval_uniformity = m(i, 8);
            r.eval_explained_top3 = m(i, 9);
            r.trainable_params = static_cast<std::size_t>(m(i, 10));
            r.frozen_params = static_cast<std::size_t>(m(i, 11));
        }
        mflag::Matrix coords;
        if (!plt_embedding.empty()) {
            const mflag::Matrix z = mflag::looks_like_mfem(plt_embedding)
                                        ? mflag::read_embedding_mfem(plt_embedding)
                                        : mflag::read_matrix_csv(plt_embedding);
            coords = mflag::pca3(z).coords;
        }
        mflag::emit_plots({mflag::VariantSeries{plt_variant, records, coords}},
                          plt_out);
        std::cout << "plots written to " << plt_out << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return exit_code;
}

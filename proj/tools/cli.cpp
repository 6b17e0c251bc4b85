#include "cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ttt/config.hpp"
#include "ttt/dataset.hpp"
#include "ttt/experiment.hpp"
#include "ttt/ksp.hpp"
#include "ttt/ops.hpp"
#include "ttt/subspace.hpp"
#include "ttt/training.hpp"

namespace ttt::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    ksp::write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_text(path, text);
    }
}

std::vector<KSpaceSample> require_dataset(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) {
        throw IoError("no dataset at '" + dir.string() + "' (missing manifest.json; run gen-data first)");
    }
    return load_dataset(dir);
}

// Settings shared by ttt-eval and export-png-like.
struct EvalOptions {
    std::string model;
    std::string test_dir;
    std::string config;
    std::string dist = "Q";
    std::string ttt = "off";
    std::string final_input;
    double acceleration = 4.0;
    double center_fraction = 0.08;
    std::uint64_t mask_seed = 0;
    std::optional<double> lr;
    std::optional<int> max_iters;
    std::string traces;

    void add_to(CLI::App* app) {
        app->add_option("--model", model, "Checkpoint (.ksp) written by train")->required()->check(CLI::ExistingFile);
        app->add_option("--test-dir", test_dir, "Dataset directory with manifest.json")->required();
        app->add_option("--ttt", ttt, "Test-time training")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
        app->add_option("--config", config, "Experiment config: acquisition, mask seed and TTT settings");
        app->add_option("--dist", dist, "Acquisition of this distribution (with --config)")
            ->check(CLI::IsMember({"P", "Q"}))
            ->capture_default_str();
        app->add_option("--acceleration", acceleration, "Without --config")->capture_default_str();
        app->add_option("--center-fraction", center_fraction, "Without --config")->capture_default_str();
        app->add_option("--mask-seed", mask_seed, "Without --config")->capture_default_str();
        app->add_option("--lr", lr, "TTT learning rate override");
        app->add_option("--max-iters", max_iters, "TTT iteration cap override");
        app->add_option("--ttt-final-input", final_input, "Input of the adapted network")
            ->check(CLI::IsMember({"full", "train"}));
        app->add_option("--traces", traces, "Directory for per-sample TTT trace CSVs");
    }

    struct Resolved {
        ReconModel model;
        std::vector<Measurement<float>> measurements;
        TTTConfig ttt;
    };

    Resolved resolve() const {
        Resolved r;
        r.model = load_checkpoint(model);
        Acquisition acq{acceleration, center_fraction};
        std::uint64_t seed = mask_seed;
        if (!config.empty()) {
            const auto cfg = load_experiment_config(config);
            acq = cfg.acquisition(parse_dist(dist));
            seed = cfg.test_mask_seed();
            r.ttt = cfg.ttt;
        }
        if (lr) r.ttt.lr = *lr;
        if (max_iters) r.ttt.max_iters = *max_iters;
        if (!final_input.empty()) r.ttt.final_input = parse_final_input(final_input);
        r.ttt.validate();
        r.measurements = make_measurements(require_dataset(test_dir), acq, seed);
        return r;
    }
};

std::vector<double> parse_coefficients(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("mixture coefficient " + item + " outside [0, 1]");
            out.push_back(v);
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse mixture coefficient '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("--coeffs is empty");
    return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Test-time training for accelerated MRI reconstruction on synthetic phantoms", "tttrecon"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "tttrecon 0.1.0");

    std::string config_path;

    auto* gen = app.add_subcommand("gen-data", "Write the P and Q train/test phantom datasets");
    gen->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);

    std::string mode = "joint", dist = "P", train_out, history_out;
    auto* train_cmd = app.add_subcommand("train", "Train a U-Net on one distribution");
    train_cmd->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--mode", mode, "Training loss")
        ->check(CLI::IsMember({"supervised", "self", "joint"}))
        ->capture_default_str();
    train_cmd->add_option("--dist", dist, "Training distribution")->check(CLI::IsMember({"P", "Q"}))->capture_default_str();
    train_cmd->add_option("--out", train_out, "Checkpoint path (default <output_dir>/models/<mode>_<dist>.ksp)");
    train_cmd->add_option("--history", history_out, "History CSV path (default next to the checkpoint)");

    EvalOptions eval_opts;
    std::string eval_out;
    auto* eval_cmd = app.add_subcommand("ttt-eval", "Per-sample SSIM of a checkpoint on a test set");
    eval_opts.add_to(eval_cmd);
    eval_cmd->add_option("--out", eval_out, "CSV output (default stdout)");

    std::string qq, pq, qq_ttt, pq_ttt, gap_json, gap_csv;
    auto* gap = app.add_subcommand("gap-report", "Distribution-shift gap from four eval CSVs");
    gap->add_option("--qq", qq, "Train on Q, test on Q")->required()->check(CLI::ExistingFile);
    gap->add_option("--pq", pq, "Train on P, test on Q")->required()->check(CLI::ExistingFile);
    gap->add_option("--qq-ttt", qq_ttt, "Train on Q, test on Q, with TTT")->required()->check(CLI::ExistingFile);
    gap->add_option("--pq-ttt", pq_ttt, "Train on P, test on Q, with TTT")->required()->check(CLI::ExistingFile);
    gap->add_option("--json", gap_json, "Also write the report as JSON");
    gap->add_option("--csv", gap_csv, "Also write the report as a CSV row");

    std::string coeffs = "0,0.05,0.1,0.25,0.5,0.75,0.9,0.95,1.0", sweep_out;
    auto* sweep = app.add_subcommand("mixture-sweep", "Train on (1-m) P + m Q mixtures and score on P and Q");
    sweep->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    sweep->add_option("--coeffs", coeffs, "Comma-separated mixture coefficients")->capture_default_str();
    sweep->add_option("--out", sweep_out, "CSV output (default stdout)");

    subspace::TheoryOptions theory_opts;
    std::string theory_out;
    auto* theory = app.add_subcommand("theory", "Subspace denoising example: closed forms against Monte Carlo");
    theory->add_option("--n", theory_opts.n, "Ambient dimension")->capture_default_str();
    theory->add_option("--d", theory_opts.d, "Subspace dimension")->capture_default_str();
    theory->add_option("--sigma2", theory_opts.sigma2, "Noise variance under P")->capture_default_str();
    theory->add_option("--varsigma2", theory_opts.varsigma2, "Noise variance under Q")->capture_default_str();
    theory->add_option("--seeds", theory_opts.n_seeds, "Number of random subspaces")->capture_default_str();
    theory->add_option("--seed", theory_opts.seed, "Base seed")->capture_default_str();
    theory->add_option("--mc-draws", theory_opts.mc_draws, "Monte Carlo draws per seed")->capture_default_str();
    theory->add_option("--out", theory_out, "Curve CSV (alpha, expected_lss, monte_carlo_lss, risk_P, risk_Q)");

    EvalOptions export_opts;
    std::string export_dir;
    int export_limit = 0;
    auto* exp = app.add_subcommand("export-png-like", "Write reconstructions as 8-bit PGM images");
    export_opts.add_to(exp);
    exp->add_option("--out", export_dir, "Output directory")->required();
    exp->add_option("--limit", export_limit, "Export only the first N samples (0 = all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*gen) {
            const auto cfg = load_experiment_config(config_path);
            generate_data(cfg);
            write_text(cfg.output_dir / "config.json", to_json(cfg));
            out << "wrote " << cfg.n_train << " train and " << cfg.n_test << " test samples per distribution to "
                << (cfg.output_dir / "data").string() << "\n";
        } else if (*train_cmd) {
            const auto cfg = load_experiment_config(config_path);
            const auto d = parse_dist(dist);
            const auto m = parse_loss_mode(mode);
            const auto data = require_dataset(dataset_dir(cfg, d, false));
            const fs::path ckpt = train_out.empty() ? model_path(cfg, m, d) : fs::path(train_out);
            fs::path hist = history_out;
            if (hist.empty()) hist = fs::path(ckpt).replace_extension("").string() + "_history.csv";
            auto result = train(unet_init(cfg.model), data, cfg.train_config(d, m), [&](const EpochRecord& r) {
                err << "epoch " << r.epoch << "  l_sup " << r.l_sup << "  l_self " << r.l_self << "  val_ssim "
                    << r.val_ssim << "\n";
            });
            save_checkpoint(ckpt, result.best);
            write_text(hist, result.history.to_csv());
            out << "wrote " << ckpt.string() << " and " << hist.string() << "\n";
        } else if (*eval_cmd) {
            const auto r = eval_opts.resolve();
            const bool use_ttt = eval_opts.ttt == "on";
            const auto results = evaluate(r.model, r.measurements, use_ttt, r.ttt);
            std::vector<EvalRow> rows;
            for (const auto& res : results) {
                rows.push_back(res.row);
                if (use_ttt && !eval_opts.traces.empty()) {
                    write_text(fs::path(eval_opts.traces) / (res.row.id + "_trace.csv"), res.trace.to_csv());
                }
            }
            emit(eval_csv(rows), eval_out, out);
        } else if (*gap) {
            const auto report = gap_report_from_files(qq, pq, qq_ttt, pq_ttt);
            out << report.table();
            if (!gap_json.empty()) write_text(gap_json, report.to_json() + "\n");
            if (!gap_csv.empty()) write_text(gap_csv, GapReport::csv_header() + "\n" + report.csv_row() + "\n");
        } else if (*sweep) {
            const auto cfg = load_experiment_config(config_path);
            const auto list = parse_coefficients(coeffs);
            MixtureData data;
            data.train_p = load_split(cfg, DistId::P, false);
            data.train_q = load_split(cfg, DistId::Q, false);
            data.test_p = make_measurements(load_split(cfg, DistId::P, true), cfg.shift.p, cfg.test_mask_seed());
            data.test_q = make_measurements(load_split(cfg, DistId::Q, true), cfg.shift.q, cfg.test_mask_seed());
            const auto points = mixture_sweep(cfg, data, list, [&](double c, const ReconModel&) {
                err << "finished coefficient " << c << "\n";
            });
            emit(mixture_csv(points), sweep_out, out);
        } else if (*theory) {
            const auto report = subspace::run_theory(theory_opts);
            out << report.summary();
            if (!theory_out.empty()) write_text(theory_out, report.curve_csv());
        } else if (*exp) {
            const auto r = export_opts.resolve();
            auto measurements = r.measurements;
            if (export_limit > 0 && static_cast<std::size_t>(export_limit) < measurements.size()) {
                measurements.resize(static_cast<std::size_t>(export_limit));
            }
            const bool use_ttt = export_opts.ttt == "on";
            const auto results = evaluate(r.model, measurements, use_ttt, r.ttt);
            const std::string tag = use_ttt ? "ttt" : "recon";
            for (std::size_t i = 0; i < results.size(); ++i) {
                const auto& m = measurements[i];
                double range = ops::max_abs(*m.reference);
                if (!(range > 0.0)) range = 1.0;
                const fs::path dir = export_dir;
                write_pgm(dir / (m.id + "_" + tag + ".pgm"), results[i].image, range);
                write_pgm(dir / (m.id + "_reference.pgm"), *m.reference, range);
                write_pgm(dir / (m.id + "_zero_filled.pgm"), adjoint_zf(m.kspace, m.mask), range);
            }
            out << "wrote " << results.size() << " images to " << export_dir << "\n";
        }
    } catch (const Error& e) {
        err << "tttrecon: " << e.category() << " error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "tttrecon: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace ttt::cli

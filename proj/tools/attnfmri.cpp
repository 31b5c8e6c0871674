// Command-line front end: one subcommand per stage plus the full pipeline.

#include "attnfmri/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace {

using namespace attnfmri;

constexpr int exit_config = 2;
constexpr int exit_stage = 3;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
    bool verbose = false;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// A subcommand flag that sets one configuration key.
void key_option(CLI::App* sub, Globals& g, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&g, key](const std::string& v) { g.overrides.emplace_back(key, v); }, help + " [" + key + "]");
}

void key_flag(CLI::App* sub, Globals& g, const std::string& flag, const std::string& key, const std::string& value, const std::string& help) {
    sub->add_flag_callback(flag, [&g, key, value] { g.overrides.emplace_back(key, value); }, help + " [" + key + " = " + value + "]");
}

PipelineConfig load_config(const Globals& g) {
    PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : parse_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.out) cfg.out = *g.out;
    if (g.threads) cfg.threads = *g.threads;
    for (const auto& [k, v] : g.overrides) set_config_value(cfg, k, v);
    return cfg;
}

Cohort load_work_cohort(const PipelineConfig& cfg, const std::string& cohort_path) {
    return run_stage("ingest", [&] { return load_cohort_manifest(cohort_path.empty() ? (fs::path(cfg.out) / "cohort.json").string() : cohort_path); });
}

}

int main(int argc, char** argv) {
    CLI::App app{"Connectivity, attention and latent-space analysis of ROI time series"};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer("Configuration keys (key = default):\n" + config_help() + "\nExit codes: 0 success, 2 configuration error, 3 stage failure.");

    Globals g;
    app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { g.seed = v; }, "master seed [seed]");
    app.add_option_function<std::string>("--out", [&](const std::string& v) { g.out = v; }, "working/output directory [out]");
    app.add_option_function<int>("--threads", [&](const int& v) { g.threads = v; }, "worker threads [threads]");
    app.add_flag("-v,--verbose", g.verbose, "progress messages on stderr");

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort (BOLD CSVs and cohort.json)");
    key_option(synth_cmd, g, "--rois", "synth.rois", "ROIs per subject");
    key_option(synth_cmd, g, "--timepoints", "synth.timepoints", "timepoints per subject");
    std::optional<std::string> per_group;
    synth_cmd->add_option_function<std::string>("--subjects", [&](const std::string& v) { per_group = v; }, "subjects per group [synth.n_a, synth.n_b]");

    auto* fcn_cmd = app.add_subcommand("fcn", "build one adjacency matrix per subject");
    std::string cohort_path;
    bool embeddings = false;
    fcn_cmd->add_option("--cohort", cohort_path, "cohort manifest (default <out>/cohort.json)");
    key_option(fcn_cmd, g, "--method", "fcn.method", "pearson, fisher, pca, tsne or umap");
    key_option(fcn_cmd, g, "--mapper-intervals", "mapper.intervals", "cover intervals");
    key_option(fcn_cmd, g, "--overlap", "mapper.overlap", "interval overlap fraction");
    key_option(fcn_cmd, g, "--eps", "mapper.eps", "single-linkage cut, or auto");
    key_option(fcn_cmd, g, "--threshold", "fcn.threshold", "|correlation| cut");
    fcn_cmd->add_flag("--embeddings", embeddings, "also write 2-D embeddings as CSV");

    auto* train_cmd = app.add_subcommand("train", "cross-validate the attention classifier and extract attention matrices");
    train_cmd->add_option("--cohort", cohort_path, "cohort manifest (default <out>/cohort.json)");
    key_option(train_cmd, g, "--folds", "attn.folds", "cross-validation folds");
    key_option(train_cmd, g, "--heads", "attn.heads", "attention heads");
    key_option(train_cmd, g, "--dk", "attn.dk", "query/key width");
    key_option(train_cmd, g, "--dv", "attn.dv", "value width");
    key_option(train_cmd, g, "--dropout", "attn.dropout", "dropout probability");
    key_option(train_cmd, g, "--lr", "attn.lr", "learning rate");
    key_option(train_cmd, g, "--batch", "attn.batch", "minibatch size");
    key_option(train_cmd, g, "--epochs", "attn.epochs", "epochs");
    key_flag(train_cmd, g, "--paper-hparams", "attn.paper_hparams", "true", "128 heads, dropout 0.9");

    auto* features_cmd = app.add_subcommand("features", "per-group CV matrices and top ROI candidates");
    features_cmd->add_option("--cohort", cohort_path, "cohort manifest (default <out>/cohort.json)");
    key_option(features_cmd, g, "--agg", "features.agg", "mean or pooled");
    key_option(features_cmd, g, "--select", "features.select", "ranksum or intersection");
    key_option(features_cmd, g, "--q", "features.q", "fraction of ROIs kept");

    auto* lsirm_cmd = app.add_subcommand("lsirm", "fit the latent space model per group and select near-origin ROIs");
    lsirm_cmd->add_option("--cohort", cohort_path, "cohort manifest (default <out>/cohort.json)");
    key_option(lsirm_cmd, g, "--iters", "mcmc.iters", "MCMC iterations");
    key_option(lsirm_cmd, g, "--burnin", "mcmc.burnin", "burn-in iterations");
    key_option(lsirm_cmd, g, "--thin", "mcmc.thin", "thinning");
    key_option(lsirm_cmd, g, "--chains", "mcmc.chains", "independent chains");
    key_option(lsirm_cmd, g, "--dim", "mcmc.dim", "latent dimension");
    key_option(lsirm_cmd, g, "--tau-beta2", "lsirm.tau_beta2", "prior variance of subject effects");
    key_option(lsirm_cmd, g, "--a", "lsirm.a", "inverse-gamma shape for sigma2");
    key_option(lsirm_cmd, g, "--b", "lsirm.b", "inverse-gamma rate for sigma2");
    key_option(lsirm_cmd, g, "--a-sigma", "lsirm.a_sigma", "inverse-gamma shape for sigma_theta2");
    key_option(lsirm_cmd, g, "--b-sigma", "lsirm.b_sigma", "inverse-gamma rate for sigma_theta2");
    key_option(lsirm_cmd, g, "--jump-beta", "lsirm.jump_beta", "proposal sd, subject effects");
    key_option(lsirm_cmd, g, "--jump-theta", "lsirm.jump_theta", "proposal sd, ROI effects");
    key_option(lsirm_cmd, g, "--jump-u", "lsirm.jump_u", "proposal sd, ROI positions");
    key_option(lsirm_cmd, g, "--jump-v", "lsirm.jump_v", "proposal sd, subject positions");
    key_option(lsirm_cmd, g, "--radius-quantile", "lsirm.radius_quantile", "near-origin quantile");
    key_flag(lsirm_cmd, g, "--adapt-jumps", "mcmc.adapt_jumps", "true", "tune jump sizes during burn-in");
    key_flag(lsirm_cmd, g, "--no-rotate", "lsirm.rotate", "false", "skip the oblimin rotation");

    auto* summarize_cmd = app.add_subcommand("summarize", "group summary networks with ROI roles");
    summarize_cmd->add_option("--cohort", cohort_path, "cohort manifest (default <out>/cohort.json)");
    key_option(summarize_cmd, g, "--threshold", "summary.threshold", "edge cut on the mean adjacency");
    key_option(summarize_cmd, g, "--layout-seed", "summary.layout_seed", "SVG layout seed");
    std::string format = "all";
    summarize_cmd->add_option("--format", format, "dot, json, svg or all")->check(CLI::IsMember({"dot", "json", "svg", "all"}));

    auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage and write manifest.json");
    key_option(pipeline_cmd, g, "--input", "input.manifest", "cohort manifest to ingest instead of synthesizing");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    PipelineConfig cfg;
    try {
        cfg = load_config(g);
        if (per_group) {
            set_config_value(cfg, "synth.n_a", *per_group);
            set_config_value(cfg, "synth.n_b", *per_group);
        }
    } catch (const Error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config;
    }

    Logger log;
    if (g.verbose) log = [](const std::string& m) { std::cerr << m << "\n"; };
    ArtifactWriter w(cfg.out);

    try {
        if (*synth_cmd) {
            PipelineConfig c = cfg;
            c.input_manifest.clear();
            c.synth.enabled = true;
            stage_ingest(c, w, log);
        } else if (*fcn_cmd) {
            const Cohort cohort = load_work_cohort(cfg, cohort_path);
            stage_fcn(cfg, cohort, w, embeddings, log);
        } else if (*train_cmd) {
            const Cohort cohort = load_work_cohort(cfg, cohort_path);
            const auto adjs = run_stage("train", [&] { return load_fcn(cfg.out, cohort); });
            const auto out = stage_train(cfg, cohort, adjs, w, log);
            std::cout << "mean CV accuracy " << format_double(out.report.mean_accuracy) << "\n";
        } else if (*features_cmd) {
            const Cohort cohort = load_work_cohort(cfg, cohort_path);
            const auto attn = run_stage("features", [&] { return load_attention(cfg.out, cohort); });
            stage_features(cfg, cohort, attn, w, log);
        } else if (*lsirm_cmd) {
            const Cohort cohort = load_work_cohort(cfg, cohort_path);
            const auto feats = run_stage("lsirm", [&] { return load_features(cfg.out, cohort); });
            for (const auto& f : stage_lsirm(cfg, cohort, feats, w, log)) {
                std::cout << f.group << ": acceptance beta " << format_double(f.acceptance.beta) << " theta " << format_double(f.acceptance.theta) << " u " << format_double(f.acceptance.u) << " v " << format_double(f.acceptance.v) << "\n";
            }
        } else if (*summarize_cmd) {
            const Cohort cohort = load_work_cohort(cfg, cohort_path);
            require_two_groups(cohort);
            const auto adjs = run_stage("summarize", [&] { return load_fcn(cfg.out, cohort); });
            const auto feats = run_stage("summarize", [&] { return load_features(cfg.out, cohort); });
            std::vector<std::vector<int>> sig;
            run_stage("summarize", [&] {
                for (const auto& grp : cohort.groups) sig.push_back(load_near_origin(cfg.out, grp.label));
                return 0;
            });
            std::vector<summary::ExportFormat> formats;
            if (format == "all") {
                formats = {summary::ExportFormat::json, summary::ExportFormat::dot, summary::ExportFormat::svg};
            } else {
                formats = {summary::parse_export_format(format)};
            }
            stage_summarize(cfg, cohort, adjs, feats, sig, w, log, formats);
        } else if (*pipeline_cmd) {
            const auto rep = run_pipeline(cfg, log);
            std::cout << "mean CV accuracy " << format_double(rep.metrics["cv_mean_accuracy"].get<double>()) << "\n";
            std::cout << "manifest sha256 " << rep.manifest_sha256 << "\n";
        }
    } catch (const StageError& e) {
        std::cerr << e.what() << "\n";
        return exit_stage;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return exit_stage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_stage;
    }
    return 0;
}

#ifndef ATTNFMRI_CONFIG_HPP
#define ATTNFMRI_CONFIG_HPP

#include "attention/model.hpp"
#include "core.hpp"
#include "fcn.hpp"
#include "group_features.hpp"
#include "lsirm/mcmc.hpp"
#include "summary.hpp"
#include "synth.hpp"
#include "text.hpp"

#include <charconv>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

/**
 * @file config.hpp
 *
 * @brief Pipeline configuration as flat `key = value` lines.
 *
 * Blank lines and lines starting with `#` are ignored. Unknown keys,
 * malformed values and keys without a value are errors.
 */

namespace attnfmri {

struct SynthSettings {
    bool enabled = true;
    int rois = 20;
    int timepoints = 200;
    std::string group_a = "A";
    std::string group_b = "B";
    int n_a = 40;
    int n_b = 40;
    int blocks = 4;
    int differential_block = 1; ///< 1-based block whose pairs are weakened in group B.
    double coupling_strong = 0.9;
    double coupling_weak = 0.1;
    double noise_sd = 0.5;
    int smoothing_window = 5;
};

struct LsirmSettings {
    lsirm::LsirmHyper hyper;
    lsirm::McmcConfig mcmc;
    int chains = 1;
    bool rotate = true;           ///< Oblimin-rotate U_hat before near-origin selection.
    double radius_quantile = 0.5;
};

struct PipelineConfig {
    std::uint64_t seed = 20240501;
    std::string out = "out";
    int threads = 1;

    std::string input_manifest;
    SynthSettings synth;

    fcn::FcnOptions fcn;
    attention::AttnConfig attn;
    bool paper_hparams = false;

    double q = 0.25;
    features::Aggregation agg = features::Aggregation::mean;
    features::Selection select = features::Selection::ranksum;

    LsirmSettings lsirm;

    double summary_threshold = 0.2;
    std::uint64_t layout_seed = 0;
};

inline SynthSpec to_synth_spec(const SynthSettings& s, std::uint64_t seed) {
    SynthSpec spec;
    spec.rois = s.rois;
    spec.timepoints = s.timepoints;
    spec.groups = {{s.group_a, s.n_a}, {s.group_b, s.n_b}};
    if (s.blocks < 1 || s.blocks > s.rois) {
        throw Error(ErrorCode::InvalidSpec, "synth.blocks must be in 1..synth.rois");
    }
    spec.blocks = contiguous_blocks(s.rois, s.blocks);
    if (s.differential_block < 0 || s.differential_block > s.blocks) {
        throw Error(ErrorCode::InvalidSpec, "synth.differential_block must be in 0..synth.blocks");
    }
    if (s.differential_block > 0) {
        spec.differential_edges[s.group_b] = block_pairs(spec.blocks[static_cast<std::size_t>(s.differential_block - 1)]);
    }
    spec.coupling_strong = s.coupling_strong;
    spec.coupling_weak = s.coupling_weak;
    spec.noise_sd = s.noise_sd;
    spec.smoothing_window = s.smoothing_window;
    spec.seed = seed;
    return spec;
}

namespace config_detail {

inline std::string where(const std::string& key) { return "key '" + key + "'"; }

inline long long as_int(const std::string& key, const std::string& v) {
    auto x = parse_int(v);
    if (!x) throw Error(ErrorCode::TypeMismatch, where(key) + " expects an integer, got '" + v + "'");
    return *x;
}

inline int as_int32(const std::string& key, const std::string& v) {
    const long long x = as_int(key, v);
    if (x < INT32_MIN || x > INT32_MAX) throw Error(ErrorCode::TypeMismatch, where(key) + " is out of integer range");
    return static_cast<int>(x);
}

inline std::uint64_t as_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw Error(ErrorCode::TypeMismatch, where(key) + " expects a non-negative integer, got '" + v + "'");
    }
    return x;
}

inline double as_double(const std::string& key, const std::string& v) {
    auto x = parse_double(v);
    if (!x) throw Error(ErrorCode::TypeMismatch, where(key) + " expects a number, got '" + v + "'");
    return *x;
}

inline bool as_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw Error(ErrorCode::TypeMismatch, where(key) + " expects true or false, got '" + v + "'");
}

inline std::string as_choice(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    std::string list;
    for (const char* a : allowed) {
        if (v == a) return v;
        list += (list.empty() ? "" : ", ") + std::string(a);
    }
    throw Error(ErrorCode::TypeMismatch, where(key) + " expects one of {" + list + "}, got '" + v + "'");
}

inline std::string str(bool b) { return b ? "true" : "false"; }
inline std::string str(int v) { return std::to_string(v); }
inline std::string str(std::uint64_t v) { return std::to_string(v); }
inline std::string str(double v) { return format_double(v); }

}

struct ConfigKey {
    std::string key;
    std::string help;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

/**
 * Every accepted key, in the order they are written to the effective config.
 */
inline const std::vector<ConfigKey>& config_keys() {
    using namespace config_detail;
    using C = PipelineConfig;
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        auto add = [&](std::string key, std::string help, auto set, auto get) { k.push_back({std::move(key), std::move(help), set, get}); };
#define ATTNFMRI_INT(KEY, FIELD, HELP) add(KEY, HELP, [](C& c, const std::string& v) { c.FIELD = as_int32(KEY, v); }, [](const C& c) { return str(c.FIELD); })
#define ATTNFMRI_U64(KEY, FIELD, HELP) add(KEY, HELP, [](C& c, const std::string& v) { c.FIELD = as_u64(KEY, v); }, [](const C& c) { return str(c.FIELD); })
#define ATTNFMRI_DBL(KEY, FIELD, HELP) add(KEY, HELP, [](C& c, const std::string& v) { c.FIELD = as_double(KEY, v); }, [](const C& c) { return str(c.FIELD); })
#define ATTNFMRI_BOOL(KEY, FIELD, HELP) add(KEY, HELP, [](C& c, const std::string& v) { c.FIELD = as_bool(KEY, v); }, [](const C& c) { return str(c.FIELD); })
#define ATTNFMRI_STR(KEY, FIELD, HELP) add(KEY, HELP, [](C& c, const std::string& v) { c.FIELD = v; }, [](const C& c) { return c.FIELD; })

        ATTNFMRI_U64("seed", seed, "master seed; every stage seed is derived from it");
        ATTNFMRI_STR("out", out, "output directory");
        ATTNFMRI_INT("threads", threads, "worker threads for per-subject and per-fold work");

        ATTNFMRI_STR("input.manifest", input_manifest, "cohort manifest JSON to ingest instead of synthesizing");
        ATTNFMRI_BOOL("synth.enabled", synth.enabled, "generate a synthetic cohort when no input manifest is given");
        ATTNFMRI_INT("synth.rois", synth.rois, "ROIs per subject");
        ATTNFMRI_INT("synth.timepoints", synth.timepoints, "timepoints per subject");
        ATTNFMRI_STR("synth.group_a", synth.group_a, "label of the first group (class 0)");
        ATTNFMRI_STR("synth.group_b", synth.group_b, "label of the second group (class 1)");
        ATTNFMRI_INT("synth.n_a", synth.n_a, "subjects in the first group");
        ATTNFMRI_INT("synth.n_b", synth.n_b, "subjects in the second group");
        ATTNFMRI_INT("synth.blocks", synth.blocks, "contiguous ROI communities");
        ATTNFMRI_INT("synth.differential_block", synth.differential_block, "1-based community weakened in the second group, 0 for none");
        ATTNFMRI_DBL("synth.coupling_strong", synth.coupling_strong, "loading of a ROI on its community signal");
        ATTNFMRI_DBL("synth.coupling_weak", synth.coupling_weak, "loading inside the weakened community");
        ATTNFMRI_DBL("synth.noise_sd", synth.noise_sd, "independent noise standard deviation");
        ATTNFMRI_INT("synth.smoothing_window", synth.smoothing_window, "moving-average window of the community signals");

        add("fcn.method", "pearson, fisher, pca, tsne or umap", [](C& c, const std::string& v) { c.fcn.method = fcn::parse_fcn_method(as_choice("fcn.method", v, {"pearson", "fisher", "pca", "tsne", "umap"})); }, [](const C& c) { return std::string(fcn::to_string(c.fcn.method)); });
        ATTNFMRI_BOOL("fcn.standardize", fcn.standardize, "z-score each ROI signal before embedding");
        ATTNFMRI_DBL("fcn.threshold", fcn.threshold, "|correlation| cut for the correlation methods");
        add("fcn.correlation_path", "threshold or mapper", [](C& c, const std::string& v) { c.fcn.correlation_path = as_choice("fcn.correlation_path", v, {"threshold", "mapper"}) == "mapper" ? fcn::CorrelationPath::mapper : fcn::CorrelationPath::threshold; }, [](const C& c) { return std::string(c.fcn.correlation_path == fcn::CorrelationPath::mapper ? "mapper" : "threshold"); });
        add("mapper.lens", "first_axis or grid", [](C& c, const std::string& v) { c.fcn.mapper.lens = as_choice("mapper.lens", v, {"first_axis", "grid"}) == "grid" ? fcn::MapperLens::both_axes_grid : fcn::MapperLens::first_embedding_axis; }, [](const C& c) { return std::string(c.fcn.mapper.lens == fcn::MapperLens::both_axes_grid ? "grid" : "first_axis"); });
        ATTNFMRI_INT("mapper.intervals", fcn.mapper.n_intervals, "cover intervals per lens axis");
        ATTNFMRI_DBL("mapper.overlap", fcn.mapper.overlap_fraction, "overlap fraction of adjacent intervals");
        add("mapper.eps", "single-linkage cut distance, or auto for half the median pairwise distance", [](C& c, const std::string& v) { if (v == "auto") c.fcn.mapper.cluster_eps.reset(); else c.fcn.mapper.cluster_eps = as_double("mapper.eps", v); }, [](const C& c) { return c.fcn.mapper.cluster_eps ? str(*c.fcn.mapper.cluster_eps) : std::string("auto"); });
        ATTNFMRI_INT("mapper.min_cluster_size", fcn.mapper.min_cluster_size, "smallest cluster kept as a node");
        ATTNFMRI_DBL("tsne.perplexity", fcn.tsne.perplexity, "t-SNE perplexity");
        ATTNFMRI_INT("tsne.iters", fcn.tsne.n_iter, "t-SNE gradient iterations");
        ATTNFMRI_INT("umap.neighbors", fcn.umap.n_neighbors, "UMAP neighbourhood size");
        ATTNFMRI_DBL("umap.min_dist", fcn.umap.min_dist, "UMAP minimum embedded distance");
        ATTNFMRI_INT("umap.epochs", fcn.umap.n_epochs, "UMAP optimisation epochs");

        ATTNFMRI_INT("attn.heads", attn.n_heads, "attention heads");
        ATTNFMRI_INT("attn.dk", attn.d_k, "query/key width per head");
        ATTNFMRI_INT("attn.dv", attn.d_v, "value width per head");
        ATTNFMRI_DBL("attn.dropout", attn.dropout_rate, "dropout probability");
        ATTNFMRI_DBL("attn.lr", attn.lr, "Adam learning rate");
        ATTNFMRI_INT("attn.batch", attn.batch_size, "minibatch size");
        ATTNFMRI_INT("attn.epochs", attn.epochs, "training epochs");
        ATTNFMRI_INT("attn.folds", attn.folds, "cross-validation folds");
        ATTNFMRI_BOOL("attn.paper_hparams", paper_hparams, "use 128 heads and dropout 0.9");

        ATTNFMRI_DBL("features.q", q, "fraction of ROIs kept as candidates");
        add("features.agg", "mean or pooled", [](C& c, const std::string& v) { c.agg = as_choice("features.agg", v, {"mean", "pooled"}) == "pooled" ? features::Aggregation::pooled : features::Aggregation::mean; }, [](const C& c) { return std::string(c.agg == features::Aggregation::pooled ? "pooled" : "mean"); });
        add("features.select", "ranksum or intersection", [](C& c, const std::string& v) { c.select = as_choice("features.select", v, {"ranksum", "intersection"}) == "intersection" ? features::Selection::intersection : features::Selection::ranksum; }, [](const C& c) { return std::string(c.select == features::Selection::intersection ? "intersection" : "ranksum"); });

        ATTNFMRI_INT("mcmc.iters", lsirm.mcmc.n_iter, "MCMC iterations");
        ATTNFMRI_INT("mcmc.burnin", lsirm.mcmc.burn_in, "discarded iterations");
        ATTNFMRI_INT("mcmc.thin", lsirm.mcmc.thin, "keep every thin-th iteration after burn-in");
        ATTNFMRI_INT("mcmc.dim", lsirm.mcmc.dim, "latent dimension");
        ATTNFMRI_INT("mcmc.chains", lsirm.chains, "independent chains per group");
        ATTNFMRI_BOOL("mcmc.adapt_jumps", lsirm.mcmc.adapt_jumps, "tune jump sizes during burn-in");
        add("mcmc.variance_update", "gibbs or metropolis", [](C& c, const std::string& v) { c.lsirm.mcmc.variance_update = as_choice("mcmc.variance_update", v, {"gibbs", "metropolis"}) == "metropolis" ? lsirm::VarianceUpdate::metropolis : lsirm::VarianceUpdate::gibbs; }, [](const C& c) { return std::string(c.lsirm.mcmc.variance_update == lsirm::VarianceUpdate::metropolis ? "metropolis" : "gibbs"); });
        ATTNFMRI_DBL("lsirm.tau_beta2", lsirm.hyper.tau_beta2, "prior variance of subject effects");
        ATTNFMRI_DBL("lsirm.a", lsirm.hyper.a, "inverse-gamma shape for sigma2");
        ATTNFMRI_DBL("lsirm.b", lsirm.hyper.b, "inverse-gamma rate for sigma2");
        ATTNFMRI_DBL("lsirm.a_sigma", lsirm.hyper.a_sigma, "inverse-gamma shape for sigma_theta2");
        ATTNFMRI_DBL("lsirm.b_sigma", lsirm.hyper.b_sigma, "inverse-gamma rate for sigma_theta2");
        ATTNFMRI_DBL("lsirm.jump_beta", lsirm.hyper.jump_beta, "proposal sd for subject effects");
        ATTNFMRI_DBL("lsirm.jump_theta", lsirm.hyper.jump_theta, "proposal sd for ROI effects");
        ATTNFMRI_DBL("lsirm.jump_u", lsirm.hyper.jump_u, "proposal sd for ROI positions");
        ATTNFMRI_DBL("lsirm.jump_v", lsirm.hyper.jump_v, "proposal sd for subject positions");
        ATTNFMRI_BOOL("lsirm.rotate", lsirm.rotate, "oblimin-rotate ROI positions before selection");
        ATTNFMRI_DBL("lsirm.radius_quantile", lsirm.radius_quantile, "near-origin cut as a quantile of candidate norms");

        ATTNFMRI_DBL("summary.threshold", summary_threshold, "edge cut on the group mean adjacency");
        ATTNFMRI_U64("summary.layout_seed", layout_seed, "seed of the SVG force layout");
#undef ATTNFMRI_INT
#undef ATTNFMRI_U64
#undef ATTNFMRI_DBL
#undef ATTNFMRI_BOOL
#undef ATTNFMRI_STR
        return k;
    }();
    return keys;
}

inline void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys()) {
        if (k.key == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw Error(ErrorCode::UnknownKey, "unknown configuration key '" + key + "'");
}

inline std::string get_config_value(const PipelineConfig& cfg, const std::string& key) {
    for (const auto& k : config_keys()) {
        if (k.key == key) return k.get(cfg);
    }
    throw Error(ErrorCode::UnknownKey, "unknown configuration key '" + key + "'");
}

inline PipelineConfig parse_config_text(const std::string& content) {
    PipelineConfig cfg;
    std::istringstream in(content);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line(trim(raw));
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        const std::string key(trim(std::string_view(line).substr(0, eq)));
        if (key.empty()) {
            throw Error(ErrorCode::Format, "line " + std::to_string(line_no) + ": missing key");
        }
        std::string value = eq == std::string::npos ? "" : std::string(trim(std::string_view(line).substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        } else if (value.empty()) {
            // validate the key first so a typo is reported as such
            get_config_value(cfg, key);
            throw Error(ErrorCode::MissingRequired, "line " + std::to_string(line_no) + ": key '" + key + "' has no value");
        }
        set_config_value(cfg, key, value);
    }
    return cfg;
}

inline PipelineConfig parse_config(const std::string& path) {
    return parse_config_text(read_file(path));
}

/**
 * Every key with its effective value, one `key = value` per line.
 */
inline std::string config_line(const std::string& key, const std::string& value) {
    return key + " = " + (value.empty() ? std::string("\"\"") : value) + "\n";
}

inline std::string effective_config_text(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) {
        out += config_line(k.key, k.get(cfg));
    }
    return out;
}

/**
 * Stage-ready settings with the large-scale attention preset and derived seeds applied.
 */
inline attention::AttnConfig effective_attention(const PipelineConfig& cfg) {
    attention::AttnConfig a = cfg.attn;
    if (cfg.paper_hparams) {
        const auto p = attention::AttnConfig::large_scale();
        a.n_heads = p.n_heads;
        a.dropout_rate = p.dropout_rate;
        a.lr = p.lr;
        a.batch_size = p.batch_size;
        a.folds = p.folds;
    }
    return a;
}

inline std::string config_help() {
    const PipelineConfig defaults;
    std::string out;
    for (const auto& k : config_keys()) {
        out += "  " + config_line(k.key, k.get(defaults)) + "      " + k.help + "\n";
    }
    return out;
}

}

#endif

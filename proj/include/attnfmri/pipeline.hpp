#ifndef ATTNFMRI_PIPELINE_HPP
#define ATTNFMRI_PIPELINE_HPP

#include "attention/train.hpp"
#include "config.hpp"
#include "core.hpp"
#include "data_model.hpp"
#include "fcn.hpp"
#include "group_features.hpp"
#include "lsirm/mcmc.hpp"
#include "lsirm/oblimin.hpp"
#include "lsirm/select.hpp"
#include "parallel.hpp"
#include "summary.hpp"
#include "synth.hpp"
#include "text.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

/**
 * @file pipeline.hpp
 *
 * @brief Stage functions, their on-disk artifacts and the one-shot pipeline.
 *
 * All artifacts live under one working directory:
 *
 *     cohort.json                 subject_id, group and BOLD path per subject
 *     roi_labels.csv
 *     synth/bold/<id>.csv
 *     fcn/<id>.json               adjacency
 *     train/cv_report.json
 *     train/attention/<id>.json
 *     features/<g>_X.csv          subjects x ROIs coefficients of variation
 *     features/<g>_top_rois.json
 *     lsirm/<g>_chain_summary.csv
 *     lsirm/<g>_positions.csv
 *     lsirm/<g>_acceptance.json
 *     lsirm/<g>_near_origin.json
 *     summary/<g>.{json,dot,svg}
 *     effective_config.txt
 *     metrics.json
 *     manifest.json
 */

namespace attnfmri {

namespace fs = std::filesystem;

/**
 * Failure inside a named pipeline stage.
 */
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(ErrorCode::StageFailure, "stage '" + stage + "' failed: " + cause.what()), stage_(std::move(stage)), cause_(cause.code()) {}

    const std::string& stage() const { return stage_; }
    ErrorCode cause() const { return cause_; }

private:
    std::string stage_;
    ErrorCode cause_;
};

template <class F>
auto run_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    } catch (const nlohmann::json::exception& e) {
        throw StageError(stage, Error(ErrorCode::Format, e.what()));
    } catch (const fs::filesystem_error& e) {
        throw StageError(stage, Error(ErrorCode::Io, e.what()));
    }
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Io, "SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

/**
 * Writes files under a root directory and remembers their relative paths.
 */
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }

    void write(const std::string& rel, std::string_view content) {
        const fs::path p = root_ / rel;
        fs::create_directories(p.parent_path());
        write_file(p.string(), content);
        written_.push_back(rel);
    }

    void write_json(const std::string& rel, const nlohmann::json& j, int indent = 2) {
        write(rel, j.dump(indent) + "\n");
    }

    const std::vector<std::string>& written() const { return written_; }

private:
    fs::path root_;
    std::vector<std::string> written_;
};

// ---- cohort manifest ----

/**
 * `{"roi_labels": path|null, "subjects": [{"subject_id", "group", "path"}]}`.
 * Relative paths are resolved against the manifest's directory.
 */
inline Cohort load_cohort_manifest(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Format, "cohort manifest '" + path + "': " + e.what());
    }
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    try {
        std::shared_ptr<const RoiTable> table;
        if (j.contains("roi_labels") && !j["roi_labels"].is_null()) {
            table = std::make_shared<const RoiTable>(load_roi_labels(resolve(j["roi_labels"].get<std::string>()).string()));
        }
        Cohort c;
        for (const auto& s : j.at("subjects")) {
            const auto id = s.at("subject_id").get<std::string>();
            const auto group = s.at("group").get<std::string>();
            auto bold = load_bold_csv(resolve(s.at("path").get<std::string>()).string(), table, id, group);
            if (!table) {
                table = std::make_shared<const RoiTable>(RoiTable::default_for(static_cast<std::size_t>(bold.rois())));
                bold.roi_table = table;
            }
            CohortGroup* g = nullptr;
            for (auto& cg : c.groups) {
                if (cg.label == group) g = &cg;
            }
            if (!g) {
                c.groups.push_back({group, {}});
                g = &c.groups.back();
            }
            g->subjects.push_back(std::move(bold));
        }
        validate_cohort(c);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, "cohort manifest '" + path + "': " + e.what());
    }
}

inline nlohmann::json cohort_manifest_json(const Cohort& c, const std::map<std::string, std::string>& paths, const std::string& roi_labels) {
    nlohmann::json subjects = nlohmann::json::array();
    for (const auto& g : c.groups) {
        for (const auto& s : g.subjects) {
            subjects.push_back({{"subject_id", s.subject_id}, {"group", g.label}, {"path", paths.at(s.subject_id)}});
        }
    }
    return {{"roi_labels", roi_labels}, {"subjects", subjects}};
}

inline const RoiTable& cohort_table(const Cohort& c) {
    for (const auto& g : c.groups) {
        if (!g.subjects.empty() && g.subjects.front().roi_table) return *g.subjects.front().roi_table;
    }
    throw Error(ErrorCode::Format, "cohort has no subjects");
}

inline void require_two_groups(const Cohort& c) {
    if (c.groups.size() != 2) {
        throw Error(ErrorCode::InvalidConfig, "the pipeline needs exactly two groups, found " + std::to_string(c.groups.size()));
    }
}

inline std::vector<const BoldMatrix*> cohort_subjects(const Cohort& c) {
    std::vector<const BoldMatrix*> out;
    for (const auto& g : c.groups) {
        for (const auto& s : g.subjects) out.push_back(&s);
    }
    return out;
}

inline std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view stage) {
    return derive_seed(cfg.seed, stage);
}

using Logger = std::function<void(const std::string&)>;

inline void log_to(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

// ---- ingest ----

/**
 * Loads `cfg.input_manifest` or generates the synthetic cohort, and writes
 * the working-directory cohort manifest and ROI labels.
 */
inline Cohort stage_ingest(const PipelineConfig& cfg, ArtifactWriter& w, const Logger& log = {}) {
    return run_stage("ingest", [&] {
        Cohort cohort;
        std::map<std::string, std::string> paths;
        if (!cfg.input_manifest.empty()) {
            cohort = load_cohort_manifest(cfg.input_manifest);
            const nlohmann::json j = nlohmann::json::parse(read_file(cfg.input_manifest));
            const fs::path base = fs::absolute(fs::path(cfg.input_manifest)).parent_path();
            for (const auto& s : j.at("subjects")) {
                fs::path p = s.at("path").get<std::string>();
                if (!p.is_absolute()) p = base / p;
                paths[s.at("subject_id").get<std::string>()] = fs::relative(p, fs::absolute(w.root())).generic_string();
            }
        } else if (cfg.synth.enabled) {
            cohort = generate_cohort(to_synth_spec(cfg.synth, stage_seed(cfg, "synth")), cfg.threads);
            for (const auto& s : cohort_subjects(cohort)) {
                const std::string rel = "synth/bold/" + s->subject_id + ".csv";
                w.write(rel, write_bold_csv(*s));
                paths[s->subject_id] = rel;
            }
        } else {
            throw Error(ErrorCode::InvalidConfig, "no input.manifest given and synth.enabled is false");
        }
        require_two_groups(cohort);
        w.write("roi_labels.csv", write_roi_labels(cohort_table(cohort)));
        w.write_json("cohort.json", cohort_manifest_json(cohort, paths, "roi_labels.csv"));
        log_to(log, "ingest: " + std::to_string(cohort.size()) + " subjects, " + std::to_string(cohort_table(cohort).size()) + " ROIs");
        return cohort;
    });
}

// ---- fcn ----

inline std::string embedding_csv(const fcn::Embedding2D& e, const RoiTable& table) {
    std::string out = "roi,x,y\n";
    for (Eigen::Index j = 0; j < e.points.rows(); ++j) {
        out += table.name(static_cast<std::size_t>(j)) + "," + format_double(e.points(j, 0)) + "," + format_double(e.points(j, 1)) + "\n";
    }
    return out;
}

/**
 * One adjacency per subject in cohort order; per-subject seeds depend only
 * on the subject id.
 */
inline std::vector<FcnAdjacency> stage_fcn(const PipelineConfig& cfg, const Cohort& cohort, ArtifactWriter& w, bool write_embeddings = false, const Logger& log = {}) {
    return run_stage("fcn", [&] {
        const auto subjects = cohort_subjects(cohort);
        std::vector<fcn::FcnResult> results(subjects.size());
        const std::uint64_t seed = stage_seed(cfg, "fcn");
        parallel_for(subjects.size(), cfg.threads, [&](std::size_t i) {
            results[i] = fcn::build_fcn(*subjects[i], cfg.fcn, derive_seed(seed, subjects[i]->subject_id));
        });
        std::vector<FcnAdjacency> out;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            w.write("fcn/" + subjects[i]->subject_id + ".json", adjacency_to_json(results[i].adjacency).dump() + "\n");
            if (write_embeddings && results[i].embedding) {
                w.write("fcn/embedding/" + subjects[i]->subject_id + ".csv", embedding_csv(*results[i].embedding, cohort_table(cohort)));
            }
            out.push_back(std::move(results[i].adjacency));
        }
        log_to(log, "fcn: " + std::string(fcn::to_string(cfg.fcn.method)) + " for " + std::to_string(out.size()) + " subjects");
        return out;
    });
}

inline std::vector<FcnAdjacency> load_fcn(const fs::path& root, const Cohort& cohort) {
    std::vector<FcnAdjacency> out;
    for (const auto* s : cohort_subjects(cohort)) {
        out.push_back(adjacency_from_json(nlohmann::json::parse(read_file((root / "fcn" / (s->subject_id + ".json")).string()))));
    }
    return out;
}

// ---- train ----

struct TrainOutput {
    attention::CvReport report;
    std::vector<attention::AttentionMatrix> attention; ///< Cohort order, from a model fit on every subject.
};

inline std::vector<attention::Example> make_examples(const Cohort& cohort, const std::vector<FcnAdjacency>& adjs) {
    std::vector<attention::Example> data;
    std::size_t k = 0;
    for (std::size_t g = 0; g < cohort.groups.size(); ++g) {
        for (std::size_t s = 0; s < cohort.groups[g].subjects.size(); ++s) {
            data.push_back({adjs.at(k++), static_cast<int>(g)});
        }
    }
    if (k != adjs.size()) {
        throw Error(ErrorCode::DimensionMismatch, "adjacency count does not match the cohort");
    }
    return data;
}

inline TrainOutput stage_train(const PipelineConfig& cfg, const Cohort& cohort, const std::vector<FcnAdjacency>& adjs, ArtifactWriter& w, const Logger& log = {}) {
    return run_stage("train", [&] {
        require_two_groups(cohort);
        auto acfg = effective_attention(cfg);
        acfg.seed = stage_seed(cfg, "train");
        const auto data = make_examples(cohort, adjs);
        TrainOutput out;
        out.report = attention::cross_validate(data, acfg, cfg.threads);
        const auto fit = attention::train(data, acfg);
        for (const auto& e : data) out.attention.push_back(attention::extract_attention(fit.model, e.x));

        nlohmann::json report = attention::cv_report_to_json(out.report);
        report["groups"] = {cohort.groups[0].label, cohort.groups[1].label};
        w.write_json("train/cv_report.json", report);
        for (const auto& a : out.attention) {
            w.write("train/attention/" + a.subject_id + ".json", attention::attention_to_json(a).dump() + "\n");
        }
        log_to(log, "train: mean CV accuracy " + format_double(out.report.mean_accuracy));
        return out;
    });
}

inline std::vector<attention::AttentionMatrix> load_attention(const fs::path& root, const Cohort& cohort) {
    std::vector<attention::AttentionMatrix> out;
    for (const auto* s : cohort_subjects(cohort)) {
        out.push_back(attention::attention_from_json(nlohmann::json::parse(read_file((root / "train" / "attention" / (s->subject_id + ".json")).string()))));
    }
    return out;
}

// ---- features ----

struct GroupFeatures {
    features::GroupRepMatrix x;
    features::TopRoiSet top;
};

inline std::vector<GroupFeatures> stage_features(const PipelineConfig& cfg, const Cohort& cohort, const std::vector<attention::AttentionMatrix>& attn, ArtifactWriter& w, const Logger& log = {}) {
    return run_stage("features", [&] {
        const RoiTable& table = cohort_table(cohort);
        std::vector<GroupFeatures> out;
        std::size_t k = 0;
        for (const auto& g : cohort.groups) {
            std::vector<features::RoiStats> stats;
            std::vector<attention::AttentionMatrix> mats;
            for (std::size_t s = 0; s < g.subjects.size(); ++s, ++k) {
                stats.push_back(features::column_stats(attn.at(k)));
                mats.push_back(attn.at(k));
            }
            GroupFeatures gf;
            gf.x = features::build_group_matrix(g.label, stats);
            const auto agg = cfg.agg == features::Aggregation::mean ? features::aggregate_mean(stats) : features::aggregate_pooled(mats);
            gf.top = features::select_top(agg, cfg.q, cfg.select, g.label);
            w.write("features/" + g.label + "_X.csv", features::write_group_matrix_csv(gf.x, table));
            w.write_json("features/" + g.label + "_top_rois.json", features::top_rois_to_json(gf.top, &table, cfg.q));
            log_to(log, "features: " + g.label + " keeps " + std::to_string(gf.top.rois.size()) + " candidate ROIs");
            out.push_back(std::move(gf));
        }
        return out;
    });
}

inline std::vector<GroupFeatures> load_features(const fs::path& root, const Cohort& cohort) {
    std::vector<GroupFeatures> out;
    for (const auto& g : cohort.groups) {
        GroupFeatures gf;
        gf.x = features::parse_group_matrix_csv(read_file((root / "features" / (g.label + "_X.csv")).string()), g.label).matrix;
        gf.top = features::top_rois_from_json(nlohmann::json::parse(read_file((root / "features" / (g.label + "_top_rois.json")).string())));
        out.push_back(std::move(gf));
    }
    return out;
}

// ---- lsirm ----

struct GroupLsirm {
    std::string group;
    lsirm::PosteriorSummary posterior;
    lsirm::AcceptanceRates acceptance;
    double max_rhat = 1.0;
    Matrix positions; ///< Positions used for selection (rotated when enabled).
    std::vector<lsirm::NearOriginRoi> near_origin;
};

inline std::string chain_summary_csv(const lsirm::PosteriorSummary& s, const RoiTable& table, const std::vector<std::string>& subject_ids) {
    std::string out = "parameter,mean,sd\n";
    for (Eigen::Index j = 0; j < s.theta_mean.size(); ++j) {
        out += "theta[" + table.name(static_cast<std::size_t>(j)) + "]," + format_double(s.theta_mean[j]) + "," + format_double(s.theta_sd[j]) + "\n";
    }
    for (Eigen::Index i = 0; i < s.beta_mean.size(); ++i) {
        out += "beta[" + subject_ids.at(static_cast<std::size_t>(i)) + "]," + format_double(s.beta_mean[i]) + "," + format_double(s.beta_sd[i]) + "\n";
    }
    out += "sigma2," + format_double(s.sigma2_mean) + "," + format_double(s.sigma2_sd) + "\n";
    out += "sigma_theta2," + format_double(s.sigma_theta2_mean) + "," + format_double(s.sigma_theta2_sd) + "\n";
    return out;
}

inline std::string positions_csv(const Matrix& u, const RoiTable& table) {
    std::string out = "roi";
    static const char* axes[] = {"x", "y"};
    for (Eigen::Index k = 0; k < u.cols(); ++k) out += "," + (u.cols() == 2 ? std::string(axes[k]) : "dim" + std::to_string(k + 1));
    out += "\n";
    for (Eigen::Index j = 0; j < u.rows(); ++j) {
        out += table.name(static_cast<std::size_t>(j));
        for (Eigen::Index k = 0; k < u.cols(); ++k) out += "," + format_double(u(j, k));
        out += "\n";
    }
    return out;
}

inline GroupLsirm run_group_lsirm(const PipelineConfig& cfg, const GroupFeatures& gf, std::uint64_t seed) {
    auto mc = cfg.lsirm.mcmc;
    mc.seed = seed;
    const auto chains = lsirm::run_chains(gf.x.values, cfg.lsirm.hyper, mc, cfg.lsirm.chains, cfg.threads);
    GroupLsirm out;
    out.group = gf.x.group;
    out.posterior = lsirm::summarize_chain(chains.pooled);
    out.acceptance = chains.pooled.acceptance;
    out.max_rhat = chains.max_rhat;
    out.positions = out.posterior.positions.u;
    if (cfg.lsirm.rotate && out.positions.cols() >= 2) {
        out.positions = lsirm::oblimin_rotate(out.positions).rotated;
    }
    out.near_origin = lsirm::near_origin_rois(out.positions, gf.top, cfg.lsirm.radius_quantile);
    return out;
}

inline std::vector<GroupLsirm> stage_lsirm(const PipelineConfig& cfg, const Cohort& cohort, const std::vector<GroupFeatures>& feats, ArtifactWriter& w, const Logger& log = {}) {
    return run_stage("lsirm", [&] {
        const RoiTable& table = cohort_table(cohort);
        const std::uint64_t seed = stage_seed(cfg, "lsirm");
        std::vector<GroupLsirm> out;
        for (const auto& gf : feats) {
            auto res = run_group_lsirm(cfg, gf, derive_seed(seed, gf.x.group));
            const std::string g = gf.x.group;
            w.write("lsirm/" + g + "_chain_summary.csv", chain_summary_csv(res.posterior, table, gf.x.subject_ids));
            w.write("lsirm/" + g + "_positions.csv", positions_csv(res.positions, table));
            w.write_json("lsirm/" + g + "_acceptance.json",
                         {{"group", g},
                          {"beta", res.acceptance.beta},
                          {"theta", res.acceptance.theta},
                          {"u", res.acceptance.u},
                          {"v", res.acceptance.v},
                          {"sigma2", res.acceptance.sigma2},
                          {"sigma_theta2", res.acceptance.sigma_theta2},
                          {"max_rhat", res.max_rhat}});
            nlohmann::json rois = nlohmann::json::array(), names = nlohmann::json::array(), norms = nlohmann::json::array();
            for (const auto& n : res.near_origin) {
                rois.push_back(n.roi);
                names.push_back(table.name(static_cast<std::size_t>(n.roi - 1)));
                norms.push_back(n.norm);
            }
            w.write_json("lsirm/" + g + "_near_origin.json", {{"group", g}, {"rotated", cfg.lsirm.rotate}, {"radius_quantile", cfg.lsirm.radius_quantile}, {"rois", rois}, {"names", names}, {"norms", norms}});
            log_to(log, "lsirm: " + g + " near-origin ROIs " + std::to_string(res.near_origin.size()));
            out.push_back(std::move(res));
        }
        return out;
    });
}

inline std::vector<int> load_near_origin(const fs::path& root, const std::string& group) {
    return nlohmann::json::parse(read_file((root / "lsirm" / (group + "_near_origin.json")).string())).at("rois").get<std::vector<int>>();
}

// ---- summarize ----

inline std::vector<summary::SummaryFcn> stage_summarize(const PipelineConfig& cfg, const Cohort& cohort, const std::vector<FcnAdjacency>& adjs, const std::vector<GroupFeatures>& feats, const std::vector<std::vector<int>>& sig, ArtifactWriter& w, const Logger& log = {},
                                                         const std::vector<summary::ExportFormat>& formats = {summary::ExportFormat::json, summary::ExportFormat::dot, summary::ExportFormat::svg}) {
    return run_stage("summarize", [&] {
        require_two_groups(cohort);
        const RoiTable& table = cohort_table(cohort);
        std::vector<summary::SummaryFcn> out;
        std::size_t k = 0;
        for (std::size_t g = 0; g < 2; ++g) {
            const std::size_t h = 1 - g;
            std::vector<FcnAdjacency> group_adjs;
            for (std::size_t s = 0; s < cohort.groups[g].subjects.size(); ++s) group_adjs.push_back(adjs.at(k++));
            auto sfcn = summary::build_summary(cohort.groups[g].label, group_adjs, cfg.summary_threshold, sig.at(g), sig.at(h), feats.at(g).top.rois, feats.at(h).top.rois, table);
            const std::string base = "summary/" + sfcn.group;
            for (auto f : formats) {
                static const char* ext[] = {"dot", "json", "svg"};
                w.write(base + "." + ext[static_cast<int>(f)], summary::export_graph(sfcn, f, cfg.layout_seed));
            }
            std::size_t colored = 0;
            for (const auto& r : sfcn.roles) colored += summary::is_significant(r.role);
            log_to(log, "summarize: " + sfcn.group + " has " + std::to_string(colored) + " coloured ROIs");
            out.push_back(std::move(sfcn));
        }
        return out;
    });
}

// ---- manifest ----

inline nlohmann::json config_json(const PipelineConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& k : config_keys()) {
        if (k.key == "out" || k.key == "threads") continue;
        j[k.key] = k.get(cfg);
    }
    return j;
}

/**
 * Effective config without the run-location keys (`out`, `threads`), which
 * do not affect any result.
 */
inline std::string effective_config_file(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) {
        if (k.key == "out" || k.key == "threads") continue;
        out += config_line(k.key, k.get(cfg));
    }
    return out;
}

inline nlohmann::json file_hashes(const fs::path& root, std::vector<std::string> rels) {
    std::sort(rels.begin(), rels.end());
    rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
    nlohmann::json files = nlohmann::json::array();
    for (const auto& rel : rels) {
        const std::string content = read_file((root / rel).string());
        files.push_back({{"path", rel}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    }
    return files;
}

struct VerifyResult {
    std::vector<std::string> mismatched;
    std::vector<std::string> missing;
    bool ok() const { return mismatched.empty() && missing.empty(); }
};

/**
 * Re-hash every file listed in `root/manifest.json`.
 */
inline VerifyResult verify_manifest(const fs::path& root) {
    const auto m = nlohmann::json::parse(read_file((root / "manifest.json").string()));
    VerifyResult out;
    for (const auto& f : m.at("files")) {
        const auto rel = f.at("path").get<std::string>();
        const fs::path p = root / rel;
        if (!fs::exists(p)) {
            out.missing.push_back(rel);
        } else if (sha256_hex(read_file(p.string())) != f.at("sha256").get<std::string>()) {
            out.mismatched.push_back(rel);
        }
    }
    return out;
}

struct ManifestReport {
    nlohmann::json manifest;
    nlohmann::json metrics;
    std::string manifest_sha256;
};

/**
 * synth/ingest -> fcn -> train + extract -> features -> lsirm per group -> summarize.
 */
inline ManifestReport run_pipeline(const PipelineConfig& cfg, const Logger& log = {}) {
    const fs::path root = cfg.out;
    run_stage("setup", [&] {
        fs::create_directories(root);
        return 0;
    });
    ArtifactWriter w(root);
    w.write("effective_config.txt", effective_config_file(cfg));

    const Cohort cohort = stage_ingest(cfg, w, log);
    const auto adjs = stage_fcn(cfg, cohort, w, false, log);
    const auto trained = stage_train(cfg, cohort, adjs, w, log);
    const auto feats = stage_features(cfg, cohort, trained.attention, w, log);
    const auto fits = stage_lsirm(cfg, cohort, feats, w, log);
    std::vector<std::vector<int>> sig;
    for (const auto& f : fits) sig.push_back(lsirm::roi_indices(f.near_origin));
    const auto summaries = stage_summarize(cfg, cohort, adjs, feats, sig, w, log);

    ManifestReport rep;
    rep.metrics = {{"cv_mean_accuracy", trained.report.mean_accuracy}, {"cv_fold_accuracy", trained.report.fold_accuracy}, {"groups", nlohmann::json::array()}};
    for (std::size_t g = 0; g < fits.size(); ++g) {
        std::size_t colored = 0;
        for (const auto& r : summaries[g].roles) colored += summary::is_significant(r.role);
        rep.metrics["groups"].push_back({{"group", fits[g].group},
                                         {"candidate_rois", feats[g].top.rois},
                                         {"near_origin_rois", sig[g]},
                                         {"colored_rois", colored},
                                         {"acceptance", {{"beta", fits[g].acceptance.beta}, {"theta", fits[g].acceptance.theta}, {"u", fits[g].acceptance.u}, {"v", fits[g].acceptance.v}}},
                                         {"max_rhat", fits[g].max_rhat}});
    }
    w.write_json("metrics.json", rep.metrics);

    rep.manifest = {{"seed", cfg.seed}, {"config", config_json(cfg)}, {"files", file_hashes(root, w.written())}, {"metrics", rep.metrics}};
    const std::string text = rep.manifest.dump(2) + "\n";
    write_file((root / "manifest.json").string(), text);
    rep.manifest_sha256 = sha256_hex(text);
    log_to(log, "pipeline: manifest sha256 " + rep.manifest_sha256);
    return rep;
}

}

#endif

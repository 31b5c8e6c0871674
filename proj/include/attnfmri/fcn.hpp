#ifndef ATTNFMRI_FCN_HPP
#define ATTNFMRI_FCN_HPP

#include "core.hpp"
#include "data_model.hpp"
#include "fcn/correlation.hpp"
#include "fcn/mapper.hpp"
#include "fcn/pca.hpp"
#include "fcn/tsne.hpp"
#include "fcn/umap.hpp"

#include <optional>
#include <string>

namespace attnfmri::fcn {

enum class FcnMethod { pearson, fisher, pca, tsne, umap };

inline const char* to_string(FcnMethod m) {
    switch (m) {
        case FcnMethod::pearson: return "pearson";
        case FcnMethod::fisher: return "fisher";
        case FcnMethod::pca: return "pca";
        case FcnMethod::tsne: return "tsne";
        case FcnMethod::umap: return "umap";
    }
    return "unknown";
}

inline FcnMethod parse_fcn_method(const std::string& s) {
    if (s == "pearson") return FcnMethod::pearson;
    if (s == "fisher") return FcnMethod::fisher;
    if (s == "pca") return FcnMethod::pca;
    if (s == "tsne") return FcnMethod::tsne;
    if (s == "umap") return FcnMethod::umap;
    throw Error(ErrorCode::InvalidParams, "unknown FCN method '" + s + "'");
}

/**
 * Each row centred and scaled to unit sample standard deviation.
 * Throws `ZeroVarianceRow` for a constant row.
 */
inline Matrix standardize_rows(const Matrix& x) {
    Matrix out = x.colwise() - x.rowwise().mean();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double sd = std::sqrt(out.row(i).squaredNorm() / static_cast<double>(out.cols() - 1));
        if (!(sd > 0.0)) {
            throw Error(ErrorCode::ZeroVarianceRow, "ROI " + std::to_string(i + 1) + " has zero variance");
        }
        out.row(i) /= sd;
    }
    return out;
}

/// How correlation methods become an adjacency.
enum class CorrelationPath { threshold, mapper };

struct FcnOptions {
    FcnMethod method = FcnMethod::umap;

    /// z-score each ROI row before PCA/t-SNE/UMAP so distances track correlation.
    bool standardize = true;
    double threshold = 0.4;
    CorrelationPath correlation_path = CorrelationPath::threshold;
    MapperParams mapper;
    TsneParams tsne;
    UmapParams umap;
};

struct FcnResult {
    FcnAdjacency adjacency;
    std::optional<Embedding2D> embedding;
};

/**
 * One subject's FCN. Correlation methods are thresholded directly unless
 * `correlation_path` is `mapper`, in which case each ROI's correlation
 * profile is embedded by PCA and passed through Mapper. Embedding methods
 * always go through Mapper. `seed` overrides the t-SNE/UMAP seeds.
 */
inline FcnResult build_fcn(const BoldMatrix& b, const FcnOptions& opt, std::uint64_t seed) {
    FcnResult out;
    const Matrix signals = opt.standardize ? standardize_rows(b.values) : b.values;
    switch (opt.method) {
        case FcnMethod::pearson:
        case FcnMethod::fisher: {
            CorrMatrix c = pearson_matrix(b);
            if (opt.method == FcnMethod::fisher) {
                c = fisher_z(c);
            }
            if (opt.correlation_path == CorrelationPath::threshold) {
                out.adjacency = corr_to_adjacency(c, opt.threshold, b.subject_id);
                return out;
            }
            out.embedding = pca_embed(c.values);
            break;
        }
        case FcnMethod::pca:
            out.embedding = pca_embed(signals);
            break;
        case FcnMethod::tsne: {
            auto p = opt.tsne;
            p.seed = seed;
            out.embedding = tsne_embed(signals, p);
            break;
        }
        case FcnMethod::umap: {
            auto p = opt.umap;
            p.seed = seed;
            out.embedding = umap_embed(signals, p);
            break;
        }
    }
    out.adjacency = mapper_to_adjacency(mapper_fcn(*out.embedding, opt.mapper), b.rois(), b.subject_id);
    return out;
}

}

#endif

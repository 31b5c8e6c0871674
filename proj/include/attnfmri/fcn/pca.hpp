#ifndef ATTNFMRI_FCN_PCA_HPP
#define ATTNFMRI_FCN_PCA_HPP

#include "../core.hpp"
#include "../data_model.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace attnfmri::fcn {

enum class EmbedMethod { pca, tsne, umap };

inline const char* to_string(EmbedMethod m) {
    switch (m) {
        case EmbedMethod::pca: return "pca";
        case EmbedMethod::tsne: return "tsne";
        case EmbedMethod::umap: return "umap";
    }
    return "unknown";
}

/**
 * Two-dimensional coordinates, one row per ROI.
 */
struct Embedding2D {
    Matrix points; ///< R x 2.
    EmbedMethod method = EmbedMethod::pca;

    /// Set when the input had rank < 2 and the second axis was zero-filled.
    bool degenerate = false;
};

/**
 * PCA with ROIs as samples and timepoints as features.
 *
 * Each ROI row is centred over time, then each timepoint column is centred
 * across ROIs. Points are the projections onto the two leading right-singular
 * vectors, each signed so its largest-magnitude loading is positive.
 */
inline Embedding2D pca_embed(const Matrix& signals) {
    if (signals.rows() < 2 || signals.cols() < 2) {
        throw Error(ErrorCode::InvalidParams, "PCA needs at least 2 ROIs and 2 timepoints");
    }
    if (!signals.allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "PCA input contains non-finite values");
    }
    Matrix x = signals.colwise() - signals.rowwise().mean();
    x.rowwise() -= x.colwise().mean();

    Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Matrix loadings = svd.matrixV();

    Embedding2D out;
    out.method = EmbedMethod::pca;
    out.points = Matrix::Zero(x.rows(), 2);

    const double scale = std::max(s.size() ? s[0] : 0.0, x.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * std::max(scale, 1e-300);
    int rank = 0;
    for (Eigen::Index k = 0; k < s.size() && k < 2; ++k) {
        if (s[k] > tol) {
            ++rank;
        }
    }
    out.degenerate = rank < 2;

    for (int k = 0; k < rank; ++k) {
        Eigen::Index arg = 0;
        loadings.col(k).cwiseAbs().maxCoeff(&arg);
        if (loadings(arg, k) < 0) {
            loadings.col(k) *= -1.0;
        }
        out.points.col(k) = x * loadings.col(k);
    }
    return out;
}

inline Embedding2D pca_embed(const BoldMatrix& b) {
    return pca_embed(b.values);
}

}

#endif
